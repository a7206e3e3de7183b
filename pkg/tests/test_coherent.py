import math

import numpy as np
import pytest

from sdm.coherent import (
    atom_pass_detected,
    atom_pass_unobserved,
    atomic_reduced_state,
    detection_records,
    ensemble_average,
    mean_photon,
    multi_atom_unobserved,
    opsum_coeff_delta,
    sequential_click_probability,
    wigner_closed_form,
    wigner_opsum,
)
from sdm.errors import DegenerateOutcome, OverflowGuard
from sdm.phase_space import CoherentOpSum, SDMParams, charfn_opsum

P1 = SDMParams(xi_mag=1.0)


def test_unobserved_pass_is_even_mixture():
    out = atom_pass_unobserved(CoherentOpSum.vacuum(), P1)
    assert out.trace() == pytest.approx(1.0)
    assert out.is_hermitian()
    kets = sorted(k.imag for k, _, _ in out.merged().terms)
    assert kets == pytest.approx([-1.0, 1.0])


@pytest.mark.parametrize("m,expected_terms", [(1, 2), (2, 3), (3, 4)])
def test_multi_atom_mixture_size(m, expected_terms):
    out = multi_atom_unobserved(m, P1)
    assert len(out.merged().terms) == expected_terms
    assert out.trace() == pytest.approx(1.0)


def test_multi_atom_mean_photon_is_random_walk():
    # independent +-xi kicks: <n> after m transits is m*xi_mag^2
    for m in (1, 2, 3, 5):
        assert mean_photon(multi_atom_unobserved(m, P1)) == pytest.approx(float(m))
    p_small = SDMParams(xi_mag=0.3)
    assert mean_photon(multi_atom_unobserved(4, p_small)) == pytest.approx(4 * 0.09)


def test_multi_atom_guard():
    with pytest.raises(OverflowGuard):
        multi_atom_unobserved(65, P1)


def test_detected_pass_probabilities_sum_to_one():
    _, p_e = atom_pass_detected(CoherentOpSum.vacuum(), "e", P1)
    _, p_g = atom_pass_detected(CoherentOpSum.vacuum(), "g", P1)
    assert p_e == pytest.approx((1 + math.exp(-2.0)) / 2)
    assert p_g == pytest.approx((1 - math.exp(-2.0)) / 2)
    assert p_e + p_g == pytest.approx(1.0)


def test_detected_states_are_normalized_cats():
    for outcome, sign in (("e", +1.0), ("g", -1.0)):
        state, _ = atom_pass_detected(CoherentOpSum.vacuum(), outcome, P1)
        assert state.trace() == pytest.approx(1.0)
        assert state.is_hermitian()
        assert wigner_opsum(state, 0.0) == pytest.approx(sign * 2.0)


def test_detection_on_dead_branch_raises():
    # xi_mag = 0 leaves the field untouched, so a 'g' click cannot happen
    with pytest.raises(DegenerateOutcome):
        atom_pass_detected(CoherentOpSum.vacuum(), "g", SDMParams(xi_mag=0.0))


def test_wigner_closed_form_matches_dyads_one_atom():
    alphas = np.array([0.0, 0.3 - 0.7j, -1.2j, 0.5 + 1.5j, 2.0j])
    for outcome in ("e", "g"):
        state, _ = atom_pass_detected(CoherentOpSum.vacuum(), outcome, P1)
        direct = np.array([wigner_opsum(state, a) for a in alphas])
        closed = wigner_closed_form(outcome, alphas, P1)
        np.testing.assert_allclose(closed, direct, rtol=0, atol=1e-13)


def test_wigner_closed_form_matches_dyads_two_atoms():
    alphas = np.array([0.1 + 0.2j, -0.4j, 1.1j, 0.6 - 1.3j])
    for pattern in ("ee", "gg", "eg", "ge"):
        state = CoherentOpSum.vacuum()
        for outcome in pattern:
            state, _ = atom_pass_detected(state, outcome, P1)
        direct = np.array([wigner_opsum(state, a) for a in alphas])
        closed = wigner_closed_form(pattern, alphas, P1)
        np.testing.assert_allclose(closed, direct, rtol=0, atol=1e-13)


def test_wigner_closed_form_mixture():
    alphas = np.array([0.0, 0.2 + 0.4j, -1.0j])
    for m in (1, 2, 3):
        state = multi_atom_unobserved(m, P1)
        direct = np.array([wigner_opsum(state, a) for a in alphas])
        closed = wigner_closed_form("mixture", alphas, P1, m=m)
        np.testing.assert_allclose(closed, direct, rtol=0, atol=1e-13)
    # two-transit mixture at the origin: 1 + exp(-8 xi^2)
    got = wigner_closed_form("mixture", 0.0, P1, m=2)
    assert got == pytest.approx(1 + math.exp(-8.0))


def test_wigner_closed_form_survives_large_displacement():
    # naive cosh overflows near exp(4*xi*y) for xi*y ~ hundreds
    p = SDMParams(xi_mag=math.pi)
    vals = wigner_closed_form("e", np.array([-40.0j, 40.0j]), p)
    assert np.all(np.isfinite(vals))


def test_detection_tree_probabilities_and_average():
    records = detection_records(3, P1)
    total = sum(rec.probability for rec, _ in records)
    assert total == pytest.approx(1.0, abs=1e-12)
    avg = ensemble_average(records)
    unread = multi_atom_unobserved(3, P1)
    assert opsum_coeff_delta(avg, unread) < 1e-12


def test_sequential_click_probability_chain_rule():
    records = detection_records(2, P1)
    by_pattern = {"".join(rec.outcomes): rec.probability for rec, _ in records}
    for pattern, prob in by_pattern.items():
        assert sequential_click_probability(tuple(pattern), P1) == pytest.approx(prob)


def test_atomic_reduced_state_vacuum():
    def chi_vac(beta):
        return np.exp(-0.5 * np.abs(np.asarray(beta, dtype=complex)) ** 2)

    atom = atomic_reduced_state(chi_vac, P1)
    atom.audit()
    assert atom.p_e == pytest.approx((1 + math.exp(-2.0)) / 2)
    assert atom.p_e + atom.p_g == pytest.approx(1.0)
    # real chi leaves no atomic coherence
    assert abs(atom.matrix[0, 1]) < 1e-15


def test_charfn_of_cat_carries_interference():
    state, _ = atom_pass_detected(CoherentOpSum.vacuum(), "e", P1)
    # chi at beta = 2 xi reads the coherence between the two branches
    val = charfn_opsum(state, 2 * P1.xi)
    assert abs(val.imag) < 1e-15
    assert val.real > 0
