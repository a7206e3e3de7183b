import math

import numpy as np
import pytest
from scipy.special import sici

from sdm.errors import DegenerateParams, DomainError
from sdm.phase_space import CoherentOpSum, SDMParams
from sdm.propagator import (
    EvolvedChi,
    InitialMoments,
    OpSumChi,
    SteadyChi,
    chi_ss,
    chi_t,
    cin,
    log_chi_ss,
    mandel_q_formula,
    moment_probe,
    steady_stats,
    transient_moments,
)

DESK = SDMParams(xi_mag=0.5, n_ex=2.0, nbar=0.1)
EULER_GAMMA = 0.5772156649015329


def _cin_reference(u):
    # gamma + ln(u) - Ci(u), with Ci from the scipy sine/cosine integrals
    return EULER_GAMMA + np.log(u) - sici(u)[1]


def test_cin_at_zero_and_small():
    assert cin(0.0) == 0.0
    # leading term u^2/4 dominates for tiny arguments
    assert cin(1e-8) == pytest.approx(2.5e-17, rel=1e-6)


def test_cin_against_scipy_both_branches():
    us = np.concatenate([np.linspace(0.01, 7.99, 57),
                         np.array([8.0, 8.01, 9.0, 15.0, 33.0, 120.0, 1000.0])])
    got = cin(us)
    ref = _cin_reference(us)
    assert np.max(np.abs(got - ref)) < 5e-14


def test_cin_frozen_value():
    assert abs(cin(1.0) - 0.2398117420005647) < 1e-13


def test_cin_seam_is_continuous():
    # series below 8, continued fraction above; both branches evaluated at
    # the seam itself must agree to roundoff
    from sdm.propagator import _cin_series

    seam = np.array([8.0])
    assert abs(float(_cin_series(seam)[0]) - float(cin(8.0))) < 1e-12


def test_cin_shapes_and_domain():
    assert np.shape(cin(np.float64(2.0))) == ()
    out = cin(np.array([[0.5, 2.0], [9.0, 40.0]]))
    assert out.shape == (2, 2)
    with pytest.raises(DomainError):
        cin(-0.5)


def test_chi_ss_normalization_and_damping_axis():
    assert complex(chi_ss(0.0, DESK)) == pytest.approx(1.0)
    # along the damping axis (beta = -i*s) the pump term vanishes
    s = 0.8
    got = complex(chi_ss(-1j * s, DESK))
    assert got == pytest.approx(math.exp(-0.6 * s * s))


def test_chi_ss_visibility_value():
    got = complex(chi_ss(2 * DESK.xi, DESK))
    assert got == pytest.approx(0.5488116360940264, abs=1e-14)
    assert got == pytest.approx(math.exp(-2 * (2 * 0.1 + 1) * 0.25))


def test_log_chi_ss_is_even_in_the_pump_coordinate():
    beta = 0.73 + 0.21j
    flipped = -np.conj(beta)  # negates Re(beta) = the pump coordinate y
    assert complex(log_chi_ss(beta, DESK)) == pytest.approx(
        complex(log_chi_ss(flipped, DESK)))


def test_evolution_time_zero_is_identity():
    chi0 = OpSumChi(CoherentOpSum.pure([(1.0, 0.45 - 0.2j), (0.55, -0.35 + 0.3j)]))
    betas = [0.3, -0.6j, 0.5 + 0.8j]
    for b in betas:
        assert complex(chi_t(chi0, b, 0.0, DESK)) == pytest.approx(complex(chi0(b)))


def test_evolution_semigroup_property():
    chi0 = OpSumChi(CoherentOpSum.coherent(0.7 - 0.3j))
    two_step = EvolvedChi(EvolvedChi(chi0, 0.4, DESK), 0.9, DESK)
    one_step = EvolvedChi(chi0, 1.3, DESK)
    for b in (0.2, -0.5j, 0.6 + 0.4j, 1.1 - 0.9j):
        assert complex(two_step(b)) == pytest.approx(complex(one_step(b)), abs=1e-12)


def test_evolution_forgets_the_initial_state():
    # the memory of the start decays as exp(-gamma t / 2); at gamma t = 60
    # it is below 1e-13
    chi0 = OpSumChi(CoherentOpSum.coherent(1.2 + 0.5j))
    late = EvolvedChi(chi0, 60.0, DESK)
    for b in (0.3, 0.7j, -0.4 + 0.2j):
        assert complex(late(b)) == pytest.approx(complex(chi_ss(b, DESK)), abs=1e-12)


def test_steady_stats_desk_values():
    st = steady_stats(DESK)
    assert st.mean_a == 0.0
    assert st.mean_n == pytest.approx(0.6)
    assert st.var_x1 == pytest.approx(0.3)
    assert st.var_x2 == pytest.approx(0.8)
    assert st.var_n == pytest.approx(1.2725)
    assert st.mandel_q == pytest.approx(1.1208333333333336, abs=1e-14)
    # Fano factor is var/mean; exceeds the Mandel parameter by exactly 1
    assert st.fano == pytest.approx(st.mandel_q + 1.0, abs=1e-14)


def test_mandel_q_two_routes_agree():
    for p in (DESK, SDMParams(xi_mag=0.8, n_ex=5.0, nbar=0.0),
              SDMParams(xi_mag=0.2, n_ex=30.0, nbar=0.4)):
        st = steady_stats(p)
        assert mandel_q_formula(p) == pytest.approx(st.mandel_q, abs=1e-12)


def test_steady_stats_thermal_limit():
    st = steady_stats(SDMParams(xi_mag=0.0, n_ex=0.0, nbar=0.5))
    assert st.mean_n == pytest.approx(0.5)
    assert st.mandel_q == pytest.approx(0.5)


def test_steady_stats_degenerate():
    with pytest.raises(DegenerateParams):
        steady_stats(SDMParams(xi_mag=0.0, n_ex=0.0, nbar=0.0))


def test_transient_moments_formulas():
    amp = 0.8 - 0.4j
    initial = InitialMoments.from_opsum(CoherentOpSum.coherent(amp))
    assert initial.mean_a == pytest.approx(amp)
    assert initial.mean_n == pytest.approx(abs(amp) ** 2)
    t = np.array([0.0, 0.7, 3.0])
    out = transient_moments(initial, t, DESK)
    decay = np.exp(-0.5 * t)
    np.testing.assert_allclose(out.mean_a, amp * decay, rtol=1e-14)
    n_inf = 0.6
    np.testing.assert_allclose(
        out.mean_n, abs(amp) ** 2 * np.exp(-t) + n_inf * (1 - np.exp(-t)),
        rtol=1e-14)
    a2_inf = -2.0 * 0.25
    np.testing.assert_allclose(
        out.mean_a2, amp**2 * np.exp(-t) + a2_inf * (1 - np.exp(-t)),
        rtol=1e-14)


def test_transient_rejects_negative_time():
    initial = InitialMoments.from_opsum(CoherentOpSum.vacuum())
    with pytest.raises(DomainError):
        transient_moments(initial, -0.1, DESK)


def test_moment_probe_coherent_amplitude():
    amp = 0.37 - 0.52j
    chi = OpSumChi(CoherentOpSum.coherent(amp))
    assert moment_probe(chi, 0, 1) == pytest.approx(amp, abs=1e-10)
    assert moment_probe(chi, 0, 0) == pytest.approx(1.0, abs=1e-12)


def test_moment_probe_steady_symmetric_moments():
    chi = SteadyChi(DESK)
    # symmetric ordering adds 1/2 to the photon number
    assert moment_probe(chi, 1, 1) == pytest.approx(0.6 + 0.5, abs=1e-8)
    assert moment_probe(chi, 0, 1) == pytest.approx(0.0, abs=1e-10)
    # <a^2> has no ordering ambiguity; steady value is -n_ex xi_mag^2
    assert moment_probe(chi, 0, 2) == pytest.approx(-0.5, abs=1e-7)
    # fourth-order symmetric moment against the closed form
    assert moment_probe(chi, 2, 2) == pytest.approx(2.7325, abs=1e-5)


def test_moment_probe_order_cap():
    chi = SteadyChi(DESK)
    with pytest.raises(DomainError):
        moment_probe(chi, 3, 2)
