"""Atom transits without cavity damping: kicked states and detected cats.

Between reservoir events, each two-level atom crossing the cavity applies the
conditional displacement U = D(xi)|+><+| + D(-xi)|-><-| to the field.  With
the atom unobserved the field suffers a random +-xi kick; detecting the atom
in |e> or |g> projects the field onto symmetric or antisymmetric coherent
superpositions.  Everything here is exact dyad algebra on CoherentOpSum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateOutcome,
    DomainError,
    NonRealError,
    OverflowGuard,
)
from .phase_space import (
    CoherentOpSum,
    SDMParams,
    coherent_overlap,
    displace_opsum,
)

MAX_ATOMS = 64


def atom_pass_unobserved(state: CoherentOpSum, params: SDMParams) -> CoherentOpSum:
    """One unread atom transit: rho -> (D(xi) rho D(-xi) + D(-xi) rho D(xi))/2."""
    xi = params.xi
    kicked = (
        displace_opsum(state, xi, -xi) + displace_opsum(state, -xi, xi)
    ).scaled(0.5)
    return kicked.merged()


def multi_atom_unobserved(m: int, params: SDMParams) -> CoherentOpSum:
    """Field state after m unread transits starting from vacuum.

    The +-xi kicks commute, so the state is the binomial mixture
    2^-m sum_n C(m, n) |(m-2n) xi><(m-2n) xi|.
    """
    if m < 0 or m != int(m):
        raise DomainError(f"atom count must be a non-negative integer, got {m}")
    if m > MAX_ATOMS:
        raise OverflowGuard(f"m = {m} exceeds the exact binomial guard ({MAX_ATOMS})")
    xi = params.xi
    weight = 0.5 ** m
    terms = []
    for n in range(int(m) + 1):
        amp = (m - 2 * n) * xi
        terms.append((amp, amp, weight * math.comb(int(m), n)))
    return CoherentOpSum.from_terms(terms)


def atom_pass_detected(
    state: CoherentOpSum, outcome: str, params: SDMParams
) -> tuple[CoherentOpSum, float]:
    """Condition one transit on the atomic readout.

    For outcome 'e' ('g') the field is projected by D(xi) + D(-xi)
    (D(xi) - D(-xi)), normalized by the outcome probability
    p = (1 +- Re chi(2 xi))/2.  state must have unit trace.  Returns the
    normalized conditional state and p.
    """
    if outcome not in ("e", "g"):
        raise DomainError(f"outcome must be 'e' or 'g', got {outcome!r}")
    sign = +1 if outcome == "e" else -1
    xi = params.xi
    numerator = (
        displace_opsum(state, xi, xi)
        + displace_opsum(state, xi, -xi).scaled(sign)
        + displace_opsum(state, -xi, xi).scaled(sign)
        + displace_opsum(state, -xi, -xi)
    ).merged()
    trace = numerator.trace()
    if abs(trace.imag) > 1e-10 * max(1.0, abs(trace)):
        raise NonRealError(f"conditional trace {trace} is not real")
    probability = sign * trace.real / 4.0
    if probability < 1e-14:
        raise DegenerateOutcome(
            f"outcome {outcome!r} has probability {probability:.3e}"
        )
    return numerator.scaled(1.0 / trace.real), probability


def mean_photon(state: CoherentOpSum) -> float:
    """<a^dag a> of a unit-trace Hermitian dyad sum, exactly."""
    value = state.expect_normal(1, 1)
    if abs(value.imag) > 1e-10 * max(1.0, abs(value)):
        raise NonRealError(f"mean photon number {value} is not real")
    return float(value.real)


def wigner_opsum(state: CoherentOpSum, alpha):
    """Exact Wigner function of a dyad sum.

    Each dyad contributes 2 c <b|k> exp(2 (b^* - alpha^*)(alpha - k)); the
    sum is real for Hermitian input (audited).
    """
    alpha = np.asarray(alpha, dtype=complex)
    out = np.zeros(alpha.shape, dtype=complex)
    for k, b, c in state.terms:
        out += (2.0 * c * coherent_overlap(b, k)) * np.exp(
            2.0 * (np.conjugate(b) - np.conjugate(alpha)) * (alpha - k)
        )
    scale = max(1.0, float(np.max(np.abs(out))) if out.size else 1.0)
    if float(np.max(np.abs(out.imag))) > 1e-8 * scale:
        raise NonRealError("Wigner values are not real; operator is not Hermitian")
    real = np.real(out)
    return real if real.shape else float(real)


def _gauss_cosh(r2, arg):
    """exp(-2 r2) * cosh(arg), evaluated in log space to dodge overflow."""
    return 0.5 * (np.exp(-2.0 * r2 + arg) + np.exp(-2.0 * r2 - arg))


def wigner_closed_form(kind: str, alpha, params: SDMParams, m: int | None = None):
    """Closed-form Wigner functions of the kicked and detected states.

    kind = 'mixture' (requires m) gives the m-transit unread mixture; 'e'
    and 'g' the one-atom conditional states; 'ee', 'eg', 'ge', 'gg' the
    two-atom conditional states ('ge' and 'eg' coincide).  Normalization
    follows (1/pi) int W d^2alpha = 1, so W(0) = 2 for the vacuum.
    """
    xm = params.xi_mag
    alpha = np.asarray(alpha, dtype=complex)
    x = alpha.real
    y = alpha.imag
    r2 = x * x + y * y

    if kind == "mixture":
        if m is None:
            raise DomainError("kind='mixture' requires the atom count m")
        if m < 0:
            raise DomainError(f"atom count must be >= 0, got {m}")
        if m > MAX_ATOMS:
            raise OverflowGuard(f"m = {m} exceeds the exact binomial guard ({MAX_ATOMS})")
        out = np.zeros(alpha.shape)
        for n in range(int(m) + 1):
            centre = (m - 2 * n) * xm
            out += math.comb(int(m), n) * np.exp(-2.0 * (x * x + (y + centre) ** 2))
        out *= 2.0 ** (1 - m)
        return out if out.shape else float(out)

    e2 = math.exp(-2.0 * xm * xm)
    e8 = math.exp(-8.0 * xm * xm)
    if kind in ("e", "g"):
        sign = +1.0 if kind == "e" else -1.0
        denom = 1.0 + sign * e2
        if denom < 1e-300:
            raise DegenerateOutcome(f"outcome {kind!r} impossible at xi_mag = {xm}")
        out = 2.0 * (
            e2 * _gauss_cosh(r2, 4.0 * xm * y)
            + sign * np.exp(-2.0 * r2) * np.cos(4.0 * xm * x)
        ) / denom
        return out if out.shape else float(out)

    if kind in ("ee", "gg"):
        sign = +1.0 if kind == "ee" else -1.0
        denom = 3.0 + sign * 4.0 * e2 + e8
        out = 2.0 * (
            2.0 * np.exp(-2.0 * r2)
            + e8 * _gauss_cosh(r2, 8.0 * xm * y)
            + sign * 4.0 * e2 * _gauss_cosh(r2, 4.0 * xm * y) * np.cos(4.0 * xm * x)
            + np.exp(-2.0 * r2) * np.cos(8.0 * xm * x)
        ) / denom
        return out if out.shape else float(out)

    if kind in ("eg", "ge"):
        denom = 1.0 - e8
        if denom < 1e-300:
            raise DegenerateOutcome(f"outcome {kind!r} impossible at xi_mag = {xm}")
        out = 2.0 * (
            e8 * _gauss_cosh(r2, 8.0 * xm * y)
            - np.exp(-2.0 * r2) * np.cos(8.0 * xm * x)
        ) / denom
        return out if out.shape else float(out)

    raise DomainError(f"unknown Wigner kind {kind!r}")


@dataclass(frozen=True)
class AtomicState2x2:
    """Reduced atom density matrix in the {|e>, |g>} basis."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (2, 2):
            raise DomainError(f"atomic state must be 2x2, got {mat.shape}")
        object.__setattr__(self, "matrix", mat)

    def audit(self) -> None:
        mat = self.matrix
        if abs(np.trace(mat) - 1.0) > 1e-12:
            raise DomainError(f"atomic state trace {np.trace(mat)} != 1")
        if np.max(np.abs(mat - mat.conj().T)) > 1e-12:
            raise NonRealError("atomic state is not Hermitian")
        if np.min(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))) < -1e-12:
            raise DomainError("atomic state is not positive semidefinite")

    @property
    def p_e(self) -> float:
        return float(self.matrix[0, 0].real)

    @property
    def p_g(self) -> float:
        return float(self.matrix[1, 1].real)


def atomic_reduced_state(chi, params: SDMParams) -> AtomicState2x2:
    """Atom state after one transit through a field with characteristic fn chi.

    rho_A = (1/2)[ 1 + Re chi(2 xi) (|e><e| - |g><g|)
                     + i Im chi(2 xi) (|g><e| - |e><g|) ].
    """
    value = complex(np.asarray(chi(np.array([2.0 * params.xi], dtype=complex)))[0])
    re, im = value.real, value.imag
    mat = 0.5 * np.array(
        [[1.0 + re, -1j * im], [1j * im, 1.0 - re]], dtype=complex
    )
    state = AtomicState2x2(mat)
    state.audit()
    return state


@dataclass(frozen=True)
class DetectionRecord:
    """A sequence of atomic readouts and its joint probability."""

    outcomes: tuple[str, ...]
    probability: float


def detection_records(
    m: int, params: SDMParams
) -> list[tuple[DetectionRecord, CoherentOpSum]]:
    """All 2^m detection branches for m atoms sent through the vacuum field.

    Each entry pairs the record (outcome string, joint probability) with the
    normalized conditional field state.  Joint probabilities sum to one and
    their weighted state average reproduces multi_atom_unobserved(m).
    """
    if m < 0:
        raise DomainError(f"atom count must be >= 0, got {m}")
    if m > MAX_ATOMS:
        raise OverflowGuard(f"m = {m} exceeds the exact binomial guard ({MAX_ATOMS})")
    results = []
    for outcomes in itertools.product("eg", repeat=int(m)):
        state = CoherentOpSum.vacuum()
        joint = 1.0
        try:
            for outcome in outcomes:
                state, p = atom_pass_detected(state, outcome, params)
                joint *= p
        except DegenerateOutcome:
            continue
        results.append((DetectionRecord(outcomes, joint), state))
    return results


def opsum_coeff_delta(a: CoherentOpSum, b: CoherentOpSum) -> float:
    """Largest coefficient of the merged difference a - b (dyad-by-dyad)."""
    diff = (a + b.scaled(-1.0)).merged()
    if not diff.terms:
        return 0.0
    return max(abs(c) for _, _, c in diff.terms)


def ensemble_average(records: list[tuple[DetectionRecord, CoherentOpSum]]) -> CoherentOpSum:
    """Probability-weighted mixture over detection branches."""
    total = CoherentOpSum(())
    for record, state in records:
        total = total + state.scaled(record.probability)
    return total.merged()


def sequential_click_probability(outcomes: tuple[str, ...], params: SDMParams) -> float:
    """Joint probability of a readout sequence on the vacuum field."""
    state = CoherentOpSum.vacuum()
    joint = 1.0
    for outcome in outcomes:
        state, p = atom_pass_detected(state, outcome, params)
        joint *= p
    return joint
