"""Independent number-basis engine for cross-validating the analytic results.

Everything here works on truncated density matrices in the Fock basis and
deliberately shares no formulas with the characteristic-function modules:
displacement matrices come from associated Laguerre polynomials, dynamics
from direct integration of the generator, and observables from operator
traces.  Agreement between the two engines is the package's main internal
consistency check, so this module must stay independent.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import (
    DegenerateParams,
    DegenerateOutcome,
    DomainError,
    NegativityWarning,
    NonRealError,
    StepFailure,
    TruncationError,
)
from .phase_space import SDMParams
from .propagator import FieldStats


def default_dim(params: SDMParams) -> int:
    """Heuristic truncation dimension for the pumped, damped cavity.

    Covers the maximal coherent excursion xi_mag (2 + 2 n_ex) plus three
    thermal standard deviations, squared; clamped to [16, 400].
    """
    reach = params.xi_mag * (2.0 + 2.0 * params.n_ex) + 3.0 * math.sqrt(
        params.nbar + 1.0
    )
    return int(min(400, max(16, math.ceil(reach * reach))))


def displacement_matrix(alpha: complex, dim: int, audit: bool = True) -> np.ndarray:
    """<m| D(alpha) |n> on the truncated basis, built diagonal by diagonal.

    For m >= n the entry is sqrt(n!/m!) alpha^(m-n) e^(-|alpha|^2/2)
    L_n^(m-n)(|alpha|^2); the upper triangle follows from D(alpha)^dag =
    D(-alpha).  When dim >= (4 |alpha|)^2 a unitarity audit checks
    D^dag D against the identity on a lower block and raises
    TruncationError on failure; smaller bases skip the check since
    truncation error is then expected and visible to the caller.

    The audited block stops short of the truncation edge: the column for
    |n> holds a displaced number state whose photon distribution reaches
    n + |alpha|^2 plus about 6 standard deviations of width
    |alpha| sqrt(2n+1), and columns closer to the edge than that lose
    tail mass even when every retained entry is exact.  Auditing them
    would measure truncation, not correctness.  The block is therefore
    the largest size (capped at 80% of dim) whose reach stays inside the
    basis; if no column qualifies the basis is too cramped to certify and
    the audit fails outright.
    """
    if dim < 1:
        raise DomainError(f"dim must be >= 1, got {dim}")
    alpha = complex(alpha)
    x = abs(alpha) ** 2
    envelope = math.exp(-0.5 * x)
    out = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        n = np.arange(dim - k)
        lag = eval_genlaguerre(n, k, x)
        coeff = np.exp(0.5 * (gammaln(n + 1) - gammaln(n + k + 1))) * envelope * lag
        lower = coeff * alpha ** k
        out[n + k, n] = lower
        if k > 0:
            upper = coeff * (-np.conjugate(alpha)) ** k
            out[n, n + k] = upper
    if audit and dim >= (4.0 * abs(alpha)) ** 2:
        block = 0
        for b in range(int(math.floor(0.8 * dim)), 0, -1):
            top = b - 1
            reach = top + x + 6.0 * abs(alpha) * math.sqrt(2.0 * top + 1.0) + 4.0
            if reach <= dim:
                block = b
                break
        if block < 1:
            raise TruncationError(
                f"basis of dim {dim} cannot certify any displaced column at "
                f"|alpha| = {abs(alpha):.3f}; enlarge the basis"
            )
        gram = out.conj().T @ out
        defect = np.abs(gram[:block, :block] - np.eye(block)).max()
        if defect > 1e-8:
            raise TruncationError(
                f"displacement matrix fails unitarity audit: defect {defect:.3e} "
                f"on block {block} at dim {dim}, |alpha| = {abs(alpha):.3f}"
            )
    return out


@dataclass(frozen=True)
class FockDensityMatrix:
    """Density matrix on the truncated number basis."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DomainError(f"density matrix must be square, got {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.data)).copy()

    def tail_mass(self) -> float:
        """Population in the top 10% of the basis (truncation sentinel)."""
        start = int(math.floor(0.9 * self.dim))
        return float(np.sum(self.populations()[start:]))

    def audit(self, tail_tol: float = 1e-8) -> None:
        herm = np.abs(self.data - self.data.conj().T).max()
        if herm > 1e-10:
            raise NonRealError(f"density matrix Hermiticity defect {herm:.3e}")
        if abs(self.trace() - 1.0) > 1e-8:
            raise StepFailure(f"density matrix trace {self.trace()} drifted from 1")
        tail = self.tail_mass()
        if tail > tail_tol:
            raise TruncationError(
                f"tail mass {tail:.3e} exceeds {tail_tol:.1e}; basis too small"
            )


def vacuum_fock(dim: int) -> FockDensityMatrix:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return FockDensityMatrix(rho)


def thermal_fock(nbar: float, dim: int) -> FockDensityMatrix:
    """Geometric occupation nbar^n / (1 + nbar)^(n+1) down the diagonal.

    Renormalized over the retained basis so the state invariant trace = 1
    holds at any dim; a cramped basis then shows up as tail mass in
    audit(), not as a trace defect.
    """
    if nbar < 0.0:
        raise DomainError(f"nbar must be >= 0, got {nbar}")
    n = np.arange(dim, dtype=float)
    if nbar == 0.0:
        return vacuum_fock(dim)
    diag = np.exp(n * math.log(nbar) - (n + 1.0) * math.log1p(nbar))
    diag /= diag.sum()
    return FockDensityMatrix(np.diag(diag.astype(complex)))


def coherent_vector(alpha: complex, dim: int) -> np.ndarray:
    """Number-basis amplitudes of |alpha>, built by stable recursion."""
    alpha = complex(alpha)
    v = np.zeros(dim, dtype=complex)
    v[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, dim):
        v[n] = v[n - 1] * alpha / math.sqrt(n)
    return v


def coherent_fock(alpha: complex, dim: int) -> FockDensityMatrix:
    v = coherent_vector(alpha, dim)
    return FockDensityMatrix(np.outer(v, v.conj()))


def opsum_to_fock(opsum, dim: int) -> FockDensityMatrix:
    """Embed a coherent dyad sum into the truncated number basis."""
    rho = np.zeros((dim, dim), dtype=complex)
    for k, b, c in opsum.terms:
        rho += c * np.outer(coherent_vector(k, dim), coherent_vector(b, dim).conj())
    return FockDensityMatrix(rho)


# ---------------------------------------------------------------------------
# generator and integration


def _pump_unitaries(params: SDMParams, dim: int) -> tuple[np.ndarray, np.ndarray]:
    # the audit gates every pumped evolution and click map on this basis
    dp = displacement_matrix(params.xi, dim)
    dm = dp.conj().T
    return dp, dm


def lindblad_rhs(
    rho: np.ndarray, params: SDMParams, dp: np.ndarray, dm: np.ndarray
) -> np.ndarray:
    """Generator of the damped, pumped evolution applied to rho.

    Loss at gamma (nbar + 1) and thermal feeding at gamma nbar act through
    index shifts; the pump adds rate r = n_ex gamma times the average of the
    two conditional displacements minus the identity.
    """
    dim = rho.shape[0]
    g = params.gamma
    nbar = params.nbar
    n = np.arange(dim, dtype=float)
    s = np.sqrt(n[1:])  # s[m] = sqrt(m + 1) for m = 0..dim-2

    out = np.zeros_like(rho)

    # a rho a^dag and the {a^dag a, rho} anticommutator
    down = np.zeros_like(rho)
    down[:-1, :-1] = (s[:, None] * s[None, :]) * rho[1:, 1:]
    out += g * (nbar + 1.0) * (down - 0.5 * ((n[:, None] + n[None, :]) * rho))

    if nbar > 0.0:
        up = np.zeros_like(rho)
        up[1:, 1:] = (s[:, None] * s[None, :]) * rho[:-1, :-1]
        out += g * nbar * (up - 0.5 * ((n[:, None] + n[None, :] + 2.0) * rho))

    r = params.pump_rate
    if r > 0.0:
        out += r * (0.5 * (dp @ rho @ dm + dm @ rho @ dp) - rho)
    return out


_RKF_C2, _RKF_C3, _RKF_C4, _RKF_C5, _RKF_C6 = 0.25, 0.375, 12 / 13, 1.0, 0.5
_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -0.2, 0.0)
_ERR = (1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55)


def _rkf45_span(
    rhs, y: np.ndarray, t_span: float, rtol: float, atol: float, trace0: float
) -> np.ndarray:
    """Integrate y' = rhs(y) over t_span with the Fehlberg 4(5) pair.

    Propagates the fourth-order solution, hermitizes after every accepted
    step, and enforces trace conservation against trace0 to 1e-9.
    """
    if t_span <= 0.0:
        return y
    t = 0.0
    h = t_span / 1000.0
    steps = 0
    while t < t_span:
        if steps > 200000:
            raise StepFailure("integrator exceeded 200000 steps")
        h = min(h, t_span - t)
        if h < 1e-14 * t_span:
            raise StepFailure("integrator step size underflow")
        k1 = rhs(y)
        k2 = rhs(y + h * (0.25 * k1))
        k3 = rhs(y + h * ((3 / 32) * k1 + (9 / 32) * k2))
        k4 = rhs(y + h * ((1932 / 2197) * k1 - (7200 / 2197) * k2 + (7296 / 2197) * k3))
        k5 = rhs(
            y + h * ((439 / 216) * k1 - 8.0 * k2 + (3680 / 513) * k3 - (845 / 4104) * k4)
        )
        k6 = rhs(
            y
            + h
            * (
                (-8 / 27) * k1
                + 2.0 * k2
                - (3544 / 2565) * k3
                + (1859 / 4104) * k4
                - (11 / 40) * k5
            )
        )
        err = h * (
            _ERR[0] * k1 + _ERR[2] * k3 + _ERR[3] * k4 + _ERR[4] * k5 + _ERR[5] * k6
        )
        scale = atol + rtol * float(np.abs(y).max())
        err_norm = float(np.abs(err).max()) / scale
        if err_norm <= 1.0:
            y = y + h * (
                _B4[0] * k1 + _B4[2] * k3 + _B4[3] * k4 + _B4[4] * k5
            )
            y = 0.5 * (y + y.conj().T)
            t += h
            steps += 1
            drift = abs(float(np.trace(y).real) - trace0)
            if drift > 1e-9:
                raise StepFailure(f"trace drifted by {drift:.3e} during integration")
        factor = 5.0 if err_norm == 0.0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
        h = h * factor
    return y


def evolve_fock(
    state: FockDensityMatrix,
    times,
    params: SDMParams,
    rtol: float = 1e-8,
    atol: float = 1e-12,
) -> list[FockDensityMatrix]:
    """Integrate the generator from state through the given time milestones.

    times must be nondecreasing and nonnegative; one density matrix is
    returned per milestone (t = 0 returns the input unchanged).
    """
    t_list = [float(t) for t in np.atleast_1d(np.asarray(times, dtype=float))]
    if any(t < 0.0 for t in t_list):
        raise DomainError("times must be >= 0")
    if any(b < a for a, b in zip(t_list, t_list[1:])):
        raise DomainError("times must be nondecreasing")
    dim = state.dim
    dp, dm = _pump_unitaries(params, dim)

    def rhs(y):
        return lindblad_rhs(y, params, dp, dm)

    trace0 = state.trace()
    y = state.data.copy()
    out = []
    t_now = 0.0
    for t_target in t_list:
        y = _rkf45_span(rhs, y, t_target - t_now, rtol, atol, trace0)
        t_now = t_target
        out.append(FockDensityMatrix(y.copy()))
    return out


def steady_fock(
    params: SDMParams,
    dim: int,
    residual_tol: float = 1e-10,
    rtol: float = 1e-8,
    atol: float = 1e-12,
) -> FockDensityMatrix:
    """Relax from the thermal state until the generator residual vanishes.

    Integrates in chunks of 5 cavity lifetimes until max |rhs| falls below
    residual_tol * gamma, giving up past 200 lifetimes.  The step tolerance
    is tightened as the residual shrinks: with a fixed tolerance the
    integrator's own local error floors the residual near rtol over step
    size, well above residual_tol.
    """
    dp, dm = _pump_unitaries(params, dim)

    def rhs(y):
        return lindblad_rhs(y, params, dp, dm)

    state = thermal_fock(params.nbar, dim)
    trace0 = state.trace()
    y = state.data.copy()
    lifetime = 1.0 / params.gamma
    elapsed = 0.0
    rtol_now, atol_now = rtol, atol
    while True:
        residual = float(np.abs(rhs(y)).max())
        if residual < residual_tol * params.gamma:
            return FockDensityMatrix(y)
        if elapsed >= 200.0 * lifetime:
            raise StepFailure(
                f"no steady state within 200 lifetimes (residual {residual:.3e})"
            )
        y = _rkf45_span(rhs, y, 5.0 * lifetime, rtol_now, atol_now, trace0)
        elapsed += 5.0 * lifetime
        rtol_now = max(1e-13, min(rtol_now, 1e-4 * residual / params.gamma))
        atol_now = max(1e-16, 1e-4 * rtol_now)


# ---------------------------------------------------------------------------
# observables


def _ladder(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(1, dim)
    a[idx - 1, idx] = np.sqrt(idx)
    return a


def oracle_stats(state: FockDensityMatrix) -> FieldStats:
    """Field statistics by direct operator traces on the number basis."""
    rho = state.data
    dim = state.dim
    p = state.populations()
    n = np.arange(dim, dtype=float)
    mean_n = float(np.sum(p * n))
    var_n = float(np.sum(p * n * n)) - mean_n ** 2

    a = _ladder(dim)
    mean_a = complex(np.trace(rho @ a))
    mean_adag = np.conjugate(mean_a)
    mean_a2 = complex(np.trace(rho @ (a @ a)))
    # <x1^2> etc. via normal-ordered pieces: x1 = (a + a^dag)/2
    mean_x1 = 0.5 * (mean_a + mean_adag).real
    mean_x2 = (0.5j * (mean_adag - mean_a)).real
    sq_x1 = 0.25 * (2.0 * mean_n + 1.0 + 2.0 * mean_a2.real + 0.0)
    sq_x2 = 0.25 * (2.0 * mean_n + 1.0 - 2.0 * mean_a2.real)
    var_x1 = sq_x1 - mean_x1 ** 2
    var_x2 = sq_x2 - mean_x2 ** 2
    if mean_n < 1e-14:
        raise DegenerateParams("mean photon number vanishes; Q and F undefined")
    fano = var_n / mean_n
    return FieldStats(
        mean_a=mean_a,
        mean_n=mean_n,
        var_n=var_n,
        var_x1=var_x1,
        var_x2=var_x2,
        mandel_q=fano - 1.0,
        fano=fano,
    )


def oracle_moments(state: FockDensityMatrix) -> tuple[complex, float, complex]:
    """(<a>, <n>, <a^2>) without the vacuum guard of oracle_stats."""
    rho = state.data
    a = _ladder(state.dim)
    mean_a = complex(np.trace(rho @ a))
    mean_n = float(np.sum(state.populations() * np.arange(state.dim)))
    mean_a2 = complex(np.trace(rho @ (a @ a)))
    return mean_a, mean_n, mean_a2


def oracle_charfn(state: FockDensityMatrix, beta) -> np.ndarray:
    """chi(beta) = Tr[rho D(beta)] from explicit displacement matrices."""
    beta_arr = np.atleast_1d(np.asarray(beta, dtype=complex))
    rho_t = state.data.T
    out = np.empty(beta_arr.shape, dtype=complex)
    flat = beta_arr.ravel()
    for i, b in enumerate(flat):
        d = displacement_matrix(b, state.dim, audit=False)
        out.ravel()[i] = np.sum(rho_t * d)
    scalar = np.asarray(beta).shape == ()
    return complex(out.ravel()[0]) if scalar else out


def oracle_wigner(state: FockDensityMatrix, alpha) -> np.ndarray:
    """W(alpha) = 2 Tr[D(-alpha) rho D(alpha) P] with parity P = (-1)^n."""
    alpha_arr = np.atleast_1d(np.asarray(alpha, dtype=complex))
    parity = np.where(np.arange(state.dim) % 2 == 0, 1.0, -1.0)
    out = np.empty(alpha_arr.shape, dtype=float)
    flat = alpha_arr.ravel()
    for i, al in enumerate(flat):
        dmin = displacement_matrix(-al, state.dim, audit=False)
        moved = dmin @ state.data @ dmin.conj().T
        val = 2.0 * np.sum(parity * np.real(np.diag(moved)))
        imag = 2.0 * abs(np.sum(parity * np.imag(np.diag(moved))))
        if imag > 1e-8:
            raise NonRealError(f"Wigner value kept imaginary part {imag:.3e}")
        out.ravel()[i] = val
    scalar = np.asarray(alpha).shape == ()
    return float(out.ravel()[0]) if scalar else out


@dataclass(frozen=True)
class PhaseDistribution:
    """Phase density over theta in [-pi, pi), uniform grid."""

    theta: np.ndarray
    density: np.ndarray

    @property
    def bin_width(self) -> float:
        return float(self.theta[1] - self.theta[0])

    def normalization(self) -> float:
        # periodic uniform grid: the Riemann sum is the exact integral for
        # band-limited densities
        return float(np.sum(self.density) * self.bin_width)

    def symmetry_defect(self) -> float:
        """max |P(theta) - P(-theta)| on the grid."""
        n = len(self.theta)
        mirrored = self.density[(-np.arange(n)) % n]
        return float(np.max(np.abs(self.density - mirrored)))


def pegg_barnett(state: FockDensityMatrix, n_theta: int = 256) -> PhaseDistribution:
    """Phase density P(theta) = <theta| rho |theta> / (2 pi), |theta> = sum e^(i n theta) |n>.

    n_theta must exceed twice the basis size so the uniform grid resolves
    every coherence.  Warns (NegativityWarning) if the density dips below
    -1e-6, which signals truncation damage.
    """
    if n_theta < 2 * state.dim:
        raise DomainError(
            f"n_theta = {n_theta} cannot resolve dim = {state.dim} coherences"
        )
    theta = -np.pi + 2.0 * np.pi * np.arange(n_theta) / n_theta
    v = np.exp(1j * np.outer(theta, np.arange(state.dim)))
    half = v.conj() @ state.data
    density = np.real(np.einsum("tn,tn->t", half, v)) / (2.0 * np.pi)
    if density.min() < -1e-6:
        warnings.warn(
            f"phase density reaches {density.min():.3e}",
            NegativityWarning,
            stacklevel=2,
        )
    return PhaseDistribution(theta=theta, density=density)


def oracle_click(
    state: FockDensityMatrix, outcome: str, params: SDMParams
) -> tuple[FockDensityMatrix, float]:
    """Condition on one detected transit, in the number basis.

    The field Kraus operator for outcome e (g) is (D(xi) +- D(-xi))/2; the
    click probability is the trace of the conditioned numerator.
    """
    if outcome not in ("e", "g"):
        raise DomainError(f"outcome must be 'e' or 'g', got {outcome!r}")
    sign = 1.0 if outcome == "e" else -1.0
    dp, dm = _pump_unitaries(params, state.dim)
    kraus = 0.5 * (dp + sign * dm)
    numerator = kraus @ state.data @ kraus.conj().T
    p = float(np.trace(numerator).real)
    if p < 1e-14:
        raise DegenerateOutcome(f"outcome {outcome!r} has probability {p:.3e}")
    return FockDensityMatrix(numerator / p), p


def unobserved_pass_fock(
    state: FockDensityMatrix, params: SDMParams
) -> FockDensityMatrix:
    """One unread transit: rho -> (D(xi) rho D(-xi) + D(-xi) rho D(xi))/2."""
    dp, dm = _pump_unitaries(params, state.dim)
    rho = 0.5 * (dp @ state.data @ dm + dm @ state.data @ dp)
    return FockDensityMatrix(rho)
