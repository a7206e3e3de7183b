"""Analytic open-system propagation in the characteristic-function picture.

With atoms injected at rate r = n_ex * gamma and the cavity damped at rate
gamma into a reservoir of occupation nbar, the characteristic function obeys
a first-order flow that is exactly solvable along the gain coordinates
x = -Im(beta), y = Re(beta):

    chi_t(beta) = exp(lss(beta) - lss(beta * E)) * chi_0(beta * E),
    E = exp(-gamma t / 2),

where lss = log chi_ss is the steady-state log characteristic function

    log chi_ss = -(nbar + 1/2) (x^2 + y^2) - 2 n_ex cin(2 xi_mag |y|)

and cin(u) = int_0^u (1 - cos z)/z dz.  The solution is an exact semigroup:
evolving by t1 then t2 equals evolving by t1 + t2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateParams, DomainError, StepFailure
from .phase_space import SDMParams, charfn_opsum, gain_coords

_EULER_GAMMA = 0.5772156649015329

# series/continued-fraction crossover for cin; both sides are accurate to
# ~1e-14 relative at u = 8
_CIN_SPLIT = 8.0


def _cin_series(u: np.ndarray) -> np.ndarray:
    """sum_{k>=1} (-1)^{k+1} u^{2k} / (2k (2k)!), converged for u < 8."""
    u2 = u * u
    # track t_k = u^{2k}/(2k)! and accumulate (-1)^{k+1} t_k/(2k)
    t = u2 / 2.0
    acc = t / 2.0
    sign = -1.0
    for k in range(2, 40):
        t = t * u2 / ((2 * k - 1) * (2 * k))
        term = sign * t / (2 * k)
        acc = acc + term
        sign = -sign
        if np.all(np.abs(term) <= 1e-18 * (1.0 + np.abs(acc))):
            break
    else:
        raise StepFailure("cin series failed to converge below u = 8")
    return acc


def _cosine_integral_cf(u: np.ndarray) -> np.ndarray:
    """Ci(u) for u >= 8 from the continued fraction of E1(i u).

    E1(i u) = -Ci(u) + i (Si(u) - pi/2); the Lentz-evaluated continued
    fraction E1(z) = e^{-z} / (z + 1/(1 + 1/(z + 2/(1 + ...)))) converges in
    a few dozen terms for |z| >= 8.
    """
    z = 1j * u
    b = z + 1.0
    c = np.full(u.shape, 1e300, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 200):
        a = -float(i * i)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h = h * delta
        # one ulp of headroom: |delta - 1| cannot robustly drop below eps
        if np.all(np.abs(delta - 1.0) < 5e-16):
            break
    else:
        raise StepFailure("continued fraction for Ci failed to converge")
    e1 = h * np.exp(-z)
    return -e1.real


def cin(u):
    """Entire cosine integral cin(u) = int_0^u (1 - cos z)/z dz, u >= 0.

    Power series below u = 8, continued fraction for the classical Ci above
    (cin = euler_gamma + log u - Ci).  Accepts scalars or arrays; relative
    accuracy ~1e-13 across the seam.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("cin is defined here for u >= 0 only")
    flat = np.atleast_1d(arr).astype(float).ravel()
    out = np.zeros_like(flat)
    small = flat < _CIN_SPLIT
    if np.any(small):
        out[small] = _cin_series(flat[small])
    large = ~small
    if np.any(large):
        ul = flat[large]
        out[large] = _EULER_GAMMA + np.log(ul) - _cosine_integral_cf(ul)
    return out.reshape(arr.shape) if arr.shape else float(out[0])


def log_chi_ss(beta, params: SDMParams):
    """log of the steady-state characteristic function (exact, real)."""
    x, y = gain_coords(np.asarray(beta, dtype=complex))
    quad = (params.nbar + 0.5) * (x * x + y * y)
    pump = 2.0 * params.n_ex * cin(2.0 * params.xi_mag * np.abs(y))
    return -(quad + pump)


def chi_ss(beta, params: SDMParams):
    """Steady-state characteristic function chi_ss(beta)."""
    beta = np.asarray(beta, dtype=complex)
    out = np.exp(log_chi_ss(beta, params))
    return out if out.shape else float(out)


def chi_t(chi_initial, beta, t: float, params: SDMParams):
    """Characteristic function after damped, pumped evolution for time t.

    chi_initial is any callable on complex arrays (the chi of the state at
    t = 0).  The decay factor is formed as exp(log chi_ss(beta) -
    log chi_ss(beta E)), which is exact and free of 0/0 hazards at large
    |beta| where chi_ss underflows.
    """
    if t < 0.0:
        raise DomainError(f"time must be >= 0, got {t}")
    beta = np.asarray(beta, dtype=complex)
    decay = math.exp(-0.5 * params.gamma * t)
    shrunk = beta * decay
    factor = np.exp(log_chi_ss(beta, params) - log_chi_ss(shrunk, params))
    out = factor * np.asarray(chi_initial(shrunk), dtype=complex)
    return out if out.shape else complex(out)


# ---------------------------------------------------------------------------
# evaluator objects carrying quadrature hints


def _steady_sigmas(params: SDMParams) -> tuple[float, float]:
    s1 = math.sqrt((1.0 + 2.0 * params.nbar) / 4.0)
    s2 = math.sqrt(
        (1.0 + 2.0 * params.nbar + 4.0 * params.n_ex * params.xi_mag ** 2) / 4.0
    )
    return s1, s2


@dataclass(frozen=True)
class OpSumChi:
    """Characteristic function of a coherent dyad sum (no reservoir)."""

    opsum: object

    def __call__(self, beta):
        return charfn_opsum(self.opsum, beta)

    @property
    def amp_scale(self) -> float:
        return float(self.opsum.amp_scale)


@dataclass(frozen=True)
class SteadyChi:
    """Steady-state characteristic function with quadrature hints."""

    params: SDMParams

    def __call__(self, beta):
        return chi_ss(beta, self.params)

    @property
    def amp_scale(self) -> float:
        return 0.0

    @property
    def extent_hint(self) -> tuple[float, float]:
        return _steady_sigmas(self.params)


@dataclass(frozen=True)
class EvolvedChi:
    """chi of exp(L t) applied to an initial state given by chi_initial.

    Composable: EvolvedChi(EvolvedChi(chi0, t1, p), t2, p) agrees with
    EvolvedChi(chi0, t1 + t2, p) to machine precision (semigroup property).
    """

    chi_initial: object
    t: float
    params: SDMParams

    def __post_init__(self):
        if self.t < 0.0:
            raise DomainError(f"time must be >= 0, got {self.t}")

    def __call__(self, beta):
        return chi_t(self.chi_initial, beta, self.t, self.params)

    @property
    def amp_scale(self) -> float:
        decay = math.exp(-0.5 * self.params.gamma * self.t)
        return decay * float(getattr(self.chi_initial, "amp_scale", 0.0))

    @property
    def extent_hint(self) -> tuple[float, float]:
        decay2 = math.exp(-self.params.gamma * self.t)
        s1, s2 = _steady_sigmas(self.params)
        hint = getattr(self.chi_initial, "extent_hint", None)
        s01, s02 = (0.5, 0.5) if hint is None else (float(hint[0]), float(hint[1]))
        # upper bound: initial spread shrunk by E plus full steady spread
        return (
            math.sqrt(decay2 * s01 ** 2 + s1 ** 2),
            math.sqrt(decay2 * s02 ** 2 + s2 ** 2),
        )


# ---------------------------------------------------------------------------
# moments and statistics


@dataclass(frozen=True)
class FieldStats:
    """Steady-state field statistics."""

    mean_a: complex
    mean_n: float
    var_n: float
    var_x1: float
    var_x2: float
    mandel_q: float
    fano: float


def steady_stats(params: SDMParams) -> FieldStats:
    """Exact steady-state moments of the pumped, damped field.

    x1 = (a + a^dag)/2 is the quadrature transverse to the kick axis and
    keeps the thermal variance; x2 = (a - a^dag)/(2i) carries the pump
    broadening.  Raises DegenerateParams when the steady state is the
    vacuum, where Mandel Q and Fano F are 0/0.
    """
    nbar = params.nbar
    mu = params.n_ex * params.xi_mag ** 2
    mean_n = nbar + mu
    var_n = (
        nbar * nbar + 2.0 * nbar * mu + 2.0 * mu * mu
        + 0.5 * params.n_ex * params.xi_mag ** 4
        + nbar + mu
    )
    var_x1 = (1.0 + 2.0 * nbar) / 4.0
    var_x2 = (1.0 + 2.0 * nbar + 4.0 * mu) / 4.0
    if mean_n <= 0.0:
        raise DegenerateParams(
            "steady state is the vacuum; Mandel Q and Fano F are undefined"
        )
    fano = var_n / mean_n
    return FieldStats(
        mean_a=0j,
        mean_n=mean_n,
        var_n=var_n,
        var_x1=var_x1,
        var_x2=var_x2,
        mandel_q=fano - 1.0,
        fano=fano,
    )


def mandel_q_formula(params: SDMParams) -> float:
    """Mandel Q in closed form, <n> + n_ex xi_mag^4 (n_ex + 1/2) / <n>.

    Algebraically identical to steady_stats().mandel_q; kept as a separate
    route for cross-checking.
    """
    mu = params.n_ex * params.xi_mag ** 2
    mean_n = params.nbar + mu
    if mean_n <= 0.0:
        raise DegenerateParams(
            "steady state is the vacuum; Mandel Q is undefined"
        )
    return mean_n + params.n_ex * params.xi_mag ** 4 * (params.n_ex + 0.5) / mean_n


@dataclass(frozen=True)
class InitialMoments:
    """First and second moments of the field at t = 0."""

    mean_a: complex = 0j
    mean_n: float = 0.0
    mean_a2: complex = 0j

    @classmethod
    def from_opsum(cls, opsum) -> "InitialMoments":
        state = opsum.normalized()
        return cls(
            mean_a=complex(state.expect_normal(0, 1)),
            mean_n=float(np.real(state.expect_normal(1, 1))),
            mean_a2=complex(state.expect_normal(0, 2)),
        )


@dataclass(frozen=True)
class TransientMoments:
    """<a>, <n>, <a^2> along a time axis."""

    t: np.ndarray
    mean_a: np.ndarray
    mean_n: np.ndarray
    mean_a2: np.ndarray


def transient_moments(
    initial: InitialMoments, t, params: SDMParams
) -> TransientMoments:
    """Exact relaxation of the first two moments.

    <a> decays at gamma/2 with no pump contribution; <n> relaxes at gamma
    toward nbar + n_ex xi_mag^2; <a^2> relaxes at gamma toward n_ex xi^2 =
    -n_ex xi_mag^2 (the kick axis is the negative imaginary direction).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0.0):
        raise DomainError("times must be >= 0")
    e_half = np.exp(-0.5 * params.gamma * t)
    e_full = e_half * e_half
    n_inf = params.nbar + params.n_ex * params.xi_mag ** 2
    a2_inf = params.n_ex * (params.xi ** 2)
    return TransientMoments(
        t=t,
        mean_a=initial.mean_a * e_half,
        mean_n=initial.mean_n * e_full + n_inf * (1.0 - e_full),
        mean_a2=initial.mean_a2 * e_full + a2_inf * (1.0 - e_full),
    )


# ---------------------------------------------------------------------------
# numerical moment probe on an arbitrary characteristic function

_STENCILS = {
    0: np.array([0.0, 0.0, 1.0, 0.0, 0.0]),
    1: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
    2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


def _derivative_table(chi, h: float, m: int, n: int) -> complex:
    """D^{m,n} chi at 0 from one 5x5 sample block of spacing h."""
    offsets = h * np.arange(-2.0, 3.0)
    block = np.asarray(
        chi(offsets[:, None] + 1j * offsets[None, :]), dtype=complex
    )
    total = 0j
    for j in range(m + 1):
        for k in range(n + 1):
            p = m + n - j - k        # order in Re beta
            q = j + k                # order in Im beta
            st_p = _STENCILS[p]
            st_q = _STENCILS[q]
            mixed = st_p @ block @ st_q / h ** (p + q)
            total += (
                math.comb(m, j) * math.comb(n, k)
                * (-1j) ** j * (1j) ** k * mixed
            )
    return ((-1.0) ** n) * total / 2.0 ** (m + n)


def moment_probe(chi, m: int, n: int, step: float | None = None) -> complex:
    """Symmetrically ordered moment <(a^dag)^m a^n>_sym from derivatives.

    Differentiates chi at beta = 0 with central stencils plus one Richardson
    step.  The default spacing is 1e-3 for total order <= 2 and 1e-2 above:
    at fourth order a 1e-3 spacing would amplify round-off to ~1e-3, so the
    larger step is required to stay near 1e-6 accuracy.
    """
    if m < 0 or n < 0:
        raise DomainError("moment orders must be >= 0")
    if m + n > 4:
        raise DomainError("moment probe supports total order <= 4")
    if m + n == 0:
        return complex(np.asarray(chi(np.array([0j])))[0])
    h = step if step is not None else (1e-3 if m + n <= 2 else 1e-2)
    if h <= 0:
        raise DomainError("step must be positive")
    d_h = _derivative_table(chi, h, m, n)
    d_2h = _derivative_table(chi, 2.0 * h, m, n)
    return (4.0 * d_h - d_2h) / 3.0
