"""Coherent-state operator algebra and phase-space transforms.

The cavity field of the strongly driven micromaser only ever gets displaced
along a single phase-space ray, so states stay inside the span of finitely
many coherent states.  This module provides the exact dyad algebra for such
operators (sums of |ket><bra| coherent dyads), characteristic functions, the
click conjugation identity for state-selective atom detection, and the
quadrature transform from a characteristic function to a Wigner grid.

Conventions fixed here and used everywhere else:

* the per-pass displacement is xi = -i * xi_mag (pure negative imaginary);
* characteristic function chi(beta) = Tr[rho D(beta)];
* gain coordinates x = -Im(beta), y = Re(beta), so that the damping-only
  direction is x and the pump acts along y;
* Wigner transform W(alpha) = (1/pi) * int chi(beta) exp(alpha beta^* -
  alpha^* beta) d^2beta, normalized so (1/pi) * int W d^2alpha = 1 and the
  vacuum gives W(0) = 2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateOutcome, DomainError, NonRealError, TruncationError
from .grids import GridSpec, PhaseSpaceGrid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SDMParams:
    """Physical parameters of the driven, damped cavity.

    xi_mag is the magnitude of the conditional displacement accumulated per
    atom transit; n_ex = r/gamma is the number of atoms crossing per cavity
    lifetime; nbar the thermal occupation of the reservoir; gamma the cavity
    energy decay rate (sets the time unit).  All observables depend on the
    displacement only through xi_mag.
    """

    xi_mag: float
    n_ex: float = 0.0
    nbar: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.xi_mag >= 0.0):
            raise DomainError(f"xi_mag must be >= 0, got {self.xi_mag}")
        if not (self.n_ex >= 0.0):
            raise DomainError(f"n_ex must be >= 0, got {self.n_ex}")
        if not (self.nbar >= 0.0):
            raise DomainError(f"nbar must be >= 0, got {self.nbar}")
        if not (self.gamma > 0.0):
            raise DomainError(f"gamma must be > 0, got {self.gamma}")

    @property
    def xi(self) -> complex:
        """Per-pass displacement amplitude, -i * xi_mag."""
        return -1j * self.xi_mag

    @property
    def pump_rate(self) -> float:
        """Atom injection rate r = n_ex * gamma."""
        return self.n_ex * self.gamma


@dataclass(frozen=True)
class PhasePoint:
    """A point beta = re + i*im of the characteristic-function plane.

    The gain-coordinate mapping x = -Im(beta), y = Re(beta) is defined once
    here; with xi = -i*xi_mag it makes xi^* beta = xi_mag * (x + i*y), so
    beta = 2*xi sits on the damping-only axis (x = 2*xi_mag, y = 0).
    """

    re: float
    im: float

    @classmethod
    def from_complex(cls, beta: complex) -> "PhasePoint":
        return cls(float(np.real(beta)), float(np.imag(beta)))

    @property
    def beta(self) -> complex:
        return complex(self.re, self.im)

    @property
    def gain_coords(self) -> tuple[float, float]:
        return (-self.im, self.re)


def gain_coords(beta):
    """Vectorized (x, y) = (-Im beta, Re beta)."""
    beta = np.asarray(beta)
    return -np.imag(beta), np.real(beta)


def coherent_overlap(a: complex, b: complex) -> complex:
    """<a|b> = exp(-|a|^2/2 - |b|^2/2 + conj(a)*b)."""
    a = complex(a)
    b = complex(b)
    return np.exp(-0.5 * (abs(a) ** 2 + abs(b) ** 2) + np.conjugate(a) * b)


@dataclass(frozen=True)
class CoherentOpSum:
    """Operator sum_i c_i |k_i><b_i| over coherent-state dyads.

    Coefficients are unnormalized; callers that need a state divide by
    trace() explicitly (conditional states keep their pre-normalization
    trace as the outcome probability).  terms is a tuple of
    (ket_amplitude, bra_amplitude, coefficient).
    """

    terms: tuple[tuple[complex, complex, complex], ...]

    MERGE_TOL = 1e-12

    @classmethod
    def from_terms(cls, terms) -> "CoherentOpSum":
        return cls(tuple((complex(k), complex(b), complex(c)) for k, b, c in terms))

    @classmethod
    def vacuum(cls) -> "CoherentOpSum":
        return cls(((0j, 0j, 1.0 + 0j),))

    @classmethod
    def coherent(cls, amp: complex) -> "CoherentOpSum":
        return cls(((complex(amp), complex(amp), 1.0 + 0j),))

    @classmethod
    def pure(cls, components) -> "CoherentOpSum":
        """|psi><psi| for |psi> = sum_i c_i |a_i> (unnormalized)."""
        comps = [(complex(c), complex(a)) for c, a in components]
        terms = []
        for ci, ai in comps:
            for cj, aj in comps:
                terms.append((ai, aj, ci * np.conjugate(cj)))
        return cls.from_terms(terms)

    def __add__(self, other: "CoherentOpSum") -> "CoherentOpSum":
        return CoherentOpSum(self.terms + other.terms)

    def scaled(self, factor: complex) -> "CoherentOpSum":
        return CoherentOpSum(tuple((k, b, c * factor) for k, b, c in self.terms))

    def dagger(self) -> "CoherentOpSum":
        return CoherentOpSum(
            tuple((b, k, np.conjugate(c)) for k, b, c in self.terms)
        )

    def merged(self, tol: float = MERGE_TOL) -> "CoherentOpSum":
        """Combine coefficients of dyads with matching amplitudes.

        Amplitudes are matched within an absolute tolerance; sequential
        displacements reproduce the exact multiples of xi only up to
        floating-point rounding.
        """
        order = sorted(
            range(len(self.terms)),
            key=lambda i: (
                self.terms[i][0].real, self.terms[i][0].imag,
                self.terms[i][1].real, self.terms[i][1].imag,
            ),
        )
        out: list[list[complex]] = []
        for i in order:
            k, b, c = self.terms[i]
            hit = None
            for cluster in reversed(out):
                if abs(cluster[0] - k) <= tol and abs(cluster[1] - b) <= tol:
                    hit = cluster
                    break
                # sorted sweep: once the ket drifts past tol no earlier
                # cluster can match
                if abs(cluster[0].real - k.real) > tol:
                    break
            if hit is None:
                out.append([k, b, c])
            else:
                hit[2] = hit[2] + c
        return CoherentOpSum(tuple((k, b, c) for k, b, c in out if c != 0))

    def trace(self) -> complex:
        return sum(c * coherent_overlap(b, k) for k, b, c in self.terms)

    def normalized(self) -> "CoherentOpSum":
        tr = self.trace()
        if abs(tr) < 1e-14:
            raise DegenerateOutcome(f"cannot normalize: trace = {tr}")
        return self.scaled(1.0 / tr)

    def expect_normal(self, p: int, q: int) -> complex:
        """Tr[S (a^dag)^p a^q], exact on the dyad sum."""
        return sum(
            c * np.conjugate(b) ** p * k ** q * coherent_overlap(b, k)
            for k, b, c in self.terms
        )

    @property
    def amp_scale(self) -> float:
        """Largest coherent amplitude magnitude appearing in any dyad."""
        if not self.terms:
            return 0.0
        return max(max(abs(k), abs(b)) for k, b, _ in self.terms)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        diff = (self + self.dagger().scaled(-1.0)).merged()
        return all(abs(c) <= tol for _, _, c in diff.terms)

    def gram_eigvals(self) -> np.ndarray:
        """Eigenvalues of the operator restricted to its coherent span.

        Writing S = sum_ij M_ij |a_i><a_j| over the distinct amplitudes, the
        spectrum on the span is that of G^{1/2} M G^{1/2} with Gram matrix
        G_ij = <a_i|a_j>; S is positive iff these are all >= 0.
        """
        merged = self.merged()
        amps: list[complex] = []

        def index_of(a: complex) -> int:
            for i, known in enumerate(amps):
                if abs(known - a) <= self.MERGE_TOL:
                    return i
            amps.append(a)
            return len(amps) - 1

        entries = []
        for k, b, c in merged.terms:
            entries.append((index_of(k), index_of(b), c))
        n = len(amps)
        m = np.zeros((n, n), dtype=complex)
        for i, j, c in entries:
            m[i, j] += c
        gram = np.array(
            [[coherent_overlap(ai, aj) for aj in amps] for ai in amps], dtype=complex
        )
        gram = 0.5 * (gram + gram.conj().T)
        evals, evecs = np.linalg.eigh(gram)
        evals = np.clip(evals, 0.0, None)
        gram_half = (evecs * np.sqrt(evals)) @ evecs.conj().T
        core = gram_half @ m @ gram_half
        core = 0.5 * (core + core.conj().T)
        return np.linalg.eigvalsh(core)


def displace_opsum(opsum: CoherentOpSum, d_left: complex, d_right: complex) -> CoherentOpSum:
    """Map each dyad |k><b| to D(d_left) |k><b| D(d_right), phases included.

    Uses D(d)|k> = exp((d k^* - d^* k)/2) |k + d> on the ket side and the
    adjoint relation <b| D(d) = exp((d b^* - d^* b)/2) <b - d| on the bra
    side, keeping the dyad algebra exactly closed.
    """
    dl = complex(d_left)
    dr = complex(d_right)
    terms = []
    for k, b, c in opsum.terms:
        phase = np.exp(
            0.5 * (dl * np.conjugate(k) - np.conjugate(dl) * k)
            + 0.5 * (dr * np.conjugate(b) - np.conjugate(dr) * b)
        )
        terms.append((k + dl, b - dr, c * phase))
    return CoherentOpSum(tuple(terms))


def charfn_opsum(opsum: CoherentOpSum, beta):
    """chi(beta) = Tr[S D(beta)] evaluated exactly on the dyad sum.

    Each dyad contributes c <b|k> exp(-|beta|^2/2 + conj(b) beta -
    k conj(beta)); beta may be a scalar or any ndarray.
    """
    beta = np.asarray(beta, dtype=complex)
    out = np.zeros(beta.shape, dtype=complex)
    env = -0.5 * (beta.real ** 2 + beta.imag ** 2)
    for k, b, c in opsum.terms:
        out += (c * coherent_overlap(b, k)) * np.exp(
            env + np.conjugate(b) * beta - k * np.conjugate(beta)
        )
    return out if out.shape else complex(out)


def charfn_click_conjugation(chi, beta, sign: int, params: SDMParams):
    """Characteristic function after one state-selective detection.

    For a pre-detection chi, the unnormalized post-click characteristic
    function for outcome sign (+1 excited, -1 ground) is

        (1/4) [ chi(beta) (e^{xi^* beta - xi beta^*} + c.c.-inverse)
                + sign (chi(beta - 2 xi) + chi(beta + 2 xi)) ],

    whose value at beta = 0 is the click probability.
    """
    if sign not in (+1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    xi = params.xi
    beta = np.asarray(beta, dtype=complex)
    ph = np.exp(np.conjugate(xi) * beta - xi * np.conjugate(beta))
    out = 0.25 * (
        chi(beta) * (ph + np.conjugate(ph))
        + sign * (chi(beta - 2 * xi) + chi(beta + 2 * xi))
    )
    return out if out.shape else complex(out)


# ---------------------------------------------------------------------------
# chi -> Wigner quadrature


def _probe_scale(chi) -> float:
    chi0 = abs(complex(np.asarray(chi(np.array([0j])))[0]))
    if not np.isfinite(chi0) or chi0 <= 0.0:
        raise TruncationError("characteristic function vanishes at beta = 0")
    return chi0


_RAYS = np.exp(1j * np.pi * np.arange(8) / 4.0)


def _auto_radius(chi, chi0: float, start: float) -> float:
    """Grow a square half-width until |chi| <= 1e-14 on all 8 rays."""
    r = max(start, 1.0)
    for _ in range(64):
        vals = np.abs(np.asarray(chi(r * _RAYS))) / chi0
        if np.all(vals <= 1e-14):
            return 1.05 * r
        r *= 1.2
        if r > 256.0:
            break
    raise TruncationError(
        "characteristic function does not decay below 1e-14 within |beta| <= 256"
    )


def _probe_width(chi, chi0: float, direction: complex, r_max: float) -> float:
    """Radius along +-direction where |chi| first falls below e^{-1/2}."""
    r = 0.004
    while r < r_max:
        vals = np.abs(np.asarray(chi(np.array([r * direction, -r * direction])))) / chi0
        if np.max(vals) < math.exp(-0.5):
            return r
        r *= 1.25
    return r_max


def wigner_from_charfn(
    chi,
    grid: GridSpec,
    trunc_radius: float | None = None,
    step_re: float | None = None,
    step_im: float | None = None,
) -> PhaseSpaceGrid:
    """Wigner samples from a characteristic function by trapezoid quadrature.

    W(alpha) = (1/pi) int chi(beta) exp(alpha beta^* - alpha^* beta) d^2beta
    over the square |Re beta|, |Im beta| <= trunc_radius.  The kernel
    separates per axis, so the double sum is evaluated as two dense matrix
    products.  chi must accept complex ndarrays; optional attributes
    amp_scale (largest dyad amplitude) and extent_hint (quadrature standard
    deviations of the state) sharpen the automatic step choice.

    Raises TruncationError when |chi| exceeds 1e-10 on the truncation
    boundary and NonRealError when the transform keeps an imaginary part
    above 1e-6.
    """
    chi0 = _probe_scale(chi)
    amp = float(getattr(chi, "amp_scale", 0.0))

    w_y = _probe_width(chi, chi0, 1.0 + 0j, 64.0)   # Re beta axis
    w_x = _probe_width(chi, chi0, 1j, 64.0)         # Im beta axis

    if trunc_radius is None:
        radius = _auto_radius(chi, chi0, max(4.0, amp + 3.0, 3.0 * max(w_x, w_y)))
    else:
        radius = float(trunc_radius)
        if radius <= 0:
            raise DomainError("trunc_radius must be positive")

    hint = getattr(chi, "extent_hint", None)
    if hint is None:
        sig_x1 = 1.0 / (2.0 * w_x) + 0.5
        sig_x2 = 1.0 / (2.0 * w_y) + 0.5
    else:
        sig_x1, sig_x2 = float(hint[0]), float(hint[1])

    x_abs = max(abs(grid.x_min), abs(grid.x_max))
    y_abs = max(abs(grid.y_min), abs(grid.y_max))
    if step_re is None:
        step_re = min(w_y / 2.5, np.pi / (1.2 * (y_abs + 5.0 * sig_x2 + amp) + 4.0))
    if step_im is None:
        step_im = min(w_x / 2.5, np.pi / (1.2 * (x_abs + 5.0 * sig_x1 + amp) + 4.0))

    n_re = 2 * math.ceil(radius / step_re) + 1
    n_im = 2 * math.ceil(radius / step_im) + 1
    if max(n_re, n_im) > 60001:
        raise TruncationError(
            f"quadrature would need {max(n_re, n_im)} nodes per axis; "
            "state too broad for the requested grid"
        )
    log.debug(
        "wigner quadrature: radius=%.3f nodes=(%d, %d) widths=(%.4g, %.4g)",
        radius, n_re, n_im, w_x, w_y,
    )

    beta_re = np.linspace(-radius, radius, n_re)
    beta_im = np.linspace(-radius, radius, n_im)
    h_re = beta_re[1] - beta_re[0]
    h_im = beta_im[1] - beta_im[0]

    samples = chi(beta_re[:, None] + 1j * beta_im[None, :])
    samples = np.asarray(samples, dtype=complex)

    edge = max(
        np.max(np.abs(samples[0, :])), np.max(np.abs(samples[-1, :])),
        np.max(np.abs(samples[:, 0])), np.max(np.abs(samples[:, -1])),
    )
    if edge > 1e-10 * max(1.0, chi0):
        raise TruncationError(
            f"|chi| = {edge:.3e} on the truncation boundary (radius {radius:.3f}); "
            "increase trunc_radius"
        )

    w_re = np.ones(n_re)
    w_re[0] = w_re[-1] = 0.5
    w_im = np.ones(n_im)
    w_im[0] = w_im[-1] = 0.5
    weighted = samples * w_re[:, None] * w_im[None, :]

    # exp(alpha beta^* - alpha^* beta) = exp(2i (Im(alpha) Re(beta)
    #                                          - Re(alpha) Im(beta)))
    k_left = np.exp(2j * np.outer(grid.y, beta_re))
    k_right = np.exp(-2j * np.outer(beta_im, grid.x))
    w_vals = (h_re * h_im / np.pi) * (k_left @ weighted @ k_right)

    max_imag = float(np.max(np.abs(w_vals.imag)))
    if max_imag > 1e-6:
        raise NonRealError(
            f"Wigner transform kept imaginary part {max_imag:.3e}; "
            "input chi is not a Hermitian-operator transform"
        )
    return PhaseSpaceGrid(
        grid.x_min, grid.x_max, grid.nx,
        grid.y_min, grid.y_max, grid.ny,
        "wigner", np.ascontiguousarray(w_vals.real),
    )
