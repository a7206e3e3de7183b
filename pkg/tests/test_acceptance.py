"""Acceptance battery.

One test per criterion; each prints a single PASS/FAIL line with the
measured values behind the verdict (run with -s or -rA to see the lines for
passing tests).  Oracle comparisons run at desk scale (n_ex 2, xi_mag 0.5,
nbar 0.1, dim 60); figure regressions run the analytic engine at the
committed paper-scale golden settings.
"""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from sdm import clicks, coherent, fock, propagator, validation
from sdm.grids import GridSpec, read_grid_csv
from sdm.phase_space import CoherentOpSum, SDMParams, wigner_from_charfn

DESK = SDMParams(xi_mag=0.5, n_ex=2.0, nbar=0.1)
DESK_DIM = 60
GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


def _criterion(tag: str, ok: bool, detail: str):
    print(f"{tag} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{tag}: {detail}"


@pytest.fixture(scope="module")
def rho_ss():
    state = fock.steady_fock(DESK, DESK_DIM)
    state.audit()
    return state


@pytest.fixture(scope="module")
def oracle_ss(rho_ss):
    return fock.oracle_stats(rho_ss)


def _probe_betas() -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(7) / 7.0 + 0.15
    pts = np.concatenate([r * np.exp(1j * angles) for r in (0.4, 0.9, 1.4)])
    return pts[:20]


def test_a1_single_transit_center_values():
    params = SDMParams(xi_mag=1.0, n_ex=0.0, nbar=0.0)
    probe = GridSpec(-0.5, 0.5, 3, -0.5, 0.5, 3)
    dim = 16 + int(np.ceil((params.xi_mag + 4.0) ** 2)) + 8
    worst_quad = worst_oracle = 0.0
    exact = True
    for outcome, target in (("e", 2.0), ("g", -2.0)):
        closed = coherent.wigner_closed_form(outcome, 0j, params)
        exact = exact and (closed == target)
        clicked = clicks.ClickedChi(
            propagator.OpSumChi(CoherentOpSum.vacuum()), outcome, params
        )
        quad = wigner_from_charfn(clicked, probe).values[1, 1]
        worst_quad = max(worst_quad, abs(quad - target))
        state, _ = fock.oracle_click(fock.vacuum_fock(dim), outcome, params)
        worst_oracle = max(worst_oracle, abs(fock.oracle_wigner(state, 0j) - target))
    ok = exact and worst_quad < 1e-6 and worst_oracle < 1e-6
    _criterion(
        "A1",
        ok,
        f"center values +-2: closed form exact={exact}, quadrature err "
        f"{worst_quad:.2e}, oracle err {worst_oracle:.2e} (tol 1e-6)",
    )


def test_a2_multi_transit_peak_structure():
    params = SDMParams(xi_mag=np.pi, n_ex=0.0, nbar=0.0)
    detail = []
    ok = True
    for m in (1, 2, 3):
        state = coherent.multi_atom_unobserved(m, params)
        half = m * np.pi + 3.0
        y = np.linspace(-half, half, 601)
        cell = y[1] - y[0]
        vals = coherent.wigner_opsum(state, 1j * y).real
        interior = vals[1:-1]
        is_peak = (interior > vals[:-2]) & (interior > vals[2:])
        peaks = y[1:-1][is_peak]
        spacing_err = (
            float(np.max(np.abs(np.diff(peaks) - 2.0 * np.pi)))
            if len(peaks) > 1
            else np.inf
        )
        ok = ok and len(peaks) == m + 1 and spacing_err <= cell
        detail.append(
            f"m={m}: {len(peaks)} maxima (want {m + 1}), spacing err "
            f"{spacing_err:.3f} (cell {cell:.3f})"
        )
    _criterion("A2", ok, "; ".join(detail))


def test_a3_steady_moments_adjudicate_prefactor(oracle_ss):
    err_n = abs(oracle_ss.mean_n - 0.6)
    err_x1 = abs(oracle_ss.var_x1 - 0.3)
    err_x2 = abs(oracle_ss.var_x2 - 0.8)
    margin_rejected = abs(oracle_ss.mean_n - 1.1)
    ok = err_n < 1e-4 and err_x1 < 1e-4 and err_x2 < 1e-4 and margin_rejected > 1e-4
    _criterion(
        "A3",
        ok,
        f"oracle mean_n={oracle_ss.mean_n:.6f} (want 0.6, err {err_n:.1e}), "
        f"var_x1 err {err_x1:.1e}, var_x2 err {err_x2:.1e} (tol 1e-4); "
        f"doubled-prefactor prediction 1.1 misses by {margin_rejected:.3f}",
    )


def test_a4_mandel_q_convention(oracle_ss):
    mean = 0.6
    literal = mean + DESK.n_ex * DESK.xi_mag**4 * (DESK.n_ex + 0.5) / mean
    closed = propagator.mandel_q_formula(DESK)
    stats_a = propagator.steady_stats(DESK)
    err_q = abs(oracle_ss.mandel_q - literal)
    err_routes = abs(closed - literal)
    err_fano = abs((stats_a.fano - 1.0) - literal)
    rho_th = fock.steady_fock(SDMParams(xi_mag=0.5, n_ex=0.0, nbar=0.5), DESK_DIM)
    q_th = fock.oracle_stats(rho_th).mandel_q
    err_th = abs(q_th - 0.5)
    ok = err_q < 1e-3 and err_routes < 1e-12 and err_fano < 1e-12 and err_th < 1e-4
    _criterion(
        "A4",
        ok,
        f"oracle Q={oracle_ss.mandel_q:.6f} vs formula {literal:.6f} "
        f"(err {err_q:.1e}, tol 1e-3), F={stats_a.fano:.6f}=Q+1 "
        f"(err {err_fano:.1e}); thermal oracle Q={q_th:.6f} vs nbar=0.5 "
        f"(err {err_th:.1e}, tol 1e-4)",
    )


def test_a5_transient_moments():
    times = np.linspace(0.0, 5.0, 21) / DESK.gamma
    init = propagator.InitialMoments.from_opsum(CoherentOpSum.vacuum())
    analytic = propagator.transient_moments(init, times, DESK)
    states = fock.evolve_fock(fock.vacuum_fock(DESK_DIM), times, DESK)
    worst_n = 0.0
    for i, state in enumerate(states):
        _, mean_n, _ = fock.oracle_moments(state)
        worst_n = max(worst_n, abs(mean_n - analytic.mean_n[i]))

    alpha0 = 0.8 - 0.4j
    times_a = np.linspace(0.0, 5.0, 11) / DESK.gamma
    states_a = fock.evolve_fock(fock.coherent_fock(alpha0, DESK_DIM), times_a, DESK)
    worst_a = 0.0
    for i, state in enumerate(states_a):
        mean_a, _, _ = fock.oracle_moments(state)
        expected = alpha0 * np.exp(-0.5 * DESK.gamma * times_a[i])
        worst_a = max(worst_a, abs(mean_a - expected))
    ok = worst_n < 1e-4 and worst_a < 1e-4
    _criterion(
        "A5",
        ok,
        f"mean photon number analytic vs oracle over 5 lifetimes: max err "
        f"{worst_n:.2e}; displaced start amplitude vs half-rate decay: max "
        f"err {worst_a:.2e} (tol 1e-4)",
    )


def test_a6_charfn_propagator_equivalence():
    betas = _probe_betas()
    times = np.array([0.2, 0.9, 2.0]) / DESK.gamma
    chi0 = propagator.OpSumChi(CoherentOpSum.vacuum())
    states = fock.evolve_fock(fock.vacuum_fock(DESK_DIM), times, DESK)
    sup = 0.0
    for t, state in zip(times, states):
        chi_a = propagator.EvolvedChi(chi0, float(t), DESK)(betas)
        sup = max(sup, float(np.max(np.abs(chi_a - fock.oracle_charfn(state, betas)))))
    t1, t2 = 0.4 / DESK.gamma, 0.7 / DESK.gamma
    once = propagator.EvolvedChi(chi0, t1 + t2, DESK)(betas)
    twice = propagator.EvolvedChi(
        propagator.EvolvedChi(chi0, t1, DESK), t2, DESK
    )(betas)
    semigroup = float(np.max(np.abs(once - twice)))
    ok = sup < 1e-4 and semigroup < 1e-10
    _criterion(
        "A6",
        ok,
        f"evolved characteristic function vs oracle on 20 probe points, "
        f"vacuum start: sup err {sup:.2e} (tol 1e-4); semigroup defect "
        f"{semigroup:.2e} (tol 1e-10)",
    )


def test_a7_two_click_correlations(rho_ss):
    t_corr = np.array([0.0, 0.1, 0.5, 2.0]) / DESK.gamma
    p_ss = {}
    conditioned = {}
    for outcome in ("e", "g"):
        cond, p = fock.oracle_click(rho_ss, outcome, DESK)
        p_ss[outcome] = p
        conditioned[outcome] = fock.evolve_fock(cond, t_corr, DESK)
    worst = 0.0
    for first in ("e", "g"):
        for second in ("e", "g"):
            for i, t in enumerate(t_corr):
                _, p2 = fock.oracle_click(conditioned[first][i], second, DESK)
                g_oracle = p2 / p_ss[second]
                g_analytic = clicks.two_click_correlation(first, second, float(t), DESK)
                worst = max(worst, abs(g_oracle - g_analytic))
    worst_inf = max(
        abs(clicks.two_click_correlation(a, b, 10.0 / DESK.gamma, DESK) - 1.0)
        for a in ("e", "g")
        for b in ("e", "g")
    )
    report = {c.name: c for c in validation.validate(DESK).checks}
    dev_g = report["conditional_chi_factored_gamma"]
    dev_2g = report["conditional_chi_factored_2gamma"]
    quantified = dev_g.value > 0.0 and dev_2g.value > 0.0
    ok = worst < 1e-4 and worst_inf < 1e-3 and quantified
    _criterion(
        "A7",
        ok,
        f"four correlation curves vs oracle click-evolve-click at 4 delays: "
        f"max err {worst:.2e} (tol 1e-4); long-delay approach to 1: "
        f"{worst_inf:.2e} (tol 1e-3); factored-form deviation quantified: "
        f"rate-as-decay {dev_g.value:.3e}, rate-as-double {dev_2g.value:.3e}",
    )


def test_a8_phase_distribution(rho_ss):
    dist = fock.pegg_barnett(rho_ss, 256)
    norm_err = abs(dist.normalization() - 1.0)
    sym = dist.symmetry_defect()
    density = dist.density
    up = density > np.roll(density, 1)
    down = density > np.roll(density, -1)
    peaks = np.where(up & down)[0]
    top = peaks[np.argsort(density[peaks])][-2:]
    found = np.sort(dist.theta[top])
    peak_err = float(np.max(np.abs(found - np.array([-np.pi / 2.0, np.pi / 2.0]))))
    ok = (
        len(peaks) >= 2
        and peak_err <= dist.bin_width
        and sym < 1e-8
        and norm_err < 1e-8
    )
    _criterion(
        "A8",
        ok,
        f"two main phase peaks at {found[0]:+.4f}, {found[1]:+.4f} vs -+pi/2 "
        f"(err {peak_err:.2e}, one bin = {dist.bin_width:.4f}); symmetry "
        f"defect {sym:.1e}, normalization err {norm_err:.1e} (tol 1e-8)",
    )


def test_a9_figure_grids_regenerate_byte_identically(tmp_path):
    out = str(tmp_path)
    argv = [
        sys.executable,
        "-c",
        "import sys; from sdm.cli import main; sys.exit(main(sys.argv[1:]))",
        "evolve",
        "--xi-mag", "3.141592653589793",
        "--n-ex", "50",
        "--nbar", "0.03",
        "--gamma", "1.0",
        "--initial", "vacuum",
        "--times", "0,0.1,0.3,0.5,20",
        "--grid", "-3:3:61,-60:60:481",
        "--outdir", out,
    ]
    env = dict(os.environ, SDM_THREADS="1")
    proc = subprocess.run(argv, env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    names = sorted(os.listdir(GOLDEN_DIR))
    mismatched = []
    for name in names:
        with open(os.path.join(GOLDEN_DIR, name), "rb") as fh:
            golden = fh.read()
        with open(os.path.join(out, name), "rb") as fh:
            fresh = fh.read()
        if golden != fresh:
            mismatched.append(name)

    grid = read_grid_csv(os.path.join(GOLDEN_DIR, "wigner_04.csv"))
    section = grid.section_y0()
    x = grid.x
    coef = np.polyfit(x, np.log(section), 2)
    var_fit = -1.0 / (2.0 * coef[0])
    residual = float(np.max(np.abs(np.exp(np.polyval(coef, x)) - section)))
    var_target = (1.0 + 2.0 * 0.03) / 4.0
    var_err = abs(var_fit - var_target)
    ok = not mismatched and var_err < 1e-3 and residual < 1e-3
    _criterion(
        "A9",
        ok,
        f"{len(names)} golden files byte-identical "
        f"(mismatches: {mismatched or 'none'}); late-time real-axis section "
        f"Gaussian fit var={var_fit:.6f} vs {var_target} (err {var_err:.1e}), "
        f"max fit residual {residual:.1e} (tol 1e-3)",
    )


def test_a10_ensemble_consistency(rho_ss):
    records = coherent.detection_records(3, DESK)
    mixture = coherent.ensemble_average(records)
    target = coherent.multi_atom_unobserved(3, DESK)
    branch_err = coherent.opsum_coeff_delta(mixture, target)

    dp = fock.displacement_matrix(DESK.xi, DESK_DIM)
    dm = dp.conj().T
    kraus_sum = np.zeros_like(rho_ss.data)
    for sign in (+1.0, -1.0):
        k = 0.5 * (dp + sign * dm)
        kraus_sum += k @ rho_ss.data @ k.conj().T
    direct = fock.unobserved_pass_fock(rho_ss, DESK).data
    kraus_err = float(np.abs(kraus_sum - direct).max())

    residual = float(
        np.abs(fock.lindblad_rhs(rho_ss.data, DESK, dp, dm)).max()
    ) / DESK.gamma
    ok = branch_err < 1e-10 and kraus_err < 1e-10 and residual < 1e-8
    _criterion(
        "A10",
        ok,
        f"detected-branch average vs unobserved map: {branch_err:.1e} "
        f"(tol 1e-10); click Kraus sum vs gain map: {kraus_err:.1e} "
        f"(tol 1e-10); steady state fixed-point residual: {residual:.1e} "
        f"(tol 1e-8)",
    )
