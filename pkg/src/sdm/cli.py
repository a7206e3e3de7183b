"""Command line interface.

Subcommands cover the package's figure classes and statistics as
machine-readable files: `cats` (dissipation-free conditional states),
`evolve` (damped Wigner snapshots plus moment curves), `steady` (stationary
statistics and Wigner grid), `correlations` (two-click correlation curves),
`phase` (number-basis phase distribution), and `validate` (the cross-engine
battery).  Every run writes a run_manifest.json listing each output file
with its sha256, so reruns are byte-auditable; no timestamps are recorded.

Exit codes: 0 success, 1 configuration error (bad flags, bad config file,
impossible parameter requests), 2 validation tolerance failure, 3 numerical
trust failure (truncation, integrator breakdown, audit violations).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys

import numpy as np

from . import __version__
from . import clicks, coherent, fock, propagator, validation
from .errors import (
    DegenerateOutcome,
    DegenerateParams,
    DomainError,
    NonRealError,
    OverflowGuard,
    StepFailure,
    TruncationError,
)
from .grids import GridSpec, parse_grid_spec, write_grid_csv
from .phase_space import CoherentOpSum, SDMParams, wigner_from_charfn


class CliError(Exception):
    """Configuration-level failure; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; route through CliError so the
    # documented code 1 applies
    def error(self, message):
        raise CliError(message)

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # grid specs like '-2:2:41' start with a minus; without this they
        # would be rejected as unknown options
        self._negative_number_matcher = re.compile(r"^-\d")


def _add_physics_args(sub: argparse.ArgumentParser, with_pump: bool = True):
    sub.add_argument("--xi-mag", type=float, default=None,
                     help="conditional displacement magnitude per transit")
    if with_pump:
        sub.add_argument("--n-ex", type=float, default=0.0,
                         help="atoms crossing per cavity lifetime")
        sub.add_argument("--nbar", type=float, default=0.0,
                         help="reservoir thermal occupation")
        sub.add_argument("--gamma", type=float, default=1.0,
                         help="cavity energy decay rate")
    sub.add_argument("--config", default=None,
                     help="flat JSON file with defaults for this subcommand")
    sub.add_argument("--outdir", default=".",
                     help="directory for output files and the run manifest")


def build_parser() -> tuple[_Parser, dict]:
    parser = _Parser(prog="sdm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sdm {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="command",
                                 parser_class=_Parser)
    table = {}

    cats = subs.add_parser("cats",
                           help="Wigner grids of dissipation-free multi-transit states")
    _add_physics_args(cats, with_pump=False)
    cats.add_argument("--atoms", type=int, default=1,
                      help="number of atom transits from the vacuum")
    cats.add_argument("--detect", default="none",
                      help="'none' (unread mixture), 'all' (every record), or an "
                           "outcome pattern like 'eg'")
    cats.add_argument("--grid", default="-4:4:161",
                      help="phase-space grid 'x0:x1:nx[,y0:y1:ny]'")
    table["cats"] = cats

    ev = subs.add_parser("evolve",
                         help="damped Wigner snapshots and moment curves")
    _add_physics_args(ev)
    ev.add_argument("--initial", default="vacuum",
                    help="'vacuum', 'coherent:RE,IM', or 'cat:PATTERN' "
                         "(detected transits on the vacuum)")
    ev.add_argument("--times", default="0,1",
                    help="comma list or 'start:stop:n' of evolution times")
    ev.add_argument("--grid", default="-4:4:161",
                    help="phase-space grid 'x0:x1:nx[,y0:y1:ny]'")
    table["evolve"] = ev

    st = subs.add_parser("steady",
                         help="steady-state statistics and Wigner grid")
    _add_physics_args(st)
    st.add_argument("--grid", default=None,
                    help="phase-space grid; default sized from the state spread")
    st.add_argument("--skip-wigner", action="store_true",
                    help="write statistics only")
    table["steady"] = st

    co = subs.add_parser("correlations",
                         help="two-click correlation curves on the steady state")
    _add_physics_args(co)
    co.add_argument("--times", default="0:8:161",
                    help="comma list or 'start:stop:n' of delays")
    table["correlations"] = co

    ph = subs.add_parser("phase",
                         help="steady-state phase distribution (number-basis engine)")
    _add_physics_args(ph)
    ph.add_argument("--dim", type=int, default=None,
                    help="number-basis truncation (default: heuristic)")
    ph.add_argument("--n-theta", type=int, default=256,
                    help="phase grid size")
    table["phase"] = ph

    va = subs.add_parser("validate",
                         help="run the analytic-versus-oracle battery")
    _add_physics_args(va)
    va.add_argument("--dim", type=int, default=None,
                    help="number-basis truncation (default: heuristic plus margin)")
    table["validate"] = va

    return parser, table


def _load_config(args, parser: _Parser, sub: argparse.ArgumentParser, argv):
    """Apply a flat JSON config below explicit flags, then re-parse."""
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise CliError("config must be a flat JSON object")
    allowed = {
        a.dest for a in sub._actions
        if a.dest not in ("help", "config")
    }
    defaults = {}
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if dest not in allowed:
            raise CliError(f"unknown config key {key!r}")
        if isinstance(value, (dict, list)):
            raise CliError(f"config key {key!r} must be a scalar")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _params_from_args(args) -> SDMParams:
    if args.xi_mag is None:
        raise CliError("--xi-mag is required (flag or config)")
    return SDMParams(
        xi_mag=float(args.xi_mag),
        n_ex=float(getattr(args, "n_ex", 0.0)),
        nbar=float(getattr(args, "nbar", 0.0)),
        gamma=float(getattr(args, "gamma", 1.0)),
    )


def _parse_times(text: str) -> np.ndarray:
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError("need at least one time")
            out = np.linspace(float(start), float(stop), n)
        else:
            out = np.array([float(tok) for tok in text.split(",") if tok.strip()])
    except ValueError as exc:
        raise CliError(f"cannot parse times {text!r}: {exc}") from None
    if out.size == 0:
        raise CliError("empty time list")
    if np.any(out < 0.0):
        raise CliError("times must be >= 0")
    return out


def _parse_initial(text: str, params: SDMParams) -> CoherentOpSum:
    text = str(text).strip()
    if text == "vacuum":
        return CoherentOpSum.vacuum()
    if text.startswith("coherent:"):
        try:
            re_s, im_s = text[len("coherent:"):].split(",")
            return CoherentOpSum.coherent(complex(float(re_s), float(im_s)))
        except ValueError as exc:
            raise CliError(f"cannot parse initial {text!r}: {exc}") from None
    if text.startswith("cat:"):
        pattern = text[len("cat:"):]
        if not pattern or any(ch not in "eg" for ch in pattern):
            raise CliError(f"cat pattern must be nonempty over 'e'/'g', got {pattern!r}")
        state = CoherentOpSum.vacuum()
        for outcome in pattern:
            state, _ = coherent.atom_pass_detected(state, outcome, params)
        return state
    raise CliError(f"unknown initial state {text!r}")


def _sha256(path: str) -> tuple[str, int]:
    with open(path, "rb") as fh:
        blob = fh.read()
    return hashlib.sha256(blob).hexdigest(), len(blob)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _finish_run(outdir: str, command: str, arguments: dict, outputs: list) -> None:
    entries = []
    for item in sorted(outputs, key=lambda d: d["path"]):
        digest, size = _sha256(os.path.join(outdir, item["path"]))
        entry = {"path": item["path"], "sha256": digest, "bytes": size}
        entry.update({k: v for k, v in item.items() if k != "path"})
        entries.append(entry)
    manifest = {
        "tool": "sdm",
        "version": __version__,
        "command": command,
        "arguments": {k: arguments[k] for k in sorted(arguments)},
        "outputs": entries,
    }
    _write_json(os.path.join(outdir, "run_manifest.json"), manifest)


def _grid_eval_opsum(state: CoherentOpSum, spec: GridSpec):
    """Exact Wigner values of a dyad sum on a grid (no quadrature)."""
    alpha = spec.x[None, :] + 1j * spec.y[:, None]
    values = coherent.wigner_opsum(state, alpha)
    from .grids import PhaseSpaceGrid

    return PhaseSpaceGrid(
        spec.x_min, spec.x_max, spec.nx,
        spec.y_min, spec.y_max, spec.ny,
        "wigner", np.ascontiguousarray(values),
    )


# ---------------------------------------------------------------------------
# subcommand bodies


def _run_cats(args) -> int:
    params = _params_from_args(args)
    spec = parse_grid_spec(args.grid)
    m = int(args.atoms)
    detect = str(args.detect)
    os.makedirs(args.outdir, exist_ok=True)
    outputs = []
    records_meta = []

    def emit(name: str, state: CoherentOpSum, meta: dict):
        grid = _grid_eval_opsum(state, spec)
        fname = f"{name}.csv"
        write_grid_csv(grid, os.path.join(args.outdir, fname))
        outputs.append({"path": fname, **meta})
        records_meta.append({"output": fname, **meta})

    if detect == "none":
        state = coherent.multi_atom_unobserved(m, params)
        emit("cats_unread", state,
             {"kind": "unread_mixture", "atoms": m,
              "mean_photon": coherent.mean_photon(state)})
    elif detect == "all":
        if m > 10:
            raise CliError("detect=all writes 2^atoms grids; capped at atoms <= 10")
        for record, state in coherent.detection_records(m, params):
            pattern = "".join(record.outcomes) or "vacuum"
            emit(f"cats_{pattern}", state,
                 {"kind": "detected", "record": pattern,
                  "probability": record.probability,
                  "mean_photon": coherent.mean_photon(state)})
    else:
        if any(ch not in "eg" for ch in detect) or len(detect) != m:
            raise CliError(
                f"detect pattern {detect!r} must use 'e'/'g' and match --atoms {m}"
            )
        joint = 1.0
        state = CoherentOpSum.vacuum()
        for outcome in detect:
            state, p = coherent.atom_pass_detected(state, outcome, params)
            joint *= p
        emit(f"cats_{detect}", state,
             {"kind": "detected", "record": detect, "probability": joint,
              "mean_photon": coherent.mean_photon(state)})

    _write_json(os.path.join(args.outdir, "cats_records.json"),
                {"atoms": m, "detect": detect, "records": records_meta})
    outputs.append({"path": "cats_records.json"})
    _finish_run(args.outdir, "cats",
                {"xi_mag": params.xi_mag, "atoms": m, "detect": detect,
                 "grid": args.grid},
                outputs)
    return 0


def _run_evolve(args) -> int:
    params = _params_from_args(args)
    spec = parse_grid_spec(args.grid)
    times = _parse_times(args.times)
    initial = _parse_initial(args.initial, params)
    os.makedirs(args.outdir, exist_ok=True)
    outputs = []

    chi0 = propagator.OpSumChi(initial)
    for i, t in enumerate(times):
        chi = propagator.EvolvedChi(chi0, float(t), params)
        grid = wigner_from_charfn(chi, spec)
        fname = f"wigner_{i:02d}.csv"
        write_grid_csv(grid, os.path.join(args.outdir, fname))
        outputs.append({"path": fname, "t": float(t)})

    init_moments = propagator.InitialMoments.from_opsum(initial)
    curve = propagator.transient_moments(init_moments, times, params)
    moments = [
        {
            "t": float(t),
            "mean_a_re": float(curve.mean_a[i].real),
            "mean_a_im": float(curve.mean_a[i].imag),
            "mean_n": float(curve.mean_n[i]),
            "mean_a2_re": float(curve.mean_a2[i].real),
            "mean_a2_im": float(curve.mean_a2[i].imag),
        }
        for i, t in enumerate(times)
    ]
    _write_json(os.path.join(args.outdir, "moments.json"),
                {"initial": args.initial, "moments": moments})
    outputs.append({"path": "moments.json"})
    _finish_run(args.outdir, "evolve",
                {"xi_mag": params.xi_mag, "n_ex": params.n_ex,
                 "nbar": params.nbar, "gamma": params.gamma,
                 "initial": args.initial, "times": [float(t) for t in times],
                 "grid": args.grid},
                outputs)
    return 0


def _run_steady(args) -> int:
    params = _params_from_args(args)
    os.makedirs(args.outdir, exist_ok=True)
    outputs = []

    stats = propagator.steady_stats(params)
    steady_chi = propagator.SteadyChi(params)
    payload = {
        "mean_n": stats.mean_n,
        "var_n": stats.var_n,
        "var_x1": stats.var_x1,
        "var_x2": stats.var_x2,
        "mandel_q": stats.mandel_q,
        "fano": stats.fano,
        "mandel_q_closed_form": propagator.mandel_q_formula(params),
        "visibility": clicks.steady_visibility(params),
        "p_click_e": clicks.click_probability(steady_chi, "e", params),
        "p_click_g": clicks.click_probability(steady_chi, "g", params),
    }
    _write_json(os.path.join(args.outdir, "steady_stats.json"), payload)
    outputs.append({"path": "steady_stats.json"})

    if not args.skip_wigner:
        if args.grid is None:
            half = max(3.0, 4.0 * np.sqrt(stats.var_x2))
            spec = GridSpec.square(half, 161)
        else:
            spec = parse_grid_spec(args.grid)
        grid = wigner_from_charfn(steady_chi, spec)
        write_grid_csv(grid, os.path.join(args.outdir, "steady_wigner.csv"))
        outputs.append({"path": "steady_wigner.csv"})

    _finish_run(args.outdir, "steady",
                {"xi_mag": params.xi_mag, "n_ex": params.n_ex,
                 "nbar": params.nbar, "gamma": params.gamma,
                 "grid": args.grid, "skip_wigner": bool(args.skip_wigner)},
                outputs)
    return 0


def _run_correlations(args) -> int:
    params = _params_from_args(args)
    times = _parse_times(args.times)
    os.makedirs(args.outdir, exist_ok=True)

    curves = {}
    for first in ("e", "g"):
        for second in ("e", "g"):
            curves[first + second] = clicks.correlation_curve(
                first, second, times, params
            )
    lines = ["# t,g_ee,g_eg,g_ge,g_gg"]
    for i, t in enumerate(times):
        row = [f"{t:.17g}"]
        for pair in ("ee", "eg", "ge", "gg"):
            row.append(f"{curves[pair].g[i]:.17g}")
        lines.append(",".join(row))
    path = os.path.join(args.outdir, "correlations.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    deviation = clicks.conditional_chi_deviation(times, params, "g")
    sidecar = {
        "visibility": clicks.steady_visibility(params),
        "p_e": curves["ee"].p_first,
        "p_g": curves["gg"].p_first,
        "factored_form_deviation": deviation,
        "n_times": int(times.size),
        "t_min": float(times.min()),
        "t_max": float(times.max()),
    }
    _write_json(os.path.join(args.outdir, "correlations.json"), sidecar)
    _finish_run(args.outdir, "correlations",
                {"xi_mag": params.xi_mag, "n_ex": params.n_ex,
                 "nbar": params.nbar, "gamma": params.gamma,
                 "times": args.times},
                [{"path": "correlations.csv"}, {"path": "correlations.json"}])
    return 0


def _run_phase(args) -> int:
    params = _params_from_args(args)
    if args.dim is not None:
        dim = int(args.dim)
    else:
        # margin over the bare heuristic: trace drift measures population
        # leaking past the truncation edge, and the bare value sits near the
        # 1e-9 diagnostic limit
        dim = min(400, fock.default_dim(params) + 24)
    os.makedirs(args.outdir, exist_ok=True)

    rho = fock.steady_fock(params, dim)
    rho.audit()
    dist = fock.pegg_barnett(rho, int(args.n_theta))
    lines = ["# theta,density"]
    for th, de in zip(dist.theta, dist.density):
        lines.append(f"{th:.17g},{de:.17g}")
    with open(os.path.join(args.outdir, "phase.csv"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    _write_json(os.path.join(args.outdir, "phase.json"),
                {"dim": dim, "n_theta": int(args.n_theta),
                 "normalization": dist.normalization(),
                 "symmetry_defect": dist.symmetry_defect(),
                 "min_density": float(dist.density.min())})
    _finish_run(args.outdir, "phase",
                {"xi_mag": params.xi_mag, "n_ex": params.n_ex,
                 "nbar": params.nbar, "gamma": params.gamma,
                 "dim": dim, "n_theta": int(args.n_theta)},
                [{"path": "phase.csv"}, {"path": "phase.json"}])
    return 0


def _run_validate(args) -> int:
    params = _params_from_args(args)
    dim = int(args.dim) if args.dim is not None else None
    report = validation.validate(params, dim=dim)
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        tol = "info" if check.tol is None else f"tol {check.tol:.1e}"
        line = f"{status} {check.name}: {check.value:.3e} ({tol})"
        if check.detail:
            line += f" [{check.detail}]"
        print(line)
    os.makedirs(args.outdir, exist_ok=True)
    _write_json(os.path.join(args.outdir, "validate.json"), report.to_dict())
    _finish_run(args.outdir, "validate",
                {"xi_mag": params.xi_mag, "n_ex": params.n_ex,
                 "nbar": params.nbar, "gamma": params.gamma,
                 "dim": report.dim},
                [{"path": "validate.json"}])
    print("validation " + ("PASSED" if report.passed else "FAILED"))
    return 0 if report.passed else 2


_RUNNERS = {
    "cats": _run_cats,
    "evolve": _run_evolve,
    "steady": _run_steady,
    "correlations": _run_correlations,
    "phase": _run_phase,
    "validate": _run_validate,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    threads = os.environ.get("SDM_THREADS")
    if threads is not None and (not threads.isdigit() or int(threads) < 1):
        print(f"sdm: SDM_THREADS must be a positive integer, got {threads!r}",
              file=sys.stderr)
        return 1
    parser, table = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliError("a subcommand is required (see sdm --help)")
        args = _load_config(args, parser, table[args.command], argv)
        return _RUNNERS[args.command](args)
    except CliError as exc:
        print(f"sdm: {exc}", file=sys.stderr)
        return 1
    except (DomainError, DegenerateParams, DegenerateOutcome, OverflowGuard) as exc:
        print(f"sdm: {exc}", file=sys.stderr)
        return 1
    except (TruncationError, StepFailure, NonRealError) as exc:
        print(f"sdm: numerical trust failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
