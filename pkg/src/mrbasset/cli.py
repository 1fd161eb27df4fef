"""Command-line front end: simulate / sensitivity / verify / bound / reverse.

Exit codes: 0 success; 1 verification failures; 2 configuration errors;
3 solver failures; 4 I/O errors.  Trajectories go to CSV with
shortest-round-trip decimals; verification reports go to JSON lines.
Batches of initial conditions run in parallel with deterministic,
input-ordered output.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bounds import apriori_solution_bound, gronwall_bound, GronwallProblem
from .config import ConfigError, RunConfig, parse_config, render_config
from .diagnostics import reverse_roundtrip, run_default_suite, write_report
from .flowfield import coefficient_constants
from .sensitivity import separation_bounds, solve_inverse, solve_variational
from .solver import SolverError, solve

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_trajectory_csv(traj, path: Path) -> None:
    n = traj.ys.shape[1]
    header = ",".join(["t"] + [f"y{i+1}" for i in range(n)]
                      + [f"w{i+1}" for i in range(n)])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, y, w in zip(traj.grid.points, traj.ys, traj.ws):
            row = [t, *y, *w]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_matrix_blocks_csv(times, mats, path: Path) -> None:
    """One block per grid time: a ``t`` line then the matrix rows."""
    with open(path, "w") as fh:
        for t, M in zip(times, mats):
            fh.write(f"t,{_fmt(t)}\n")
            for row in M:
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def _solve_all(cfg: RunConfig, threads: int):
    field, p = cfg.field(), cfg.params()

    def one(ic):
        return solve(field, p, ic, cfg.t0, cfg.T, cfg.N,
                     scheme=cfg.scheme, tol=cfg.tol)

    ics = cfg.states()
    if threads <= 1 or len(ics) == 1:
        return [one(ic) for ic in ics]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, ics))  # map preserves input order


def _cmd_simulate(cfg: RunConfig, out: Path, threads: int, plot: bool) -> int:
    trajectories = _solve_all(cfg, threads)
    written = []
    for i, traj in enumerate(trajectories):
        path = out / f"trajectory_{i:02d}.csv"
        _write_trajectory_csv(traj, path)
        written.append(path)
    if plot:
        from .plotting import plot_trajectories
        plot_trajectories(trajectories, out / "trajectories.png")
        written.append(out / "trajectories.png")
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_sensitivity(cfg: RunConfig, out: Path, threads: int, plot: bool) -> int:
    field, p = cfg.field(), cfg.params()
    summary = []
    for i, traj in enumerate(_solve_all(cfg, threads)):
        sens = solve_variational(field, p, traj)
        times = traj.grid.points
        _write_matrix_blocks_csv(times, sens.Dphi, out / f"dphi_{i:02d}.csv")
        entry = {"particle": i}
        if cfg.sensitivity_inverse:
            sens = solve_inverse(field, p, sens)
            _write_matrix_blocks_csv(times, sens.Dphi_inv,
                                     out / f"dphi_inverse_{i:02d}.csv")
            sep = separation_bounds(sens)
            entry["M"] = sep.expansion
            entry["M_tilde"] = sep.contraction
        summary.append(entry)
    with open(out / "sensitivity_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(out / "sensitivity_summary.json")
    return EXIT_OK


def _cmd_verify(cfg: RunConfig, out: Path, threads: int, plot: bool,
                fast: bool = False) -> int:
    records = run_default_suite(fast=fast)
    write_report(records, out / "report.jsonl")
    print(out / "report.jsonl")
    if plot:
        from .plotting import plot_report
        plot_report(records, out / "report.png")
        print(out / "report.png")
    failed = [r for r in records if not r.passed]
    for r in failed:
        print(f"FAIL {r.name}: {r.metrics}", file=sys.stderr)
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def _cmd_bound(cfg: RunConfig, out: Path, threads: int, plot: bool) -> int:
    field, p = cfg.field(), cfg.params()
    # sample the coefficient bounds over a coarse box around the particles
    ys = np.array([y for y, _ in cfg.ics])
    lo, hi = ys.min() - 1.0, ys.max() + 1.0
    pts = [np.array([a, b]) for a in np.linspace(lo, hi, 5)
           for b in np.linspace(lo, hi, 5)] if ys.shape[1] == 2 else \
        [np.full(ys.shape[1], v) for v in np.linspace(lo, hi, 9)]
    L_b, _, A0, B0 = coefficient_constants(
        field, p, pts, np.linspace(cfg.t0, cfg.T, 3))
    for i, ic in enumerate(cfg.states()):
        c_y, c_w = apriori_solution_bound(p, L_b, A0, B0, ic, cfg.t0, cfg.T)
        a0 = float(np.linalg.norm(ic.y) + np.linalg.norm(ic.w))
        const = a0 + L_b * (cfg.T**2 - cfg.t0**2) + (A0 + B0) * (cfg.T - cfg.t0)
        prob = GronwallProblem(
            a=const, terms=((max(1.0, p.mu + L_b), 1.0), (p.basset, 0.5)),
            T=(cfg.T - cfg.t0) * (1 + 1e-12) + 1e-300)
        _, trace = gronwall_bound(prob, cfg.T - cfg.t0, return_trace=True)
        print(f"particle {i}: C_Y = {_fmt(c_y)}  C_W = {_fmt(c_w)}")
        print("series trace: " + ", ".join(_fmt(v) for v in trace))
    return EXIT_OK


def _cmd_reverse(cfg: RunConfig, out: Path, threads: int, plot: bool) -> int:
    field, p = cfg.field(), cfg.params()
    for i, ic in enumerate(cfg.states()):
        ey, ew = reverse_roundtrip(field, p, ic, cfg.T, cfg.N, t0=cfg.t0,
                                   tol=cfg.tol)
        print(f"particle {i}: position error = {_fmt(ey)}  "
              f"velocity error = {_fmt(ew)}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sensitivity": _cmd_sensitivity,
    "verify": _cmd_verify,
    "bound": _cmd_bound,
    "reverse": _cmd_reverse,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrbasset",
        description="Inertial particle transport with history memory: "
                    "simulation, sensitivities, bounds, and verification.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("simulate", "integrate trajectories and write CSVs"),
            ("sensitivity", "flow-map derivatives (and inverse) along a run"),
            ("verify", "run the verification suite, write a JSON-lines report"),
            ("bound", "print the a-priori solution bound and series trace"),
            ("reverse", "print time-reversal round-trip errors")]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", type=Path, default=None,
                        help="config file (omit for built-in defaults)")
        sp.add_argument("--out", type=Path, default=Path("."),
                        help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="parallel workers over initial conditions")
        sp.add_argument("--tol", type=float, default=None,
                        help="override the scheme tolerance")
        sp.add_argument("--plot", action="store_true",
                        help="also render figures (requires matplotlib)")
        if name == "verify":
            sp.add_argument("--fast", action="store_true",
                            help="smaller grids for a quick smoke run")
        if name == "simulate":
            sp.add_argument("--print-config", action="store_true",
                            help="echo the canonical form of the config")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out: Path = args.out
    try:
        if args.config is not None:
            cfg = parse_config(args.config.read_text())
        else:
            cfg = RunConfig()
        if args.tol is not None:
            if args.tol <= 0:
                raise ConfigError("--tol must be positive")
            cfg = RunConfig(**{**cfg.__dict__, "tol": args.tol})
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "print_config", False):
        print(render_config(cfg), end="")

    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO

    before = set(out.iterdir())
    try:
        if args.command == "verify":
            return _cmd_verify(cfg, out, args.threads, args.plot,
                               fast=args.fast)
        return _COMMANDS[args.command](cfg, out, args.threads, args.plot)
    except SolverError as exc:
        _cleanup(out, before)
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        _cleanup(out, before)
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO


def _cleanup(out: Path, before: set) -> None:
    """Remove artifacts created by a failed command."""
    for path in set(out.iterdir()) - before:
        if path.is_file():
            path.unlink()


if __name__ == "__main__":
    sys.exit(main())
