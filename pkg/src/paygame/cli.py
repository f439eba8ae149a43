"""Command-line interface.

    paygame solve    --config cfg.json [--out DIR] [--method NAME] [--seed N]
    paygame simulate --config cfg.json [--out DIR] [--seed N]
    paygame fit      HISTOGRAM.csv [--mode lognormal|powerlaw] [--top-fraction F]
    paygame compare  A.csv B.csv [--metric l1|linf|ks]

Exit codes: 0 success, 1 file I/O failure, 2 bad config or malformed input,
3 solver non-convergence, 4 not enough data points to fit.

solve writes solution.csv; simulate writes histogram.csv and trajectory.csv.
Both finish with manifest.json (config echo, seed, checksums) so a run can
be reproduced from the manifest alone. fit prints a JSON report to stdout
and drops a .fit.json next to the input. compare prints one distance line.
"""
from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .abm import _largest_remainder, agent_simulation
from .core import PopulationState, Scenario
from .dynamics import integrate_to_equilibrium
from .equilibrium import (NonConvergenceError, bipop_mixture_approx,
                          lognormal_equilibrium, solve_scenario)
from .fitting import (InsufficientDataError, distribution_distance,
                      fit_lognormal, fit_powerlaw_tail)
from .runio import (ConfigError, RunConfig, load_config, read_histogram_csv,
                    write_histogram_csv, write_manifest, write_solution_csv,
                    write_trajectory_csv)


def _model_density(scenario: Scenario) -> np.ndarray:
    """Closed-form reference curve written alongside simulated histograms."""
    if len(scenario.classes) >= 2:
        return bipop_mixture_approx(scenario.grid, scenario.classes[0],
                                    scenario.classes[1])
    dens, _ = lognormal_equilibrium(scenario.grid, scenario.classes[0][0])
    return dens


def run_solve(cfg: RunConfig, out_dir: Path, method: str = "fixed-point") -> Path:
    started = datetime.now(timezone.utc)
    solution = solve_scenario(cfg.scenario, method=method)
    out_dir.mkdir(parents=True, exist_ok=True)
    sol_path = write_solution_csv(out_dir / "solution.csv", cfg.scenario.grid, solution)
    finished = datetime.now(timezone.utc)
    convergence = {
        "method": solution.method,
        "iterations": solution.iterations,
        "residual": solution.residual,
        "flatness": solution.flatness,
        "h_star": list(solution.h_star),
        "degenerate": solution.degenerate,
    }
    return write_manifest(out_dir / "manifest.json", command="solve",
                          config=cfg.raw, seed=cfg.seed, started=started,
                          finished=finished, convergence=convergence,
                          files=[sol_path], version=__version__)


def _run_replicator(cfg: RunConfig, seed: int, out_dir: Path, started) -> Path:
    """Mean-field route of the simulate command (single class only).

    epochs_max is a per-agent move budget in the stochastic modes; here it
    caps the integrator's step count instead, at most 100k steps.
    """
    scenario = cfg.scenario
    params = scenario.classes[0][0]
    n = scenario.grid.n
    x0 = PopulationState.from_shares(np.full(n, 1.0 / n), scenario.n_total)
    budget = min(cfg.epochs_max, 100_000)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if budget == 0:
            # zero budget reports the start state, like the stochastic modes
            state, trajectory = integrate_to_equilibrium(
                x0, scenario.grid, params, tolerance=np.inf, max_steps=0)
        else:
            state, trajectory = integrate_to_equilibrium(
                x0, scenario.grid, params, tolerance=cfg.tolerance,
                max_steps=budget)
    except NonConvergenceError as e:
        write_manifest(out_dir / "manifest.json", command="simulate",
                       config=cfg.raw, seed=seed, started=started,
                       finished=datetime.now(timezone.utc),
                       convergence={"mode": "replicator", "steps": e.iterations,
                                    "residual": e.residual, "converged": False},
                       files=[], version=__version__)
        raise
    counts = _largest_remainder(scenario.n_total,
                                state.combined_shares()).reshape(1, -1)
    hist_path = write_histogram_csv(out_dir / "histogram.csv", scenario.grid,
                                    counts, _model_density(scenario))
    cadence = cfg.snapshot_cadence
    rows = []
    if cadence > 0:
        for rec in trajectory:
            if rec.step % cadence == 0 or rec is trajectory[-1]:
                rows.append(SimpleNamespace(
                    sweep=rec.step, residual=rec.residual, accepted_total=0,
                    mean_payoff=rec.mean_payoff, potential=rec.potential))
    traj_path = write_trajectory_csv(out_dir / "trajectory.csv", rows, 1)
    finished = datetime.now(timezone.utc)
    last = trajectory[-1]
    convergence = {
        "mode": "replicator",
        "steps": last.step,
        "residual": last.residual,
        "converged": last.residual < cfg.tolerance,
        "potential": last.potential,
    }
    return write_manifest(out_dir / "manifest.json", command="simulate",
                          config=cfg.raw, seed=seed, started=started,
                          finished=finished, convergence=convergence,
                          files=[hist_path, traj_path], version=__version__)


def run_simulate(cfg: RunConfig, seed: int, out_dir: Path) -> Path:
    started = datetime.now(timezone.utc)
    if cfg.mode == "replicator":
        return _run_replicator(cfg, seed, out_dir, started)
    result = agent_simulation(cfg.scenario, offers=cfg.offers, mode=cfg.mode,
                              shards=cfg.shards, window=cfg.window,
                              threshold=cfg.threshold, fire_hazard=cfg.fire_hazard,
                              epochs_max=cfg.epochs_max,
                              snapshot_cadence=cfg.snapshot_cadence, seed=seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    hist_path = write_histogram_csv(out_dir / "histogram.csv", cfg.scenario.grid,
                                    result.state.table, _model_density(cfg.scenario))
    k = result.state.table.shape[0]
    traj_path = write_trajectory_csv(out_dir / "trajectory.csv", result.snapshots, k)
    finished = datetime.now(timezone.utc)
    convergence = {
        "mode": result.mode,
        "offers": result.offers,
        "sweeps": result.sweeps,
        "epochs": result.epochs,
        "stationary": result.stationary,
        "last_residual": result.residuals[-1][1] if result.residuals else None,
    }
    return write_manifest(out_dir / "manifest.json", command="simulate",
                          config=cfg.raw, seed=seed, started=started,
                          finished=finished, convergence=convergence,
                          files=[hist_path, traj_path], version=__version__)


def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
    manifest = run_solve(cfg, out_dir, method=args.method)
    print(f"wrote {manifest.parent / 'solution.csv'}")
    print(f"wrote {manifest}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
    manifest = run_simulate(cfg, seed=seed, out_dir=out_dir)
    print(f"wrote {manifest.parent / 'histogram.csv'}")
    print(f"wrote {manifest.parent / 'trajectory.csv'}")
    print(f"wrote {manifest}")
    return 0


def _cmd_fit(args) -> int:
    cols = read_histogram_csv(args.histogram)
    if "salary_kusd" not in cols:
        raise ValueError(f"{args.histogram}: missing salary_kusd column")
    dens_col = "density_total" if "density_total" in cols else None
    if dens_col is None:
        raise ValueError(f"{args.histogram}: missing density_total column")
    salaries = cols["salary_kusd"]
    density = cols[dens_col]
    if args.mode == "lognormal":
        fit = fit_lognormal(salaries, density)
    else:
        fit = fit_powerlaw_tail(salaries, density, top_fraction=args.top_fraction)
    report = json.dumps(fit.to_dict(), indent=2)
    print(report)
    side = Path(args.histogram).with_suffix(".fit.json")
    side.write_text(report + "\n")
    return 0


def _cmd_compare(args) -> int:
    a = read_histogram_csv(args.first)
    b = read_histogram_csv(args.second)
    for name, cols in ((args.first, a), (args.second, b)):
        if "density_total" not in cols:
            raise ValueError(f"{name}: missing density_total column")
    p = a["density_total"]
    q = b["density_total"]
    if p.shape != q.shape:
        raise ValueError(f"histograms differ in length: {p.size} vs {q.size}")
    p = p / p.sum()
    q = q / q.sum()
    d = distribution_distance(p, q, metric=args.metric)
    print(f"{args.metric} distance: {d:.17g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paygame",
                                     description="pay-distribution game tools")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute the analytic equilibrium")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--method", default="fixed-point",
                   choices=["fixed-point", "direct"])
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("simulate", help="run the agent-based simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit a distribution model to a histogram")
    p.add_argument("histogram")
    p.add_argument("--mode", default="lognormal", choices=["lognormal", "powerlaw"])
    p.add_argument("--top-fraction", type=float, default=0.03)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("compare", help="distance between two histograms")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--metric", default="l1", choices=["l1", "linf", "ks"])
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except InsufficientDataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except NonConvergenceError as e:
        print(f"error: solver did not converge (residual {e.residual:.3g})",
              file=sys.stderr)
        return 3
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
