"""Batch command-line front-end.

Subcommands: ``analyze`` (stability + gains of a fixed configuration),
``optimize`` (tune parameters for an objective), ``simulate`` (Monte Carlo
trajectories), ``compare-gp`` (budget sweep of the unrestricted optimum
against the per-node GP baseline).  All results are CSV files in the output
directory; logs go to standard error.  Exit codes: 0 ok, 2 invalid
configuration, 3 unstable system, 4 no feasible point, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, LoadedConfig, load_config
from .dcsolve import MaxIterations, NoFeasiblePointFound, NumericalBreakdown, SolveOptions
from .gains import (
    LpInfeasible,
    PiecewiseConstantInput,
    Singular,
    Unstable,
    empirical_gain,
    export_trajectory_csv,
    l1_gain,
    linf_gain,
    simulate_mjls,
    stability_check,
)
from .netmodel import BufferNetwork, NetworkError, ParamOutOfBounds, edge_name
from .problems import CostModel, RevalidationFailed, compare_gp, optimize_l1, optimize_linf
from .simplex import SimplexStalled

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_INFEASIBLE = 4
EXIT_NUMERICAL = 5

log = logging.getLogger("buffernet")


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(c) for c in row))
    path.write_text("\n".join(lines) + "\n")


def _load(args: argparse.Namespace) -> LoadedConfig:
    cfg = load_config(args.config)
    if getattr(args, "alpha", None) is not None:
        cfg = dataclasses.replace(
            cfg, net=BufferNetwork(cfg.net.graphs, cfg.net.chain, args.alpha), alpha=args.alpha
        )
    return cfg


def _solve_options(args: argparse.Namespace) -> SolveOptions:
    kwargs = {"seed": args.seed}
    if args.multistarts is not None:
        kwargs["multistarts"] = args.multistarts
    if args.max_iter is not None:
        kwargs["max_outer_iters"] = args.max_iter
    if args.tol is not None:
        kwargs["tol_stationarity"] = args.tol
        kwargs["tol_feasibility"] = args.tol
    return SolveOptions(**kwargs)


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _load(args)
    if cfg.params is None:
        raise ConfigError("analyze needs a 'params' section with fixed beta/delta values")
    report = stability_check(cfg.net, cfg.params)
    if not report.stable:
        raise Unstable(f"lifted spectral abscissa {report.abscissa:.12g} >= 0")
    rep1 = l1_gain(cfg.net, cfg.params)
    repinf = linf_gain(cfg.net, cfg.params)
    rows: list[list] = [
        ["stable", "true"],
        ["abscissa", _fmt(report.abscissa)],
        ["gamma_l1", _fmt(rep1.gamma)],
        ["gamma_linf", _fmt(repinf.gamma)],
    ]
    for label, rep in (("l1", rep1), ("linf", repinf)):
        for i, cert in enumerate(rep.certificates):
            for k, v in enumerate(cert):
                rows.append([f"cert_{label}[{i}][{k + 1}]", _fmt(v)])
    out = _outdir(args) / "report.csv"
    _write_rows(out, ["quantity", "value"], rows)
    log.info(
        "stable (abscissa %.6g); gamma_l1 = %.9g, gamma_linf = %.9g -> %s",
        report.abscissa,
        rep1.gamma,
        repinf.gamma,
        out,
    )
    return EXIT_OK


def _cost_with_overrides(args: argparse.Namespace, cfg: LoadedConfig) -> CostModel:
    cost = cfg.cost if cfg.cost is not None else CostModel.linear(cfg.net)
    if getattr(args, "budget", None) is not None:
        cost = dataclasses.replace(cost, budget=args.budget)
    if getattr(args, "gamma_bound", None) is not None:
        cost = dataclasses.replace(cost, gamma_bound=args.gamma_bound)
    return cost


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = _load(args)
    if cfg.bounds is None:
        raise ConfigError("optimize needs a 'bounds' section (beta_bar / delta_bar)")
    cost = _cost_with_overrides(args, cfg)
    opts = _solve_options(args)
    if args.objective == "l1":
        if cost.budget is None:
            raise ConfigError("objective 'l1' needs --budget (or costs.budget in the config)")
        result = optimize_l1(cfg.net, cost, cfg.bounds, opts)
    else:
        if cost.gamma_bound is None:
            raise ConfigError("objective 'linf' needs --gamma-bound (or costs.gamma_bound)")
        result = optimize_linf(cfg.net, cost, cfg.bounds, opts)

    out = _outdir(args)
    rows: list[list] = []
    for d in sorted(result.params.beta):
        rows.append(["param", f"beta[{d}]", _fmt(result.params.beta[d])])
    for key in cfg.net.edge_keys:
        rows.append(["param", f"delta[{edge_name(key)}]", _fmt(result.params.delta[key])])
    rows += [
        ["metric", "gamma", _fmt(result.gamma)],
        ["metric", "cost", _fmt(result.cost)],
        ["metric", "objective", _fmt(result.objective)],
        ["metric", "max_violation", _fmt(result.solution.max_violation)],
        ["metric", "start_index", str(result.solution.start_index)],
        ["metric", "status", result.solution.status],
        ["metric", "guarantee", result.solution.guarantee],
    ]
    _write_rows(out / "solution.csv", ["kind", "name", "value"], rows)
    result.solution.trace.to_csv(str(out / "trace.csv"))
    log.info(
        "%s optimum: gamma = %.9g, cost = %.9g (start %d, %s) -> %s",
        result.norm,
        result.gamma,
        result.cost,
        result.solution.start_index,
        result.solution.status,
        out / "solution.csv",
    )
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    if cfg.params is None:
        raise ConfigError("simulate needs a 'params' section with fixed beta/delta values")
    s = cfg.net.s
    if args.input == "pulse":
        signal = PiecewiseConstantInput.pulse(s, width=args.width, amplitude=args.amplitude)
    else:
        signal = PiecewiseConstantInput.constant([args.amplitude] * s)
    batch = simulate_mjls(
        cfg.net,
        cfg.params,
        signal,
        horizon=args.horizon,
        n_traj=args.n_traj,
        seed=args.seed,
        store_paths=args.store,
    )
    out = _outdir(args)
    mean_rows = []
    for j, t in enumerate(batch.t):
        mean_rows.append([_fmt(t)] + [_fmt(v) for v in batch.mean_output[j]])
    r = batch.mean_output.shape[1]
    _write_rows(out / "mean_output.csv", ["t"] + [f"y_{j + 1}" for j in range(r)], mean_rows)
    for idx in range(batch.states.shape[0]):
        export_trajectory_csv(batch, idx, str(out / f"trajectory_{idx:03d}.csv"))
    norm = "l1" if args.input == "pulse" else "linf"
    est = empirical_gain(batch, norm)
    _write_rows(
        out / "empirical.csv",
        ["norm", "value", "half_width"],
        [[est.norm, _fmt(est.value), _fmt(est.half_width)]],
    )
    log.info(
        "simulated %d trajectories (h = %.3g); empirical %s gain %.6g +/- %.2g -> %s",
        batch.n_traj,
        batch.step,
        norm,
        est.value,
        est.half_width,
        out,
    )
    return EXIT_OK


def cmd_compare_gp(args: argparse.Namespace) -> int:
    cfg = _load(args)
    if cfg.bounds is None:
        raise ConfigError("compare-gp needs a 'bounds' section (beta_bar / delta_bar)")
    try:
        budgets = [float(tok) for tok in args.budgets.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"could not parse --budgets {args.budgets!r}") from None
    if not budgets:
        raise ConfigError("--budgets must list at least one value")
    cost = _cost_with_overrides(args, cfg)
    rows = compare_gp(cfg.net, cost, cfg.bounds, budgets, _solve_options(args))
    out = _outdir(args) / "compare.csv"
    _write_rows(
        out,
        ["budget", "gamma_dc", "gamma_gp", "ratio"],
        [[_fmt(r["budget"]), _fmt(r["gamma_dc"]), _fmt(r["gamma_gp"]), _fmt(r["ratio"])] for r in rows],
    )
    log.info("compared %d budgets -> %s", len(rows), out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buffernet",
        description="Gain analysis and parameter tuning for Markov switching buffer networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, seed_required: bool) -> None:
        p.add_argument("--config", required=True, help="network configuration JSON file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0)
        p.add_argument("--max-iter", type=int, default=None, help="outer iteration cap")
        p.add_argument("--tol", type=float, default=None, help="stationarity/feasibility tolerance")
        p.add_argument("--multistarts", type=int, default=None)

    p_an = sub.add_parser("analyze", help="stability verdict and both gains for fixed parameters")
    common(p_an, seed_required=False)
    p_an.set_defaults(func=cmd_analyze)

    p_opt = sub.add_parser("optimize", help="tune beta/delta for an objective")
    common(p_opt, seed_required=True)
    p_opt.add_argument("--objective", choices=["l1", "linf"], required=True)
    p_opt.add_argument("--budget", type=float, default=None, help="tuning-cost budget (l1 objective)")
    p_opt.add_argument("--gamma-bound", type=float, default=None, help="gain bound (linf objective)")
    p_opt.add_argument("--alpha", type=float, default=None, help="override the edge-output weight")
    p_opt.set_defaults(func=cmd_optimize)

    p_sim = sub.add_parser("simulate", help="Monte Carlo trajectories for fixed parameters")
    common(p_sim, seed_required=True)
    p_sim.add_argument("--horizon", type=float, required=True)
    p_sim.add_argument("--n-traj", type=int, default=100)
    p_sim.add_argument("--input", choices=["pulse", "constant"], default="constant")
    p_sim.add_argument("--amplitude", type=float, default=1.0)
    p_sim.add_argument("--width", type=float, default=1e-3, help="pulse width (input=pulse)")
    p_sim.add_argument("--store", type=int, default=5, help="trajectories to export as CSV")
    p_sim.set_defaults(func=cmd_simulate)

    p_cmp = sub.add_parser("compare-gp", help="budget sweep: unrestricted vs per-node GP baseline")
    common(p_cmp, seed_required=True)
    p_cmp.add_argument("--budgets", required=True, help="comma-separated budget values")
    p_cmp.add_argument("--alpha", type=float, default=None)
    p_cmp.set_defaults(func=cmd_compare_gp)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, NetworkError, ParamOutOfBounds, FileNotFoundError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except Unstable as exc:
        log.error("unstable system: %s", exc)
        return EXIT_UNSTABLE
    except NoFeasiblePointFound as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except (
        LpInfeasible,
        SimplexStalled,
        NumericalBreakdown,
        MaxIterations,
        RevalidationFailed,
        Singular,
        np.linalg.LinAlgError,
    ) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
