"""Command line entry point.

``svi-sim --config <file> [--out <dir>] [--threads N] [--dump-paths]``

Runs the experiment described by the config and writes a deterministic
report bundle into the output directory:

* ``report.csv``       delimited per-axis (or per-path) results
* ``summary.json``     config echo, statistics, trends, probe results
* ``figures/*.png``    rate plots or path traces
* ``paths/*.csv``      optional per-path dumps (``--dump-paths``)
* ``manifest.json``    hashes of every written file, seed, version

Exit codes: 0 success; 1 a requested trend assertion failed; 2 usage or
configuration error; 3 numerical failure during simulation.
"""
from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunPlan, build_plan, load_config
from .exceptions import (
    ConfigError,
    DomainError,
    NumericalError,
    PerturbationRejected,
)
from .experiments import (
    ExperimentReport,
    PerturbationSpec,
    SimulateResult,
    cauchy_refinement,
    perturbation_sweep,
    simulate_paths,
    yosida_sweep,
)
from .models import run_model_probes
from .paths import MeshGrid, SeedSpec, generate_increment_block
from .reporting import (
    format_float,
    render_paths_figure,
    render_rate_figure,
    report_summary,
    sha256_file,
    simulate_summary,
    write_path_csv,
    write_report_csv,
    write_summary_json,
)
from .solver import solve_x_batch, solve_y_batch

EXIT_OK = 0
EXIT_TREND = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_SIM_COLUMN_ORDER = [
    "sup_x", "sup_y", "tv_phi1", "tv_phi2", "comp_slack",
    "boundary_dist", "boundary_cone_slack", "domain_violations", "decomp_resid",
]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="svi-sim",
        description="Simulate constrained stochastic systems and report convergence diagnostics.",
    )
    p.add_argument("--config", required=True, help="path to a JSON experiment config")
    p.add_argument("--out", default="svi_out", help="output directory (default: svi_out)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (overrides the config)")
    p.add_argument(
        "--dump-paths",
        action="store_true",
        help="write per-path CSV dumps alongside the report",
    )
    return p


def _dump_sample_paths(
    plan: RunPlan, grid: MeshGrid, out_dir: Path, count: int, files: list[Path]
) -> None:
    """Re-simulate the first ``count`` paths and write one CSV per path."""
    model = plan.model
    seed = SeedSpec(plan.config["seed"])
    m = min(int(count), int(plan.config["n_paths"]))
    if m < 1:
        return
    w = generate_increment_block(grid, model.x.dim_w, seed, 0, m, "w")
    b = generate_increment_block(grid, model.x.dim_b, seed, 0, m, "b")
    xv, xphi = solve_x_batch(model.x, model.pot_x, plan.scheme, grid, w, b, model.x0)
    yv = yphi = None
    if model.has_y:
        yv, yphi = solve_y_batch(
            model.y, model.pot_y, plan.scheme, grid, xv, model.control, b, model.y0
        )
    zeros = np.zeros((1, xphi.shape[2]))
    path_dir = out_dir / "paths"
    path_dir.mkdir(parents=True, exist_ok=True)
    for p in range(m):
        phi1 = np.concatenate([zeros, np.cumsum(xphi[p], axis=0)], axis=0)
        kw = {}
        if yv is not None:
            zeros_y = np.zeros((1, yphi.shape[2]))
            kw = {
                "y_values": yv[p],
                "phi2": np.concatenate([zeros_y, np.cumsum(yphi[p], axis=0)], axis=0),
            }
        target = path_dir / f"path_{p:04d}.csv"
        write_path_csv(target, grid.times, xv[p], phi1, **kw)
        files.append(target)


def _simulate_report_rows(result: SimulateResult) -> tuple[list[str], list[list[str]]]:
    keys = list(result.rows)
    ordered = [k for k in keys if k.startswith("x_T_")]
    ordered += [k for k in keys if k.startswith("y_T_")]
    ordered += [k for k in _SIM_COLUMN_ORDER if k in keys]
    ordered += sorted(k for k in keys if k not in ordered)
    header = ["path"] + ordered
    rows = []
    for p in range(result.n_paths):
        rows.append([str(p)] + [format_float(result.rows[k][p]) for k in ordered])
    return header, rows


def _write_simulate_csv(path: Path, result: SimulateResult) -> None:
    header, rows = _simulate_report_rows(result)
    lines = [",".join(header)] + [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_experiment(plan: RunPlan, threads: int):
    cfg = plan.config
    kind = plan.experiment
    if kind == "cauchy":
        rep = cauchy_refinement(
            plan.model, plan.scheme, cfg["levels"], cfg["n_paths"], cfg["seed"],
            horizon=cfg["solver"]["horizon"], threads=threads,
        )
        return [rep], None
    if kind == "yosida_sweep":
        rep = yosida_sweep(
            plan.model, cfg["n_values"], cfg["n_paths"], cfg["seed"], plan.grid,
            threads=threads,
        )
        return [rep], None
    if kind == "perturbation_sweep":
        pert = PerturbationSpec(
            mode=cfg["perturbation"]["mode"],
            epsilons=tuple(cfg["perturbation"]["epsilons"]),
        )
        x_rep, y_rep = perturbation_sweep(
            plan.model, pert, plan.scheme, plan.grid, cfg["n_paths"], cfg["seed"],
            eta=cfg["eta"], threads=threads,
        )
        return [r for r in (x_rep, y_rep) if r is not None], None
    result = simulate_paths(
        plan.model, plan.scheme, plan.grid, cfg["n_paths"], cfg["seed"],
        threads=threads, n_test_paths=cfg["n_test_paths"],
    )
    return [], result


def _check_trends(reports: list[ExperimentReport], wanted: list[str]) -> list[str]:
    failures = []
    for name in wanted:
        for rep in reports:
            if name in rep.trend and not rep.trend[name]:
                failures.append(f"{rep.kind}.{name}")
    return failures


def run(config_path: str, out: str, threads: int | None, dump_paths: bool) -> int:
    try:
        config = load_config(config_path)
    except FileNotFoundError:
        print(f"error: config file not found: {config_path}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        for path, msg in exc.diagnostics:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return EXIT_USAGE

    plan = build_plan(config)
    eff_threads = int(threads) if threads is not None else int(config["threads"])

    try:
        probe_results = run_model_probes(plan.model)
        reports, sim_result = _run_experiment(plan, eff_threads)
    except PerturbationRejected as exc:
        print(f"error: perturbation rejected: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        loc = "" if exc.step is None else f" (step {exc.step})"
        print(f"error: numerical failure{loc}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out_dir = Path(out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        fig_dir = out_dir / "figures"
        fig_dir.mkdir(exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out_dir}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    files: list[Path] = []

    summary: dict = {
        "version": __version__,
        "config": config,
        "probes": {
            name: {
                "passed": rep.passed,
                "worst_violation": rep.worst_violation,
                "estimated_modulus": rep.estimated_modulus,
            }
            for name, rep in probe_results.items()
        },
    }

    report_csv = out_dir / "report.csv"
    if sim_result is not None:
        _write_simulate_csv(report_csv, sim_result)
        summary["simulate"] = simulate_summary(sim_result)
        grid = plan.grid
        seed = SeedSpec(config["seed"])
        m = min(8, config["n_paths"])
        w = generate_increment_block(grid, plan.model.x.dim_w, seed, 0, m, "w")
        b = generate_increment_block(grid, plan.model.x.dim_b, seed, 0, m, "b")
        xv, _ = solve_x_batch(
            plan.model.x, plan.model.pot_x, plan.scheme, grid, w, b, plan.model.x0
        )
        fig = fig_dir / "paths.png"
        render_paths_figure(fig, grid.times, xv, title=plan.model.name)
        files.extend([report_csv, fig])
    else:
        write_report_csv(report_csv, reports)
        summary["reports"] = [report_summary(r) for r in reports]
        files.append(report_csv)
        for rep in reports:
            fig = fig_dir / f"{rep.kind}.png"
            render_rate_figure(fig, rep)
            files.append(fig)

    dump_count = int(config.get("dump_paths", 0))
    if dump_paths and dump_count == 0:
        dump_count = 8
    if dump_count > 0:
        grid = plan.grid
        if grid is None:
            finest = max(int(v) for v in config["levels"])
            grid = MeshGrid(config["solver"]["horizon"], finest)
        _dump_sample_paths(plan, grid, out_dir, dump_count, files)

    trend_failures = _check_trends(reports, config["assert_trends"])
    summary["trend_failures"] = trend_failures

    summary_json = out_dir / "summary.json"
    write_summary_json(summary_json, summary)
    files.append(summary_json)

    manifest = {
        "version": __version__,
        "seed": config["seed"],
        "config_sha256": sha256_file(config_path),
        "created_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "files": {
            f.relative_to(out_dir).as_posix(): sha256_file(f) for f in sorted(files)
        },
    }
    write_summary_json(out_dir / "manifest.json", manifest)

    if trend_failures:
        for name in trend_failures:
            print(f"trend assertion failed: {name}", file=sys.stderr)
        return EXIT_TREND
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    return run(args.config, args.out, args.threads, args.dump_paths)


if __name__ == "__main__":
    sys.exit(main())
