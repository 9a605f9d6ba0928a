"""Deterministic report files and figures.

Reports are written so that reruns with the same config and seed are
byte-identical: floats are rendered with an exact round-trip format,
JSON keys are sorted, CSV rows follow the experiment axis order, and
figure files carry pinned metadata instead of timestamps.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import ExperimentReport, SimulateResult

__all__ = [
    "format_float",
    "canonical_json",
    "sha256_bytes",
    "sha256_file",
    "report_rows",
    "write_report_csv",
    "write_summary_json",
    "report_summary",
    "simulate_summary",
    "render_rate_figure",
    "render_paths_figure",
    "write_path_csv",
]

_FIG_METADATA = {"Software": "svisim"}  # pinned so PNG bytes do not vary per run


def format_float(x: float) -> str:
    """Round-trip exact decimal form of a float."""
    return "%.17g" % float(x)


def canonical_json(obj) -> str:
    """Sorted-key, fixed-separator JSON with a trailing newline."""
    return json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=1, allow_nan=False) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


# -- delimited report -----------------------------------------------------------

_BASE_COLUMNS = ["experiment", "axis_name", "axis", "mean", "stderr", "ci_lo", "ci_hi", "n_paths"]


def _aligned_extras(report: ExperimentReport) -> list[str]:
    """Extras whose length matches the axis become extra CSV columns."""
    cols = []
    for key in sorted(report.extras):
        val = report.extras[key]
        if isinstance(val, tuple) and len(val) == len(report.axis):
            cols.append(key)
    return cols


def report_rows(reports: list[ExperimentReport]) -> tuple[list[str], list[list[str]]]:
    """Header and string rows for a set of experiment reports.

    Extra aligned columns from all reports are merged; reports missing a
    column leave it empty.
    """
    extra_cols: list[str] = []
    for rep in reports:
        for key in _aligned_extras(rep):
            if key not in extra_cols:
                extra_cols.append(key)
    header = _BASE_COLUMNS + extra_cols
    rows: list[list[str]] = []
    for rep in reports:
        aligned = set(_aligned_extras(rep))
        for i, axis_value in enumerate(rep.axis):
            s = rep.stats[i]
            row = [
                rep.kind,
                rep.axis_name,
                format_float(axis_value),
                format_float(s.mean),
                format_float(s.stderr),
                format_float(s.ci_lo),
                format_float(s.ci_hi),
                str(rep.n_paths),
            ]
            for key in extra_cols:
                row.append(format_float(rep.extras[key][i]) if key in aligned else "")
            rows.append(row)
    return header, rows


def write_report_csv(path: str | Path, reports: list[ExperimentReport]) -> None:
    header, rows = report_rows(reports)
    lines = [",".join(header)] + [",".join(r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def report_summary(report: ExperimentReport) -> dict:
    """JSON-ready digest of one experiment report."""
    out = {
        "kind": report.kind,
        "axis_name": report.axis_name,
        "axis": list(report.axis),
        "mean": [s.mean for s in report.stats],
        "stderr": [s.stderr for s in report.stats],
        "ci_lo": [s.ci_lo for s in report.stats],
        "ci_hi": [s.ci_hi for s in report.stats],
        "n_paths": report.n_paths,
        "fitted_rate": report.fitted_rate,
        "fit_r2": report.fit_r2,
        "trend": dict(report.trend),
        "extras": _jsonable(report.extras),
    }
    return out


def simulate_summary(result: SimulateResult) -> dict:
    return {
        "kind": "simulate",
        "model": result.model_name,
        "n_paths": result.n_paths,
        "horizon": result.grid.horizon,
        "steps": result.grid.steps,
        "summary": _jsonable(result.summary),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_summary_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(canonical_json(_jsonable(obj)), encoding="utf-8")


# -- figures ---------------------------------------------------------------------

def render_rate_figure(path: str | Path, report: ExperimentReport) -> None:
    """Log-log error plot with Monte Carlo error bars and the fitted slope."""
    axis = np.asarray(report.axis, dtype=float)
    means = np.asarray([s.mean for s in report.stats])
    errs = np.asarray([1.96 * s.stderr for s in report.stats])
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    keep = (axis > 0) & (means > 0)
    if np.any(keep):
        ax.errorbar(
            axis[keep], means[keep], yerr=errs[keep],
            fmt="o-", capsize=3, label="measured",
        )
        ax.set_xscale("log")
        ax.set_yscale("log")
        if report.fitted_rate is not None:
            la = np.log(axis[keep])
            anchor = np.mean(np.log(means[keep]) - report.fitted_rate * la)
            ax.plot(
                axis[keep],
                np.exp(report.fitted_rate * la + anchor),
                "--",
                label=f"slope {report.fitted_rate:.3f}",
            )
    else:
        ax.plot(axis, means, "o-", label="measured")
    ax.set_xlabel(report.axis_name)
    ax.set_ylabel("error")
    ax.set_title(report.kind)
    ax.legend(loc="best")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_FIG_METADATA)
    plt.close(fig)


def render_paths_figure(
    path: str | Path,
    times: np.ndarray,
    values: np.ndarray,
    title: str,
    coord: int = 0,
) -> None:
    """First-coordinate traces of a handful of paths (up to 8)."""
    vals = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=100)
    for p in range(min(vals.shape[0], 8)):
        ax.plot(times, vals[p, :, coord], lw=0.9)
    ax.set_xlabel("t")
    ax.set_ylabel(f"x[{coord}]")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_FIG_METADATA)
    plt.close(fig)


# -- path dumps ------------------------------------------------------------------

def write_path_csv(
    path: str | Path,
    times: np.ndarray,
    x_values: np.ndarray,
    phi1: np.ndarray,
    y_values: np.ndarray | None = None,
    phi2: np.ndarray | None = None,
) -> None:
    """One path per file: time, state coordinates, cumulative reflection.

    ``phi1``/``phi2`` are cumulative reflection paths aligned with the
    grid (zero row first).
    """
    times = np.asarray(times, dtype=float)
    x_values = np.asarray(x_values, dtype=float)
    cols: list[tuple[str, np.ndarray]] = [("t", times)]
    for j in range(x_values.shape[1]):
        cols.append((f"x_{j + 1}", x_values[:, j]))
    for j in range(phi1.shape[1]):
        cols.append((f"phi_{j + 1}", phi1[:, j]))
    if y_values is not None:
        for j in range(y_values.shape[1]):
            cols.append((f"y_{j + 1}", y_values[:, j]))
        for j in range(phi2.shape[1]):
            cols.append((f"psi_{j + 1}", phi2[:, j]))
    header = ",".join(name for name, _ in cols)
    lines = [header]
    for k in range(times.size):
        lines.append(",".join(format_float(arr[k]) for _, arr in cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
