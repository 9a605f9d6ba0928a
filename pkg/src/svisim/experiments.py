"""Convergence, stability and perturbation experiments.

Every experiment follows the same discipline:

* paths are fanned out over fixed-size blocks; each block derives its
  own substreams from (seed, path index, driver tag), so results do not
  depend on how many workers ran or how paths were batched;
* compared runs consume identical driver increments (refinement ladders
  are coarsened from one finest draw, sweeps reuse one draw per path);
  reports carry a checksum of the increments actually consumed;
* per-path metrics are assembled in path order and reduced with a
  fixed-order pairwise summation, so reports are bit-identical across
  reruns and worker counts.

Monotone trends are judged against Monte Carlo noise: "strictly
decreasing" means each successive mean undercuts the previous one by at
least twice the combined standard error, "nonincreasing" means it does
not exceed the previous one by more than that.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coefficients import XCoefficients, constant_view
from .exceptions import NumericalError, PerturbationRejected
from .models import ModelInstance
from .paths import (
    MeshGrid,
    SeedSpec,
    dyadic_ladder,
    generate_increment_block,
)
from .solver import (
    ProxStep,
    SchemeChoice,
    Yosida,
    complementarity_slack_batch,
    decomposition_residual_x,
    domain_violation_counts,
    solve_x_batch,
    solve_y_batch,
)

__all__ = [
    "MCStats",
    "mc_stats",
    "pairwise_sum",
    "RateFit",
    "fit_rate",
    "ExperimentReport",
    "PerturbationSpec",
    "cauchy_refinement",
    "yosida_sweep",
    "perturbation_sweep",
    "simulate_paths",
    "SimulateResult",
    "BLOCK_SIZE",
]

BLOCK_SIZE = 1024  # paths per work unit; fixed so batching never depends on worker count


def pairwise_sum(values: np.ndarray) -> float:
    """Sum with a fixed pairwise association, independent of upstream chunking."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            body, tail = v[:-1], v[-1:]
        else:
            body, tail = v, v[:0]
        v = body[0::2] + body[1::2]
        if tail.size:
            v = np.concatenate([v, tail])
    return float(v[0])


@dataclass(frozen=True)
class MCStats:
    """Monte Carlo mean with its sampling uncertainty."""

    mean: float
    stderr: float
    ci_lo: float
    ci_hi: float
    n: int


def mc_stats(samples: np.ndarray) -> MCStats:
    """Mean, standard error and 95% CI of a sample set (needs >= 2 points)."""
    v = np.asarray(samples, dtype=np.float64).ravel()
    if v.size < 2:
        raise ValueError("mc_stats needs at least 2 samples")
    # states can stay finite while squared diagnostics overflow; refuse to
    # aggregate such samples so summaries never contain NaN or Infinity
    if not np.all(np.isfinite(v)):
        raise NumericalError("non-finite Monte Carlo samples")
    mean = pairwise_sum(v) / v.size
    with np.errstate(over="ignore"):
        var = pairwise_sum((v - mean) ** 2) / (v.size - 1)
        stderr = float(np.sqrt(var / v.size))
    if not (np.isfinite(mean) and np.isfinite(stderr)):
        raise NumericalError("Monte Carlo moments overflow")
    half = 1.96 * stderr
    return MCStats(mean=float(mean), stderr=stderr, ci_lo=float(mean - half), ci_hi=float(mean + half), n=int(v.size))


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log(error) against log(axis)."""

    rate: float
    intercept: float
    r2: float
    points: int


def fit_rate(axis, errors) -> RateFit | None:
    """Log-log rate fit; drops nonpositive entries, None if fewer than 2 remain."""
    a = np.asarray(axis, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = (a > 0.0) & (e > 0.0) & np.isfinite(a) & np.isfinite(e)
    a, e = a[keep], e[keep]
    if a.size < 2:
        return None
    la, le = np.log(a), np.log(e)
    slope, intercept = np.polyfit(la, le, 1)
    pred = slope * la + intercept
    ss_res = float(np.sum((le - pred) ** 2))
    ss_tot = float(np.sum((le - np.mean(le)) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return RateFit(rate=float(slope), intercept=float(intercept), r2=float(r2), points=int(a.size))


def _combined_stderr(s1: MCStats, s2: MCStats) -> float:
    return float(np.sqrt(s1.stderr**2 + s2.stderr**2))


def trend_strictly_decreasing(stats: list[MCStats]) -> bool:
    """Each successive mean undercuts the previous by > 2 combined stderr."""
    for s1, s2 in zip(stats, stats[1:]):
        if not (s2.mean < s1.mean - 2.0 * _combined_stderr(s1, s2)):
            return False
    return True


def trend_nonincreasing(stats: list[MCStats]) -> bool:
    """Each successive mean stays within 2 combined stderr above the previous."""
    for s1, s2 in zip(stats, stats[1:]):
        if not (s2.mean <= s1.mean + 2.0 * _combined_stderr(s1, s2)):
            return False
    return True


@dataclass(frozen=True)
class ExperimentReport:
    """One experiment axis with per-point error statistics."""

    kind: str
    axis_name: str
    axis: tuple[float, ...]
    stats: tuple[MCStats, ...]
    n_paths: int
    fitted_rate: float | None
    fit_r2: float | None
    extras: dict = field(default_factory=dict)
    trend: dict = field(default_factory=dict)


def _map_path_blocks(
    n_paths: int,
    compute: Callable[[int, int], dict[str, np.ndarray]],
    threads: int = 1,
) -> dict[str, np.ndarray]:
    """Run ``compute(lo, hi)`` over fixed blocks; assemble outputs in path order."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    blocks = [(lo, min(lo + BLOCK_SIZE, n_paths)) for lo in range(0, n_paths, BLOCK_SIZE)]
    if threads <= 1 or len(blocks) == 1:
        results = [compute(lo, hi) for lo, hi in blocks]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(lambda span: compute(*span), blocks))
    out: dict[str, np.ndarray] = {}
    for (lo, hi), res in zip(blocks, results):
        for key, arr in res.items():
            arr = np.asarray(arr)
            buf = out.get(key)
            if buf is None:
                buf = np.empty((n_paths,) + arr.shape[1:], dtype=arr.dtype)
                out[key] = buf
            buf[lo:hi] = arr
    return out


def _sup_gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pathwise sup over the grid of the Euclidean gap between two batches."""
    gap = a - b
    return np.max(np.sqrt(np.sum(gap * gap, axis=2)), axis=1)


def _checksum_cols(w: np.ndarray, b: np.ndarray) -> dict[str, np.ndarray]:
    return {
        "cksum_w": np.sum(w, axis=(1, 2)),
        "cksum_b": np.sum(b, axis=(1, 2)),
    }


def _finalize_checksums(cols: dict[str, np.ndarray]) -> dict[str, float]:
    return {
        "w": pairwise_sum(cols.pop("cksum_w")),
        "b": pairwise_sum(cols.pop("cksum_b")),
    }


# -- refinement ---------------------------------------------------------------

def cauchy_refinement(
    model: ModelInstance,
    scheme: SchemeChoice,
    levels,
    n_paths: int,
    seed: int | SeedSpec,
    horizon: float = 1.0,
    threads: int = 1,
) -> ExperimentReport:
    """Successive-refinement gaps of the primary state on a dyadic ladder.

    The error at level L is the Monte Carlo mean over paths of
    ``sup_k |X^(L) - X^(2L)|`` at the shared grid points, with both runs
    driven by the same Brownian path (coarse increments are pairwise
    sums of the fine ones).
    """
    lvls = [int(v) for v in levels]
    if len(lvls) < 1:
        raise ValueError("at least one refinement level is required")
    if any(l2 <= l1 for l1, l2 in zip(lvls, lvls[1:])):
        raise ValueError("levels must be strictly increasing")
    for lv in lvls:
        if lv < 1 or (lv & (lv - 1)) != 0:
            raise ValueError(f"levels must be dyadic (powers of two), got {lv}")
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(seed)
    needed = sorted({*lvls, *(2 * lv for lv in lvls)})
    finest = needed[-1]
    grid_f = MeshGrid(horizon, finest)
    grids = {lv: MeshGrid(horizon, lv) for lv in needed}

    def compute(lo: int, hi: int) -> dict[str, np.ndarray]:
        w_f = generate_increment_block(grid_f, model.x.dim_w, seed, lo, hi, "w")
        b_f = generate_increment_block(grid_f, model.x.dim_b, seed, lo, hi, "b")
        w_lad = dyadic_ladder(w_f, finest, needed)
        b_lad = dyadic_ladder(b_f, finest, needed)
        sols = {
            lv: solve_x_batch(model.x, model.pot_x, scheme, grids[lv], w_lad[lv], b_lad[lv], model.x0)[0]
            for lv in needed
        }
        out: dict[str, np.ndarray] = {}
        for lv in lvls:
            out[f"err_{lv}"] = _sup_gap(sols[lv], sols[2 * lv][:, ::2, :])
        out.update(_checksum_cols(w_f, b_f))
        return out

    cols = _map_path_blocks(n_paths, compute, threads)
    checksums = _finalize_checksums(cols)
    stats = tuple(mc_stats(cols[f"err_{lv}"]) for lv in lvls)
    dts = [horizon / lv for lv in lvls]
    fit = fit_rate(dts, [s.mean for s in stats])
    return ExperimentReport(
        kind="cauchy",
        axis_name="level",
        axis=tuple(float(lv) for lv in lvls),
        stats=stats,
        n_paths=int(n_paths),
        fitted_rate=None if fit is None else fit.rate,
        fit_r2=None if fit is None else fit.r2,
        extras={"dt": tuple(dts), "driver_checksum": checksums},
        trend={
            "strictly_decreasing": trend_strictly_decreasing(list(stats)),
            "nonincreasing": trend_nonincreasing(list(stats)),
        },
    )


# -- penalization sweep ---------------------------------------------------------

def yosida_sweep(
    model: ModelInstance,
    n_values,
    n_paths: int,
    seed: int | SeedSpec,
    grid: MeshGrid,
    threads: int = 1,
) -> ExperimentReport:
    """Gap between the penalized scheme and the prox reference, per index n.

    Both runs share the grid and the Brownian path; the error at n is
    the mean pathwise sup gap.  Scalar states only.
    """
    if model.dim_x != 1:
        raise ValueError("the penalization sweep is restricted to 1-d primary states")
    ns = [int(v) for v in n_values]
    if len(ns) < 1:
        raise ValueError("at least one penalization index is required")
    if any(v < 1 for v in ns):
        raise ValueError("penalization indices must be positive integers")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("penalization indices must be strictly increasing")
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(seed)

    def compute(lo: int, hi: int) -> dict[str, np.ndarray]:
        w = generate_increment_block(grid, model.x.dim_w, seed, lo, hi, "w")
        b = generate_increment_block(grid, model.x.dim_b, seed, lo, hi, "b")
        ref, _ = solve_x_batch(model.x, model.pot_x, ProxStep(), grid, w, b, model.x0)
        out: dict[str, np.ndarray] = {}
        for nv in ns:
            vals, _ = solve_x_batch(model.x, model.pot_x, Yosida(nv), grid, w, b, model.x0)
            out[f"err_{nv}"] = _sup_gap(vals, ref)
            dist = model.pot_x.domain_distance(vals)
            out[f"dist_{nv}"] = np.max(dist, axis=1)
        out.update(_checksum_cols(w, b))
        return out

    cols = _map_path_blocks(n_paths, compute, threads)
    checksums = _finalize_checksums(cols)
    stats = tuple(mc_stats(cols[f"err_{nv}"]) for nv in ns)
    dist_stats = tuple(mc_stats(cols[f"dist_{nv}"]) for nv in ns)
    fit = fit_rate(ns, [s.mean for s in stats])
    return ExperimentReport(
        kind="yosida_sweep",
        axis_name="n",
        axis=tuple(float(v) for v in ns),
        stats=stats,
        n_paths=int(n_paths),
        fitted_rate=None if fit is None else fit.rate,
        fit_r2=None if fit is None else fit.r2,
        extras={
            "domain_distance_mean": tuple(s.mean for s in dist_stats),
            "domain_distance_stderr": tuple(s.stderr for s in dist_stats),
            "driver_checksum": checksums,
        },
        trend={
            "strictly_decreasing": trend_strictly_decreasing(list(stats)),
            "nonincreasing": trend_nonincreasing(list(stats)),
        },
    )


# -- perturbation ---------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationSpec:
    """A family of coefficient perturbations indexed by epsilon.

    Modes: ``drift_shift`` adds ``eps * shift`` to the drift (default
    shift is the constant ones vector); ``diffusion_scale`` multiplies
    both diffusion legs by ``1 + eps``; ``custom`` delegates to a
    factory ``eps -> XCoefficients`` with a declared pointwise
    convergence modulus.
    """

    mode: str
    epsilons: tuple[float, ...]
    shift: Callable[[float, object], np.ndarray] | None = None
    custom: Callable[[float], XCoefficients] | None = None
    modulus: float | None = None

    def __post_init__(self):
        if self.mode not in ("drift_shift", "diffusion_scale", "custom"):
            raise ValueError(f"unknown perturbation mode {self.mode!r}")
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ValueError("at least one epsilon is required")
        if any(e < 0.0 for e in eps):
            raise ValueError("epsilons must be nonnegative")
        if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if self.mode == "custom" and (self.custom is None or self.modulus is None):
            raise ValueError("custom mode needs a factory and a declared modulus")
        object.__setattr__(self, "epsilons", eps)

    def perturbed(self, base: XCoefficients, eps: float) -> XCoefficients:
        if self.mode == "custom":
            return self.custom(eps)
        if self.mode == "drift_shift":
            shift = self.shift if self.shift is not None else (
                lambda _t, xv: np.ones_like(xv.state)
            )

            def drift(t: float, xv) -> np.ndarray:
                return np.asarray(base.drift(t, xv), dtype=float) + eps * np.asarray(
                    shift(t, xv), dtype=float
                )

            return XCoefficients(
                dim=base.dim, dim_w=base.dim_w, dim_b=base.dim_b,
                drift=drift, diff_w=base.diff_w, diff_b=base.diff_b, meta=base.meta,
            )

        def scale_w(t: float, xv) -> np.ndarray:
            return (1.0 + eps) * np.asarray(base.diff_w(t, xv), dtype=float)

        def scale_b(t: float, xv) -> np.ndarray:
            return (1.0 + eps) * np.asarray(base.diff_b(t, xv), dtype=float)

        return XCoefficients(
            dim=base.dim, dim_w=base.dim_w, dim_b=base.dim_b,
            drift=base.drift, diff_w=scale_w, diff_b=scale_b, meta=base.meta,
        )


def _validate_perturbation(
    model: ModelInstance, pert: PerturbationSpec, seed: SeedSpec
) -> None:
    """Pointwise convergence and structure of the perturbed family.

    Raises :class:`PerturbationRejected` if the perturbed drift loses
    monotonicity on sampled pairs or drifts away from the base faster
    than the declared modulus allows.
    """
    from .coefficients import pair_random_sampler, probe_monotone_drift

    rng = seed.generator(0, "probe")
    states = model.pot_x.sample_domain(rng, 256, radius=2.0)
    view = constant_view(0.0, states)
    base_drift = np.asarray(model.x.drift(0.0, view), dtype=float)
    base_w = np.asarray(model.x.diff_w(0.0, view), dtype=float)
    base_b = np.asarray(model.x.diff_b(0.0, view), dtype=float)

    if pert.mode == "drift_shift":
        shift = pert.shift if pert.shift is not None else (lambda _t, xv: np.ones_like(xv.state))
        modulus = float(np.max(np.sqrt(np.sum(np.asarray(shift(0.0, view), dtype=float) ** 2, axis=1))))
    elif pert.mode == "diffusion_scale":
        norm_w = np.sqrt(np.sum(base_w.reshape(base_w.shape[0], -1) ** 2, axis=1))
        norm_b = np.sqrt(np.sum(base_b.reshape(base_b.shape[0], -1) ** 2, axis=1))
        modulus = float(np.max(norm_w + norm_b))
    else:
        modulus = float(pert.modulus)

    sampler = pair_random_sampler(
        np.min(states, axis=0), np.max(states, axis=0), model.dim_x, seed=206
    )
    for eps in pert.epsilons:
        cand = pert.perturbed(model.x, eps)
        d = np.asarray(cand.drift(0.0, view), dtype=float)
        sw = np.asarray(cand.diff_w(0.0, view), dtype=float)
        sb = np.asarray(cand.diff_b(0.0, view), dtype=float)
        gap = float(np.max(np.sqrt(np.sum((d - base_drift) ** 2, axis=1))))
        gap += float(np.max(np.abs(sw - base_w))) + float(np.max(np.abs(sb - base_b)))
        if gap > modulus * eps * (1.0 + 1e-9) + 1e-15:
            raise PerturbationRejected(
                f"perturbed coefficients at eps={eps} moved {gap:.3g}, "
                f"beyond the declared modulus {modulus:.3g} * eps"
            )
        report = probe_monotone_drift(cand, sampler, 512)
        if not report.passed:
            raise PerturbationRejected(
                f"perturbed drift at eps={eps} lost monotonicity "
                f"(worst violation {report.worst_violation:.3g})",
                report=report,
            )


def perturbation_sweep(
    model: ModelInstance,
    pert: PerturbationSpec,
    scheme: SchemeChoice,
    grid: MeshGrid,
    n_paths: int,
    seed: int | SeedSpec,
    eta: float = 1e-2,
    threads: int = 1,
) -> tuple[ExperimentReport, ExperimentReport | None]:
    """Coupled response of the system to vanishing coefficient perturbations.

    Base and perturbed runs share every driver increment.  The primary
    report tracks ``E sup |X^eps - X|^2`` per epsilon (first-moment
    columns ride along in extras); the secondary report, when the model
    has a second state, adds the exceedance frequency
    ``P(sup |Y^eps - Y| > eta)``.
    """
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(seed)
    _validate_perturbation(model, pert, seed)
    eps_list = pert.epsilons
    perturbed = {eps: pert.perturbed(model.x, eps) for eps in eps_list}
    has_y = model.has_y

    def compute(lo: int, hi: int) -> dict[str, np.ndarray]:
        w = generate_increment_block(grid, model.x.dim_w, seed, lo, hi, "w")
        b = generate_increment_block(grid, model.x.dim_b, seed, lo, hi, "b")
        base_x, _ = solve_x_batch(model.x, model.pot_x, scheme, grid, w, b, model.x0)
        if has_y:
            base_y, _ = solve_y_batch(
                model.y, model.pot_y, scheme, grid, base_x, model.control, b, model.y0
            )
        out: dict[str, np.ndarray] = {}
        for i, eps in enumerate(eps_list):
            px, _ = solve_x_batch(perturbed[eps], model.pot_x, scheme, grid, w, b, model.x0)
            gx = _sup_gap(px, base_x)
            out[f"x_abs_{i}"] = gx
            out[f"x_sq_{i}"] = gx * gx
            if has_y:
                py, _ = solve_y_batch(
                    model.y, model.pot_y, scheme, grid, px, model.control, b, model.y0
                )
                gy = _sup_gap(py, base_y)
                out[f"y_abs_{i}"] = gy
                out[f"y_sq_{i}"] = gy * gy
                out[f"y_exc_{i}"] = (gy > eta).astype(np.float64)
        out.update(_checksum_cols(w, b))
        return out

    cols = _map_path_blocks(n_paths, compute, threads)
    checksums = _finalize_checksums(cols)

    x_stats = tuple(mc_stats(cols[f"x_sq_{i}"]) for i in range(len(eps_list)))
    x_abs = tuple(mc_stats(cols[f"x_abs_{i}"]) for i in range(len(eps_list)))
    fit = fit_rate(eps_list, [s.mean for s in x_stats])
    x_report = ExperimentReport(
        kind="perturbation_x",
        axis_name="eps",
        axis=eps_list,
        stats=x_stats,
        n_paths=int(n_paths),
        fitted_rate=None if fit is None else fit.rate,
        fit_r2=None if fit is None else fit.r2,
        extras={
            "abs_mean": tuple(s.mean for s in x_abs),
            "abs_stderr": tuple(s.stderr for s in x_abs),
            "driver_checksum": checksums,
        },
        trend={"strictly_decreasing": trend_strictly_decreasing(list(x_stats))},
    )
    if not has_y:
        return x_report, None

    y_stats = tuple(mc_stats(cols[f"y_sq_{i}"]) for i in range(len(eps_list)))
    y_abs = tuple(mc_stats(cols[f"y_abs_{i}"]) for i in range(len(eps_list)))
    exc = tuple(float(pairwise_sum(cols[f"y_exc_{i}"]) / n_paths) for i in range(len(eps_list)))
    exc_trend = all(b2 <= b1 + 1e-12 for b1, b2 in zip(exc, exc[1:]))
    y_fit = fit_rate(eps_list, [s.mean for s in y_stats])
    y_report = ExperimentReport(
        kind="perturbation_y",
        axis_name="eps",
        axis=eps_list,
        stats=y_stats,
        n_paths=int(n_paths),
        fitted_rate=None if y_fit is None else y_fit.rate,
        fit_r2=None if y_fit is None else y_fit.r2,
        extras={
            "abs_mean": tuple(s.mean for s in y_abs),
            "abs_stderr": tuple(s.stderr for s in y_abs),
            "exceedance": exc,
            "eta": float(eta),
            "driver_checksum": checksums,
        },
        trend={
            "strictly_decreasing": trend_strictly_decreasing(list(y_stats)),
            "exceedance_nonincreasing": bool(exc_trend),
        },
    )
    return x_report, y_report


# -- plain simulation -----------------------------------------------------------

@dataclass(frozen=True)
class SimulateResult:
    """Per-path summaries plus aggregate diagnostics of a simulation run."""

    model_name: str
    grid: MeshGrid
    n_paths: int
    rows: dict[str, np.ndarray]
    summary: dict


def simulate_paths(
    model: ModelInstance,
    scheme: SchemeChoice,
    grid: MeshGrid,
    n_paths: int,
    seed: int | SeedSpec,
    threads: int = 1,
    n_test_paths: int = 20,
    comp_tol: float | None = None,
    boundary_tol: float = 1e-9,
) -> SimulateResult:
    """Simulate the full system and collect solution diagnostics per path.

    Diagnostics: terminal states, pathwise sup norms, reflection total
    variation, domain violations, the variational-inequality window
    slack against shared random in-domain test paths, boundary activity
    screens and the recomputed per-step decomposition residual.
    """
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(seed)
    if comp_tol is None:
        comp_tol = 5.0 * float(np.sqrt(grid.dt))
    test_rng = seed.generator(0, "test")
    test_points = model.pot_x.sample_domain(test_rng, int(n_test_paths), radius=2.0)
    has_y = model.has_y

    def compute(lo: int, hi: int) -> dict[str, np.ndarray]:
        w = generate_increment_block(grid, model.x.dim_w, seed, lo, hi, "w")
        b = generate_increment_block(grid, model.x.dim_b, seed, lo, hi, "b")
        xv, xphi = solve_x_batch(model.x, model.pot_x, scheme, grid, w, b, model.x0)
        out: dict[str, np.ndarray] = {}
        for j in range(model.dim_x):
            out[f"x_T_{j + 1}"] = xv[:, -1, j]
        out["sup_x"] = np.max(np.sqrt(np.sum(xv * xv, axis=2)), axis=1)
        out["tv_phi1"] = np.sum(np.sqrt(np.sum(xphi * xphi, axis=2)), axis=1)
        out["domain_violations"] = domain_violation_counts(model.pot_x, xv).astype(np.float64)
        if model.pot_x.is_indicator:
            out["comp_slack"] = complementarity_slack_batch(
                xv, xphi, model.pot_x, test_points, grid.dt
            )
            mags = np.sqrt(np.sum(xphi * xphi, axis=2))
            active = mags > boundary_tol
            land = xv[:, 1:, :]
            dist = model.pot_x.boundary_distance(land)
            from .solver import _cone_slack_grid

            cone = _cone_slack_grid(model.pot_x, land, xphi)
            dist_bad = np.where(active, dist, 0.0)
            cone_bad = np.where(active, cone, 0.0)
            out["boundary_dist"] = np.max(dist_bad, axis=1)
            out["boundary_cone_slack"] = np.max(cone_bad, axis=1)
        out["decomp_resid"] = np.full(
            hi - lo, decomposition_residual_x(model.x, grid, w, b, xv, xphi)
        )
        if has_y:
            yv, yphi = solve_y_batch(
                model.y, model.pot_y, scheme, grid, xv, model.control, b, model.y0
            )
            for j in range(model.dim_y):
                out[f"y_T_{j + 1}"] = yv[:, -1, j]
            out["sup_y"] = np.max(np.sqrt(np.sum(yv * yv, axis=2)), axis=1)
            out["tv_phi2"] = np.sum(np.sqrt(np.sum(yphi * yphi, axis=2)), axis=1)
        out.update(_checksum_cols(w, b))
        return out

    cols = _map_path_blocks(n_paths, compute, threads)
    checksums = _finalize_checksums(cols)
    summary: dict = {"driver_checksum": checksums, "scheme": type(scheme).__name__}
    for j in range(model.dim_x):
        s = mc_stats(cols[f"x_T_{j + 1}"])
        summary[f"x_T_{j + 1}"] = {"mean": s.mean, "stderr": s.stderr, "ci_lo": s.ci_lo, "ci_hi": s.ci_hi}
    if has_y:
        for j in range(model.dim_y):
            s = mc_stats(cols[f"y_T_{j + 1}"])
            summary[f"y_T_{j + 1}"] = {"mean": s.mean, "stderr": s.stderr, "ci_lo": s.ci_lo, "ci_hi": s.ci_hi}
    summary["sup_x_mean"] = mc_stats(cols["sup_x"]).mean
    summary["tv_phi1_mean"] = mc_stats(cols["tv_phi1"]).mean
    summary["domain_violation_paths"] = int(np.sum(cols["domain_violations"] > 0))
    summary["decomposition_residual"] = float(np.max(cols["decomp_resid"]))
    if "comp_slack" in cols:
        summary["complementarity"] = {
            "max_slack": float(np.max(cols["comp_slack"])),
            "tol": float(comp_tol),
            "passed": bool(np.max(cols["comp_slack"]) <= comp_tol),
        }
        summary["boundary_activity"] = {
            "max_offending_distance": float(np.max(cols["boundary_dist"])),
            "max_cone_slack": float(np.max(cols["boundary_cone_slack"])),
            "tol": float(boundary_tol),
            "passed": bool(
                np.max(cols["boundary_dist"]) <= boundary_tol
                and np.max(cols["boundary_cone_slack"]) <= boundary_tol
            ),
        }
    return SimulateResult(
        model_name=model.name,
        grid=grid,
        n_paths=int(n_paths),
        rows=cols,
        summary=summary,
    )
