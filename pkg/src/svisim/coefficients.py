"""Coefficient containers, the control process and structural probes.

Coefficient callables are path functionals: they receive the path up to
the current grid time through a :class:`PathView` and must only read
that view (frozen-path evaluation).  All callables are vectorized over a
leading batch axis; states have shape ``(n, d)`` and diffusion outputs
``(n, d, m)`` against a driver of width ``m``.

Structural conditions (monotone drift, Hölder moduli) cannot be checked
symbolically, so they are probed: sampled violations are reported with
the worst case found and a pass flag against a declared envelope.
"""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "PathView",
    "constant_view",
    "view_of_values",
    "XMeta",
    "YMeta",
    "XCoefficients",
    "YCoefficients",
    "ControlProcess",
    "ProbeReport",
    "probe_monotone_drift",
    "probe_holder",
    "pair_grid_sampler",
    "pair_random_sampler",
]


@dataclass(frozen=True)
class PathView:
    """Read-only window onto a batch of paths up to grid index ``k``.

    ``state`` is the current value (n, d); ``history`` holds rows
    0..k (n, k + 1, d).  ``running_max`` is defined for scalar paths
    only and raises otherwise.
    """

    t: float
    k: int
    state: np.ndarray
    sup_norm: np.ndarray
    history: np.ndarray
    _running_max: np.ndarray | None = field(default=None, repr=False)

    @property
    def running_max(self) -> np.ndarray:
        if self._running_max is None:
            raise ValueError("running_max is defined for scalar paths only")
        return self._running_max


def constant_view(t: float, states: np.ndarray) -> PathView:
    """View of freshly started constant paths (history = the state itself)."""
    states = np.asarray(states, dtype=float)
    if states.ndim != 2:
        raise ValueError("states must have shape (n, d)")
    norms = np.sqrt(np.sum(states * states, axis=1))
    rm = states[:, 0].copy() if states.shape[1] == 1 else None
    return PathView(
        t=t, k=0, state=states, sup_norm=norms, history=states[:, None, :], _running_max=rm
    )


def view_of_values(t: float, k: int, values: np.ndarray, rm: np.ndarray, sn: np.ndarray) -> PathView:
    """View at index k of a precomputed batch (n, K + 1, d) with cumulative stats."""
    d = values.shape[2]
    return PathView(
        t=t,
        k=k,
        state=values[:, k, :],
        sup_norm=sn[:, k],
        history=values[:, : k + 1, :],
        _running_max=rm[:, k] if d == 1 else None,
    )


@dataclass(frozen=True)
class XMeta:
    """Declared regularity of primary-state coefficients.

    ``alpha`` is the extra Hölder smoothness of the drift beyond 1/2;
    the moduli bound drift and diffusion increments on the probe box.
    """

    alpha: float = 0.0
    drift_modulus: float = np.inf
    diff_w_modulus: float = np.inf
    diff_b_modulus: float = np.inf

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 0.5):
            raise ValueError("alpha must lie in [0, 1/2]")


@dataclass(frozen=True)
class YMeta:
    """Declared regularity of secondary-state coefficients."""

    lipschitz: float = np.inf
    gamma: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 0.5):
            raise ValueError("gamma must lie in [0, 1/2]")


@dataclass(frozen=True)
class XCoefficients:
    """Drift and two-driver diffusion of the primary state.

    drift(t, xv) -> (n, dim); diff_w(t, xv) -> (n, dim, dim_w);
    diff_b(t, xv) -> (n, dim, dim_b).
    """

    dim: int
    dim_w: int
    dim_b: int
    drift: Callable[[float, PathView], np.ndarray]
    diff_w: Callable[[float, PathView], np.ndarray]
    diff_b: Callable[[float, PathView], np.ndarray]
    meta: XMeta = field(default_factory=XMeta)


@dataclass(frozen=True)
class YCoefficients:
    """Drift and single-driver diffusion of the secondary state.

    drift(t, xv, yv, q) -> (n, dim); diff_b(t, xv, yv, q) -> (n, dim, dim_b).
    ``q`` is the scalar control value at the current time.
    """

    dim: int
    dim_b: int
    drift: Callable[[float, PathView, PathView, float], np.ndarray]
    diff_b: Callable[[float, PathView, PathView, float], np.ndarray]
    meta: YMeta = field(default_factory=YMeta)


@dataclass(frozen=True)
class ControlProcess:
    """Left-continuous piecewise-constant control confined to [lam_min, lam_max].

    ``values[i]`` applies on the interval ending at ``breakpoints[i]``
    (inclusive); ``values[-1]`` applies after the last breakpoint.  The
    value over a step (t_k, t_{k+1}] is frozen at the left endpoint by
    the solver, matching non-anticipativity.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    lam_min: float
    lam_max: float
    horizon: float | None = None

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(bp) + 1:
            raise ValueError("need exactly len(breakpoints) + 1 values")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if bp and bp[0] <= 0.0:
            raise ValueError("breakpoints must be positive times")
        if not (self.lam_min <= self.lam_max):
            raise ValueError("lam_min must not exceed lam_max")
        for v in vals:
            if not (self.lam_min <= v <= self.lam_max):
                raise ValueError(f"control value {v} outside [{self.lam_min}, {self.lam_max}]")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, lam_min: float | None = None, lam_max: float | None = None):
        lo = value if lam_min is None else lam_min
        hi = value if lam_max is None else lam_max
        return cls(breakpoints=(), values=(value,), lam_min=lo, lam_max=hi)

    def value(self, t: float) -> float:
        if t < 0.0:
            raise ValueError("control evaluated at a negative time")
        if self.horizon is not None and t > self.horizon * (1.0 + 1e-12):
            raise ValueError(f"control evaluated at t={t} beyond horizon {self.horizon}")
        return self.values[bisect_left(self.breakpoints, t)]

    def values_on_grid(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if np.any(times < 0.0):
            raise ValueError("control evaluated at a negative time")
        if self.horizon is not None and np.any(times > self.horizon * (1.0 + 1e-12)):
            raise ValueError("control evaluated beyond its horizon")
        idx = np.searchsorted(np.asarray(self.breakpoints), times, side="left")
        return np.asarray(self.values)[idx]


@dataclass(frozen=True)
class ProbeReport:
    """Sampled check of a structural condition."""

    samples: int
    worst_violation: float
    estimated_modulus: float
    passed: bool


def pair_grid_sampler(lo: float, hi: float, points: int) -> Callable[[int], tuple]:
    """All ordered pairs of a 1-d grid; brute-force modulus estimation.

    The returned sampler ignores its count argument: the grid fixes the
    sample. States come back with shape (m, 1).
    """
    grid = np.linspace(lo, hi, points)

    def sampler(_count: int):
        a, b = np.meshgrid(grid, grid, indexing="ij")
        keep = a.ravel() != b.ravel()
        return a.ravel()[keep][:, None], b.ravel()[keep][:, None]

    return sampler


def pair_random_sampler(lo, hi, dim: int, seed: int) -> Callable[[int], tuple]:
    """Uniform pairs in a box, deterministic for a given seed."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,))

    def sampler(count: int):
        rng = np.random.default_rng(seed)
        a = rng.uniform(lo, hi, size=(count, dim))
        b = rng.uniform(lo, hi, size=(count, dim))
        return a, b

    return sampler


def probe_monotone_drift(
    coeffs: XCoefficients,
    sampler: Callable[[int], tuple],
    count: int,
    t: float = 0.0,
    tol: float = 1e-10,
) -> ProbeReport:
    """Sample <drift(x) - drift(x'), x - x'> and report the worst case.

    Passes iff the worst sampled inner product stays at or below ``tol``.
    States are probed as constant paths, so path-dependent drifts see a
    flat history.
    """
    a, b = sampler(count)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = np.asarray(coeffs.drift(t, constant_view(t, a)), dtype=float)
    db = np.asarray(coeffs.drift(t, constant_view(t, b)), dtype=float)
    inner = np.sum((da - db) * (a - b), axis=1)
    worst = float(np.max(inner)) if inner.size else 0.0
    return ProbeReport(
        samples=int(a.shape[0]),
        worst_violation=worst,
        estimated_modulus=0.0,
        passed=worst <= tol,
    )


def probe_holder(
    fn: Callable[[np.ndarray], np.ndarray],
    exponent: float,
    sampler: Callable[[int], tuple],
    count: int,
    envelope: float | None = None,
    slack_factor: float = 1.01,
) -> ProbeReport:
    """Estimate the Hölder modulus of ``fn`` at the given exponent.

    The estimate is ``max |fn(x) - fn(x')| / |x - x'|^exponent`` over the
    sampled pairs (norms are Euclidean over trailing axes).  With an
    ``envelope`` declared, the probe passes iff the estimate does not
    exceed ``envelope * slack_factor``; otherwise it passes iff finite.
    """
    if exponent <= 0.0:
        raise ValueError("exponent must be positive")
    a, b = sampler(count)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    fa = np.asarray(fn(a), dtype=float)
    fb = np.asarray(fn(b), dtype=float)
    num = np.sqrt(np.sum((fa - fb).reshape(fa.shape[0], -1) ** 2, axis=1))
    den = np.sqrt(np.sum((a - b).reshape(a.shape[0], -1) ** 2, axis=1)) ** exponent
    keep = den > 0.0
    ratios = num[keep] / den[keep]
    est = float(np.max(ratios)) if ratios.size else 0.0
    if envelope is None:
        passed = bool(np.isfinite(est))
        worst = 0.0
    else:
        bound = envelope * slack_factor
        passed = bool(np.isfinite(est) and est <= bound)
        worst = max(0.0, est - bound)
    return ProbeReport(
        samples=int(a.shape[0]),
        worst_violation=worst,
        estimated_modulus=est,
        passed=passed,
    )
