"""Time grids, sample paths and correlated Brownian drivers.

Randomness discipline: every path owns independent substreams keyed by
``(master seed, path index, driver tag)``.  The derivation is a pure
function of that triple, so regenerating a path's increments yields the
same bits regardless of run, batch shape or worker count.

Refinement discipline: increments for a dyadic ladder of grids are
generated once at the finest level and coarsened by summing adjacent
pairs, one halving at a time.  Coarse increments are therefore exactly
(bit for bit) the pairwise sums of the fine ones.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MeshGrid",
    "SamplePath",
    "CorrelationSpec",
    "SeedSpec",
    "generate_increments",
    "generate_increment_block",
    "compose_driver",
    "coarsen_increments",
    "dyadic_ladder",
    "cumulative_running_max",
    "cumulative_sup_norm",
]

_TAG_IDS = {"w": 0, "b": 1, "probe": 2, "test": 3}
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class MeshGrid:
    """Uniform grid on [0, horizon] with ``steps`` intervals."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (self.horizon > 0.0 and np.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")
        if int(self.steps) < 1:
            raise ValueError("steps must be >= 1")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def refine(self, factor: int) -> "MeshGrid":
        if int(factor) < 1:
            raise ValueError("refinement factor must be >= 1")
        return MeshGrid(self.horizon, self.steps * int(factor))


@dataclass(frozen=True)
class SamplePath:
    """A discrete path on a grid; ``values`` has shape (steps + 1, dim)."""

    grid: MeshGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != self.grid.steps + 1:
            raise ValueError(
                f"values must have shape (steps + 1, dim), got {vals.shape} "
                f"for {self.grid.steps} steps"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def constant(cls, grid: MeshGrid, point) -> "SamplePath":
        pt = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(grid, np.tile(pt, (grid.steps + 1, 1)))

    def running_max(self, k: int) -> float:
        """max of the values over grid indices 0..k; scalar paths only."""
        if self.dim != 1:
            raise ValueError("running_max is defined for scalar paths only")
        self._check_index(k)
        return float(np.max(self.values[: k + 1, 0]))

    def sup_norm(self, k: int) -> float:
        """max Euclidean norm of the rows over grid indices 0..k."""
        self._check_index(k)
        rows = self.values[: k + 1]
        return float(np.max(np.sqrt(np.sum(rows * rows, axis=1))))

    def _check_index(self, k: int):
        if not (0 <= k <= self.grid.steps):
            raise ValueError(f"grid index {k} outside 0..{self.grid.steps}")


@dataclass(frozen=True)
class CorrelationSpec:
    """Driver layout.

    Composite mode (``rho`` set): both drivers are scalar and the model
    sees the single mixed driver ``sqrt(1 - rho^2) W + rho B``.  Diffusion
    coefficients realize this by carrying the factors ``sqrt(1 - rho^2)``
    and ``rho`` on the W and B legs.

    Multi-d mode (``rho`` unset): independent drivers of widths
    ``dim_w`` and ``dim_b``.
    """

    rho: float | None = None
    dim_w: int = 1
    dim_b: int = 1

    def __post_init__(self):
        if self.rho is not None:
            r = float(self.rho)
            if not (-1.0 <= r <= 1.0):
                raise ValueError("rho must lie in [-1, 1]")
            if self.dim_w != 1 or self.dim_b != 1:
                raise ValueError("composite mode requires scalar drivers")
            object.__setattr__(self, "rho", r)
        if int(self.dim_w) < 1 or int(self.dim_b) < 1:
            raise ValueError("driver dimensions must be >= 1")
        object.__setattr__(self, "dim_w", int(self.dim_w))
        object.__setattr__(self, "dim_b", int(self.dim_b))

    @property
    def composite(self) -> bool:
        return self.rho is not None

    def split(self) -> tuple[float, float]:
        """(W factor, B factor) realizing the composite driver."""
        if not self.composite:
            raise ValueError("split is defined in composite mode only")
        return float(np.sqrt(1.0 - self.rho * self.rho)), float(self.rho)


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus the substream derivation rule."""

    master: int

    def __post_init__(self):
        object.__setattr__(self, "master", int(self.master) & _MASK64)

    def generator(self, path_index: int, tag: str) -> np.random.Generator:
        if tag not in _TAG_IDS:
            raise ValueError(f"unknown driver tag {tag!r}, expected one of {sorted(_TAG_IDS)}")
        if path_index < 0:
            raise ValueError("path index must be nonnegative")
        seq = np.random.SeedSequence(entropy=(self.master, int(path_index), _TAG_IDS[tag]))
        return np.random.Generator(np.random.PCG64(seq))


def generate_increments(
    grid: MeshGrid, dim: int, seed: SeedSpec, path_index: int, tag: str
) -> np.ndarray:
    """Gaussian increments of variance dt, shape (steps, dim)."""
    if int(dim) < 1:
        raise ValueError("dim must be >= 1")
    gen = seed.generator(path_index, tag)
    return gen.normal(0.0, np.sqrt(grid.dt), size=(grid.steps, int(dim)))


def generate_increment_block(
    grid: MeshGrid, dim: int, seed: SeedSpec, lo: int, hi: int, tag: str
) -> np.ndarray:
    """Increments for path indices lo..hi-1, shape (hi - lo, steps, dim)."""
    if hi < lo:
        raise ValueError("empty path range")
    out = np.empty((hi - lo, grid.steps, int(dim)))
    for i, p in enumerate(range(lo, hi)):
        out[i] = generate_increments(grid, dim, seed, p, tag)
    return out


def compose_driver(w_inc: np.ndarray, b_inc: np.ndarray, spec: CorrelationSpec) -> np.ndarray:
    """Mixed increments ``sqrt(1 - rho^2) dW + rho dB`` (composite mode)."""
    if not spec.composite:
        raise ValueError("compose_driver requires a composite correlation spec")
    w = np.asarray(w_inc, dtype=float)
    b = np.asarray(b_inc, dtype=float)
    if w.shape != b.shape:
        raise ValueError(f"driver increment shapes differ: {w.shape} vs {b.shape}")
    cw, cb = spec.split()
    return cw * w + cb * b


def coarsen_increments(inc: np.ndarray, factor: int) -> np.ndarray:
    """Sum adjacent groups of increments along the step axis.

    ``factor`` must be a power of two; coarsening is performed one
    halving at a time so that chained coarsenings agree bit for bit.
    The step axis is the second to last.
    """
    f = int(factor)
    if f < 1 or (f & (f - 1)) != 0:
        raise ValueError("factor must be a positive power of two")
    out = np.asarray(inc, dtype=float)
    while f > 1:
        steps = out.shape[-2]
        if steps % 2:
            raise ValueError("step count must be even to coarsen")
        shape = out.shape[:-2] + (steps // 2, 2) + out.shape[-1:]
        pairs = out.reshape(shape)
        out = pairs[..., 0, :] + pairs[..., 1, :]
        f //= 2
    return out


def dyadic_ladder(finest: np.ndarray, finest_steps: int, levels) -> dict[int, np.ndarray]:
    """Increments at each requested level, coarsened from the finest.

    ``levels`` are step counts dividing ``finest_steps`` with power-of-two
    ratios.  Every level is derived by chained halvings from the next
    finer one, so ladder[L] equals coarsen(ladder[2L], 2) exactly.
    """
    lvls = sorted(set(int(v) for v in levels), reverse=True)
    ladder: dict[int, np.ndarray] = {}
    cur_steps, cur = int(finest_steps), np.asarray(finest, dtype=float)
    for lv in lvls:
        if lv > cur_steps or cur_steps % lv:
            raise ValueError(f"level {lv} does not divide the finer level {cur_steps}")
        ratio = cur_steps // lv
        if ratio & (ratio - 1):
            raise ValueError(f"level ratio {ratio} is not a power of two")
        cur = coarsen_increments(cur, ratio)
        cur_steps = lv
        ladder[lv] = cur
    return ladder


def cumulative_running_max(values: np.ndarray) -> np.ndarray:
    """Running max along the step axis of (..., steps + 1) scalars."""
    return np.maximum.accumulate(np.asarray(values, dtype=float), axis=-1)


def cumulative_sup_norm(values: np.ndarray) -> np.ndarray:
    """Running max of row norms: (..., steps + 1, dim) -> (..., steps + 1)."""
    vals = np.asarray(values, dtype=float)
    norms = np.sqrt(np.sum(vals * vals, axis=-1))
    return np.maximum.accumulate(norms, axis=-1)
