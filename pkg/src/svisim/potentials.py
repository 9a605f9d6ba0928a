"""Convex potentials with exact proximal maps and Moreau-Yosida smoothing.

A potential here is a proper, convex, lower-semicontinuous function
``psi: R^d -> [0, +inf]`` used as the constraint term of a reflected or
penalized stochastic system.  Four shapes are provided, all with
closed-form proximal operators:

* :class:`BoxIndicator`, the indicator of a closed box (projection = clip),
* :class:`HalfLineIndicator`, the indicator of a closed half line in 1-d,
* :class:`AbsValue`, a weighted l1 penalty (prox = soft threshold),
* :class:`Separable`, a coordinate-wise product of 1-d potentials.

:class:`MoreauEnvelope` wraps any potential with its smoothing of index
``n``: the envelope value, its gradient ``n (x - J_n x)`` and the
resolvent ``J_n x = prox(1/n, x)``.

All point arguments accept arrays of shape ``(..., dim)`` and broadcast
over the leading axes.  Scalars are accepted when ``dim == 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

__all__ = [
    "ConvexPotential",
    "BoxIndicator",
    "HalfLineIndicator",
    "AbsValue",
    "Separable",
    "MoreauEnvelope",
    "SubgradientWitness",
    "subgradient_witness",
    "potential_from_config",
    "potential_to_config",
]

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def _halton_points(count: int, dim: int) -> np.ndarray:
    """First ``count`` Halton points in [0, 1)^dim, skipping the origin."""
    if dim > len(_PRIMES):
        raise ValueError(f"halton probe generator supports up to {len(_PRIMES)} dims")
    out = np.empty((count, dim))
    for j in range(dim):
        base = _PRIMES[j]
        for i in range(count):
            f, r, k = 1.0, 0.0, i + 1
            while k > 0:
                f /= base
                r += f * (k % base)
                k //= base
            out[i, j] = r
    return out


class ConvexPotential:
    """Common behaviour for the potential shapes below.

    Subclasses set ``dim`` and ``is_indicator`` and implement
    :meth:`value`, :meth:`prox`, :meth:`_slack_raw` and domain helpers.
    """

    dim: int
    is_indicator: bool

    # -- point plumbing ---------------------------------------------------

    def _points(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            if self.dim != 1:
                raise ValueError(f"scalar point given to a potential of dim {self.dim}")
            arr = arr.reshape(1)
        if arr.shape[-1] != self.dim:
            raise ValueError(
                f"point has trailing dimension {arr.shape[-1]}, potential has dim {self.dim}"
            )
        return arr

    # -- contract ----------------------------------------------------------

    def value(self, x):
        """psi(x); +inf exactly when x is outside the domain."""
        raise NotImplementedError

    def prox(self, lam: float, x):
        """argmin over x' of |x' - x|^2 / (2 lam) + psi(x')."""
        raise NotImplementedError

    def contains(self, x, tol: float = 0.0):
        """True where x lies in the closed domain, within ``tol``."""
        raise NotImplementedError

    def boundary_distance(self, x):
        """Euclidean distance to the domain boundary (indicators only)."""
        raise NotImplementedError

    def domain_distance(self, x):
        """Euclidean distance to the closed domain (0 inside)."""
        raise NotImplementedError

    def sample_domain(self, rng: np.random.Generator, count: int, radius: float = 2.0):
        """Draw ``count`` interior points, confined to a ball of ``radius``."""
        raise NotImplementedError

    def _slack_raw(self, x: np.ndarray, z: np.ndarray, probes: int) -> float:
        """sup over x' in D of <x'-x, z> - (psi(x') - psi(x))."""
        raise NotImplementedError

    # -- conveniences -------------------------------------------------------

    def project(self, x):
        """Nearest point of the domain (indicators only)."""
        if not self.is_indicator:
            raise ValueError("project is defined for indicator potentials only")
        return self.prox(1.0, x)


@dataclass(frozen=True)
class BoxIndicator(ConvexPotential):
    """Indicator of the box [lower, upper]; the box must contain 0."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    is_indicator = True

    def __init__(self, lower, upper):
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if lo.ndim != 1 or hi.ndim != 1 or lo.size != hi.size:
            raise ValueError("lower and upper must be 1-d and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if not np.all(lo < hi):
            raise ValueError("box must have nonempty interior (lower < upper)")
        # the origin may sit on a face (reflection at 0) but not outside
        if not (np.all(lo <= 0.0) and np.all(hi >= 0.0)):
            raise ValueError("box must contain 0")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def _lo(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def _hi(self) -> np.ndarray:
        return np.asarray(self.upper)

    def value(self, x):
        pts = self._points(x)
        inside = np.all((pts >= self._lo) & (pts <= self._hi), axis=-1)
        return np.where(inside, 0.0, np.inf)

    def prox(self, lam: float, x):
        # projection; independent of lam
        del lam
        pts = self._points(x)
        return np.clip(pts, self._lo, self._hi)

    def contains(self, x, tol: float = 0.0):
        pts = self._points(x)
        return np.all((pts >= self._lo - tol) & (pts <= self._hi + tol), axis=-1)

    def domain_distance(self, x):
        pts = self._points(x)
        gap = np.maximum(pts - self._hi, 0.0) + np.maximum(self._lo - pts, 0.0)
        return np.sqrt(np.sum(gap * gap, axis=-1))

    def boundary_distance(self, x):
        pts = self._points(x)
        inside_gap = np.minimum(pts - self._lo, self._hi - pts)  # negative outside
        inner = np.min(inside_gap, axis=-1)
        return np.where(inner >= 0.0, inner, self.domain_distance(pts))

    def sample_domain(self, rng, count, radius: float = 2.0):
        lo = np.maximum(self._lo, -radius)
        hi = np.minimum(self._hi, radius)
        bad = lo >= hi
        lo = np.where(bad, self._lo, lo)
        hi = np.where(bad, np.minimum(self._hi, self._lo + 2 * radius), hi)
        return rng.uniform(lo, hi, size=(count, self.dim))

    def _slack_raw(self, x, z, probes):
        # closed form: the sup is attained coordinate-wise at a box vertex
        del probes
        return float(np.sum(np.maximum((self._hi - x) * z, (self._lo - x) * z)))


@dataclass(frozen=True)
class HalfLineIndicator(ConvexPotential):
    """Indicator of a closed half line in 1-d.

    ``side="above"`` keeps the state at or above the barrier,
    ``side="below"`` at or below.
    """

    barrier: float
    side: str
    is_indicator = True
    dim = 1

    def __init__(self, barrier: float, side: str):
        if side not in ("above", "below"):
            raise ValueError(f"side must be 'above' or 'below', got {side!r}")
        b = float(barrier)
        if not math.isfinite(b):
            raise ValueError("barrier must be finite")
        object.__setattr__(self, "barrier", b)
        object.__setattr__(self, "side", side)

    def _signed(self, pts):
        # >= 0 inside the domain
        s = pts[..., 0] - self.barrier
        return s if self.side == "above" else -s

    def value(self, x):
        pts = self._points(x)
        return np.where(self._signed(pts) >= 0.0, 0.0, np.inf)

    def prox(self, lam, x):
        del lam
        pts = self._points(x)
        if self.side == "above":
            return np.maximum(pts, self.barrier)
        return np.minimum(pts, self.barrier)

    def contains(self, x, tol: float = 0.0):
        pts = self._points(x)
        return self._signed(pts) >= -tol

    def domain_distance(self, x):
        pts = self._points(x)
        return np.maximum(-self._signed(pts), 0.0)

    def boundary_distance(self, x):
        pts = self._points(x)
        return np.abs(self._signed(pts))

    def sample_domain(self, rng, count, radius: float = 2.0):
        offs = rng.uniform(0.0, radius, size=(count, 1))
        sign = 1.0 if self.side == "above" else -1.0
        return self.barrier + sign * offs

    def _slack_raw(self, x, z, probes):
        del probes
        zz = float(z[0])
        inward = zz if self.side == "above" else -zz
        if inward > 0.0:
            return np.inf
        # sup attained at the barrier
        return float((self.barrier - x[0]) * zz)


@dataclass(frozen=True)
class AbsValue(ConvexPotential):
    """Weighted l1 penalty ``w * sum_i |x_i|`` with full domain."""

    weight: float
    dim: int
    is_indicator = False

    def __init__(self, weight: float, dim: int = 1):
        w = float(weight)
        if not (w > 0.0 and math.isfinite(w)):
            raise ValueError("weight must be a positive finite scalar")
        if int(dim) < 1:
            raise ValueError("dim must be >= 1")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "dim", int(dim))

    def value(self, x):
        pts = self._points(x)
        return self.weight * np.sum(np.abs(pts), axis=-1)

    def prox(self, lam, x):
        pts = self._points(x)
        lam = float(lam)
        if lam <= 0.0:
            raise ValueError("lam must be positive")
        shrink = lam * self.weight
        return np.sign(pts) * np.maximum(np.abs(pts) - shrink, 0.0)

    def contains(self, x, tol: float = 0.0):
        pts = self._points(x)
        return np.ones(pts.shape[:-1], dtype=bool)

    def domain_distance(self, x):
        pts = self._points(x)
        return np.zeros(pts.shape[:-1])

    def boundary_distance(self, x):
        raise ValueError("boundary_distance needs an indicator potential")

    def sample_domain(self, rng, count, radius: float = 2.0):
        return rng.uniform(-radius, radius, size=(count, self.dim))

    def _slack_raw(self, x, z, probes):
        # sampled probe sup; exact membership boundary is |z_i| <= w with
        # equality forced to sign(x_i) wherever x_i != 0
        radius = 10.0 * (1.0 + float(np.max(np.abs(x))) + float(np.max(np.abs(z))))
        pts = (_halton_points(probes, self.dim) * 2.0 - 1.0) * radius
        pts = np.vstack([pts, np.zeros((1, self.dim)), x[None, :], -x[None, :]])
        gains = pts @ z - x @ z - (self.value(pts) - self.value(x))
        return float(np.max(gains))


@dataclass(frozen=True)
class Separable(ConvexPotential):
    """Coordinate-wise product of 1-d potentials."""

    parts: tuple[ConvexPotential, ...]

    def __init__(self, parts):
        parts = tuple(parts)
        if not parts:
            raise ValueError("at least one part is required")
        for p in parts:
            if p.dim != 1:
                raise ValueError("separable parts must be 1-d potentials")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return len(self.parts)

    @property
    def is_indicator(self) -> bool:
        return all(p.is_indicator for p in self.parts)

    def _coord(self, pts, i):
        return pts[..., i : i + 1]

    def value(self, x):
        pts = self._points(x)
        total = np.zeros(pts.shape[:-1])
        for i, p in enumerate(self.parts):
            total = total + p.value(self._coord(pts, i))
        return total

    def prox(self, lam, x):
        pts = self._points(x)
        cols = [p.prox(lam, self._coord(pts, i)) for i, p in enumerate(self.parts)]
        return np.concatenate(cols, axis=-1)

    def contains(self, x, tol: float = 0.0):
        pts = self._points(x)
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for i, p in enumerate(self.parts):
            ok = ok & p.contains(self._coord(pts, i), tol)
        return ok

    def domain_distance(self, x):
        pts = self._points(x)
        sq = np.zeros(pts.shape[:-1])
        for i, p in enumerate(self.parts):
            d = p.domain_distance(self._coord(pts, i))
            sq = sq + d * d
        return np.sqrt(sq)

    def boundary_distance(self, x):
        if not self.is_indicator:
            raise ValueError("boundary_distance needs an indicator potential")
        pts = self._points(x)
        dists = [p.boundary_distance(self._coord(pts, i)) for i, p in enumerate(self.parts)]
        return np.min(np.stack(dists, axis=-1), axis=-1)

    def sample_domain(self, rng, count, radius: float = 2.0):
        cols = [p.sample_domain(rng, count, radius) for p in self.parts]
        return np.concatenate(cols, axis=-1)

    def _slack_raw(self, x, z, probes):
        total = 0.0
        for i, p in enumerate(self.parts):
            total += p._slack_raw(x[i : i + 1], z[i : i + 1], probes)
        return float(total)


@dataclass(frozen=True)
class MoreauEnvelope:
    """Smoothing of index ``n`` of a convex potential.

    The envelope is ``inf over x' of (n/2) |x' - x|^2 + psi(x')``, its
    minimizer is the resolvent ``J_n x = prox(1/n, x)`` and its gradient
    is ``n (x - J_n x)``, which is n-Lipschitz.  The resolvent identity
    ``x - (1/n) grad(x) = J_n x`` holds exactly because both sides are
    computed from the same prox evaluation.
    """

    potential: ConvexPotential
    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("smoothing index n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))

    def resolvent(self, x):
        return self.potential.prox(1.0 / self.n, x)

    def value(self, x):
        pts = self.potential._points(x)
        j = self.potential.prox(1.0 / self.n, pts)
        gap = pts - j
        return 0.5 * self.n * np.sum(gap * gap, axis=-1) + self.potential.value(j)

    def gradient(self, x):
        pts = self.potential._points(x)
        return self.n * (pts - self.potential.prox(1.0 / self.n, pts))


@dataclass(frozen=True)
class SubgradientWitness:
    """Outcome of a subgradient membership test at a point."""

    point: np.ndarray
    subgradient: np.ndarray
    slack: float
    member: bool


def subgradient_witness(
    potential: ConvexPotential,
    x,
    z,
    probes: int = 128,
    tol: float = 1e-9,
) -> SubgradientWitness:
    """Test whether ``z`` is a subgradient of the potential at ``x``.

    The slack is the largest violation of the subgradient inequality
    ``<x' - x, z> <= psi(x') - psi(x)`` over candidate points ``x'``:
    exact suprema for box and half-line indicators (attained at vertices
    or at the barrier), quasi-random probe points for the soft shapes.
    Membership holds iff the slack does not exceed ``tol``.
    """
    pt = np.asarray(potential._points(x), dtype=float).reshape(potential.dim)
    zz = np.asarray(potential._points(z), dtype=float).reshape(potential.dim)
    if probes < 1:
        raise ValueError("probes must be a positive integer")
    if not bool(np.all(potential.contains(pt, tol=0.0))):
        raise DomainError("subgradient test point lies outside the domain")
    raw = potential._slack_raw(pt, zz, probes)
    slack = max(0.0, float(raw))
    return SubgradientWitness(point=pt, subgradient=zz, slack=slack, member=slack <= tol)


# -- config descriptors ----------------------------------------------------

def potential_to_config(p: ConvexPotential) -> dict:
    """Tagged record for a potential, as used in experiment configs."""
    if isinstance(p, BoxIndicator):
        return {"kind": "box", "lower": list(p.lower), "upper": list(p.upper)}
    if isinstance(p, HalfLineIndicator):
        return {"kind": "half_line", "barrier": p.barrier, "side": p.side}
    if isinstance(p, AbsValue):
        return {"kind": "abs_value", "weight": p.weight, "dim": p.dim}
    if isinstance(p, Separable):
        return {"kind": "separable", "parts": [potential_to_config(q) for q in p.parts]}
    raise ValueError(f"unknown potential type {type(p).__name__}")


def potential_from_config(rec: dict) -> ConvexPotential:
    """Build a potential from its tagged record; raises ValueError on bad input."""
    if not isinstance(rec, dict) or "kind" not in rec:
        raise ValueError("potential record must be a mapping with a 'kind' tag")
    kind = rec["kind"]
    known = {
        "box": {"kind", "lower", "upper"},
        "half_line": {"kind", "barrier", "side"},
        "abs_value": {"kind", "weight", "dim"},
        "separable": {"kind", "parts"},
    }
    if kind not in known:
        raise ValueError(f"unknown potential kind {kind!r}")
    extra = set(rec) - known[kind]
    if extra:
        raise ValueError(f"unknown keys {sorted(extra)} in potential record")
    if kind == "box":
        return BoxIndicator(rec["lower"], rec["upper"])
    if kind == "half_line":
        return HalfLineIndicator(rec["barrier"], rec["side"])
    if kind == "abs_value":
        return AbsValue(rec["weight"], int(rec.get("dim", 1)))
    return Separable([potential_from_config(r) for r in rec["parts"]])
