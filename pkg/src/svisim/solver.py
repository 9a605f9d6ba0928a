"""Time stepping for constrained stochastic systems.

All schemes share the same explicit pre-point: coefficients are frozen
at the left grid time, so

    pre_k = X_k + drift dt + diff_w dW_k + diff_b dB_k.

The constraint is then enforced in one of three ways:

* ``ProxStep``: X_{k+1} = prox(dt, pre_k), the implicit subgradient step,
* ``Projection``: X_{k+1} = project(pre_k), indicator potentials only
  (identical arithmetic to ProxStep there, since projection is the prox),
* ``Yosida(n)``: X_{k+1} = pre_k - grad_n(X_k) dt, explicit penalization
  by the smoothed potential; iterates may leave the domain.

The reflection term accumulates what the constraint removed:
``dphi_k = pre_k - X_{k+1}``, so X_{k+1} + dphi_k recovers the pre-point
exactly and the cumulative phi plays the role of the compensating
process subtracted from the free dynamics.  At a lower barrier the
stored increments are therefore <= 0 (they belong to the normal cone at
the contact point, which points outward).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .coefficients import ControlProcess, PathView, XCoefficients, YCoefficients
from .exceptions import DomainError, NumericalError
from .paths import MeshGrid, SamplePath, cumulative_running_max, cumulative_sup_norm
from .potentials import ConvexPotential, MoreauEnvelope

__all__ = [
    "ProxStep",
    "Projection",
    "Yosida",
    "scheme_from_config",
    "scheme_to_config",
    "ReflectionRecord",
    "SimOutput",
    "solve_x",
    "solve_x_batch",
    "solve_y",
    "solve_y_batch",
    "picard_y",
    "picard_y_batch",
    "check_complementarity",
    "complementarity_slack_batch",
    "boundary_activity",
    "BoundaryActivity",
    "decomposition_residual_x",
    "decomposition_residual_y",
    "domain_violation_counts",
]


@dataclass(frozen=True)
class ProxStep:
    pass


@dataclass(frozen=True)
class Projection:
    pass


@dataclass(frozen=True)
class Yosida:
    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("penalization index n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))


SchemeChoice = ProxStep | Projection | Yosida


def scheme_from_config(obj) -> SchemeChoice:
    if obj == "prox_step":
        return ProxStep()
    if obj == "projection":
        return Projection()
    if isinstance(obj, dict) and obj.get("kind") == "yosida":
        extra = set(obj) - {"kind", "n"}
        if extra:
            raise ValueError(f"unknown keys {sorted(extra)} in scheme record")
        if "n" not in obj:
            raise ValueError("yosida scheme needs the penalization index n")
        return Yosida(int(obj["n"]))
    raise ValueError(
        f"scheme must be 'prox_step', 'projection' or {{'kind': 'yosida', 'n': ...}}, got {obj!r}"
    )


def scheme_to_config(scheme: SchemeChoice):
    if isinstance(scheme, ProxStep):
        return "prox_step"
    if isinstance(scheme, Projection):
        return "projection"
    return {"kind": "yosida", "n": scheme.n}


@dataclass(frozen=True)
class ReflectionRecord:
    """Cumulative reflection path plus its raw increments."""

    phi: SamplePath
    increments: np.ndarray
    total_variation: float

    @classmethod
    def from_increments(cls, grid: MeshGrid, increments: np.ndarray) -> "ReflectionRecord":
        inc = np.asarray(increments, dtype=float)
        if inc.ndim == 1:
            inc = inc[:, None]
        if inc.shape[0] != grid.steps:
            raise ValueError("increment count must equal the number of grid steps")
        cum = np.vstack([np.zeros((1, inc.shape[1])), np.cumsum(inc, axis=0)])
        tv = float(np.sum(np.sqrt(np.sum(inc * inc, axis=1))))
        return cls(phi=SamplePath(grid, cum), increments=inc, total_variation=tv)


@dataclass(frozen=True)
class SimOutput:
    """One simulated system: states, reflection terms and diagnostics."""

    x: SamplePath
    phi1: ReflectionRecord
    y: SamplePath | None = None
    phi2: ReflectionRecord | None = None
    diagnostics: dict = field(default_factory=dict)


# -- internal helpers --------------------------------------------------------

def _apply_diff(sig: np.ndarray, dinc: np.ndarray) -> np.ndarray:
    # (n, d, m) x (n, m) -> (n, d); einsum keeps a fixed reduction order
    return np.einsum("pdm,pm->pd", sig, dinc)

def _check_coeff(arr, shape, what: str, k: int) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    if out.shape != shape:
        raise ValueError(f"{what} returned shape {out.shape}, expected {shape} (step {k})")
    return out


def _constraint_step(
    potential: ConvexPotential, scheme: SchemeChoice, dt: float
) -> Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Return (state, pre) -> (new_state, dphi) for the chosen scheme."""
    if isinstance(scheme, Projection):
        if not potential.is_indicator:
            raise ValueError("the projection scheme needs an indicator potential")

        def step(_state, pre):
            new = potential.project(pre)
            return new, pre - new

        return step
    if isinstance(scheme, ProxStep):

        def step(_state, pre):
            new = potential.prox(dt, pre)
            return new, pre - new

        return step
    env = MoreauEnvelope(potential, scheme.n)

    def step(state, pre):
        pen = env.gradient(state) * dt
        return pre - pen, pen

    return step


def _prepare_x0(x0, dim: int, n: int, potential: ConvexPotential) -> np.ndarray:
    arr = np.asarray(x0, dtype=float)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (n, dim)).copy()
    if arr.shape != (n, dim):
        raise ValueError(f"x0 must have shape ({dim},) or ({n}, {dim}), got {arr.shape}")
    if not bool(np.all(potential.contains(arr, tol=1e-12))):
        raise DomainError("initial state lies outside the constraint domain")
    return arr


# -- primary state ------------------------------------------------------------

def solve_x_batch(
    coeffs: XCoefficients,
    potential: ConvexPotential,
    scheme: SchemeChoice,
    grid: MeshGrid,
    w_inc: np.ndarray,
    b_inc: np.ndarray,
    x0,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate a batch of primary paths on shared increment arrays.

    ``w_inc`` has shape (n, steps, dim_w) and ``b_inc`` (n, steps, dim_b);
    returns (values, phi_increments) of shapes (n, steps + 1, dim) and
    (n, steps, dim).
    """
    w = np.asarray(w_inc, dtype=float)
    b = np.asarray(b_inc, dtype=float)
    if w.ndim != 3 or b.ndim != 3:
        raise ValueError("increment arrays must have shape (n, steps, m)")
    n = w.shape[0]
    if w.shape != (n, grid.steps, coeffs.dim_w):
        raise ValueError(f"w increments have shape {w.shape}, expected {(n, grid.steps, coeffs.dim_w)}")
    if b.shape != (n, grid.steps, coeffs.dim_b):
        raise ValueError(f"b increments have shape {b.shape}, expected {(n, grid.steps, coeffs.dim_b)}")
    if potential.dim != coeffs.dim:
        raise ValueError("potential dimension does not match the state dimension")

    d = coeffs.dim
    dt = grid.dt
    times = grid.times
    step = _constraint_step(potential, scheme, dt)

    values = np.empty((n, grid.steps + 1, d))
    phi = np.empty((n, grid.steps, d))
    state = _prepare_x0(x0, d, n, potential)
    values[:, 0, :] = state

    rm = state[:, 0].copy() if d == 1 else None
    sn = np.sqrt(np.sum(state * state, axis=1))
    rm_hist = np.empty((n, grid.steps + 1)) if d == 1 else None
    sn_hist = np.empty((n, grid.steps + 1))
    if d == 1:
        rm_hist[:, 0] = rm
    sn_hist[:, 0] = sn

    for k in range(grid.steps):
        t = float(times[k])
        view = PathView(
            t=t,
            k=k,
            state=state,
            sup_norm=sn,
            history=values[:, : k + 1, :],
            _running_max=rm,
        )
        drift = _check_coeff(coeffs.drift(t, view), (n, d), "drift", k)
        sig_w = _check_coeff(coeffs.diff_w(t, view), (n, d, coeffs.dim_w), "diff_w", k)
        sig_b = _check_coeff(coeffs.diff_b(t, view), (n, d, coeffs.dim_b), "diff_b", k)
        pre = state + drift * dt + _apply_diff(sig_w, w[:, k, :]) + _apply_diff(sig_b, b[:, k, :])
        if not np.all(np.isfinite(pre)):
            raise NumericalError(f"non-finite state update at step {k}", step=k)
        state, dphi = step(state, pre)
        if not np.all(np.isfinite(state)):
            raise NumericalError(f"non-finite constrained state at step {k}", step=k)
        values[:, k + 1, :] = state
        phi[:, k, :] = dphi
        if d == 1:
            rm = np.maximum(rm, state[:, 0])
            rm_hist[:, k + 1] = rm
        sn = np.maximum(sn, np.sqrt(np.sum(state * state, axis=1)))
        sn_hist[:, k + 1] = sn
    return values, phi


def solve_x(
    coeffs: XCoefficients,
    potential: ConvexPotential,
    scheme: SchemeChoice,
    grid: MeshGrid,
    w_inc: np.ndarray,
    b_inc: np.ndarray,
    x0,
) -> tuple[SamplePath, ReflectionRecord]:
    """Single-path convenience wrapper around :func:`solve_x_batch`."""
    w = np.asarray(w_inc, dtype=float)
    b = np.asarray(b_inc, dtype=float)
    if w.ndim == 2:
        w = w[None, :, :]
    if b.ndim == 2:
        b = b[None, :, :]
    values, phi = solve_x_batch(coeffs, potential, scheme, grid, w, b, x0)
    return SamplePath(grid, values[0]), ReflectionRecord.from_increments(grid, phi[0])


# -- secondary state -----------------------------------------------------------

def _solve_y_core(
    coeffs: YCoefficients,
    potential: ConvexPotential,
    scheme: SchemeChoice,
    grid: MeshGrid,
    x_values: np.ndarray,
    q_grid: np.ndarray,
    b_inc: np.ndarray,
    y0,
    z_values: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Shared stepping for solve_y (z_values None) and Picard iterates.

    With ``z_values`` given, coefficient calls see the frozen iterate in
    place of the evolving state; the evolving state is still the one
    being constrained and stored.
    """
    n = x_values.shape[0]
    d = coeffs.dim
    dt = grid.dt
    times = grid.times
    b = np.asarray(b_inc, dtype=float)
    if b.shape != (n, grid.steps, coeffs.dim_b):
        raise ValueError(f"b increments have shape {b.shape}, expected {(n, grid.steps, coeffs.dim_b)}")
    if potential.dim != d:
        raise ValueError("potential dimension does not match the state dimension")
    if x_values.shape[1] != grid.steps + 1:
        raise ValueError("x path does not match the grid")
    step = _constraint_step(potential, scheme, dt)

    x_rm = cumulative_running_max(x_values[:, :, 0]) if x_values.shape[2] == 1 else None
    x_sn = cumulative_sup_norm(x_values)
    if z_values is not None:
        z_rm = cumulative_running_max(z_values[:, :, 0]) if z_values.shape[2] == 1 else None
        z_sn = cumulative_sup_norm(z_values)

    values = np.empty((n, grid.steps + 1, d))
    phi = np.empty((n, grid.steps, d))
    state = _prepare_x0(y0, d, n, potential)
    values[:, 0, :] = state
    rm = state[:, 0].copy() if d == 1 else None
    sn = np.sqrt(np.sum(state * state, axis=1))

    for k in range(grid.steps):
        t = float(times[k])
        xv = PathView(
            t=t, k=k, state=x_values[:, k, :], sup_norm=x_sn[:, k],
            history=x_values[:, : k + 1, :],
            _running_max=x_rm[:, k] if x_rm is not None else None,
        )
        if z_values is None:
            yv = PathView(
                t=t, k=k, state=state, sup_norm=sn,
                history=values[:, : k + 1, :], _running_max=rm,
            )
        else:
            yv = PathView(
                t=t, k=k, state=z_values[:, k, :], sup_norm=z_sn[:, k],
                history=z_values[:, : k + 1, :],
                _running_max=z_rm[:, k] if z_rm is not None else None,
            )
        q = float(q_grid[k])
        drift = _check_coeff(coeffs.drift(t, xv, yv, q), (n, d), "y drift", k)
        sig_b = _check_coeff(coeffs.diff_b(t, xv, yv, q), (n, d, coeffs.dim_b), "y diff_b", k)
        pre = state + drift * dt + _apply_diff(sig_b, b[:, k, :])
        if not np.all(np.isfinite(pre)):
            raise NumericalError(f"non-finite state update at step {k}", step=k)
        state, dphi = step(state, pre)
        if not np.all(np.isfinite(state)):
            raise NumericalError(f"non-finite constrained state at step {k}", step=k)
        values[:, k + 1, :] = state
        phi[:, k, :] = dphi
        if d == 1:
            rm = np.maximum(rm, state[:, 0])
        sn = np.maximum(sn, np.sqrt(np.sum(state * state, axis=1)))
    return values, phi


def solve_y_batch(
    coeffs: YCoefficients,
    potential: ConvexPotential,
    scheme: SchemeChoice,
    grid: MeshGrid,
    x_values: np.ndarray,
    control: ControlProcess,
    b_inc: np.ndarray,
    y0,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate the secondary state against a given batch of primary paths."""
    q_grid = control.values_on_grid(grid.times[:-1])
    return _solve_y_core(
        coeffs, potential, scheme, grid, np.asarray(x_values, dtype=float), q_grid, b_inc, y0, None
    )


def solve_y(
    coeffs: YCoefficients,
    potential: ConvexPotential,
    scheme: SchemeChoice,
    grid: MeshGrid,
    x_path: SamplePath,
    control: ControlProcess,
    b_inc: np.ndarray,
    y0,
) -> tuple[SamplePath, ReflectionRecord]:
    if x_path.grid != grid:
        raise ValueError("x path grid does not match the solve grid")
    b = np.asarray(b_inc, dtype=float)
    if b.ndim == 2:
        b = b[None, :, :]
    values, phi = solve_y_batch(
        coeffs, potential, scheme, grid, x_path.values[None, :, :], control, b, y0
    )
    return SamplePath(grid, values[0]), ReflectionRecord.from_increments(grid, phi[0])


def picard_y_batch(
    coeffs: YCoefficients,
    potential: ConvexPotential,
    grid: MeshGrid,
    x_values: np.ndarray,
    control: ControlProcess,
    b_inc: np.ndarray,
    y0,
    iterations: int,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Picard iterates of the secondary state with the feedback frozen.

    Iterate 0 is the constant path at y0.  Iterate m + 1 solves the
    system with every coefficient reading iterate m instead of the
    evolving state.  Returns the iterates (length iterations + 1) and
    the mean pathwise sup-norm gaps between successive iterates.
    """
    if int(iterations) < 1:
        raise ValueError("iterations must be >= 1")
    x_values = np.asarray(x_values, dtype=float)
    n = x_values.shape[0]
    q_grid = control.values_on_grid(grid.times[:-1])
    y0_arr = _prepare_x0(y0, coeffs.dim, n, potential)
    iterates = [np.repeat(y0_arr[:, None, :], grid.steps + 1, axis=1)]
    dists = np.empty(int(iterations))
    for m in range(int(iterations)):
        nxt, _phi = _solve_y_core(
            coeffs, potential, ProxStep(), grid, x_values, q_grid, b_inc, y0, iterates[-1]
        )
        gap = nxt - iterates[-1]
        sup = np.max(np.sqrt(np.sum(gap * gap, axis=2)), axis=1)
        dists[m] = float(np.mean(sup))
        iterates.append(nxt)
    return iterates, dists


def picard_y(
    coeffs: YCoefficients,
    potential: ConvexPotential,
    grid: MeshGrid,
    x_path: SamplePath,
    control: ControlProcess,
    b_inc: np.ndarray,
    y0,
    iterations: int,
) -> list[tuple[SamplePath, float]]:
    """Single-path Picard iteration; returns (iterate, gap to previous) pairs."""
    b = np.asarray(b_inc, dtype=float)
    if b.ndim == 2:
        b = b[None, :, :]
    iterates, dists = picard_y_batch(
        coeffs, potential, grid, x_path.values[None, :, :], control, b, y0, iterations
    )
    out = [(SamplePath(grid, iterates[0][0]), 0.0)]
    for m in range(1, len(iterates)):
        out.append((SamplePath(grid, iterates[m][0]), float(dists[m - 1])))
    return out


# -- solution checks -----------------------------------------------------------

def complementarity_slack_batch(
    values: np.ndarray,
    phi_inc: np.ndarray,
    potential: ConvexPotential,
    test_values: np.ndarray,
    dt: float,
    chunk: int = 64,
) -> np.ndarray:
    """Worst window sum of the variational inequality per run.

    For each run and each test path rho, form the per-step terms
    ``<rho_k - X_k, dphi_k> + (psi(X_k) - psi(rho_k)) dt`` and take the
    largest sum over any window of steps; the result per run is the max
    over test paths.  Nonpositive values mean the inequality held on
    every window.
    """
    values = np.asarray(values, dtype=float)
    phi_inc = np.asarray(phi_inc, dtype=float)
    test_values = np.asarray(test_values, dtype=float)
    n, keff, d = phi_inc.shape
    if test_values.ndim == 2:
        test_values = np.repeat(test_values[:, None, :], keff + 1, axis=1)
    if test_values.shape[1] != keff + 1 or test_values.shape[2] != d:
        raise ValueError("test paths must live on the same grid and dimension")
    if not bool(np.all(potential.contains(test_values, tol=0.0))):
        raise ValueError("test paths must take values in the constraint domain")

    psi_rho = potential.value(test_values[:, :keff, :])  # (m, K)
    out = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        x = values[lo:hi, :keff, :]  # (c, K, d)
        dphi = phi_inc[lo:hi]  # (c, K, d)
        psi_x = potential.value(x)  # (c, K)
        # (c, m, K) pairing terms
        pair = np.einsum("mkd,ckd->cmk", test_values[:, :keff, :], dphi) - np.einsum(
            "ckd,ckd->ck", x, dphi
        )[:, None, :]
        terms = pair + (psi_x[:, None, :] - psi_rho[None, :, :]) * dt
        cum = np.concatenate(
            [np.zeros(terms.shape[:2] + (1,)), np.cumsum(terms, axis=2)], axis=2
        )
        running_min = np.minimum.accumulate(cum, axis=2)
        window_max = np.max(cum - running_min, axis=2)  # (c, m)
        out[lo:hi] = np.max(window_max, axis=1)
    return out


def check_complementarity(
    x: SamplePath,
    record: ReflectionRecord,
    potential: ConvexPotential,
    test_paths: list[SamplePath],
    tol: float | None = None,
) -> dict:
    """Variational inequality check for one run; tol defaults to 5 sqrt(dt)."""
    if tol is None:
        tol = 5.0 * np.sqrt(x.grid.dt)
    test = np.stack([p.values for p in test_paths], axis=0)
    slack = complementarity_slack_batch(
        x.values[None, :, :], record.increments[None, :, :], potential, test, x.grid.dt
    )
    return {"slack": float(slack[0]), "tol": float(tol), "passed": bool(slack[0] <= tol)}


@dataclass(frozen=True)
class BoundaryActivity:
    """Where the reflection acted, how far from the boundary it acted."""

    active_steps: int
    max_offending_distance: float
    max_cone_slack: float
    passed: bool


def _cone_slack_grid(potential: ConvexPotential, pts: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Vectorized normal-cone slack for indicator potentials."""
    from .potentials import BoxIndicator, HalfLineIndicator, Separable

    if isinstance(potential, BoxIndicator):
        lo = np.asarray(potential.lower)
        hi = np.asarray(potential.upper)
        return np.sum(np.maximum((hi - pts) * zs, (lo - pts) * zs), axis=-1)
    if isinstance(potential, HalfLineIndicator):
        z = zs[..., 0]
        inward = z if potential.side == "above" else -z
        at_barrier = (potential.barrier - pts[..., 0]) * z
        return np.where(inward > 0.0, np.inf, at_barrier)
    if isinstance(potential, Separable):
        total = np.zeros(pts.shape[:-1])
        for i, part in enumerate(potential.parts):
            total = total + _cone_slack_grid(part, pts[..., i : i + 1], zs[..., i : i + 1])
        return total
    raise ValueError("normal-cone screening needs an indicator potential")


def boundary_activity(
    x: SamplePath | np.ndarray,
    phi_inc: np.ndarray | ReflectionRecord,
    potential: ConvexPotential,
    tol: float = 1e-9,
) -> BoundaryActivity:
    """Check that reflection only acts on the boundary, pushing inward.

    Steps with ``|dphi| > tol`` must land within ``tol`` of the domain
    boundary and their increments must lie in the normal cone there.
    """
    if not potential.is_indicator:
        raise ValueError("boundary activity is defined for indicator potentials")
    values = x.values if isinstance(x, SamplePath) else np.asarray(x, dtype=float)
    inc = phi_inc.increments if isinstance(phi_inc, ReflectionRecord) else np.asarray(phi_inc, dtype=float)
    if values.ndim == 2:
        values = values[None, :, :]
    if inc.ndim == 2:
        inc = inc[None, :, :]
    mags = np.sqrt(np.sum(inc * inc, axis=2))
    active = mags > tol
    count = int(np.sum(active))
    if count == 0:
        return BoundaryActivity(0, 0.0, 0.0, True)
    landing = values[:, 1:, :][active]  # (count, d)
    zs = inc[active]
    dists = potential.boundary_distance(landing)
    slacks = _cone_slack_grid(potential, landing, zs)
    max_d = float(np.max(dists))
    max_s = float(np.max(slacks))
    return BoundaryActivity(count, max_d, max_s, bool(max_d <= tol and max_s <= tol))


def decomposition_residual_x(
    coeffs: XCoefficients,
    grid: MeshGrid,
    w_inc: np.ndarray,
    b_inc: np.ndarray,
    values: np.ndarray,
    phi_inc: np.ndarray,
) -> float:
    """Max abs residual of X_{k+1} + dphi_k - (X_k + drift dt + diffusion)."""
    values = np.asarray(values, dtype=float)
    phi_inc = np.asarray(phi_inc, dtype=float)
    w = np.asarray(w_inc, dtype=float)
    b = np.asarray(b_inc, dtype=float)
    n, _, d = values.shape
    rm = cumulative_running_max(values[:, :, 0]) if d == 1 else None
    sn = cumulative_sup_norm(values)
    times = grid.times
    dt = grid.dt
    worst = 0.0
    for k in range(grid.steps):
        t = float(times[k])
        view = PathView(
            t=t,
            k=k,
            state=values[:, k, :],
            sup_norm=sn[:, k],
            history=values[:, : k + 1, :],
            _running_max=rm[:, k] if rm is not None else None,
        )
        drift = np.asarray(coeffs.drift(t, view), dtype=float)
        sig_w = np.asarray(coeffs.diff_w(t, view), dtype=float)
        sig_b = np.asarray(coeffs.diff_b(t, view), dtype=float)
        pre = values[:, k, :] + drift * dt + _apply_diff(sig_w, w[:, k, :]) + _apply_diff(sig_b, b[:, k, :])
        resid = values[:, k + 1, :] + phi_inc[:, k, :] - pre
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


def decomposition_residual_y(
    coeffs: YCoefficients,
    grid: MeshGrid,
    x_values: np.ndarray,
    control: ControlProcess,
    b_inc: np.ndarray,
    values: np.ndarray,
    phi_inc: np.ndarray,
) -> float:
    """Max abs residual of the secondary-state per-step decomposition."""
    x_values = np.asarray(x_values, dtype=float)
    values = np.asarray(values, dtype=float)
    phi_inc = np.asarray(phi_inc, dtype=float)
    b = np.asarray(b_inc, dtype=float)
    n, _, d = values.shape
    x_rm = cumulative_running_max(x_values[:, :, 0]) if x_values.shape[2] == 1 else None
    x_sn = cumulative_sup_norm(x_values)
    y_rm = cumulative_running_max(values[:, :, 0]) if d == 1 else None
    y_sn = cumulative_sup_norm(values)
    q_grid = control.values_on_grid(grid.times[:-1])
    times = grid.times
    dt = grid.dt
    worst = 0.0
    for k in range(grid.steps):
        t = float(times[k])
        xv = PathView(
            t=t, k=k, state=x_values[:, k, :], sup_norm=x_sn[:, k],
            history=x_values[:, : k + 1, :],
            _running_max=x_rm[:, k] if x_rm is not None else None,
        )
        yv = PathView(
            t=t, k=k, state=values[:, k, :], sup_norm=y_sn[:, k],
            history=values[:, : k + 1, :],
            _running_max=y_rm[:, k] if y_rm is not None else None,
        )
        q = float(q_grid[k])
        drift = np.asarray(coeffs.drift(t, xv, yv, q), dtype=float)
        sig_b = np.asarray(coeffs.diff_b(t, xv, yv, q), dtype=float)
        pre = values[:, k, :] + drift * dt + _apply_diff(sig_b, b[:, k, :])
        resid = values[:, k + 1, :] + phi_inc[:, k, :] - pre
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


def domain_violation_counts(
    potential: ConvexPotential, values: np.ndarray, tol: float = 1e-12
) -> np.ndarray:
    """Number of grid rows outside the closed domain, per path."""
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 2:
        vals = vals[None, :, :]
    dist = potential.domain_distance(vals)
    return np.sum(dist > tol, axis=-1)
