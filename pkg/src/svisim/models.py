"""Catalog of ready-made constrained diffusion models.

Each entry bundles primary-state coefficients (X), optional secondary
coefficients (Y), the constraint potentials, a driver correlation
layout, initial states and a list of self-probes asserting the
structural conditions the solver relies on (monotone drift, declared
Hölder moduli).

Names: ``reflected_bm``, ``toy_monotone``, ``heston_pd``,
``reflected_slv``, ``local_max_sv``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .coefficients import (
    ControlProcess,
    PathView,
    ProbeReport,
    XCoefficients,
    XMeta,
    YCoefficients,
    YMeta,
    pair_grid_sampler,
    pair_random_sampler,
    probe_holder,
    probe_monotone_drift,
)
from .paths import CorrelationSpec
from .potentials import BoxIndicator, ConvexPotential, HalfLineIndicator

__all__ = [
    "ModelInstance",
    "make_heston_path_dependent",
    "make_reflected_slv",
    "build_model",
    "model_names",
    "run_model_probes",
]


@dataclass(frozen=True)
class ModelInstance:
    """A fully assembled model ready for simulation."""

    name: str
    x: XCoefficients
    pot_x: ConvexPotential
    x0: np.ndarray
    corr: CorrelationSpec
    control: ControlProcess
    y: YCoefficients | None = None
    pot_y: ConvexPotential | None = None
    y0: np.ndarray | None = None
    probes: tuple[tuple[str, Callable[[], ProbeReport]], ...] = field(default=())

    @property
    def dim_x(self) -> int:
        return self.x.dim

    @property
    def dim_y(self) -> int | None:
        return None if self.y is None else self.y.dim

    @property
    def has_y(self) -> bool:
        return self.y is not None

    def with_control(self, control: ControlProcess) -> "ModelInstance":
        return replace(self, control=control)


def run_model_probes(model: ModelInstance) -> dict[str, ProbeReport]:
    """Execute every declared self-probe; keys are probe names."""
    return {name: runner() for name, runner in model.probes}


# -- shape helpers -----------------------------------------------------------

def _const_diff(width_rows: int, width_cols: int, value: float):
    def diff(_t: float, xv: PathView) -> np.ndarray:
        n = xv.state.shape[0]
        out = np.zeros((n, width_rows, width_cols))
        for i in range(min(width_rows, width_cols)):
            out[:, i, i] = value
        return out

    return diff


def _zero_drift(_t: float, xv: PathView) -> np.ndarray:
    return np.zeros_like(xv.state)


def _normalize_side(side) -> str:
    # reflection direction; numeric p in {0, 1} maps to below/above
    if side in ("above", 1, 1.0, True):
        return "above"
    if side in ("below", 0, 0.0, False):
        return "below"
    raise ValueError(
        f"reflection direction must be 'above' (p=1) or 'below' (p=0), got {side!r}"
    )


# -- library-level builders --------------------------------------------------

def make_heston_path_dependent(
    kappa: float,
    theta: float,
    xi: float,
    rho: float,
    mu_fn: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
    sigma_fn: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
) -> tuple[XCoefficients, YCoefficients, CorrelationSpec]:
    """Square-root variance process with a lookback-aware asset leg.

    The variance V mean-reverts at rate ``kappa`` to ``theta`` with vol
    of vol ``xi`` and is driven by the mixed driver built from ``rho``;
    ``sqrt(V)`` is guarded as ``sqrt(max(V, 0))``.  The asset S carries
    drift ``mu_fn(t, S, M) * S`` and diffusion
    ``sqrt(max(V, 0)) * sigma_fn(t, S, M) * S`` against the B driver,
    where M is the running maximum of S.
    """
    for name, v in (("kappa", kappa), ("theta", theta), ("xi", xi)):
        if not (float(v) > 0.0):
            raise ValueError(f"{name} must be positive")
    corr = CorrelationSpec(rho=float(rho))
    cw, cb = corr.split()

    def drift_v(_t: float, xv: PathView) -> np.ndarray:
        return kappa * (theta - xv.state)

    def vol_of_vol(v: np.ndarray) -> np.ndarray:
        return xi * np.sqrt(np.maximum(v, 0.0))

    def diff_v_w(_t: float, xv: PathView) -> np.ndarray:
        return (cw * vol_of_vol(xv.state))[:, :, None]

    def diff_v_b(_t: float, xv: PathView) -> np.ndarray:
        return (cb * vol_of_vol(xv.state))[:, :, None]

    x = XCoefficients(
        dim=1,
        dim_w=1,
        dim_b=1,
        drift=drift_v,
        diff_w=diff_v_w,
        diff_b=diff_v_b,
        meta=XMeta(alpha=0.0, drift_modulus=kappa, diff_w_modulus=xi * cw, diff_b_modulus=xi * abs(cb)),
    )

    def drift_s(t: float, xv: PathView, yv: PathView, _q: float) -> np.ndarray:
        s = yv.state[:, 0]
        m = yv.running_max
        return (np.asarray(mu_fn(t, s, m), dtype=float) * s)[:, None]

    def diff_s(t: float, xv: PathView, yv: PathView, _q: float) -> np.ndarray:
        v = xv.state[:, 0]
        s = yv.state[:, 0]
        m = yv.running_max
        beta = np.sqrt(np.maximum(v, 0.0)) * np.asarray(sigma_fn(t, s, m), dtype=float) * s
        return beta[:, None, None]

    y = YCoefficients(dim=1, dim_b=1, drift=drift_s, diff_b=diff_s, meta=YMeta(gamma=0.0))
    return x, y, corr


def make_reflected_slv(
    gamma_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    m_fn: Callable[[np.ndarray], np.ndarray],
    mu_fn: Callable[[np.ndarray], np.ndarray],
    sigma_fn: Callable[[np.ndarray], np.ndarray],
    barrier: float,
    side,
    rho: float = 0.0,
) -> tuple[XCoefficients, YCoefficients, HalfLineIndicator]:
    """Stochastic local volatility with a volatility factor reflected at a barrier.

    X follows ``dX = mu_fn(X) dt + sigma_fn(X) d(mixed driver)`` and is
    kept on one side of ``barrier``; the asset leg follows
    ``dS = gamma_fn(S, X) dt + m_fn(X) gamma_fn(S, X) dB``.

    ``side`` is 'above' or 'below'; the numeric reflection direction
    p=1 / p=0 is accepted as an alias and anything else is rejected.
    """
    side_name = _normalize_side(side)
    pot = HalfLineIndicator(barrier, side_name)
    corr = CorrelationSpec(rho=float(rho))
    cw, cb = corr.split()

    def drift_x(_t: float, xv: PathView) -> np.ndarray:
        return np.asarray(mu_fn(xv.state[:, 0]), dtype=float)[:, None]

    def diff_x_w(_t: float, xv: PathView) -> np.ndarray:
        return (cw * np.asarray(sigma_fn(xv.state[:, 0]), dtype=float))[:, None, None]

    def diff_x_b(_t: float, xv: PathView) -> np.ndarray:
        return (cb * np.asarray(sigma_fn(xv.state[:, 0]), dtype=float))[:, None, None]

    x = XCoefficients(dim=1, dim_w=1, dim_b=1, drift=drift_x, diff_w=diff_x_w, diff_b=diff_x_b)

    def drift_s(_t: float, xv: PathView, yv: PathView, _q: float) -> np.ndarray:
        return np.asarray(gamma_fn(yv.state[:, 0], xv.state[:, 0]), dtype=float)[:, None]

    def diff_s(_t: float, xv: PathView, yv: PathView, _q: float) -> np.ndarray:
        lev = np.asarray(m_fn(xv.state[:, 0]), dtype=float)
        loc = np.asarray(gamma_fn(yv.state[:, 0], xv.state[:, 0]), dtype=float)
        return (lev * loc)[:, None, None]

    y = YCoefficients(dim=1, dim_b=1, drift=drift_s, diff_b=diff_s)
    return x, y, pot


# -- catalog builders --------------------------------------------------------

def _build_reflected_bm(sigma: float = 1.0, x0: float = 0.0, barrier: float = 0.0, side="above"):
    if not (float(sigma) > 0.0):
        raise ValueError("sigma must be positive")
    side_name = _normalize_side(side)
    pot = HalfLineIndicator(barrier, side_name)
    x = XCoefficients(
        dim=1,
        dim_w=1,
        dim_b=1,
        drift=_zero_drift,
        diff_w=_const_diff(1, 1, float(sigma)),
        diff_b=_const_diff(1, 1, 0.0),
        meta=XMeta(alpha=0.5, drift_modulus=0.0, diff_w_modulus=0.0, diff_b_modulus=0.0),
    )
    probes = (
        (
            "monotone_drift",
            lambda: probe_monotone_drift(x, pair_random_sampler(-2.0, 2.0, 1, seed=101), 1000),
        ),
        (
            "diffusion_modulus",
            lambda: probe_holder(
                lambda v: np.full(v.shape[0], float(sigma)),
                1.0,
                pair_grid_sampler(-2.0, 2.0, 64),
                0,
                envelope=0.0,
            ),
        ),
    )
    return ModelInstance(
        name="reflected_bm",
        x=x,
        pot_x=pot,
        x0=np.array([float(x0)]),
        corr=CorrelationSpec(rho=0.0),
        control=ControlProcess.constant(1.0, 0.5, 2.0),
        probes=probes,
    )


def _build_toy_monotone(
    drift: str = "cubic",
    drift_coeff: float = 1.0,
    sigma: float = 0.3,
    dim: int = 1,
    box_halfwidth: float = 1e6,
    x0: float = 0.5,
    y0: float = 0.0,
    y_sigma: float = 0.1,
):
    """Monotone toy system; drift 'cubic' is -c x^3, 'linear' is -c x."""
    if drift not in ("cubic", "linear"):
        raise ValueError(f"drift must be 'cubic' or 'linear', got {drift!r}")
    if not (float(drift_coeff) > 0.0):
        raise ValueError("drift_coeff must be positive")
    dim = int(dim)
    if dim < 1:
        raise ValueError("dim must be >= 1")
    c = float(drift_coeff)
    power = 3 if drift == "cubic" else 1

    def drift_x(_t: float, xv: PathView) -> np.ndarray:
        return -c * xv.state**power

    x = XCoefficients(
        dim=dim,
        dim_w=dim,
        dim_b=dim,
        drift=drift_x,
        diff_w=_const_diff(dim, dim, float(sigma)),
        diff_b=_const_diff(dim, dim, 0.0),
        meta=XMeta(alpha=0.5, drift_modulus=(12.0 * c if power == 3 else c)),
    )
    pot_x = BoxIndicator([-box_halfwidth] * dim, [box_halfwidth] * dim)

    def drift_y(_t: float, xv: PathView, yv: PathView, _q: float) -> np.ndarray:
        xbar = np.mean(xv.state, axis=1)
        return (xbar - yv.state[:, 0])[:, None]

    def diff_y(_t: float, xv: PathView, yv: PathView, _q: float) -> np.ndarray:
        n = yv.state.shape[0]
        out = np.zeros((n, 1, dim))
        out[:, 0, 0] = float(y_sigma)
        return out

    y = YCoefficients(dim=1, dim_b=dim, drift=drift_y, diff_b=diff_y, meta=YMeta(lipschitz=1.0))
    pot_y = BoxIndicator([-box_halfwidth], [box_halfwidth])

    def scalar_drift(v: np.ndarray) -> np.ndarray:
        return -c * v**power

    probes = (
        (
            "monotone_drift",
            lambda: probe_monotone_drift(x, pair_random_sampler(-2.0, 2.0, dim, seed=102), 1000),
        ),
        (
            "drift_modulus",
            lambda: probe_holder(
                scalar_drift,
                1.0,
                pair_grid_sampler(-2.0, 2.0, 1000),
                0,
                envelope=(12.0 * c if power == 3 else c),
            ),
        ),
        (
            "y_drift_lipschitz",
            lambda: probe_holder(
                lambda v: -v, 1.0, pair_grid_sampler(-2.0, 2.0, 200), 0, envelope=1.0
            ),
        ),
    )
    corr = CorrelationSpec(dim_w=dim, dim_b=dim) if dim > 1 else CorrelationSpec(rho=0.0)
    return ModelInstance(
        name="toy_monotone",
        x=x,
        pot_x=pot_x,
        x0=np.full(dim, float(x0)),
        corr=corr,
        control=ControlProcess.constant(1.0, 0.5, 2.0),
        y=y,
        pot_y=pot_y,
        y0=np.array([float(y0)]),
        probes=probes,
    )


def _build_heston_pd(
    kappa: float = 1.5,
    theta: float = 0.04,
    xi: float = 0.2,
    rho: float = -0.5,
    v0: float = 0.04,
    s0: float = 1.0,
    mu: float = 0.0,
    sigma0: float = 1.0,
    lookback_leverage: float = 0.0,
    s_box_halfwidth: float = 1e9,
):
    lev = float(lookback_leverage)

    def mu_fn(_t, s, _m):
        return np.full_like(s, float(mu))

    def sigma_fn(_t, s, m):
        return float(sigma0) * (1.0 + lev * (1.0 - s / np.maximum(m, 1e-12)))

    x, y, corr = make_heston_path_dependent(kappa, theta, xi, rho, mu_fn, sigma_fn)
    pot_x = HalfLineIndicator(0.0, "above")
    pot_y = BoxIndicator([-s_box_halfwidth], [s_box_halfwidth])

    def vol_core(v: np.ndarray) -> np.ndarray:
        return float(xi) * np.sqrt(np.maximum(v, 0.0))

    probes = (
        (
            "monotone_drift",
            lambda: probe_monotone_drift(x, pair_random_sampler(0.0, 2.0, 1, seed=103), 1000),
        ),
        (
            "vol_of_vol_modulus",
            lambda: probe_holder(
                vol_core, 0.5, pair_grid_sampler(0.0, 1.0, 1000), 0, envelope=float(xi)
            ),
        ),
    )
    return ModelInstance(
        name="heston_pd",
        x=x,
        pot_x=pot_x,
        x0=np.array([float(v0)]),
        corr=corr,
        control=ControlProcess.constant(1.0, 0.5, 2.0),
        y=y,
        pot_y=pot_y,
        y0=np.array([float(s0)]),
        probes=probes,
    )


def _build_reflected_slv(
    kappa: float = 1.0,
    theta: float = 0.2,
    xi: float = 0.3,
    rho: float = 0.3,
    barrier: float = 0.0,
    side="above",
    x0: float = 0.2,
    s0: float = 1.0,
    gamma_scale: float = 0.05,
    m0: float = 1.0,
    m1: float = 0.5,
):
    def mu_fn(v):
        return float(kappa) * (float(theta) - v)

    def sigma_fn(v):
        return np.full_like(v, float(xi))

    def gamma_fn(s, _v):
        return float(gamma_scale) * s

    def m_fn(v):
        return float(m0) + float(m1) * v

    x, y, pot = make_reflected_slv(gamma_fn, m_fn, mu_fn, sigma_fn, barrier, side, rho=rho)
    probes = (
        (
            "monotone_drift",
            lambda: probe_monotone_drift(x, pair_random_sampler(0.0, 2.0, 1, seed=104), 1000),
        ),
        (
            "vol_modulus",
            lambda: probe_holder(
                lambda v: np.full(v.shape[0], float(xi)),
                1.0,
                pair_grid_sampler(0.0, 2.0, 64),
                0,
                envelope=0.0,
            ),
        ),
    )
    return ModelInstance(
        name="reflected_slv",
        x=x,
        pot_x=pot,
        x0=np.array([float(x0)]),
        corr=CorrelationSpec(rho=float(rho)),
        control=ControlProcess.constant(1.0, 0.5, 2.0),
        y=y,
        pot_y=BoxIndicator([-1e9], [1e9]),
        y0=np.array([float(s0)]),
        probes=probes,
    )


def _build_local_max_sv(
    kappa: float = 1.0,
    theta: float = 0.04,
    xi: float = 0.2,
    rho: float = 0.0,
    v0: float = 0.04,
    s0: float = 1.0,
    mu: float = 0.0,
    sigma0: float = 0.5,
    max_leverage: float = 0.5,
):
    """Variance as in heston_pd; asset vol scales with the drawdown from the running max."""
    lev = float(max_leverage)

    def mu_fn(_t, s, _m):
        return np.full_like(s, float(mu))

    def sigma_fn(_t, s, m):
        return float(sigma0) * (1.0 + lev * (1.0 - s / np.maximum(m, 1e-12)))

    x, y, corr = make_heston_path_dependent(kappa, theta, xi, rho, mu_fn, sigma_fn)

    def vol_core(v: np.ndarray) -> np.ndarray:
        return float(xi) * np.sqrt(np.maximum(v, 0.0))

    probes = (
        (
            "monotone_drift",
            lambda: probe_monotone_drift(x, pair_random_sampler(0.0, 2.0, 1, seed=105), 1000),
        ),
        (
            "vol_of_vol_modulus",
            lambda: probe_holder(
                vol_core, 0.5, pair_grid_sampler(0.0, 1.0, 1000), 0, envelope=float(xi)
            ),
        ),
    )
    return ModelInstance(
        name="local_max_sv",
        x=x,
        pot_x=HalfLineIndicator(0.0, "above"),
        x0=np.array([float(v0)]),
        corr=corr,
        control=ControlProcess.constant(1.0, 0.5, 2.0),
        y=y,
        pot_y=BoxIndicator([-1e9], [1e9]),
        y0=np.array([float(s0)]),
        probes=probes,
    )


_BUILDERS = {
    "reflected_bm": _build_reflected_bm,
    "toy_monotone": _build_toy_monotone,
    "heston_pd": _build_heston_pd,
    "reflected_slv": _build_reflected_slv,
    "local_max_sv": _build_local_max_sv,
}


def model_names() -> list[str]:
    return sorted(_BUILDERS)


def build_model(name: str, params: dict | None = None) -> ModelInstance:
    """Assemble a catalog model; unknown names or parameters raise ValueError."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown model {name!r}, available: {model_names()}")
    try:
        return _BUILDERS[name](**(params or {}))
    except TypeError as exc:
        raise ValueError(f"model {name}: {exc}") from None
