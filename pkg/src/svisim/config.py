"""Experiment configuration: JSON loading, validation, normalization.

Configs are plain JSON documents.  Validation is strict: unknown keys
are rejected, and every diagnostic carries the config path it refers to
(``model.params.rho``, ``solver.scheme``), so a bad file fails with
actionable messages rather than at some point mid-run.  The normalized
document round-trips: ``validate_config(validate_config(doc)) ==
validate_config(doc)``.
"""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from .coefficients import ControlProcess
from .exceptions import ConfigError
from .models import ModelInstance, build_model, model_names
from .paths import MeshGrid
from .potentials import potential_from_config, potential_to_config
from .solver import SchemeChoice, scheme_from_config, scheme_to_config

__all__ = ["load_config", "validate_config", "RunPlan", "build_plan", "DEFAULT_ETA"]

DEFAULT_ETA = 1e-2

_EXPERIMENTS = ("simulate", "cauchy", "yosida_sweep", "perturbation_sweep")

_COMMON_KEYS = {
    "experiment", "model", "potentials", "correlation", "control",
    "solver", "seed", "n_paths", "threads", "assert_trends",
}
_PER_EXPERIMENT_KEYS = {
    "cauchy": {"levels", "assert_decreasing"},
    "yosida_sweep": {"n_values"},
    "perturbation_sweep": {"perturbation", "eta"},
    "simulate": {"dump_paths", "n_test_paths"},
}
_TREND_NAMES = (
    "strictly_decreasing",
    "nonincreasing",
    "exceedance_nonincreasing",
)


def load_config(path: str | Path) -> dict:
    """Parse and validate a config file; returns the normalized document."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [("<syntax>", f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")]
        ) from None
    return validate_config(doc)


def _want(doc, key, kinds, diags, default=None, required=False, prefix=""):
    label = f"{prefix}{key}"
    if key not in doc:
        if required:
            diags.append((label, "required key is missing"))
        return default
    val = doc[key]
    if kinds is bool:
        if not isinstance(val, bool):
            diags.append((label, f"expected a boolean, got {type(val).__name__}"))
            return default
        return val
    if kinds is int:
        if isinstance(val, bool) or not isinstance(val, int):
            diags.append((label, f"expected an integer, got {type(val).__name__}"))
            return default
        return val
    if kinds is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            diags.append((label, f"expected a number, got {type(val).__name__}"))
            return default
        return float(val)
    if not isinstance(val, kinds):
        diags.append((label, f"expected {kinds.__name__}, got {type(val).__name__}"))
        return default
    return val


def _int_list(doc, key, diags) -> list[int] | None:
    val = doc.get(key)
    if val is None:
        diags.append((key, "required key is missing"))
        return None
    if not isinstance(val, list) or not val:
        diags.append((key, "expected a nonempty list of integers"))
        return None
    out = []
    for i, v in enumerate(val):
        if isinstance(v, bool) or not isinstance(v, int):
            diags.append((f"{key}[{i}]", "expected an integer"))
            return None
        out.append(v)
    return out


def _validate_model(doc, diags) -> dict | None:
    model_rec = _want(doc, "model", dict, diags, required=True)
    if model_rec is None:
        return None
    for key in sorted(set(model_rec) - {"name", "params"}):
        diags.append((f"model.{key}", "unknown key"))
    name = model_rec.get("name")
    if not isinstance(name, str):
        diags.append(("model.name", "expected a model name string"))
        name = None
    elif name not in model_names():
        diags.append(("model.name", f"unknown model {name!r}, expected one of {model_names()}"))
        name = None
    params = model_rec.get("params", {})
    if not isinstance(params, dict):
        diags.append(("model.params", "expected an object of model parameters"))
        params = {}
    return {"name": name, "params": dict(params)}


def _validate_correlation(doc, model_out, diags) -> dict | None:
    rec = doc.get("correlation")
    if rec is None:
        return None
    if not isinstance(rec, dict):
        diags.append(("correlation", "expected an object"))
        return None
    for key in sorted(set(rec) - {"rho", "dim_w", "dim_b"}):
        diags.append((f"correlation.{key}", "unknown key"))
    out = {}
    if "rho" in rec:
        rho = rec["rho"]
        if isinstance(rho, bool) or not isinstance(rho, (int, float)):
            diags.append(("correlation.rho", "expected a number"))
        elif not (-1.0 <= float(rho) <= 1.0):
            diags.append(("correlation.rho", f"rho must lie in [-1, 1], got {rho}"))
        else:
            out["rho"] = float(rho)
            if model_out is not None:
                prior = model_out["params"].get("rho")
                if prior is not None and float(prior) != float(rho):
                    diags.append((
                        "correlation.rho",
                        f"conflicts with model.params.rho = {prior}",
                    ))
                else:
                    model_out["params"]["rho"] = float(rho)
    for key in ("dim_w", "dim_b"):
        if key in rec:
            v = rec[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                diags.append((f"correlation.{key}", "expected a positive integer"))
            else:
                out[key] = v
    return out or None


def _validate_potentials(doc, diags) -> dict | None:
    rec = doc.get("potentials")
    if rec is None:
        return None
    if not isinstance(rec, dict):
        diags.append(("potentials", "expected an object"))
        return None
    for key in sorted(set(rec) - {"x", "y"}):
        diags.append((f"potentials.{key}", "unknown key"))
    out = {}
    for slot in ("x", "y"):
        if slot in rec:
            try:
                pot = potential_from_config(rec[slot])
            except (TypeError, ValueError, KeyError) as exc:
                diags.append((f"potentials.{slot}", str(exc)))
            else:
                out[slot] = potential_to_config(pot)
    return out or None


def _validate_solver(doc, experiment, diags) -> dict:
    rec = doc.get("solver", {})
    if not isinstance(rec, dict):
        diags.append(("solver", "expected an object"))
        rec = {}
    for key in sorted(set(rec) - {"scheme", "horizon", "steps"}):
        diags.append((f"solver.{key}", "unknown key"))
    out: dict = {}
    scheme_rec = rec.get("scheme", "prox_step")
    try:
        out["scheme"] = scheme_to_config(scheme_from_config(scheme_rec))
    except ValueError as exc:
        diags.append(("solver.scheme", str(exc)))
        out["scheme"] = "prox_step"
    horizon = _want(rec, "horizon", float, diags, default=1.0, prefix="solver.")
    if horizon is not None and horizon <= 0.0:
        diags.append(("solver.horizon", "must be positive"))
    out["horizon"] = horizon
    if experiment == "cauchy":
        if "steps" in rec:
            diags.append(("solver.steps", "the refinement experiment derives its grids from 'levels'"))
    else:
        steps = _want(rec, "steps", int, diags, required=experiment is not None, prefix="solver.")
        if steps is not None:
            if steps < 1:
                diags.append(("solver.steps", "must be >= 1"))
            out["steps"] = steps
    return out


def validate_config(doc) -> dict:
    """Validate a parsed config document and fill defaults.

    Raises :class:`ConfigError` with one diagnostic per problem; on
    success returns a normalized dict that runs identically when fed
    back through validation.
    """
    diags: list[tuple[str, str]] = []
    if not isinstance(doc, dict):
        raise ConfigError([("<root>", "the config document must be a JSON object")])

    experiment = _want(doc, "experiment", str, diags, required=True)
    if experiment is not None and experiment not in _EXPERIMENTS:
        diags.append(("experiment", f"unknown experiment {experiment!r}, expected one of {list(_EXPERIMENTS)}"))
        experiment = None

    allowed = set(_COMMON_KEYS)
    if experiment is not None:
        allowed |= _PER_EXPERIMENT_KEYS[experiment]
    for key in sorted(set(doc) - allowed):
        diags.append((key, "unknown key"))

    out: dict = {"experiment": experiment}

    model_out = _validate_model(doc, diags)
    if model_out is not None:
        out["model"] = model_out
    correlation = _validate_correlation(doc, model_out, diags)
    if correlation is not None:
        out["correlation"] = correlation
    potentials = _validate_potentials(doc, diags)
    if potentials is not None:
        out["potentials"] = potentials

    seed = _want(doc, "seed", int, diags, required=True)
    if seed is not None:
        out["seed"] = seed
    n_paths = _want(doc, "n_paths", int, diags, required=True)
    if n_paths is not None:
        if n_paths < 2:
            diags.append(("n_paths", "need at least 2 paths for error statistics"))
        out["n_paths"] = n_paths

    out["solver"] = _validate_solver(doc, experiment, diags)
    horizon = out["solver"]["horizon"]

    threads = _want(doc, "threads", int, diags, default=1)
    if threads is not None and threads < 1:
        diags.append(("threads", "must be >= 1"))
    out["threads"] = threads

    trends = doc.get("assert_trends", [])
    if not isinstance(trends, list) or any(not isinstance(t, str) for t in trends):
        diags.append(("assert_trends", "expected a list of trend names"))
        trends = []
    for i, t in enumerate(trends):
        if t not in _TREND_NAMES:
            diags.append((f"assert_trends[{i}]", f"unknown trend {t!r}, expected one of {list(_TREND_NAMES)}"))
    trends = list(trends)

    control_rec = doc.get("control")
    if control_rec is not None:
        if not isinstance(control_rec, dict):
            diags.append(("control", "expected an object"))
        else:
            for key in sorted(set(control_rec) - {"breakpoints", "values", "lam_min", "lam_max"}):
                diags.append((f"control.{key}", "unknown key"))
            try:
                ControlProcess(
                    breakpoints=tuple(control_rec.get("breakpoints", ())),
                    values=tuple(control_rec.get("values", ())),
                    lam_min=float(control_rec.get("lam_min", 0.0)),
                    lam_max=float(control_rec.get("lam_max", float("inf"))),
                    horizon=horizon,
                )
            except (TypeError, ValueError) as exc:
                diags.append(("control", str(exc)))
            else:
                out["control"] = {
                    "breakpoints": list(control_rec.get("breakpoints", ())),
                    "values": list(control_rec.get("values", ())),
                    "lam_min": float(control_rec.get("lam_min", 0.0)),
                    "lam_max": float(control_rec.get("lam_max", 1.0e308)),
                }

    if experiment == "cauchy":
        levels = _int_list(doc, "levels", diags)
        if levels is not None:
            bad = [lv for lv in levels if lv < 1 or (lv & (lv - 1)) != 0]
            if bad:
                diags.append(("levels", f"levels must be powers of two, got {bad}"))
            if any(b <= a for a, b in zip(levels, levels[1:])):
                diags.append(("levels", "levels must be strictly increasing"))
            out["levels"] = levels
        dec = _want(doc, "assert_decreasing", bool, diags, default=False)
        if dec and "strictly_decreasing" not in trends:
            trends.append("strictly_decreasing")
    elif experiment == "yosida_sweep":
        n_values = _int_list(doc, "n_values", diags)
        if n_values is not None:
            if any(v < 1 for v in n_values):
                diags.append(("n_values", "penalization indices must be positive"))
            if any(b <= a for a, b in zip(n_values, n_values[1:])):
                diags.append(("n_values", "penalization indices must be strictly increasing"))
            out["n_values"] = n_values
    elif experiment == "perturbation_sweep":
        pert = _want(doc, "perturbation", dict, diags, required=True)
        if pert is not None:
            for key in sorted(set(pert) - {"mode", "epsilons"}):
                diags.append((f"perturbation.{key}", "unknown key"))
            mode = pert.get("mode")
            if mode not in ("drift_shift", "diffusion_scale"):
                diags.append((
                    "perturbation.mode",
                    f"expected 'drift_shift' or 'diffusion_scale', got {mode!r}",
                ))
            eps = pert.get("epsilons")
            if (
                not isinstance(eps, list)
                or not eps
                or any(isinstance(e, bool) or not isinstance(e, (int, float)) for e in eps)
            ):
                diags.append(("perturbation.epsilons", "expected a nonempty list of numbers"))
                eps = None
            else:
                if any(e < 0 for e in eps):
                    diags.append(("perturbation.epsilons", "must be nonnegative"))
                if any(b >= a for a, b in zip(eps, eps[1:])):
                    diags.append(("perturbation.epsilons", "must be strictly decreasing"))
            out["perturbation"] = {"mode": mode, "epsilons": [float(e) for e in eps or []]}
        eta = _want(doc, "eta", float, diags, default=DEFAULT_ETA)
        if eta is not None and eta <= 0:
            diags.append(("eta", "must be positive"))
        out["eta"] = eta
    elif experiment == "simulate":
        dump = _want(doc, "dump_paths", int, diags, default=0)
        if dump is not None and dump < 0:
            diags.append(("dump_paths", "must be >= 0"))
        out["dump_paths"] = dump
        ntest = _want(doc, "n_test_paths", int, diags, default=20)
        if ntest is not None and ntest < 1:
            diags.append(("n_test_paths", "must be >= 1"))
        out["n_test_paths"] = ntest

    out["assert_trends"] = trends

    # cross-checks that need a built model
    if not diags:
        try:
            model = _assemble_model(out)
        except (TypeError, ValueError) as exc:
            diags.append(("model.params", str(exc)))
        else:
            corr = out.get("correlation")
            if corr is not None:
                if "dim_w" in corr and corr["dim_w"] != model.corr.dim_w:
                    diags.append((
                        "correlation.dim_w",
                        f"model {model.name!r} drives {model.corr.dim_w} noise components, got {corr['dim_w']}",
                    ))
                if "dim_b" in corr and corr["dim_b"] != model.corr.dim_b:
                    diags.append((
                        "correlation.dim_b",
                        f"model {model.name!r} drives {model.corr.dim_b} noise components, got {corr['dim_b']}",
                    ))
            if experiment == "yosida_sweep" and model.dim_x != 1:
                diags.append((
                    "experiment",
                    f"yosida_sweep needs a 1-d primary state, model {model.name!r} has dim {model.dim_x}",
                ))

    if diags:
        raise ConfigError(diags)
    return out


def _assemble_model(config: dict) -> ModelInstance:
    """Build the model and apply potential/control overrides."""
    model = build_model(config["model"]["name"], config["model"]["params"])
    pots = config.get("potentials")
    if pots is not None:
        updates = {}
        if "x" in pots:
            pot = potential_from_config(pots["x"])
            if pot.dim != model.dim_x:
                raise ValueError(
                    f"potentials.x has dim {pot.dim}, model state has dim {model.dim_x}"
                )
            updates["pot_x"] = pot
        if "y" in pots:
            if not model.has_y:
                raise ValueError(f"model {model.name!r} has no secondary state to constrain")
            pot = potential_from_config(pots["y"])
            if pot.dim != model.dim_y:
                raise ValueError(
                    f"potentials.y has dim {pot.dim}, secondary state has dim {model.dim_y}"
                )
            updates["pot_y"] = pot
        if updates:
            model = replace(model, **updates)
    if "control" in config:
        rec = config["control"]
        control = ControlProcess(
            breakpoints=tuple(rec["breakpoints"]),
            values=tuple(rec["values"]),
            lam_min=rec["lam_min"],
            lam_max=rec["lam_max"],
            horizon=config["solver"]["horizon"],
        )
        model = model.with_control(control)
    return model


class RunPlan:
    """Everything the CLI needs to execute one validated config."""

    def __init__(
        self,
        config: dict,
        model: ModelInstance,
        scheme: SchemeChoice,
        grid: MeshGrid | None,
    ):
        self.config = config
        self.model = model
        self.scheme = scheme
        self.grid = grid

    @property
    def experiment(self) -> str:
        return self.config["experiment"]


def build_plan(config: dict) -> RunPlan:
    """Instantiate model, scheme and grid from a normalized config."""
    model = _assemble_model(config)
    scheme = scheme_from_config(config["solver"]["scheme"])
    grid = None
    if "steps" in config["solver"]:
        grid = MeshGrid(config["solver"]["horizon"], config["solver"]["steps"])
    return RunPlan(config=config, model=model, scheme=scheme, grid=grid)
