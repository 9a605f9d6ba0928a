"""Config validation: strictness, paths in diagnostics, normalization."""
import json

import pytest

from svisim.config import build_plan, load_config, validate_config
from svisim.exceptions import ConfigError
from svisim.paths import MeshGrid
from svisim.potentials import BoxIndicator
from svisim.solver import ProxStep, Yosida


def sim_doc(**over):
    doc = {
        "experiment": "simulate",
        "model": {"name": "reflected_bm"},
        "seed": 7,
        "n_paths": 8,
        "solver": {"steps": 16},
    }
    doc.update(over)
    return doc


def diag_paths(err: ConfigError) -> list[str]:
    return [p for p, _ in err.diagnostics]


def check_fails(doc, *expected_paths):
    with pytest.raises(ConfigError) as ei:
        validate_config(doc)
    for path in expected_paths:
        assert path in diag_paths(ei.value), ei.value.diagnostics
    return ei.value


# -- happy path -------------------------------------------------------------------

def test_minimal_config_fills_defaults():
    out = validate_config(sim_doc())
    assert out["threads"] == 1
    assert out["solver"] == {"scheme": "prox_step", "horizon": 1.0, "steps": 16}
    assert out["dump_paths"] == 0 and out["n_test_paths"] == 20
    assert out["assert_trends"] == []
    assert out["model"] == {"name": "reflected_bm", "params": {}}


def test_validation_is_idempotent():
    for doc in (
        sim_doc(),
        {
            "experiment": "cauchy",
            "model": {"name": "toy_monotone", "params": {"drift": "linear"}},
            "seed": 3,
            "n_paths": 64,
            "levels": [16, 32],
            "assert_decreasing": True,
        },
        {
            "experiment": "perturbation_sweep",
            "model": {"name": "toy_monotone"},
            "seed": 3,
            "n_paths": 64,
            "solver": {"steps": 32, "scheme": {"kind": "yosida", "n": 4}},
            "perturbation": {"mode": "drift_shift", "epsilons": [0.1, 0.05]},
        },
    ):
        once = validate_config(doc)
        assert validate_config(once) == once


def test_build_plan_assembles_the_run():
    plan = build_plan(validate_config(sim_doc()))
    assert plan.experiment == "simulate"
    assert plan.grid == MeshGrid(1.0, 16)
    assert plan.scheme == ProxStep()
    assert plan.model.name == "reflected_bm"
    # refinement plans derive their grids from the levels instead
    cauchy = build_plan(validate_config({
        "experiment": "cauchy",
        "model": {"name": "reflected_bm"},
        "seed": 1,
        "n_paths": 4,
        "levels": [16, 32],
    }))
    assert cauchy.grid is None


def test_scheme_and_overrides_reach_the_plan():
    doc = sim_doc(
        solver={"steps": 16, "scheme": {"kind": "yosida", "n": 6}, "horizon": 2.0},
        potentials={"x": {"kind": "box", "lower": [-3.0], "upper": [3.0]}},
        control={"breakpoints": [0.5], "values": [1.0, 2.0], "lam_min": 0.5, "lam_max": 2.0},
    )
    plan = build_plan(validate_config(doc))
    assert plan.scheme == Yosida(6)
    assert plan.grid == MeshGrid(2.0, 16)
    assert isinstance(plan.model.pot_x, BoxIndicator)
    assert plan.model.control.value(0.4) == 1.0
    assert plan.model.control.value(0.9) == 2.0


# -- diagnostics ------------------------------------------------------------------

def test_unknown_keys_are_rejected_with_paths():
    check_fails(sim_doc(bogus=1), "bogus")
    check_fails(sim_doc(model={"name": "reflected_bm", "extra": 2}), "model.extra")
    check_fails(sim_doc(solver={"steps": 16, "extra": 2}), "solver.extra")
    check_fails(sim_doc(correlation={"foo": 1}), "correlation.foo")
    check_fails(sim_doc(potentials={"z": {}}), "potentials.z")
    check_fails(
        sim_doc(control={"values": [1.0], "weird": 0}),
        "control.weird",
    )


def test_syntax_errors_carry_line_and_column(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text('{"experiment": "simulate",}\n')
    with pytest.raises(ConfigError) as ei:
        load_config(bad)
    path, msg = ei.value.diagnostics[0]
    assert path == "<syntax>"
    assert "line 1" in msg


def test_load_config_happy_path(tmp_path):
    f = tmp_path / "run.json"
    f.write_text(json.dumps(sim_doc()))
    assert load_config(f)["experiment"] == "simulate"


def test_required_keys():
    doc = sim_doc()
    del doc["seed"]
    del doc["n_paths"]
    err = check_fails(doc, "seed", "n_paths")
    assert any("missing" in m for _, m in err.diagnostics)
    check_fails(sim_doc(n_paths=1), "n_paths")
    check_fails(sim_doc(threads=0), "threads")
    check_fails({"model": {"name": "reflected_bm"}, "seed": 1, "n_paths": 4}, "experiment")


def test_model_diagnostics():
    check_fails(sim_doc(model={"name": "unknown_thing"}), "model.name")
    check_fails(sim_doc(model={"name": 7}), "model.name")
    # parameter errors surface once the builder actually runs
    err = check_fails(sim_doc(model={"name": "reflected_bm", "params": {"sigma": -1.0}}), "model.params")
    assert "sigma" in dict(err.diagnostics)["model.params"]


def test_correlation_rho_range_and_conflicts():
    err = check_fails(sim_doc(correlation={"rho": 1.5}), "correlation.rho")
    assert "[-1, 1]" in dict(err.diagnostics)["correlation.rho"]
    # conflicting values are refused, matching ones are injected
    doc = sim_doc(
        model={"name": "heston_pd", "params": {"rho": -0.5}},
        correlation={"rho": 0.3},
    )
    check_fails(doc, "correlation.rho")
    ok = validate_config(sim_doc(model={"name": "heston_pd"}, correlation={"rho": -0.25}))
    assert ok["model"]["params"]["rho"] == -0.25


def test_correlation_dimension_cross_check():
    doc = sim_doc(model={"name": "toy_monotone", "params": {"dim": 3}}, correlation={"dim_w": 2})
    check_fails(doc, "correlation.dim_w")
    ok = validate_config(
        sim_doc(model={"name": "toy_monotone", "params": {"dim": 3}}, correlation={"dim_w": 3})
    )
    assert ok["correlation"]["dim_w"] == 3


def test_yosida_sweep_demands_scalar_state():
    doc = {
        "experiment": "yosida_sweep",
        "model": {"name": "toy_monotone", "params": {"dim": 2}},
        "seed": 1,
        "n_paths": 4,
        "solver": {"steps": 16},
        "n_values": [2, 4],
    }
    err = check_fails(doc, "experiment")
    assert "1-d" in dict(err.diagnostics)["experiment"]


def test_cauchy_levels_rules():
    base = {
        "experiment": "cauchy",
        "model": {"name": "reflected_bm"},
        "seed": 1,
        "n_paths": 4,
    }
    check_fails({**base, "levels": [48]}, "levels")
    check_fails({**base, "levels": [64, 32]}, "levels")
    check_fails(dict(base), "levels")  # required
    check_fails({**base, "levels": [16, 32], "solver": {"steps": 8}}, "solver.steps")


def test_assert_decreasing_sugar_and_trend_names():
    doc = {
        "experiment": "cauchy",
        "model": {"name": "reflected_bm"},
        "seed": 1,
        "n_paths": 4,
        "levels": [16, 32],
        "assert_decreasing": True,
    }
    out = validate_config(doc)
    assert out["assert_trends"] == ["strictly_decreasing"]
    check_fails(sim_doc(assert_trends=["monotone-ish"]), "assert_trends[0]")


def test_perturbation_block_rules():
    base = {
        "experiment": "perturbation_sweep",
        "model": {"name": "toy_monotone"},
        "seed": 1,
        "n_paths": 4,
        "solver": {"steps": 16},
    }
    check_fails({**base, "perturbation": {"mode": "jolt", "epsilons": [0.1]}}, "perturbation.mode")
    check_fails(
        {**base, "perturbation": {"mode": "drift_shift", "epsilons": [0.1, 0.2]}},
        "perturbation.epsilons",
    )
    check_fails({**base, "perturbation": {"mode": "drift_shift", "epsilons": [0.1]}, "eta": -1.0}, "eta")
    check_fails(dict(base), "perturbation")
    out = validate_config({**base, "perturbation": {"mode": "drift_shift", "epsilons": [0.1, 0.05]}})
    assert out["eta"] == pytest.approx(1e-2)
    assert out["perturbation"]["epsilons"] == [0.1, 0.05]


def test_control_validation_and_normalization():
    out = validate_config(sim_doc(control={"values": [1.0]}))
    assert out["control"]["lam_max"] == 1.0e308
    err = check_fails(
        sim_doc(control={"values": [5.0], "lam_min": 0.0, "lam_max": 2.0}),
        "control",
    )
    assert "outside" in dict(err.diagnostics)["control"]


def test_potential_override_dimension_mismatch():
    doc = sim_doc(potentials={"x": {"kind": "box", "lower": [-1.0, -1.0], "upper": [1.0, 1.0]}})
    err = check_fails(doc, "model.params")
    assert "potentials.x" in dict(err.diagnostics)["model.params"]
    # a y override on a model without a secondary state is refused too
    doc2 = sim_doc(potentials={"y": {"kind": "box", "lower": [-1.0], "upper": [1.0]}})
    err2 = check_fails(doc2, "model.params")
    assert "secondary" in dict(err2.diagnostics)["model.params"]


def test_malformed_potential_records():
    check_fails(sim_doc(potentials={"x": {"kind": "pyramid"}}), "potentials.x")
    check_fails(sim_doc(potentials={"x": {"kind": "box", "lower": [-1.0]}}), "potentials.x")


def test_non_object_root_rejected():
    with pytest.raises(ConfigError):
        validate_config(["not", "a", "config"])
