"""Experiment harness: statistics, trends and the sweep drivers."""
import numpy as np
import pytest

from svisim.coefficients import ControlProcess, XCoefficients
from svisim.exceptions import NumericalError, PerturbationRejected
from svisim.experiments import (
    MCStats,
    PerturbationSpec,
    cauchy_refinement,
    fit_rate,
    mc_stats,
    pairwise_sum,
    perturbation_sweep,
    simulate_paths,
    trend_nonincreasing,
    trend_strictly_decreasing,
    yosida_sweep,
)
from svisim.models import ModelInstance, build_model
from svisim.paths import CorrelationSpec, MeshGrid
from svisim.potentials import BoxIndicator
from svisim.solver import ProxStep


def frozen_model():
    """All coefficients zero: the solution is the constant initial state."""
    zero_drift = lambda t, xv: np.zeros_like(xv.state)
    zero_diff = lambda t, xv: np.zeros(xv.state.shape + (1,))
    x = XCoefficients(dim=1, dim_w=1, dim_b=1, drift=zero_drift, diff_w=zero_diff, diff_b=zero_diff)
    return ModelInstance(
        name="frozen",
        x=x,
        pot_x=BoxIndicator([-1.0], [1.0]),
        x0=np.array([0.2]),
        corr=CorrelationSpec(rho=0.0),
        control=ControlProcess.constant(1.0),
    )


# -- statistics -------------------------------------------------------------------

def test_pairwise_sum_matches_plain_sum():
    assert pairwise_sum(np.array([])) == 0.0
    assert pairwise_sum(np.array([4.5])) == 4.5
    assert pairwise_sum(np.array([1.0, 2.0, 3.0])) == 6.0
    rng = np.random.default_rng(3)
    v = rng.normal(size=10001)
    assert pairwise_sum(v) == pytest.approx(np.sum(v), abs=1e-9)
    # fixed association: same input, same bits
    assert pairwise_sum(v) == pairwise_sum(v.copy())


def test_mc_stats_pinned_values():
    s = mc_stats(np.array([0.0, 2.0]))
    assert s.mean == 1.0 and s.stderr == 1.0 and s.n == 2
    assert s.ci_lo == pytest.approx(1.0 - 1.96)
    assert s.ci_hi == pytest.approx(1.0 + 1.96)
    flat = mc_stats(np.ones(4))
    assert flat.mean == 1.0 and flat.stderr == 0.0
    with pytest.raises(ValueError):
        mc_stats(np.array([1.0]))


def test_mc_stats_rejects_non_finite_samples():
    with pytest.raises(NumericalError):
        mc_stats(np.array([1.0, np.inf]))
    with pytest.raises(NumericalError):
        mc_stats(np.array([np.nan, 0.0]))
    # finite samples whose variance overflows are refused too
    with pytest.raises(NumericalError):
        mc_stats(np.array([1e200, -1e200]))


def test_fit_rate_exact_and_degenerate():
    fit = fit_rate([1.0, 2.0, 4.0, 8.0], [0.5, 1.0, 2.0, 4.0])
    assert fit.rate == pytest.approx(1.0) and fit.r2 == pytest.approx(1.0)
    assert fit.points == 4
    const = fit_rate([1.0, 2.0, 4.0], [3.0, 3.0, 3.0])
    assert const.rate == pytest.approx(0.0) and const.r2 == pytest.approx(1.0)
    assert fit_rate([1.0, 2.0], [1.0, 0.0]) is None  # one positive point left
    assert fit_rate([1.0], [1.0]) is None


def test_fit_rate_recovers_half_order_under_noise():
    rng = np.random.default_rng(17)
    dts = np.array([2.0**-k for k in range(4, 10)])
    errors = np.sqrt(dts) * (1.0 + 0.01 * rng.normal(size=dts.size))
    fit = fit_rate(dts, errors)
    assert fit.rate == pytest.approx(0.5, abs=0.05)
    assert fit.r2 > 0.99


def test_trend_predicates():
    def s(mean, stderr=0.01):
        return MCStats(mean, stderr, mean - 1.96 * stderr, mean + 1.96 * stderr, 100)

    assert trend_strictly_decreasing([s(1.0), s(0.5), s(0.25)])
    assert not trend_strictly_decreasing([s(1.0), s(0.99)])  # within noise
    assert not trend_strictly_decreasing([s(1.0), s(1.3)])
    # exact zeros are nonincreasing but not strictly decreasing
    zeros = [s(0.0, 0.0), s(0.0, 0.0)]
    assert trend_nonincreasing(zeros)
    assert not trend_strictly_decreasing(zeros)
    assert trend_nonincreasing([s(1.0), s(1.005)])  # small rise within noise
    assert not trend_nonincreasing([s(1.0), s(1.2)])


# -- refinement -------------------------------------------------------------------

def test_cauchy_exact_for_frozen_dynamics():
    report = cauchy_refinement(frozen_model(), ProxStep(), [16, 32, 64], 128, seed=5)
    assert report.kind == "cauchy"
    assert all(s.mean == 0.0 and s.stderr == 0.0 for s in report.stats)
    assert report.fitted_rate is None and report.fit_r2 is None
    assert report.trend == {"strictly_decreasing": False, "nonincreasing": True}
    assert report.extras["dt"] == (1.0 / 16, 1.0 / 32, 1.0 / 64)


def test_cauchy_first_order_for_lipschitz_toy():
    model = build_model("toy_monotone", {"drift": "linear", "sigma": 0.3})
    report = cauchy_refinement(model, ProxStep(), [16, 32, 64, 128], 512, seed=11)
    means = [s.mean for s in report.stats]
    assert means == sorted(means, reverse=True)
    # additive noise and Lipschitz drift: gaps shrink linearly in dt
    assert 0.6 <= report.fitted_rate <= 1.4
    assert report.fit_r2 > 0.9
    assert report.trend["strictly_decreasing"]


def test_cauchy_level_validation():
    model = frozen_model()
    with pytest.raises(ValueError):
        cauchy_refinement(model, ProxStep(), [16, 48], 4, seed=1)  # 48 not dyadic
    with pytest.raises(ValueError):
        cauchy_refinement(model, ProxStep(), [64, 32], 4, seed=1)
    with pytest.raises(ValueError):
        cauchy_refinement(model, ProxStep(), [], 4, seed=1)


# -- penalization -----------------------------------------------------------------

def test_yosida_sweep_gap_shrinks_with_n():
    model = build_model("reflected_bm")
    report = yosida_sweep(model, [4, 16, 64], 256, seed=7, grid=MeshGrid(1.0, 256))
    means = [s.mean for s in report.stats]
    assert means[0] > means[1] > means[2] > 0.0
    assert report.trend["nonincreasing"]
    dist = report.extras["domain_distance_mean"]
    assert dist[0] > dist[1] > dist[2] > 0.0
    assert report.axis_name == "n"


def test_yosida_sweep_rejects_multidimensional_states():
    model = build_model("toy_monotone", {"dim": 2})
    with pytest.raises(ValueError):
        yosida_sweep(model, [4, 16], 8, seed=1, grid=MeshGrid(1.0, 16))
    with pytest.raises(ValueError):
        yosida_sweep(build_model("reflected_bm"), [16, 4], 8, seed=1, grid=MeshGrid(1.0, 16))


# -- perturbation -----------------------------------------------------------------

def test_perturbation_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(mode="jolt", epsilons=(0.1,))
    with pytest.raises(ValueError):
        PerturbationSpec(mode="drift_shift", epsilons=())
    with pytest.raises(ValueError):
        PerturbationSpec(mode="drift_shift", epsilons=(0.1, 0.2))
    with pytest.raises(ValueError):
        PerturbationSpec(mode="drift_shift", epsilons=(0.1, -0.05))
    with pytest.raises(ValueError):
        PerturbationSpec(mode="custom", epsilons=(0.1,))  # factory and modulus missing


def test_perturbation_sweep_coupled_errors():
    model = build_model("toy_monotone")
    pert = PerturbationSpec(mode="drift_shift", epsilons=(0.1, 0.05, 0.0))
    x_rep, y_rep = perturbation_sweep(model, pert, ProxStep(), MeshGrid(1.0, 64), 128, seed=9)
    x_means = [s.mean for s in x_rep.stats]
    assert x_means[0] > x_means[1] > x_means[2]
    assert x_means[2] == 0.0  # eps = 0 reproduces the base run bit for bit
    assert x_rep.kind == "perturbation_x" and y_rep.kind == "perturbation_y"
    exc = y_rep.extras["exceedance"]
    assert len(exc) == 3 and exc[2] == 0.0
    assert all(b <= a + 1e-12 for a, b in zip(exc, exc[1:]))
    assert y_rep.extras["eta"] == pytest.approx(1e-2)


def test_perturbation_rejects_nonmonotone_custom_family():
    model = build_model("toy_monotone")
    base = model.x

    def tilt(eps):
        # adds an expansive +eps x term: monotonicity dies for eps > 0
        def drift(t, xv):
            return np.asarray(base.drift(t, xv)) + eps * xv.state

        return XCoefficients(
            dim=base.dim, dim_w=base.dim_w, dim_b=base.dim_b,
            drift=drift, diff_w=base.diff_w, diff_b=base.diff_b,
        )

    pert = PerturbationSpec(mode="custom", epsilons=(0.5,), custom=tilt, modulus=10.0)
    with pytest.raises(PerturbationRejected, match="monotonicity"):
        perturbation_sweep(model, pert, ProxStep(), MeshGrid(1.0, 16), 8, seed=2)


def test_perturbation_rejects_understated_modulus():
    model = build_model("toy_monotone")
    base = model.x

    def shove(eps):
        def drift(t, xv):
            return np.asarray(base.drift(t, xv)) + 5.0 * eps

        return XCoefficients(
            dim=base.dim, dim_w=base.dim_w, dim_b=base.dim_b,
            drift=drift, diff_w=base.diff_w, diff_b=base.diff_b,
        )

    pert = PerturbationSpec(mode="custom", epsilons=(0.1,), custom=shove, modulus=1.0)
    with pytest.raises(PerturbationRejected, match="modulus"):
        perturbation_sweep(model, pert, ProxStep(), MeshGrid(1.0, 16), 8, seed=2)


# -- worker invariance ---------------------------------------------------------------

def test_thread_count_does_not_change_results():
    model = build_model("reflected_bm")
    a = cauchy_refinement(model, ProxStep(), [16, 32], 2500, seed=13, threads=1)
    b = cauchy_refinement(model, ProxStep(), [16, 32], 2500, seed=13, threads=4)
    for sa, sb in zip(a.stats, b.stats):
        assert sa.mean == sb.mean and sa.stderr == sb.stderr
    assert a.extras["driver_checksum"] == b.extras["driver_checksum"]
    assert a.fitted_rate == b.fitted_rate


# -- plain simulation ----------------------------------------------------------------

def test_simulate_paths_diagnostics():
    model = build_model("toy_monotone")
    grid = MeshGrid(1.0, 64)
    result = simulate_paths(model, ProxStep(), grid, 64, seed=21)
    assert result.n_paths == 64 and result.model_name == "toy_monotone"
    for key in ("x_T_1", "y_T_1", "sup_x", "sup_y", "tv_phi1", "tv_phi2",
                "comp_slack", "boundary_dist", "decomp_resid"):
        assert key in result.rows and result.rows[key].shape == (64,)
    s = result.summary
    assert s["complementarity"]["passed"]
    assert s["boundary_activity"]["passed"]
    assert s["decomposition_residual"] <= 1e-12
    assert s["domain_violation_paths"] == 0
    assert s["x_T_1"]["ci_lo"] <= s["x_T_1"]["mean"] <= s["x_T_1"]["ci_hi"]
