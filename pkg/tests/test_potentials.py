"""Convex potentials: prox oracles, envelope identities, witnesses."""
import numpy as np
import pytest

from svisim import (
    AbsValue,
    BoxIndicator,
    DomainError,
    HalfLineIndicator,
    MoreauEnvelope,
    Separable,
    potential_from_config,
    potential_to_config,
    subgradient_witness,
)

RNG = np.random.default_rng(20260822)


def envelope_value_by_grid(pot, n, x, radius=6.0, points=600001):
    """Brute-force the envelope as a minimum over a fine 1-d grid."""
    g = np.linspace(-radius, radius, points)[:, None]
    vals = 0.5 * n * (g[:, 0] - x) ** 2 + pot.value(g)
    return float(np.min(vals))


def sample_catalog():
    """One representative of each potential shape."""
    return [
        BoxIndicator([-1.0], [1.0]),
        BoxIndicator([-0.3, -2.0], [1.5, 0.4]),
        HalfLineIndicator(0.0, "above"),
        HalfLineIndicator(0.25, "below"),
        AbsValue(1.0),
        AbsValue(0.7, dim=3),
        Separable([HalfLineIndicator(0.0, "above"), AbsValue(2.0)]),
    ]


# -- prox oracles ---------------------------------------------------------------

def test_box_prox_is_clip():
    box = BoxIndicator([0.0], [1.0])
    assert box.prox(0.1, 2.0).item() == pytest.approx(1.0)
    assert box.prox(5.0, -3.0).item() == pytest.approx(0.0)
    # lam does not matter for an indicator
    assert box.prox(1e-6, 2.0).item() == box.prox(1e3, 2.0).item()


def test_half_line_prox():
    above = HalfLineIndicator(0.0, "above")
    below = HalfLineIndicator(1.0, "below")
    assert above.prox(0.01, -0.4) == pytest.approx(0.0)
    assert above.prox(0.01, 0.4) == pytest.approx(0.4)
    assert below.prox(0.01, 3.0) == pytest.approx(1.0)


def test_soft_threshold():
    p = AbsValue(1.0)
    assert p.prox(0.5, 3.0) == pytest.approx(2.5)
    assert p.prox(0.5, -3.0) == pytest.approx(-2.5)
    assert p.prox(0.5, 0.3) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        p.prox(0.0, 1.0)


def test_prox_matches_grid_minimization():
    # argmin of |x'-x|^2/(2 lam) + psi(x') on a fine grid
    for pot in [HalfLineIndicator(0.0, "above"), AbsValue(1.3), BoxIndicator([-0.5], [2.0])]:
        for x in (-2.1, 0.05, 1.7):
            lam = 0.37
            g = np.linspace(-6.0, 6.0, 600001)[:, None]
            obj = (g[:, 0] - x) ** 2 / (2 * lam) + pot.value(g)
            best = g[np.argmin(obj), 0]
            assert pot.prox(lam, x).item() == pytest.approx(best, abs=5e-5)


def test_prox_one_lipschitz():
    for pot in sample_catalog():
        a = RNG.normal(size=(64, pot.dim)) * 3
        b = RNG.normal(size=(64, pot.dim)) * 3
        for lam in (0.01, 0.5, 3.0):
            pa, pb = pot.prox(lam, a), pot.prox(lam, b)
            lhs = np.sqrt(np.sum((pa - pb) ** 2, axis=-1))
            rhs = np.sqrt(np.sum((a - b) ** 2, axis=-1))
            assert np.all(lhs <= rhs + 1e-12)


# -- envelope -------------------------------------------------------------------

def test_envelope_closed_form_example():
    # AbsValue weight 1, n=1, x=3: resolvent 2, value 2.5, gradient 1
    env = MoreauEnvelope(AbsValue(1.0), 1)
    assert env.resolvent(3.0).item() == pytest.approx(2.0)
    assert env.value(3.0).item() == pytest.approx(2.5)
    assert env.gradient(3.0).item() == pytest.approx(1.0)


def test_envelope_identity_on_flat_region():
    # psi = 0 near an interior point: resolvent is the identity there
    box = BoxIndicator([-1.0], [1.0])
    env = MoreauEnvelope(box, 4)
    assert env.resolvent(0.3).item() == pytest.approx(0.3)
    assert env.value(0.3).item() == 0.0


def test_envelope_value_matches_grid():
    for pot in [HalfLineIndicator(0.0, "above"), AbsValue(1.0), BoxIndicator([-1.0], [1.0])]:
        for n in (1, 4, 32):
            env = MoreauEnvelope(pot, n)
            for x in (-2.0, -0.2, 0.6, 3.3):
                want = envelope_value_by_grid(pot, n, x)
                # grid oracle resolution: n * |x - grid argmin| * h
                assert env.value(np.array([x])).item() == pytest.approx(want, abs=5e-3)


def test_envelope_ordering():
    # psi(J_n x) <= env_n(x) <= psi(x), the last only where psi is finite
    for pot in sample_catalog():
        xs = RNG.normal(size=(200, pot.dim)) * 2.5
        for n in (1, 8, 64):
            env = MoreauEnvelope(pot, n)
            j = env.resolvent(xs)
            lo = pot.value(j)
            mid = env.value(xs)
            hi = pot.value(xs)
            assert np.all(lo <= mid + 1e-12)
            finite = np.isfinite(hi)
            assert np.all(mid[finite] <= hi[finite] + 1e-12)


def test_envelope_decomposition():
    # env_n(x) = psi(J_n x) + |grad env_n(x)|^2 / (2 n)
    for pot in sample_catalog():
        xs = RNG.normal(size=(200, pot.dim)) * 2.5
        for n in (1, 8, 64):
            env = MoreauEnvelope(pot, n)
            j = env.resolvent(xs)
            g = env.gradient(xs)
            rhs = pot.value(j) + np.sum(g * g, axis=-1) / (2 * n)
            assert np.max(np.abs(env.value(xs) - rhs)) <= 1e-10


def test_resolvent_identity():
    # x - (1/n) grad = J_n x, exactly
    for pot in sample_catalog():
        xs = RNG.normal(size=(50, pot.dim)) * 3
        for n in (1, 16):
            env = MoreauEnvelope(pot, n)
            lhs = xs - env.gradient(xs) / n
            assert np.max(np.abs(lhs - env.resolvent(xs))) <= 1e-12


def test_cross_monotonicity_1d():
    # (x - x')(grad_n(x) - grad_m(x')) >= -(1/n + 1/m) grad_n(x) grad_m(x')
    pots = [HalfLineIndicator(0.0, "above"), AbsValue(1.0), BoxIndicator([-1.0], [1.0])]
    for pot in pots:
        xs = RNG.normal(size=400) * 3
        ys = RNG.normal(size=400) * 3
        for n, m in [(1, 1), (2, 16), (64, 4)]:
            gn = MoreauEnvelope(pot, n).gradient(xs[:, None])[:, 0]
            gm = MoreauEnvelope(pot, m).gradient(ys[:, None])[:, 0]
            lhs = (xs - ys) * (gn - gm)
            rhs = -(1.0 / n + 1.0 / m) * gn * gm
            assert np.all(lhs >= rhs - 1e-10)


def test_gradient_matches_finite_differences():
    h = 1e-5
    for pot in [HalfLineIndicator(0.0, "above"), AbsValue(1.0), BoxIndicator([-1.0], [1.0])]:
        for n in (1, 8, 64):
            env = MoreauEnvelope(pot, n)
            # keep sample points away from the envelope's curvature knots
            xs = RNG.uniform(-4, 4, size=512)
            knots = {0.0, -1.0, 1.0, 1.0 / n, -1.0 / n, 1.0 + 1.0 / n, -1.0 - 1.0 / n}
            keep = np.ones_like(xs, dtype=bool)
            for kn in knots:
                keep &= np.abs(xs - kn) > 1e-3
            xs = xs[keep][:, None]
            fd = (env.value(xs + h) - env.value(xs - h)) / (2 * h)
            grad = env.gradient(xs)[:, 0]
            scale = np.maximum(np.abs(grad), 1e-8)
            assert np.max(np.abs(fd - grad) / scale) <= 1e-6


def test_subgradient_monotonicity():
    # envelope gradients are subgradients at resolvent points; monotone pairs
    for pot in sample_catalog():
        xs = RNG.normal(size=(100, pot.dim)) * 3
        ys = RNG.normal(size=(100, pot.dim)) * 3
        env = MoreauEnvelope(pot, 8)
        jx, jy = env.resolvent(xs), env.resolvent(ys)
        gx, gy = env.gradient(xs), env.gradient(ys)
        inner = np.sum((jx - jy) * (gx - gy), axis=-1)
        assert np.all(inner >= -1e-10)


# -- witnesses ------------------------------------------------------------------

def test_witness_box_faces():
    box = BoxIndicator([0.0], [1.0])  # lower face exactly at the origin
    w = subgradient_witness(box, 0.0, -1.0)
    assert w.member and w.slack == 0.0
    w = subgradient_witness(box, 0.5, 0.1)
    assert not w.member and w.slack > 0.0
    w = subgradient_witness(box, 1.0, 2.0)  # upper face, outward
    assert w.member


def test_witness_abs_value():
    p = AbsValue(1.0)
    assert subgradient_witness(p, 0.0, 0.7).member
    assert subgradient_witness(p, 0.0, -1.0).member
    assert not subgradient_witness(p, 0.0, 1.4).member
    assert subgradient_witness(p, 2.0, 1.0).member
    assert not subgradient_witness(p, 2.0, 0.5).member


def test_witness_outside_domain():
    with pytest.raises(DomainError):
        subgradient_witness(HalfLineIndicator(0.0, "above"), -0.5, 0.0)


def test_witness_half_line_inward_unbounded():
    # inward-pointing z can be beaten arbitrarily far inside: never a member
    w = subgradient_witness(HalfLineIndicator(0.0, "above"), 0.0, 1.0)
    assert not w.member


# -- construction and config records ---------------------------------------------

def test_box_validation():
    with pytest.raises(ValueError):
        BoxIndicator([1.0], [0.0])
    with pytest.raises(ValueError):
        BoxIndicator([0.5], [1.0])  # 0 not inside
    with pytest.raises(ValueError):
        BoxIndicator([-np.inf], [1.0])


def test_half_line_validation():
    with pytest.raises(ValueError):
        HalfLineIndicator(0.0, "left")
    with pytest.raises(ValueError):
        HalfLineIndicator(np.nan, "above")


def test_abs_value_validation():
    with pytest.raises(ValueError):
        AbsValue(0.0)
    with pytest.raises(ValueError):
        AbsValue(1.0, dim=0)


def test_separable_validation():
    with pytest.raises(ValueError):
        Separable([])
    with pytest.raises(ValueError):
        Separable([AbsValue(1.0, dim=2)])


def test_config_round_trip():
    for pot in sample_catalog():
        rec = potential_to_config(pot)
        back = potential_from_config(rec)
        assert potential_to_config(back) == rec


def test_config_unknown_keys_rejected():
    with pytest.raises(ValueError):
        potential_from_config({"kind": "box", "lower": [-1], "upper": [1], "oops": 3})
    with pytest.raises(ValueError):
        potential_from_config({"kind": "wedge"})
    with pytest.raises(ValueError):
        potential_from_config("box")


def test_separable_projection_coordinatewise():
    sep = Separable([HalfLineIndicator(0.0, "above"), HalfLineIndicator(0.0, "below")])
    assert sep.is_indicator
    out = sep.project(np.array([-2.0, 3.0]))
    assert out.tolist() == [0.0, 0.0]
