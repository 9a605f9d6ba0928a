"""Grids, driver substreams and dyadic coarsening."""
import numpy as np
import pytest

from svisim.paths import (
    CorrelationSpec,
    MeshGrid,
    SamplePath,
    SeedSpec,
    coarsen_increments,
    compose_driver,
    cumulative_running_max,
    cumulative_sup_norm,
    dyadic_ladder,
    generate_increment_block,
    generate_increments,
)


# -- seeds and substreams ---------------------------------------------------------

def test_substreams_reproducible_and_distinct():
    grid = MeshGrid(1.0, 64)
    seed = SeedSpec(20260822)
    a = generate_increments(grid, 2, seed, 7, "w")
    b = generate_increments(grid, 2, seed, 7, "w")
    assert np.array_equal(a, b)
    # other tag, other path, other master: all distinct streams
    assert not np.array_equal(a, generate_increments(grid, 2, seed, 7, "b"))
    assert not np.array_equal(a, generate_increments(grid, 2, seed, 8, "w"))
    assert not np.array_equal(a, generate_increments(grid, 2, SeedSpec(1), 7, "w"))


def test_seed_spec_rejects_bad_tags_and_indices():
    seed = SeedSpec(3)
    with pytest.raises(ValueError):
        seed.generator(0, "nope")
    with pytest.raises(ValueError):
        seed.generator(-1, "w")


def test_seed_spec_masks_to_64_bits():
    wide = SeedSpec((1 << 64) + 5)
    assert wide.master == 5
    a = generate_increments(MeshGrid(1.0, 8), 1, wide, 0, "w")
    b = generate_increments(MeshGrid(1.0, 8), 1, SeedSpec(5), 0, "w")
    assert np.array_equal(a, b)


def test_increment_moments_match_grid_spacing():
    grid = MeshGrid(2.0, 256)
    seed = SeedSpec(99)
    block = generate_increment_block(grid, 1, seed, 0, 400, "w")
    flat = block.ravel()
    assert flat.mean() == pytest.approx(0.0, abs=4 * np.sqrt(grid.dt / flat.size))
    assert flat.var() == pytest.approx(grid.dt, rel=0.05)


def test_block_generation_matches_per_path_loop():
    grid = MeshGrid(1.0, 32)
    seed = SeedSpec(12345)
    block = generate_increment_block(grid, 3, seed, 10, 14, "b")
    assert block.shape == (4, 32, 3)
    for i, p in enumerate(range(10, 14)):
        assert np.array_equal(block[i], generate_increments(grid, 3, seed, p, "b"))
    with pytest.raises(ValueError):
        generate_increment_block(grid, 3, seed, 5, 4, "b")


# -- coarsening -------------------------------------------------------------------

def test_coarsen_is_exact_pairwise_sum():
    rng = np.random.default_rng(7)
    inc = rng.normal(size=(5, 16, 2))
    half = coarsen_increments(inc, 2)
    manual = inc.reshape(5, 8, 2, 2).sum(axis=2)
    # one halving is literally adjacent addition, no reassociation
    assert np.array_equal(half, inc[:, 0::2, :] + inc[:, 1::2, :])
    assert np.allclose(half, manual)
    assert np.array_equal(coarsen_increments(inc, 1), inc)


def test_coarsen_chains_bit_for_bit():
    rng = np.random.default_rng(8)
    inc = rng.normal(size=(64, 1))
    once_twice = coarsen_increments(coarsen_increments(inc, 2), 2)
    assert np.array_equal(coarsen_increments(inc, 4), once_twice)


def test_coarsen_validates_factor_and_parity():
    inc = np.zeros((6, 1))
    with pytest.raises(ValueError):
        coarsen_increments(inc, 3)
    with pytest.raises(ValueError):
        coarsen_increments(inc, 0)
    # one halving of 6 steps works; a second would hit an odd count
    assert coarsen_increments(inc, 2).shape == (3, 1)
    with pytest.raises(ValueError):
        coarsen_increments(inc, 4)


def test_dyadic_ladder_consistency():
    grid = MeshGrid(1.0, 512)
    seed = SeedSpec(31337)
    fine = generate_increments(grid, 1, seed, 0, "w")
    ladder = dyadic_ladder(fine, 512, [64, 128, 256, 512])
    assert set(ladder) == {64, 128, 256, 512}
    assert np.array_equal(ladder[512], fine)
    for lv in (64, 128, 256):
        assert np.array_equal(ladder[lv], coarsen_increments(ladder[2 * lv], 2))
        # coarse increments still sum to the same terminal value
        assert ladder[lv].sum() == pytest.approx(fine.sum(), abs=1e-12)


def test_dyadic_ladder_rejects_bad_levels():
    fine = np.zeros((96, 1))
    with pytest.raises(ValueError):
        dyadic_ladder(fine, 96, [32])  # ratio 3, not a power of two
    with pytest.raises(ValueError):
        dyadic_ladder(fine, 96, [100])  # finer than the source


# -- correlation ------------------------------------------------------------------

def test_correlation_spec_validation():
    with pytest.raises(ValueError):
        CorrelationSpec(rho=1.5)
    with pytest.raises(ValueError):
        CorrelationSpec(rho=0.3, dim_w=2)
    with pytest.raises(ValueError):
        CorrelationSpec(dim_b=0)
    spec = CorrelationSpec(dim_w=2, dim_b=3)
    assert not spec.composite
    with pytest.raises(ValueError):
        spec.split()


def test_compose_driver_edges_and_variance():
    rng = np.random.default_rng(11)
    w = rng.normal(size=(2000, 1))
    b = rng.normal(size=(2000, 1))
    assert np.array_equal(compose_driver(w, b, CorrelationSpec(rho=0.0)), w)
    assert np.array_equal(compose_driver(w, b, CorrelationSpec(rho=1.0)), b)
    assert np.array_equal(compose_driver(w, b, CorrelationSpec(rho=-1.0)), -b)
    mixed = compose_driver(w, b, CorrelationSpec(rho=0.6))
    # unit-variance inputs stay unit variance under the sqrt split
    assert mixed.var() == pytest.approx(1.0, rel=0.1)
    cw, cb = CorrelationSpec(rho=0.6).split()
    assert cw * cw + cb * cb == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        compose_driver(w, b, CorrelationSpec(dim_w=1, dim_b=1))
    with pytest.raises(ValueError):
        compose_driver(w, b[:10], CorrelationSpec(rho=0.5))


# -- grids and paths --------------------------------------------------------------

def test_mesh_grid_basics():
    grid = MeshGrid(2.0, 8)
    assert grid.dt == pytest.approx(0.25)
    times = grid.times
    assert times[0] == 0.0 and times[-1] == 2.0 and len(times) == 9
    assert grid.refine(4) == MeshGrid(2.0, 32)
    with pytest.raises(ValueError):
        MeshGrid(0.0, 8)
    with pytest.raises(ValueError):
        MeshGrid(1.0, 0)
    with pytest.raises(ValueError):
        grid.refine(0)


def test_sample_path_shapes_and_validation():
    grid = MeshGrid(1.0, 4)
    p = SamplePath(grid, np.arange(5.0))
    assert p.values.shape == (5, 1) and p.dim == 1
    with pytest.raises(ValueError):
        SamplePath(grid, np.zeros((4, 1)))  # needs steps + 1 rows
    with pytest.raises(ValueError):
        SamplePath(grid, np.full((5, 1), np.nan))


def test_sample_path_running_stats():
    grid = MeshGrid(1.0, 4)
    p = SamplePath(grid, np.array([0.0, 3.0, -1.0, 2.0, 2.5]))
    assert p.running_max(0) == 0.0
    assert p.running_max(2) == 3.0
    assert p.sup_norm(4) == 3.0
    with pytest.raises(ValueError):
        p.running_max(5)
    wide = SamplePath(grid, np.zeros((5, 2)))
    with pytest.raises(ValueError):
        wide.running_max(1)
    const = SamplePath.constant(grid, [1.0, -2.0])
    assert const.values.shape == (5, 2)
    assert const.sup_norm(4) == pytest.approx(np.sqrt(5.0))


def test_cumulative_helpers():
    vals = np.array([[0.0, 2.0, 1.0, 3.0]])
    assert np.array_equal(cumulative_running_max(vals), [[0.0, 2.0, 2.0, 3.0]])
    rows = np.array([[[3.0, 4.0], [0.0, 1.0], [6.0, 8.0]]])
    assert np.allclose(cumulative_sup_norm(rows), [[5.0, 5.0, 10.0]])
