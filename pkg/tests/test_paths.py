import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathsens.paths import (IncrementGrid, SeedSpec, coarsen, cumulative, derive_seed,
                            sample_block, sample_increments)


def test_same_seed_same_draws():
    a = sample_increments(SeedSpec(12, 3), 100, 0.01)
    b = sample_increments(SeedSpec(12, 3), 100, 0.01)
    assert a.increments.tobytes() == b.increments.tobytes()
    assert a.h == b.h == 0.01


def test_block_rows_match_single_paths():
    block = sample_block(9, 5, 4, 32, 1 / 32)
    for i in range(4):
        np.testing.assert_array_equal(block[i], sample_increments(SeedSpec(9, 5 + i), 32, 1 / 32).increments)


def test_pooled_moments():
    h = 0.25
    x = sample_block(2024, 0, 1000, 1000, h).ravel()
    assert x.size == 10**6
    assert abs(x.mean()) <= 4 * np.sqrt(h / x.size)
    assert abs(x.var() / h - 1) <= 0.01


def test_streams_uncorrelated():
    a = sample_increments(SeedSpec(1, 0), 10**5, 1.0).increments
    b = sample_increments(SeedSpec(1, 1), 10**5, 1.0).increments
    assert abs(np.corrcoef(a, b)[0, 1]) <= 0.01


def test_distinct_base_seeds_differ():
    a = sample_increments(SeedSpec(1, 0), 10, 1.0).increments
    b = sample_increments(SeedSpec(2, 0), 10, 1.0).increments
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("N,h", [(0, 0.1), (5, 0.0), (5, -1.0), (2.5, 0.1)])
def test_bad_grid_arguments(N, h):
    with pytest.raises(ValueError):
        sample_increments(SeedSpec(0, 0), N, h)


def test_seed_range():
    with pytest.raises(ValueError):
        SeedSpec(-1, 0)
    with pytest.raises(ValueError):
        SeedSpec(0, 2**64)
    SeedSpec(2**64 - 1, 2**64 - 1)


def test_grid_shape_and_T():
    g = sample_increments(SeedSpec(0, 0), 64, 1 / 64)
    assert g.N == 64 and g.T == 1.0
    assert np.all(np.isfinite(g.increments))


def test_coarsen_example():
    g = coarsen(IncrementGrid(0.25, [0.1, -0.2, 0.3, 0.05]))
    assert g.h == 0.5
    np.testing.assert_array_equal(g.increments, [0.1 + -0.2, 0.3 + 0.05])
    np.testing.assert_allclose(g.increments, [-0.1, 0.35], rtol=1e-15)


def test_coarsen_zero():
    g = coarsen(IncrementGrid(0.1, np.zeros(8)))
    assert g.N == 4 and not g.increments.any()


def test_coarsen_twice_gives_total():
    inc = [0.1, -0.2, 0.3, 0.05]
    g = coarsen(coarsen(IncrementGrid(0.25, inc)))
    assert g.N == 1 and g.h == 1.0
    assert g.increments[0] == (0.1 + -0.2) + (0.3 + 0.05)
    assert g.increments[0] == pytest.approx(0.25, rel=1e-15)


def test_coarsen_odd_rejected():
    with pytest.raises(ValueError):
        coarsen(IncrementGrid(0.1, np.ones(3)))


def test_cumulative_example():
    np.testing.assert_allclose(cumulative(IncrementGrid(0.25, [0.1, -0.2, 0.3, 0.05])),
                               [0.1, -0.1, 0.2, 0.25], rtol=1e-15, atol=1e-16)


def test_cumulative_zero():
    assert not cumulative(IncrementGrid(0.5, np.zeros(6))).any()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**32), st.integers(1, 9))
def test_coupling_exact(base_seed, path_index, log_n):
    fine = sample_increments(SeedSpec(base_seed, path_index), 2**log_n, 2.0**-log_n)
    W_f = cumulative(fine)
    W_c = cumulative(coarsen(fine))
    # shared grid points t = 2m h: bitwise equality, no tolerance
    assert W_c.tobytes() == W_f[1::2].tobytes()


def test_derive_seed_pure():
    assert derive_seed(5, 3) == derive_seed(5, 3)
    assert derive_seed(5, 3) != derive_seed(5, 4)
    assert 0 <= derive_seed(5, 3) < 2**64
