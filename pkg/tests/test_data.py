import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contribval.data import (
    Dataset,
    PartitionError,
    PartitionSpec,
    dirichlet_partition,
    label_entropy,
    longtail_subsample,
    longtail_transform,
    make_blobs,
    split_eval_set,
)


def test_longtail_examples():
    assert longtail_transform([50, 70, 30], 1.0).tolist() == [50, 70, 30]
    sizes = longtail_transform([1000] * 10, 0.01)
    assert sizes[0] == 1000 and sizes[9] == 10
    assert longtail_transform([100, 100], 0.25).tolist() == [100, 25]
    for bad in (0.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            longtail_transform([10, 10], bad)


def test_longtail_capped_by_availability():
    assert longtail_transform([100, 5, 100], 0.5).tolist() == [100, 5, 50]


def test_longtail_subsample_uniform_without_replacement():
    labels = np.repeat(np.arange(3), 200)
    keep = longtail_subsample(labels, 3, 0.1, np.random.default_rng(0))
    assert len(np.unique(keep)) == len(keep)
    assert np.bincount(labels[keep]).tolist() == longtail_transform([200, 200, 200], 0.1).tolist()


def test_dirichlet_single_client():
    labels = np.repeat(np.arange(4), 25)
    shards = dirichlet_partition(labels, 1, 0.1, np.random.default_rng(0))
    assert len(shards) == 1 and shards[0].tolist() == list(range(100))


def test_dirichlet_large_alpha_is_even():
    labels = np.repeat(np.arange(3), 1000)
    for seed in range(10):
        shards = dirichlet_partition(labels, 10, 1e6, np.random.default_rng(seed))
        for s in shards:
            assert np.all(np.abs(np.bincount(labels[s], minlength=3) - 100) <= 5)


def test_dirichlet_small_alpha_is_skewed():
    labels = np.repeat(np.arange(10), 500)
    shards = dirichlet_partition(labels, 10, 0.01, np.random.default_rng(3))
    ent = [label_entropy(labels[s], 10) for s in shards]
    assert np.median(ent) < 0.3 * math.log(10)


def test_dirichlet_unsatisfiable():
    with pytest.raises(PartitionError):
        dirichlet_partition(np.zeros(3, dtype=int), 5, 1.0, np.random.default_rng(0))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.floats(0.01, 10), st.integers(0, 2 ** 31), st.integers(2, 6))
def test_dirichlet_disjoint_cover_nonempty(n_clients, alpha, seed, C):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, C, 200)
    shards = dirichlet_partition(labels, n_clients, alpha, rng)
    assert len(shards) == n_clients
    assert all(s.size >= 1 for s in shards)
    joined = np.concatenate(shards)
    assert np.array_equal(np.sort(joined), np.arange(200))


def test_eval_split_examples():
    labels = np.arange(10000) % 7
    train, held = split_eval_set(labels, 0.01, np.random.default_rng(0))
    assert held.size == 100 and train.size == 9900
    train, held = split_eval_set(np.arange(10) % 2, 0.5, np.random.default_rng(0))
    assert held.size == 5 and train.size == 5
    labels = np.r_[np.zeros(9900, int), np.ones(100, int)]
    _, held = split_eval_set(labels, 0.01, np.random.default_rng(0))
    assert np.bincount(labels[held]).tolist() == [99, 1]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 500), st.floats(0.01, 0.9), st.integers(0, 2 ** 31))
def test_eval_split_disjoint(N, frac, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, N)
    train, held = split_eval_set(labels, frac, rng)
    assert np.intersect1d(train, held).size == 0
    assert np.array_equal(np.sort(np.r_[train, held]), np.arange(N))


def test_eval_split_bad_fraction():
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            split_eval_set(np.zeros(10, int), bad)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.array([0, 1, 2]), 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.array([0, 1]), 2)


def test_partition_spec_validation():
    PartitionSpec(10, 0.05, 0.05)
    for bad in ({"n_clients": 0}, {"dirichlet_alpha": 0.0}, {"imbalance_factor": 0.0}):
        kw = {"n_clients": 10, "dirichlet_alpha": 0.1, **bad}
        with pytest.raises(ValueError):
            PartitionSpec(**kw)


def test_blobs_shape_and_balance():
    ds = make_blobs(6000, 5, 20, seed=0)
    assert ds.features.shape == (6000, 20)
    assert ds.class_counts().tolist() == [1200] * 5
    assert np.allclose(ds.features.mean(axis=0), 0, atol=1e-12)
    assert np.array_equal(make_blobs(100, 3, 4, seed=2).features, make_blobs(100, 3, 4, seed=2).features)
