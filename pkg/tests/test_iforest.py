import math

import numpy as np
import pytest

from aestream.iforest import (
    IForestConfig,
    anomaly_score,
    c_factor,
    fit_iforest,
    iforest_threshold,
)


def c_oracle(n):
    # Exact harmonic number instead of the log approximation.
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    h = sum(1.0 / i for i in range(1, n))
    return 2 * h - 2 * (n - 1) / n


def naive_path_length(tree, x):
    node, depth = 0, 0
    while not tree.is_leaf(node):
        node = tree.left[node] if x[tree.feature[node]] < tree.threshold[node] else tree.right[node]
        depth += 1
    return depth + c_factor(tree.size[node])


def test_c256_hand_value():
    assert c_factor(256) == pytest.approx(2 * (math.log(255) + 0.5772) - 2 * 255 / 256, abs=1e-3)
    assert c_factor(256) == pytest.approx(10.244, abs=1e-2)
    assert c_factor(256) == pytest.approx(c_oracle(256), abs=1e-2)


def test_score_fixed_point():
    cfg = IForestConfig(n_estimators=10, max_samples=16)
    forest = fit_iforest(cfg, np.random.default_rng(0).uniform(size=(64, 2)))
    # 2 ** (-c / c) == 0.5
    assert 2.0 ** (-c_factor(forest.psi) / c_factor(forest.psi)) == 0.5


def test_table_defaults_give_100_trees():
    forest = fit_iforest(IForestConfig(), np.random.default_rng(0).uniform(size=(300, 2)))
    assert len(forest.trees) == 100
    assert forest.psi == 256
    assert forest.height_limit == 8


def test_two_points_isolated_at_depth_one():
    forest = fit_iforest(IForestConfig(n_estimators=20, max_samples=256), np.array([[0.1, 0.2], [0.9, 0.4]]))
    for tree in forest.trees:
        assert tree.n_nodes == 3
        assert list(tree.size[1:]) == [1, 1]


def test_identical_points_make_single_leaves():
    forest = fit_iforest(IForestConfig(n_estimators=5), np.full((10, 2), 0.3))
    assert all(t.n_nodes == 1 for t in forest.trees)
    assert 0 < anomaly_score(forest, np.array([0.3, 0.3])) < 1


def test_split_strictly_inside_node_range():
    data = np.random.default_rng(2).uniform(size=(200, 3))
    forest = fit_iforest(IForestConfig(n_estimators=10, max_samples=64, max_features=3, seed=1), data)
    for tree in forest.trees:
        assert tree.depth.max() <= forest.height_limit
        for node in range(tree.n_nodes):
            if not tree.is_leaf(node):
                assert tree.size[node] == tree.size[tree.left[node]] + tree.size[tree.right[node]]
                assert tree.size[tree.left[node]] > 0 and tree.size[tree.right[node]] > 0


def test_same_seed_same_forest():
    data = np.random.default_rng(3).uniform(size=(100, 2))
    a = fit_iforest(IForestConfig(seed=7), data)
    b = fit_iforest(IForestConfig(seed=7), data)
    pts = np.random.default_rng(4).uniform(size=(20, 2))
    assert np.array_equal(anomaly_score(a, pts), anomaly_score(b, pts))


def test_vectorised_paths_match_naive_walk():
    data = np.random.default_rng(5).uniform(size=(150, 2))
    forest = fit_iforest(IForestConfig(n_estimators=15, max_samples=64), data)
    pts = np.random.default_rng(6).uniform(-0.2, 1.2, size=(25, 2))
    fast = forest.path_lengths(pts)
    for i, tree in enumerate(forest.trees):
        for j, x in enumerate(pts):
            assert fast[i, j] == pytest.approx(naive_path_length(tree, x))


def test_far_outlier_scores_highest():
    rng = np.random.default_rng(8)
    window = np.vstack([rng.normal(0.5, 0.02, size=(99, 2)), [[0.95, 0.05]]])
    scores = anomaly_score(fit_iforest(IForestConfig(seed=1), window), window)
    assert np.argmax(scores) == 99
    assert np.all((scores > 0) & (scores < 1))


def test_threshold_flags_contamination_share():
    rng = np.random.default_rng(9)
    window = rng.uniform(size=(100, 2))
    forest = fit_iforest(IForestConfig(seed=2), window)
    scores = anomaly_score(forest, window)
    assert len(np.unique(scores)) == 100
    theta = iforest_threshold(forest, window, 0.1)
    assert int(np.sum(scores > theta)) == 10
    theta_half = iforest_threshold(forest, window, 0.5)
    assert theta_half == np.sort(scores)[49]


def test_threshold_all_equal_flags_nothing():
    window = np.full((10, 2), 0.4)
    forest = fit_iforest(IForestConfig(n_estimators=3), window)
    theta = iforest_threshold(forest, window)
    assert not np.any(anomaly_score(forest, window) > theta)


def test_bad_inputs():
    with pytest.raises(ValueError):
        fit_iforest(IForestConfig(), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        IForestConfig(max_samples=1)
    with pytest.raises(ValueError):
        IForestConfig(contamination=0.6)
