import numpy as np
import pytest

from corrstates.errors import ValidationError
from corrstates.states import (
    adjusted_rand_index,
    compare_labelings,
    devectorize,
    kmeans,
    order_states,
    similarity_matrix,
    state_mean_matrices,
    vectorize,
)
from corrstates.states import _repair_empty  # exercised directly; hard to force via API
from helpers import make_cg


def test_vectorize_2x2_reads_xyz():
    cg = make_cg([[0.2, 0.4], [0.4, 0.6]], sizes=(2, 2))
    assert list(vectorize(cg)) == [0.2, 0.4, 0.6]


def test_vectorize_10x10_has_55_components():
    rng = np.random.default_rng(0)
    m = rng.uniform(-1, 1, (10, 10))
    m = np.clip((m + m.T) / 2, -1, 1)
    cg = make_cg(m, sizes=[2] * 10, kind="sectorial")
    assert vectorize(cg).shape == (55,)


def test_vectorize_devectorize_round_trip():
    rng = np.random.default_rng(1)
    vec = rng.uniform(-1, 1, 15)  # 5x5 triangle
    assert np.array_equal(vectorize(devectorize(vec)), vec)
    with pytest.raises(ValidationError):
        devectorize(np.zeros(4))  # not a triangular number


def blobs(rng, k=3, per=60, d=4, spread=8.0):
    centers = rng.uniform(-spread, spread, (k, d))
    pts = np.concatenate([centers[i] + 0.3 * rng.standard_normal((per, d)) for i in range(k)])
    truth = np.repeat(np.arange(k), per)
    return pts, truth


def test_kmeans_recovers_separated_blobs():
    rng = np.random.default_rng(5)
    pts, truth = blobs(rng)
    res = kmeans(pts, 3, seed=0, restarts=10)
    assert adjusted_rand_index(res.labels, truth) == 1.0


def test_kmeans_k_equals_n_points():
    rng = np.random.default_rng(6)
    pts = rng.standard_normal((7, 3))
    res = kmeans(pts, 7, seed=0, restarts=5)
    assert res.inertia == 0.0
    assert len(set(res.labels.tolist())) == 7


def test_kmeans_deterministic_under_seed():
    rng = np.random.default_rng(7)
    pts, _ = blobs(rng)
    a = kmeans(pts, 3, seed=42, restarts=8)
    b = kmeans(pts, 3, seed=42, restarts=8)
    assert np.array_equal(a.labels, b.labels)
    assert a.inertia == b.inertia
    assert np.array_equal(a.centroids, b.centroids)


def test_kmeans_duplicate_points_rejected():
    pts = np.array([[1.0, 1.0]] * 5 + [[2.0, 2.0]] * 5)
    with pytest.raises(ValidationError, match="distinct"):
        kmeans(pts, 3, seed=0)


def test_kmeans_too_few_points_rejected():
    with pytest.raises(ValidationError):
        kmeans(np.zeros((2, 3)), 5, seed=0)


def test_kmeans_inertia_history_non_increasing():
    rng = np.random.default_rng(8)
    pts = rng.standard_normal((200, 5))
    for seed in range(5):
        res = kmeans(pts, 4, seed=seed, restarts=1)
        hist = np.asarray(res.inertia_history)
        assert (np.diff(hist) <= 1e-9).all()


def test_kmeans_more_restarts_never_worse():
    rng = np.random.default_rng(9)
    pts = rng.standard_normal((150, 4))
    one = kmeans(pts, 5, seed=3, restarts=1)
    many = kmeans(pts, 5, seed=3, restarts=30)
    assert many.inertia <= one.inertia + 1e-12


def test_repair_empty_seizes_farthest_point():
    labels = np.array([0, 0, 0, 1])
    d2 = np.array([
        [0.1, 5.0, 9.0],
        [0.2, 5.0, 9.0],
        [4.0, 5.0, 9.0],  # farthest from its own centroid
        [5.0, 0.1, 9.0],
    ])
    repaired = _repair_empty(labels.copy(), d2, 3)
    assert repaired[2] == 2
    assert sorted(np.bincount(repaired, minlength=3)) == [1, 1, 2]


def test_order_states_relabels_by_avg_corr():
    raw = np.array([0, 0, 1, 1])
    avg = np.array([0.6, 0.6, 0.2, 0.2])
    seq = order_states(raw, avg, 2)
    assert list(seq.labels) == [2, 2, 1, 1]
    assert np.allclose(seq.state_avg_corr, [0.2, 0.6])


def test_order_states_invariant_to_cluster_permutation():
    rng = np.random.default_rng(10)
    raw = rng.integers(0, 4, 100)
    avg = rng.random(100)
    base = order_states(raw, avg, 4)
    perm = np.array([2, 3, 1, 0])
    permuted = order_states(perm[raw], avg, 4)
    assert np.array_equal(base.labels, permuted.labels)
    assert np.allclose(base.state_avg_corr, permuted.state_avg_corr)


def test_order_states_tie_flagged():
    raw = np.array([0, 1, 0, 1])
    avg = np.array([0.3, 0.3, 0.3, 0.3])
    seq = order_states(raw, avg, 2)
    assert seq.tie_flagged
    assert list(seq.labels) == [1, 2, 1, 2]  # original label order breaks the tie


def test_order_states_empty_cluster_rejected():
    with pytest.raises(ValidationError, match="empty"):
        order_states(np.array([0, 0]), np.array([0.1, 0.2]), 2)


def test_k_equals_one_degenerate_path():
    mats = [
        make_cg([[0.1 * i, 0.2], [0.2, 0.3]], sizes=(2, 2), epoch_index=i)
        for i in range(5)
    ]
    res = kmeans(np.asarray([vectorize(m) for m in mats]), 1, seed=0, restarts=2)
    from corrstates.stats import average_correlation

    seq = order_states(res.labels, [average_correlation(m) for m in mats], 1,
                       centroids=res.centroids, inertia=res.inertia)
    assert (seq.labels == 1).all()
    sm = state_mean_matrices(seq, mats)
    assert len(sm) == 1
    assert np.allclose(sm[0].values, np.mean([m.values for m in mats], axis=0))


def test_state_mean_matrices_constant_state():
    mats = [make_cg([[0.2, 0.4], [0.4, 0.6]], sizes=(2, 2))] * 3
    sm = state_mean_matrices(np.array([1, 1, 1]), mats)
    assert np.allclose(sm[0].values, mats[0].values)
    assert sm[0].sigma_corr == 0.0


def test_state_mean_matrices_midpoint():
    a = make_cg(np.zeros((2, 2)), sizes=(2, 2))
    b = make_cg([[0.2, 0.4], [0.4, 0.6]], sizes=(2, 2))
    sm = state_mean_matrices(np.array([1, 1]), [a, b])
    assert np.allclose(sm[0].values, [[0.1, 0.2], [0.2, 0.3]], atol=1e-15)
    assert sm[0].n_members == 2


def test_state_mean_matrices_empty_state_rejected():
    mats = [make_cg(np.zeros((2, 2)), sizes=(2, 2))] * 2
    with pytest.raises(ValidationError, match="state 1"):
        state_mean_matrices(np.array([2, 2]), mats)


def test_similarity_identical_matrices_zero():
    mats = [make_cg([[0.2, 0.4], [0.4, 0.6]], sizes=(2, 2), epoch_index=i) for i in range(4)]
    sim = similarity_matrix(mats)
    assert np.array_equal(sim.values, np.zeros((4, 4)))


def test_similarity_hand_case():
    a = make_cg(np.zeros((2, 2)), sizes=(2, 2), epoch_index=0)
    b = make_cg([[0.2, 0.4], [0.4, 0.6]], sizes=(2, 2), epoch_index=1)
    sim = similarity_matrix([a, b])
    assert sim.values[0, 1] == pytest.approx(0.4, abs=1e-15)
    assert sim.values[1, 0] == sim.values[0, 1]


def test_similarity_stride_and_metadata():
    mats = [make_cg(np.full((2, 2), 0.1 * i), sizes=(2, 2), epoch_index=i) for i in range(10)]
    sim = similarity_matrix(mats, stride=3)
    assert sim.epoch_index == (0, 3, 6, 9)
    assert sim.values.shape == (4, 4)


def test_similarity_triangle_inequality():
    rng = np.random.default_rng(12)
    mats = []
    for i in range(12):
        v = rng.uniform(-1, 1, 3)
        mats.append(make_cg(devectorize(v), sizes=(2, 2), epoch_index=i))
    sim = similarity_matrix(mats).values
    n = sim.shape[0]
    for i in range(n):
        for j in range(n):
            for l in range(n):
                assert sim[i, j] <= sim[i, l] + sim[l, j] + 1e-12


def test_compare_labelings_identical():
    seq = order_states(np.array([0, 1, 0, 1]), np.array([0.1, 0.5, 0.1, 0.5]), 2)
    rep = compare_labelings(seq, seq)
    assert rep.pearson == pytest.approx(1.0)
    assert rep.adjusted_rand == pytest.approx(1.0)


def test_compare_labelings_independent_near_zero():
    rng = np.random.default_rng(13)
    n = 20000
    a_raw = rng.integers(0, 5, n)
    b_raw = rng.integers(0, 5, n)
    # avg-corr proxies that keep cluster means distinct
    a = order_states(a_raw, a_raw + rng.random(n) * 0.1, 5)
    b = order_states(b_raw, b_raw + rng.random(n) * 0.1, 5)
    rep = compare_labelings(a, b)
    assert abs(rep.pearson) < 0.05
    assert abs(rep.adjusted_rand) < 0.05


def test_adjusted_rand_known_value():
    # contingency [[2, 1], [0, 3]]: sum_cells 4, sum_a 6, sum_b 7, C(6,2) = 15
    # ARI = (4 - 6*7/15) / ((6+7)/2 - 6*7/15) = 1.2 / 3.7
    a = np.array([1, 1, 1, 2, 2, 2])
    b = np.array([1, 1, 2, 2, 2, 2])
    assert adjusted_rand_index(a, b) == pytest.approx(1.2 / 3.7, abs=1e-12)
