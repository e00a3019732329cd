import numpy as np
import pytest

from corrstates.dynamics import (
    TransMatrix,
    equilibrium,
    forbidden_transition_check,
    markovianity_gap,
    recurrent_classes,
    transition_matrix,
    tridiagonal_mass,
)
from corrstates.errors import ValidationError


def simulate_chain(values, steps, seed, start=0):
    """Sample a state path (1-based labels) from a transition matrix."""
    rng = np.random.default_rng(seed)
    k = values.shape[0]
    labels = np.empty(steps, dtype=np.int64)
    s = start
    for t in range(steps):
        labels[t] = s + 1
        s = rng.choice(k, p=values[s])
    return labels


def birth_death_values(k=5, up=0.3, down=0.3):
    values = np.zeros((k, k))
    for i in range(k):
        if i > 0:
            values[i, i - 1] = down
        if i < k - 1:
            values[i, i + 1] = up
        values[i, i] = 1.0 - values[i].sum()
    return values


def test_transition_alternating_sequence():
    t = transition_matrix(np.array([1, 2, 1, 2, 1, 2]))
    assert np.array_equal(t.values, [[0.0, 1.0], [1.0, 0.0]])


def test_transition_constant_sequence_absorbing():
    t = transition_matrix(np.ones(10, dtype=np.int64))
    assert t.values.shape == (1, 1)
    assert t.values[0, 0] == 1.0


def test_transition_hand_counts():
    t = transition_matrix(np.array([1, 1, 2, 1]))
    assert np.array_equal(t.counts, [[1, 1], [1, 0]])
    assert np.array_equal(t.values, [[0.5, 0.5], [1.0, 0.0]])


def test_transition_counts_total():
    rng = np.random.default_rng(0)
    labels = rng.integers(1, 4, 200)
    for lag in (1, 5, 20):
        t = transition_matrix(labels, lag=lag)
        assert t.counts.sum() == 200 - lag


def test_transition_missing_state_rejected():
    with pytest.raises(ValidationError, match="never occupied"):
        transition_matrix(np.array([1, 3, 1, 3]))


def test_transition_zero_row_flagged():
    # state 3 appears only at the very end: no outgoing transitions
    t = transition_matrix(np.array([1, 2, 1, 2, 3]))
    assert t.zero_rows == (2,)
    assert t.values[2].sum() == 0.0


def test_transition_rows_are_stochastic():
    rng = np.random.default_rng(1)
    labels = rng.integers(1, 6, 5000)
    t = transition_matrix(labels)
    assert np.abs(t.values.sum(axis=1) - 1.0).max() < 1e-12


def test_equilibrium_doubly_stochastic():
    t = TransMatrix(
        values=np.array([[0.3, 0.7], [0.7, 0.3]]),
        counts=np.array([[3, 7], [7, 3]]),
        lag=1,
    )
    pi = equilibrium(t)
    assert np.allclose(pi, [0.5, 0.5], atol=1e-12)


def test_equilibrium_residual_bound():
    rng = np.random.default_rng(3)
    labels = simulate_chain(birth_death_values(), 20000, seed=4)
    t = transition_matrix(labels)
    pi = equilibrium(t)
    assert np.abs(pi @ t.values - pi).sum() < 1e-10
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_equilibrium_periodic_chain_converges():
    # deterministic 3-cycle is periodic; the lazy iteration still finds pi
    values = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
    t = TransMatrix(values=values, counts=(values * 10).astype(int), lag=1)
    pi = equilibrium(t)
    assert np.allclose(pi, [1 / 3] * 3, atol=1e-10)


def test_equilibrium_reducible_chain_rejected():
    values = np.eye(2)
    t = TransMatrix(values=values, counts=np.eye(2, dtype=int) * 5, lag=1)
    assert len(recurrent_classes(t)) == 2
    with pytest.raises(ValidationError, match="reducible"):
        equilibrium(t)


def test_equilibrium_matches_occupation_frequencies():
    values = np.array([
        [0.5, 0.3, 0.2],
        [0.2, 0.6, 0.2],
        [0.1, 0.3, 0.6],
    ])
    steps = 200000
    labels = simulate_chain(values, steps, seed=11)
    t = transition_matrix(labels)
    pi = equilibrium(t)
    occupation = np.bincount(labels - 1, minlength=3) / steps
    assert np.abs(pi - occupation).max() < 5.0 / np.sqrt(steps)


def test_tridiagonal_birth_death_exactly_one():
    labels = simulate_chain(birth_death_values(), 50000, seed=7)
    t = transition_matrix(labels)
    assert tridiagonal_mass(t) == 1.0


def test_tridiagonal_uniform_matrix():
    k = 5
    values = np.full((k, k), 1.0 / k)
    counts = np.full((k, k), 10, dtype=int)
    t = TransMatrix(values=values, counts=counts, lag=1)
    assert tridiagonal_mass(t) == pytest.approx(13.0 / 25.0, abs=1e-15)


def test_tridiagonal_sensitive_to_non_monotone_relabeling():
    labels = simulate_chain(birth_death_values(), 20000, seed=8)
    t = transition_matrix(labels)
    base = tridiagonal_mass(t)
    assert base == 1.0
    # swap states 1 and 5: adjacency in label space is destroyed
    perm = {1: 5, 2: 2, 3: 3, 4: 4, 5: 1}
    shuffled = np.array([perm[s] for s in labels])
    assert tridiagonal_mass(transition_matrix(shuffled)) < base
    # identity (the only monotone relabeling of 1..k) leaves it unchanged
    assert tridiagonal_mass(transition_matrix(labels.copy())) == base


def test_forbidden_check_passes_on_guarded_chain():
    # birth-death dynamics cannot jump 1-3 -> 5
    labels = simulate_chain(birth_death_values(), 30000, seed=9)
    t = transition_matrix(labels)
    rep = forbidden_transition_check(t, labels)
    assert not rep.skipped
    assert rep.passed
    assert rep.lower_to_top == {1: 0, 2: 0, 3: 0}
    assert rep.from_fourth > 0
    assert rep.offending_epochs == ()


def test_forbidden_check_fails_with_offending_epoch():
    labels = np.array([1, 2, 5, 4, 5, 4, 3, 2, 1, 2, 3, 4, 5, 4])
    t = transition_matrix(labels)
    rep = forbidden_transition_check(t, labels)
    assert not rep.passed
    assert rep.lower_to_top[2] == 1
    assert 1 in rep.offending_epochs  # the 2 -> 5 jump starts at epoch 1


def test_forbidden_check_skipped_for_other_k():
    t = transition_matrix(np.array([1, 2, 1, 2, 1]))
    rep = forbidden_transition_check(t)
    assert rep.skipped
    assert rep.passed is None
    assert "k=2" in rep.notice


def test_markovianity_iid_labels_small_gap():
    rng = np.random.default_rng(10)
    labels = rng.integers(1, 6, 100000)
    assert markovianity_gap(labels) < 0.05


def test_markovianity_deterministic_cycle_exact_zero():
    labels = np.tile([1, 2, 3], 3000)
    assert markovianity_gap(labels) == 0.0


def test_markovianity_periodic_non_markov_large_gap():
    # period-3 pattern on two states: 1,1,2 repeating; T(2) != T(1)^2
    labels = np.tile([1, 1, 2], 3000)
    assert markovianity_gap(labels) > 0.2


def test_markovianity_respects_lag():
    labels = np.tile([1, 2, 3, 4], 2500)
    assert markovianity_gap(labels, lag=2) == pytest.approx(0.0, abs=1e-12)


def test_markovianity_too_short():
    with pytest.raises(ValidationError):
        markovianity_gap(np.array([1, 2]), lag=1)
