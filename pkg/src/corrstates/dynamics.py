"""Market-state transition dynamics.

Transitions are counted between epochs ``lag`` apart.  With the default
one-epoch lag and overlapping 20-day epochs, consecutive states are strongly
dependent by construction; ``lag`` equal to the epoch length gives
non-overlapping dynamics.

The Markovianity statistic is a Chapman-Kolmogorov gap, a necessary-condition
proxy: for a Markov chain the two-step transition matrix must equal the
square of the one-step matrix, so the max-norm mismatch tends to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import NumericalError, ValidationError
from .states import StateSequence


@dataclass
class TransMatrix:
    """Row-stochastic matrix of empirical state-to-state transitions.

    Rows without any observed transition are left at zero and listed in
    ``zero_rows`` instead of being normalized.
    """

    values: np.ndarray
    counts: np.ndarray
    lag: int
    zero_rows: tuple[int, ...] = field(default=())

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        c = np.asarray(self.counts, dtype=np.int64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or c.shape != v.shape:
            raise ValidationError("transition matrix must be square with congruent counts")
        if v.size and (v.min() < 0 or v.max() > 1):
            raise ValidationError("transition probabilities must lie in [0, 1]")
        sums = v.sum(axis=1)
        for i in range(v.shape[0]):
            if i in self.zero_rows:
                if sums[i] != 0:
                    raise ValidationError(f"flagged zero row {i + 1} is not zero")
            elif abs(sums[i] - 1.0) > 1e-12:
                raise ValidationError(f"row {i + 1} sums to {sums[i]}, not 1")
        self.values = v
        self.counts = c

    @property
    def k(self) -> int:
        return self.values.shape[0]


def _labels_of(states: Union[StateSequence, np.ndarray]) -> tuple[np.ndarray, int]:
    if isinstance(states, StateSequence):
        return states.labels, states.k
    lab = np.asarray(states, dtype=np.int64)
    return lab, int(lab.max(initial=0))


def _count_transitions(labels: np.ndarray, k: int, lag: int) -> np.ndarray:
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels[:-lag] - 1, labels[lag:] - 1), 1)
    return counts


def transition_matrix(states: Union[StateSequence, np.ndarray], lag: int = 1) -> TransMatrix:
    """Empirical transition matrix between states ``lag`` epochs apart."""
    labels, k = _labels_of(states)
    if lag < 1:
        raise ValidationError(f"lag must be >= 1, got {lag}")
    if len(labels) <= lag:
        raise ValidationError(f"sequence of {len(labels)} epochs too short for lag {lag}")
    occupied = np.isin(np.arange(1, k + 1), labels)
    if not occupied.all():
        missing = np.flatnonzero(~occupied) + 1
        raise ValidationError(f"state(s) never occupied: {missing.tolist()}")
    counts = _count_transitions(labels, k, lag)
    row_sums = counts.sum(axis=1)
    zero_rows = tuple(int(i) for i in np.flatnonzero(row_sums == 0))
    values = np.zeros_like(counts, dtype=np.float64)
    nz = row_sums > 0
    values[nz] = counts[nz] / row_sums[nz, None]
    return TransMatrix(values=values, counts=counts, lag=lag, zero_rows=zero_rows)


def _reachability(adj: np.ndarray) -> np.ndarray:
    reach = np.eye(adj.shape[0], dtype=bool) | adj
    while True:
        nxt = reach | (reach @ reach)
        if np.array_equal(nxt, reach):
            return reach
        reach = nxt


def recurrent_classes(t: TransMatrix) -> list[list[int]]:
    """Recurrent communication classes (1-based state ids)."""
    adj = t.counts > 0
    reach = _reachability(adj)
    recurrent = np.array(
        [bool(np.all(~reach[i] | reach[:, i])) for i in range(t.k)]
    )
    classes: list[list[int]] = []
    seen = np.zeros(t.k, dtype=bool)
    for i in np.flatnonzero(recurrent):
        if seen[i]:
            continue
        members = np.flatnonzero(reach[i] & reach[:, i] & recurrent)
        seen[members] = True
        classes.append([int(m) + 1 for m in members])
    return classes


def equilibrium(t: TransMatrix, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary distribution of the transition matrix by power iteration.

    Requires a single recurrent class.  Iteration runs on the half-lazy chain
    (T + I) / 2, which shares the stationary vector but cannot oscillate on
    periodic chains; the residual is checked against T itself.
    """
    classes = recurrent_classes(t)
    if len(classes) != 1:
        raise ValidationError(
            f"chain is reducible; recurrent classes: {classes} "
            "(no unique equilibrium)"
        )
    pi = np.full(t.k, 1.0 / t.k)
    lazy = (t.values + np.eye(t.k)) / 2.0
    for _ in range(max_iter):
        if np.abs(pi @ t.values - pi).sum() < tol:
            return pi
        pi = pi @ lazy
        pi /= pi.sum()
    raise NumericalError(f"equilibrium power iteration did not reach {tol}")


def tridiagonal_mass(t: TransMatrix) -> float:
    """Occupation-weighted transition probability within the band |i - j| <= 1.

    Weighting each row's banded probability by its occupation reduces to the
    ratio of banded to total transition counts, which keeps the result exact
    (a birth-death chain gives 1.0 with no rounding).
    """
    total = t.counts.sum()
    if total == 0:
        raise ValidationError("transition matrix has no observed transitions")
    i, j = np.indices(t.counts.shape)
    banded = t.counts[np.abs(i - j) <= 1].sum()
    return float(banded / total)


@dataclass
class ForbiddenTransitionReport:
    """Whether the top state is entered only from the state just below it."""

    skipped: bool
    passed: bool | None
    lower_to_top: dict[int, int]
    from_fourth: int
    offending_epochs: tuple[int, ...] = field(default=())
    notice: str = ""


def forbidden_transition_check(
    t: TransMatrix,
    states: Union[StateSequence, np.ndarray, None] = None,
) -> ForbiddenTransitionReport:
    """Check that state 5 is reached only from state 4 (k = 5 chains only).

    Passing ``states`` additionally lists the epoch indices at which a
    forbidden jump from states 1-3 into state 5 occurred.
    """
    if t.k != 5:
        return ForbiddenTransitionReport(
            skipped=True,
            passed=None,
            lower_to_top={},
            from_fourth=0,
            notice=f"check applies to k=5 chains, got k={t.k}",
        )
    lower = {i: int(t.counts[i - 1, 4]) for i in (1, 2, 3)}
    from_fourth = int(t.counts[3, 4])
    passed = all(v == 0 for v in lower.values()) and from_fourth > 0
    offending: tuple[int, ...] = ()
    if states is not None:
        labels, _ = _labels_of(states)
        src, dst = labels[: -t.lag], labels[t.lag :]
        offending = tuple(
            int(i) for i in np.flatnonzero((dst == 5) & (src >= 1) & (src <= 3))
        )
    return ForbiddenTransitionReport(
        skipped=False,
        passed=passed,
        lower_to_top=lower,
        from_fourth=from_fourth,
        offending_epochs=offending,
    )


def markovianity_gap(states: Union[StateSequence, np.ndarray], lag: int = 1) -> float:
    """Chapman-Kolmogorov gap ||T(2 lag) - T(lag)^2||_inf over occupied rows."""
    labels, k = _labels_of(states)
    if lag < 1:
        raise ValidationError(f"lag must be >= 1, got {lag}")
    if len(labels) < 2 * lag + 1:
        raise ValidationError("sequence too short for the two-lag comparison")
    counts1 = _count_transitions(labels, k, lag)
    counts2 = _count_transitions(labels, k, 2 * lag)
    rs1, rs2 = counts1.sum(axis=1), counts2.sum(axis=1)
    t1 = np.zeros((k, k))
    t1[rs1 > 0] = counts1[rs1 > 0] / rs1[rs1 > 0, None]
    t2 = np.zeros((k, k))
    t2[rs2 > 0] = counts2[rs2 > 0] / rs2[rs2 > 0, None]
    occupied = (rs1 > 0) & (rs2 > 0)
    if not occupied.any():
        raise ValidationError("no occupied rows at both lags")
    diff = np.abs(t2 - t1 @ t1).sum(axis=1)
    return float(diff[occupied].max())
