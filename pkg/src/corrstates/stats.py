"""Eigenvalues, average correlations, and distribution moments of CG matrices.

Conventions fixed here and echoed in report headers: moments are taken over
the B(B+1)/2 distinct matrix entries (upper triangle including the diagonal)
with population normalization, and kurtosis is reported as excess kurtosis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .coarse import CGMatrix
from .errors import NumericalError, ValidationError
from .returns import CorrMatrix


@dataclass
class EpochSeries:
    """One derived quantity sampled per epoch."""

    quantity: str
    epoch_index: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.epoch_index = np.asarray(self.epoch_index, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.epoch_index.shape != self.values.shape or self.values.ndim != 1:
            raise ValidationError("epoch series index/values must be 1-d and congruent")
        if not np.isfinite(self.values).all():
            raise ValidationError(f"series {self.quantity!r} has non-finite values")

    def __len__(self) -> int:
        return len(self.values)


def average_correlation(m: Union[CorrMatrix, CGMatrix]) -> float:
    """Mean correlation of a full or coarse-grained matrix.

    For a full matrix this is the mean of the off-diagonal entries; for a CG
    matrix the pair-count weighted mean of all entries, which equals the
    underlying full-matrix off-diagonal mean exactly.
    """
    if isinstance(m, CGMatrix):
        total = int(m.pair_counts.sum())
        if total == 0:
            raise ValidationError("CG matrix has no averaged pairs")
        return float((m.pair_counts * m.values).sum() / total)
    v = m.values
    n = v.shape[0]
    if n < 2:
        return 0.0
    return float((v.sum() - np.trace(v)) / (n * (n - 1)))


def eigenvalues_2x2(x: float, y: float, z: float) -> tuple[float, float]:
    """Closed-form eigenvalues of [[x, y], [y, z]], returned (min, max)."""
    if not all(np.isfinite(v) for v in (x, y, z)):
        raise ValidationError("eigenvalues_2x2 needs finite inputs")
    mid = (x + z) / 2.0
    rad = np.hypot((x - z) / 2.0, y)
    return float(mid - rad), float(mid + rad)


def jacobi_eigenvalues(
    matrix: np.ndarray, rel_tol: float = 1e-12, max_sweeps: int = 100
) -> np.ndarray:
    """Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``rel_tol * ||matrix||_F``.  Intended for the small (B <= 12) matrices of
    this pipeline.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    if n == 1:
        return a[0, :1].copy()
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return np.zeros(n)

    def off_norm() -> float:
        # summed directly over off-diagonal entries; the trace-based shortcut
        # cancels catastrophically once the matrix is nearly diagonal
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.linalg.norm(off))

    for _ in range(max_sweeps):
        if off_norm() <= rel_tol * norm:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:  # tau*tau would overflow; rotation is tiny
                    t = 1.0 / (2.0 * tau)
                elif tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                new_p, new_q = a[p, p] - t * apq, a[q, q] + t * apq
                row_p, row_q = a[p].copy(), a[q].copy()
                a[p] = c * row_p - s * row_q
                a[q] = s * row_p + c * row_q
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, p], a[q, q] = new_p, new_q
                a[p, q] = a[q, p] = 0.0
    if off_norm() <= rel_tol * norm:
        return np.sort(np.diag(a))
    raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps")


def eigenvalues_sym(m: Union[CGMatrix, np.ndarray]) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending."""
    v = m.values if isinstance(m, CGMatrix) else np.asarray(m, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValidationError("expected a square matrix")
    if np.abs(v - v.T).max(initial=0.0) > 1e-9:
        raise ValidationError("matrix is not symmetric within 1e-9")
    return jacobi_eigenvalues((v + v.T) / 2.0)


class ElementMoments(NamedTuple):
    variance: float
    skewness: float
    kurtosis: float
    degenerate: bool = False


def element_moments(m: CGMatrix) -> ElementMoments:
    """Population variance, skewness, and excess kurtosis of the distinct entries.

    A zero-variance (constant) matrix is flagged and gets skewness and
    kurtosis 0 by convention.
    """
    b = m.n_blocks
    if b < 2:
        raise ValidationError("need at least a 2x2 matrix for element moments")
    entries = m.values[np.triu_indices(b)]
    if np.ptp(entries) == 0.0:
        return ElementMoments(0.0, 0.0, 0.0, degenerate=True)
    centered = entries - entries.mean()
    var = float(np.mean(centered**2))
    if var < 1e-300:
        return ElementMoments(0.0, 0.0, 0.0, degenerate=True)
    skew = float(np.mean(centered**3) / var**1.5)
    kurt = float(np.mean(centered**4) / var**2 - 3.0)
    return ElementMoments(var, skew, kurt)


def series_pearson(a: Union[EpochSeries, np.ndarray], b: Union[EpochSeries, np.ndarray]) -> float:
    """Pearson coefficient between two epoch series."""
    xa = np.asarray(a.values if isinstance(a, EpochSeries) else a, dtype=np.float64)
    xb = np.asarray(b.values if isinstance(b, EpochSeries) else b, dtype=np.float64)
    if xa.shape != xb.shape or xa.ndim != 1:
        raise ValidationError("series must be 1-d and of equal length")
    if len(xa) < 2:
        raise ValidationError("need at least 2 points")
    da, db = xa - xa.mean(), xb - xb.mean()
    sa, sb = np.sqrt(np.mean(da**2)), np.sqrt(np.mean(db**2))
    if sa == 0.0 or sb == 0.0:
        raise ValidationError("constant series has no defined correlation")
    return float(np.mean(da * db) / (sa * sb))
