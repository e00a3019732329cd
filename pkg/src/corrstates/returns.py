"""Log returns and rolling-epoch Pearson correlation matrices.

Missing-data rules: the return on a day without a closing quote is zero, and
the return on an active day is taken against the last active day before it.
Correlations use population (1/n) moments; the normalization cancels except
in degenerate windows.

Window convention: a grid of D return days with epoch length L and shift s
yields floor((D - L) / s) + 1 epochs.  ``log_returns`` drops the first price
day by default (it has no return); with ``pad_first_day=True`` the first day
is kept with a zero return, so a T-day price table produces a T-day return
grid and T - L + 1 epochs for shift 1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DataError, ValidationError
from .ingest import PriceTable

SYMMETRY_TOL = 1e-12


@dataclass
class ReturnsTable:
    """Stock x day grid of log returns."""

    tickers: tuple[str, ...]
    days: tuple[date, ...]
    returns: np.ndarray

    def __post_init__(self):
        self.tickers = tuple(self.tickers)
        self.days = tuple(self.days)
        self.returns = np.asarray(self.returns, dtype=np.float64)
        if self.returns.shape != (len(self.tickers), len(self.days)):
            raise ValidationError("returns grid shape mismatch")
        if not np.isfinite(self.returns).all():
            raise ValidationError("returns contain non-finite values")

    @property
    def n_days(self) -> int:
        return len(self.days)


@dataclass
class CorrMatrix:
    """Pearson correlation matrix for one epoch.

    ``degenerate`` lists stock indices whose return series had zero variance
    inside the window; their off-diagonal correlations are set to 0.
    """

    values: np.ndarray
    epoch_start: date
    epoch_end: date
    epoch_index: int
    degenerate: tuple[int, ...] = field(default=())

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError("correlation matrix must be square")
        if np.abs(v - v.T).max(initial=0.0) > SYMMETRY_TOL:
            raise ValidationError("correlation matrix not symmetric")
        if not np.allclose(np.diag(v), 1.0, rtol=0, atol=SYMMETRY_TOL):
            raise ValidationError("correlation matrix diagonal must be 1")
        if v.size and (np.abs(v).max() > 1.0 + SYMMETRY_TOL or not np.isfinite(v).all()):
            raise ValidationError("correlation entries must lie in [-1, 1]")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[0]


def log_returns(table: PriceTable, pad_first_day: bool = False) -> ReturnsTable:
    """Compute log returns under the missing-quote rules.

    Args:
        table: price table with at least 2 days; every stock needs at least
            one quoted day.
        pad_first_day: keep the first price day with a zero return instead of
            dropping it (see module docstring).
    """
    if table.n_days < 2:
        raise ValidationError("need at least 2 trading days for returns")
    n, d = table.n_stocks, table.n_days
    logp = np.log(np.where(table.quoted, table.prices, 1.0))
    r = np.zeros((n, d), dtype=np.float64)
    for i in range(n):
        qi = np.flatnonzero(table.quoted[i])
        if qi.size == 0:
            raise ValidationError(f"stock {table.tickers[i]} has no quoted days")
        r[i, qi[1:]] = np.diff(logp[i, qi])
    if pad_first_day:
        return ReturnsTable(tickers=table.tickers, days=table.days, returns=r)
    return ReturnsTable(tickers=table.tickers, days=table.days[1:], returns=r[:, 1:])


def pearson_matrix(
    returns: ReturnsTable,
    window: tuple[int, int],
    epoch_index: int = 0,
) -> CorrMatrix:
    """Pearson correlation matrix over the half-open day range ``window``.

    Uses population (1/n) moments.  A stock with zero variance inside the
    window gets zero correlation with every other stock, a unit diagonal, and
    is reported in ``CorrMatrix.degenerate``.
    """
    start, stop = window
    if not (0 <= start < stop <= returns.n_days):
        raise ValidationError(f"window {window} outside return grid of {returns.n_days} days")
    if stop - start < 2:
        raise ValidationError("window length must be >= 2")
    x = returns.returns[:, start:stop]
    if x.shape[0] < 1:
        raise ValidationError("need at least one stock")
    xc = x - x.mean(axis=1, keepdims=True)
    cov = xc @ xc.T / x.shape[1]
    cov = (cov + cov.T) / 2.0
    var = np.diag(cov).copy()
    tol = 1e-14 * max(1.0, float(np.abs(xc).max(initial=0.0)))
    degenerate = np.flatnonzero(var <= tol * tol)
    sigma = np.sqrt(np.where(var > tol * tol, var, 1.0))
    c = cov / np.outer(sigma, sigma)
    if degenerate.size:
        c[degenerate, :] = 0.0
        c[:, degenerate] = 0.0
    np.fill_diagonal(c, 1.0)
    np.clip(c, -1.0, 1.0, out=c)
    return CorrMatrix(
        values=c,
        epoch_start=returns.days[start],
        epoch_end=returns.days[stop - 1],
        epoch_index=epoch_index,
        degenerate=tuple(int(i) for i in degenerate),
    )


def epoch_count(n_days: int, epoch_days: int, shift: int) -> int:
    """Number of epochs on a grid of ``n_days`` return days."""
    if epoch_days < 2:
        raise ValidationError(f"epoch_days must be >= 2, got {epoch_days}")
    if shift < 1:
        raise ValidationError(f"shift must be >= 1, got {shift}")
    if epoch_days > n_days:
        raise ValidationError(
            f"epoch of {epoch_days} days does not fit in {n_days} return days"
        )
    return (n_days - epoch_days) // shift + 1


def iter_rolling_correlations(
    returns: ReturnsTable, epoch_days: int, shift: int
) -> Iterator[CorrMatrix]:
    """Yield the rolling-epoch correlation matrices one at a time.

    Epochs start at day offsets 0, shift, 2*shift, ...; memory stays flat, so
    this is the entry point for long horizons.
    """
    count = epoch_count(returns.n_days, epoch_days, shift)
    for k in range(count):
        start = k * shift
        yield pearson_matrix(returns, (start, start + epoch_days), epoch_index=k)


def rolling_correlations(
    returns: ReturnsTable, epoch_days: int, shift: int
) -> list[CorrMatrix]:
    """Materialized list of rolling-epoch correlation matrices."""
    return list(iter_rolling_correlations(returns, epoch_days, shift))


_DUMP_MAGIC = b"CSUT"


class EpochDumpWriter:
    """Streaming writer for the packed epoch-matrix binary.

    Layout: magic ``CSUT``, uint32 N, uint32 epoch count, then per epoch the
    N(N-1)/2 strictly-upper-triangle values in row-major float64 order (the
    unit diagonal is implied).
    """

    def __init__(self, path: str | Path, n: int, count: int):
        self._fh = Path(path).open("wb")
        self._n = n
        self._expected = count
        self._written = 0
        self._iu = np.triu_indices(n, k=1)
        self._fh.write(_DUMP_MAGIC)
        self._fh.write(struct.pack("<II", n, count))

    def write(self, m: CorrMatrix) -> None:
        if m.n != self._n:
            raise ValidationError("mixed matrix sizes in dump")
        self._fh.write(np.ascontiguousarray(m.values[self._iu]).tobytes())
        self._written += 1

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.close()
        if self._written != self._expected:
            raise ValidationError(
                f"dump expected {self._expected} epochs, wrote {self._written}"
            )

    def __enter__(self) -> "EpochDumpWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self._fh.close()


def write_epoch_dump(matrices: list[CorrMatrix], path: str | Path) -> None:
    """Write a packed binary of float64 upper triangles (see EpochDumpWriter)."""
    if not matrices:
        raise ValidationError("nothing to dump")
    with EpochDumpWriter(path, matrices[0].n, len(matrices)) as writer:
        for m in matrices:
            writer.write(m)


def read_epoch_dump(path: str | Path) -> list[np.ndarray]:
    """Read a packed epoch dump back into full symmetric matrices."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != _DUMP_MAGIC:
            raise DataError(f"{path}: not an epoch dump")
        n, count = struct.unpack("<II", fh.read(8))
        iu = np.triu_indices(n, k=1)
        per = n * (n - 1) // 2
        out = []
        for _ in range(count):
            buf = fh.read(per * 8)
            if len(buf) != per * 8:
                raise DataError(f"{path}: truncated dump")
            tri = np.frombuffer(buf, dtype="<f8")
            m = np.eye(n)
            m[iu] = tri
            m[(iu[1], iu[0])] = tri
            out.append(m)
    return out
