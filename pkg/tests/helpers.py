"""Shared builders for test fixtures."""

from datetime import date, timedelta

import numpy as np

from corrstates.coarse import CGMatrix, Partition
from corrstates.ingest import PriceTable, SectorMap
from corrstates.returns import CorrMatrix, ReturnsTable


def make_corr(values, epoch_index: int = 0) -> CorrMatrix:
    values = np.asarray(values, dtype=np.float64)
    return CorrMatrix(
        values=values,
        epoch_start=date(2020, 1, 1),
        epoch_end=date(2020, 1, 28),
        epoch_index=epoch_index,
    )


def make_cg(values, sizes, kind: str = "choice1", epoch_index: int = 0) -> CGMatrix:
    sizes = np.asarray(sizes)
    pair_counts = np.outer(sizes, sizes)
    np.fill_diagonal(pair_counts, sizes * (sizes - 1))
    return CGMatrix(
        values=np.asarray(values, dtype=np.float64),
        pair_counts=pair_counts,
        epoch_index=epoch_index,
        partition_kind=kind,
        labels=tuple(f"b{i}" for i in range(len(sizes))),
    )


def make_returns(values) -> ReturnsTable:
    values = np.asarray(values, dtype=np.float64)
    n, d = values.shape
    days = weekdays(date(2020, 1, 6), d)
    return ReturnsTable(
        tickers=tuple(f"S{i:03d}" for i in range(n)), days=days, returns=values
    )


def make_price_table(prices, quoted=None, tickers=None) -> PriceTable:
    prices = np.asarray(prices, dtype=np.float64)
    n, d = prices.shape
    if quoted is None:
        quoted = np.ones((n, d), dtype=bool)
    if tickers is None:
        tickers = tuple(f"S{i:03d}" for i in range(n))
    return PriceTable(
        tickers=tickers,
        days=weekdays(date(2020, 1, 6), d),
        prices=np.where(quoted, prices, np.nan),
        quoted=np.asarray(quoted, dtype=bool),
    )


def weekdays(start: date, count: int) -> tuple[date, ...]:
    days = []
    d = start
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return tuple(days)


def random_sized_partition(n: int, n_blocks: int, rng, min_size: int = 2) -> Partition:
    """Random partition with every block at least ``min_size`` strong.

    The Partition type ties kind to block count, so only 2-block (choice1)
    and 10-block (sectorial) partitions are constructible.
    """
    assert n_blocks in (2, 10)
    assert n >= n_blocks * min_size
    perm = rng.permutation(n)
    # place min_size in each block, spread the rest uniformly
    extra = rng.multinomial(n - n_blocks * min_size, np.full(n_blocks, 1.0 / n_blocks))
    sizes = min_size + extra
    blocks = []
    pos = 0
    for s in sizes:
        blocks.append(np.sort(perm[pos : pos + s]))
        pos += s
    return Partition(
        blocks=tuple(blocks),
        labels=tuple(f"b{i}" for i in range(n_blocks)),
        kind="choice1" if n_blocks == 2 else "sectorial",
    )


def random_corr_matrix(n: int, rng) -> np.ndarray:
    """Random valid correlation matrix via normalized Gram matrix."""
    g = rng.standard_normal((n, max(n + 2, 4)))
    c = g @ g.T
    d = np.sqrt(np.diag(c))
    c = c / np.outer(d, d)
    c = (c + c.T) / 2
    np.fill_diagonal(c, 1.0)
    return np.clip(c, -1.0, 1.0)


def sector_map_322() -> SectorMap:
    """A 322-ticker map over all 10 sector codes (sizes are plausible, fixed)."""
    from corrstates.ingest import SECTOR_CODES

    sizes = (40, 30, 25, 50, 35, 45, 40, 20, 12, 25)  # sums to 322
    assert sum(sizes) == 322
    codes = []
    for code, size in zip(SECTOR_CODES, sizes):
        codes.extend([code] * size)
    tickers = tuple(f"T{i:03d}" for i in range(322))
    return SectorMap(tickers=tickers, codes=tuple(codes))
