"""Synthetic price datasets with planted correlation regimes.

Returns follow a one-market-factor plus per-sector-factor model,
    r_i(t) = beta_m(t) * M_t + beta_s(t) * S_{sector(i), t} + sigma(t) * eps_it,
with independent standard-normal factors, so the population pairwise
correlation is beta_m^2 / (beta_m^2 + beta_s^2 + sigma^2) across sectors and
(beta_m^2 + beta_s^2) / (beta_m^2 + beta_s^2 + sigma^2) within a sector.
Prices start at 100 and follow the cumulative exponential of the returns.

Per-stock random streams are split by index, so parallel generation would
match sequential output exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError
from .ingest import SECTOR_CODES, PriceTable, SectorMap


@dataclass(frozen=True)
class Regime:
    """One homogeneous stretch of the factor model."""

    duration_days: int
    market_beta: float
    sector_beta: float
    idiosyncratic_sigma: float


@dataclass
class RegimeSpec:
    """Full recipe for one synthetic dataset."""

    n_stocks: int
    n_sectors: int
    day_count: int
    regimes: tuple[Regime, ...]
    seed: int
    start: date = date(2018, 1, 2)

    def __post_init__(self):
        self.regimes = tuple(
            r if isinstance(r, Regime) else Regime(*r) for r in self.regimes
        )
        if self.n_stocks < 2:
            raise ValidationError("need at least 2 stocks")
        if not 1 <= self.n_sectors <= len(SECTOR_CODES):
            raise ValidationError(f"n_sectors must be in 1..{len(SECTOR_CODES)}")
        if self.n_sectors > self.n_stocks:
            raise ValidationError("more sectors than stocks")
        if not self.regimes:
            raise ValidationError("at least one regime required")
        if sum(r.duration_days for r in self.regimes) != self.day_count:
            raise ValidationError("regime durations must sum to day_count")
        for r in self.regimes:
            if r.duration_days < 1:
                raise ValidationError("regime duration must be >= 1 day")
            if not (np.isfinite(r.market_beta) and r.market_beta >= 0):
                raise ValidationError("market beta must be finite and >= 0")
            if not (np.isfinite(r.sector_beta) and r.sector_beta >= 0):
                raise ValidationError("sector beta must be finite and >= 0")
            if not (np.isfinite(r.idiosyncratic_sigma) and r.idiosyncratic_sigma > 0):
                raise ValidationError("idiosyncratic sigma must be finite and > 0")


@dataclass
class SyntheticDataset:
    """Generated prices plus the ground truth that produced them."""

    table: PriceTable
    sectors: SectorMap
    regime_ids: np.ndarray  # per-day regime index, 0-based
    spec: RegimeSpec


def trading_calendar(start: date, count: int) -> tuple[date, ...]:
    """``count`` consecutive weekdays from ``start``."""
    days = []
    d = start
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return tuple(days)


def generate_prices(spec: RegimeSpec) -> SyntheticDataset:
    """Generate a fully-quoted price table from the regime recipe."""
    n, d = spec.n_stocks, spec.day_count
    regime_ids = np.repeat(
        np.arange(len(spec.regimes)), [r.duration_days for r in spec.regimes]
    )
    beta_m = np.array([spec.regimes[g].market_beta for g in regime_ids])
    beta_s = np.array([spec.regimes[g].sector_beta for g in regime_ids])
    sigma = np.array([spec.regimes[g].idiosyncratic_sigma for g in regime_ids])

    children = np.random.SeedSequence(spec.seed).spawn(2 + n)
    market = np.random.default_rng(children[0]).standard_normal(d)
    sector_factors = np.random.default_rng(children[1]).standard_normal(
        (spec.n_sectors, d)
    )
    sector_idx = np.arange(n) % spec.n_sectors
    returns = np.empty((n, d))
    for i in range(n):
        eps = np.random.default_rng(children[2 + i]).standard_normal(d)
        returns[i] = beta_m * market + beta_s * sector_factors[sector_idx[i]] + sigma * eps

    prices = 100.0 * np.exp(np.cumsum(returns, axis=1))
    tickers = tuple(f"S{i:03d}" for i in range(n))
    table = PriceTable(
        tickers=tickers,
        days=trading_calendar(spec.start, d),
        prices=prices,
        quoted=np.ones((n, d), dtype=bool),
    )
    sectors = SectorMap(
        tickers=tickers, codes=tuple(SECTOR_CODES[j] for j in sector_idx)
    )
    return SyntheticDataset(table=table, sectors=sectors, regime_ids=regime_ids, spec=spec)


def inject_gaps(
    table: PriceTable, gap_rate: float, max_run: int, seed: int
) -> PriceTable:
    """Randomly mask quotes in runs of at most ``max_run`` days.

    Each day can start a gap with probability ``gap_rate``; a quoted day is
    forced after every gap so runs never merge past the bound.  A stock is
    never left without any quoted day.
    """
    if not 0.0 <= gap_rate < 1.0:
        raise ValidationError("gap_rate must be in [0, 1)")
    if max_run < 1:
        raise ValidationError("max_run must be >= 1")
    quoted = table.quoted.copy()
    if gap_rate > 0.0:
        children = np.random.SeedSequence(seed).spawn(table.n_stocks)
        for i in range(table.n_stocks):
            rng = np.random.default_rng(children[i])
            t = 0
            while t < table.n_days:
                if rng.random() < gap_rate:
                    run = int(rng.integers(1, max_run + 1))
                    quoted[i, t : t + run] = False
                    t += run + 1
                else:
                    t += 1
            if not quoted[i].any():
                quoted[i, 0] = True
    return PriceTable(
        tickers=table.tickers,
        days=table.days,
        prices=np.where(quoted, table.prices, np.nan),
        quoted=quoted,
    )


def write_regime_csv(
    days: tuple[date, ...], regime_ids: np.ndarray, path: str | Path
) -> None:
    """Ground-truth regime per day as a ``date,regime`` CSV."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "regime"])
        for day, rid in zip(days, regime_ids):
            writer.writerow([day.isoformat(), int(rid)])


def load_regime_csv(path: str | Path) -> tuple[tuple[date, ...], np.ndarray]:
    """Read a ``date,regime`` CSV back."""
    days: list[date] = []
    ids: list[int] = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["date", "regime"]:
            raise DataError(f"{path}: header must be 'date,regime'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                days.append(date.fromisoformat(row[0].strip()))
                ids.append(int(row[1]))
            except (ValueError, IndexError):
                raise DataError(f"{path} line {lineno}: bad row") from None
    return tuple(days), np.asarray(ids, dtype=np.int64)
