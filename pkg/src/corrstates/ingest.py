"""Price-table and sector-metadata ingestion.

Price CSV schema: header ``date,<ticker1>,<ticker2>,...`` and one row per
trading day.  Dates are ISO-8601, cells hold adjusted closing prices, and an
empty cell or ``NA`` means no quote that day.  Sector CSV schema: header
``ticker,sector`` with sector codes drawn from the ten-code set below.

Prices must be pre-adjusted for splits/dividends; no adjustment is applied
here.  The trading calendar is simply the set of dates present in the file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError

SECTOR_CODES = ("CD", "CS", "EG", "FN", "HC", "ID", "IT", "MT", "TC", "UT")

_NO_QUOTE = {"", "NA"}


@dataclass
class PriceTable:
    """Aligned stock x trading-day grid of adjusted closing prices.

    ``prices[i, t]`` is only meaningful where ``quoted[i, t]`` is True;
    unquoted slots hold NaN.
    """

    tickers: tuple[str, ...]
    days: tuple[date, ...]
    prices: np.ndarray
    quoted: np.ndarray

    def __post_init__(self):
        self.tickers = tuple(self.tickers)
        self.days = tuple(self.days)
        self.prices = np.asarray(self.prices, dtype=np.float64)
        self.quoted = np.asarray(self.quoted, dtype=bool)
        shape = (len(self.tickers), len(self.days))
        if self.prices.shape != shape or self.quoted.shape != shape:
            raise ValidationError(
                f"price grid shape {self.prices.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.days)} days"
            )
        if len(set(self.tickers)) != len(self.tickers):
            raise ValidationError("duplicate ticker in price table")
        for prev, cur in zip(self.days, self.days[1:]):
            if cur <= prev:
                raise ValidationError(f"days not strictly increasing at {cur}")
        q = self.prices[self.quoted]
        if q.size and not (np.isfinite(q).all() and (q > 0).all()):
            raise ValidationError("quoted prices must be strictly positive and finite")

    @property
    def n_stocks(self) -> int:
        return len(self.tickers)

    @property
    def n_days(self) -> int:
        return len(self.days)


@dataclass
class SectorMap:
    """Sector code per ticker, aligned with the active price table order."""

    tickers: tuple[str, ...]
    codes: tuple[str, ...]

    def __post_init__(self):
        self.tickers = tuple(self.tickers)
        self.codes = tuple(self.codes)
        if len(self.tickers) != len(self.codes):
            raise ValidationError("sector map tickers/codes length mismatch")
        bad = sorted({c for c in self.codes} - set(SECTOR_CODES))
        if bad:
            raise ValidationError(f"unknown sector codes: {', '.join(bad)}")

    def sector_of(self, ticker: str) -> str:
        try:
            return self.codes[self.tickers.index(ticker)]
        except ValueError:
            raise ValidationError(f"ticker {ticker} not in sector map") from None

    def indices_by_sector(self) -> dict[str, np.ndarray]:
        """Stock indices per sector code, in canonical code order."""
        codes = np.asarray(self.codes)
        return {c: np.flatnonzero(codes == c) for c in SECTOR_CODES}

    def counts(self) -> dict[str, int]:
        return {c: len(ix) for c, ix in self.indices_by_sector().items()}


def load_price_table(path: str | Path) -> PriceTable:
    """Load a price CSV into a PriceTable.

    Rows are sorted by date on load.  Malformed rows raise DataError with the
    offending line number; non-positive prices and duplicate dates raise
    ValidationError.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"price file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip() != "date":
            raise DataError(f"{path} line 1: header must be 'date,<ticker>,...'")
        tickers = tuple(t.strip() for t in header[1:])
        if any(not t for t in tickers):
            raise DataError(f"{path} line 1: empty ticker name in header")

        rows: list[tuple[date, list[float], list[bool]]] = []
        seen_days: set[date] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(tickers) + 1:
                raise DataError(
                    f"{path} line {lineno}: expected {len(tickers) + 1} cells, got {len(row)}"
                )
            try:
                day = date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"{path} line {lineno}: bad date {row[0]!r}") from None
            if day in seen_days:
                raise ValidationError(f"{path} line {lineno}: duplicate date {day}")
            seen_days.add(day)
            vals: list[float] = []
            mask: list[bool] = []
            for col, cell in enumerate(row[1:]):
                cell = cell.strip()
                if cell in _NO_QUOTE:
                    vals.append(np.nan)
                    mask.append(False)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path} line {lineno}: bad price {cell!r} for {tickers[col]}"
                    ) from None
                if not np.isfinite(v) or v <= 0:
                    raise ValidationError(
                        f"{path} line {lineno}: non-positive price {cell} for {tickers[col]}"
                    )
                vals.append(v)
                mask.append(True)
            rows.append((day, vals, mask))

    if not rows:
        raise DataError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    days = tuple(r[0] for r in rows)
    prices = np.array([r[1] for r in rows], dtype=np.float64).T
    quoted = np.array([r[2] for r in rows], dtype=bool).T
    return PriceTable(tickers=tickers, days=days, prices=prices, quoted=quoted)


def write_price_table(table: PriceTable, path: str | Path) -> None:
    """Serialize back to the price CSV schema (load/write round-trips exactly)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *table.tickers])
        for t, day in enumerate(table.days):
            cells = [
                repr(float(p)) if q else "NA"
                for p, q in zip(table.prices[:, t], table.quoted[:, t])
            ]
            writer.writerow([day.isoformat(), *cells])


def gap_run_lengths(table: PriceTable) -> np.ndarray:
    """Longest run of consecutive unquoted days per ticker.

    Runs touching the start or end of the horizon count like any other run.
    """
    out = np.zeros(table.n_stocks, dtype=np.int64)
    for i in range(table.n_stocks):
        # indices of quoted days, padded with virtual quotes at both ends
        qi = np.flatnonzero(table.quoted[i])
        padded = np.concatenate(([-1], qi, [table.n_days]))
        out[i] = int(np.max(np.diff(padded))) - 1
    return out


def filter_stocks(table: PriceTable, max_gap: int = 2) -> PriceTable:
    """Keep tickers whose longest unquoted run is at most ``max_gap`` days.

    Ticker order is preserved; filtering an already-filtered table is a no-op.
    """
    if max_gap < 0:
        raise ValidationError(f"max_gap must be >= 0, got {max_gap}")
    keep = gap_run_lengths(table) <= max_gap
    idx = np.flatnonzero(keep)
    return PriceTable(
        tickers=tuple(table.tickers[i] for i in idx),
        days=table.days,
        prices=table.prices[idx],
        quoted=table.quoted[idx],
    )


def load_sector_map(path: str | Path, table: PriceTable) -> SectorMap:
    """Load ``ticker,sector`` pairs and align them with ``table``'s tickers.

    Every ticker of the table must be covered; unknown sector codes and
    conflicting duplicate assignments are rejected.  Extra tickers not in the
    table are ignored.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"sector file not found: {path}")
    assignments: dict[str, str] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip() for h in header[:2]] != ["ticker", "sector"]:
            raise DataError(f"{path} line 1: header must be 'ticker,sector'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise DataError(f"{path} line {lineno}: expected 'ticker,sector'")
            ticker, code = row[0].strip(), row[1].strip()
            if code not in SECTOR_CODES:
                raise ValidationError(
                    f"{path} line {lineno}: unknown sector code {code!r} for {ticker}"
                )
            if ticker in assignments and assignments[ticker] != code:
                raise ValidationError(
                    f"{path} line {lineno}: conflicting sector for {ticker}"
                )
            assignments[ticker] = code
    missing = [t for t in table.tickers if t not in assignments]
    if missing:
        raise ValidationError(
            f"sector map does not cover ticker(s): {', '.join(missing[:10])}"
            + (" ..." if len(missing) > 10 else "")
        )
    return SectorMap(
        tickers=table.tickers,
        codes=tuple(assignments[t] for t in table.tickers),
    )


def write_sector_map(sectors: SectorMap, path: str | Path) -> None:
    """Serialize a SectorMap to the ``ticker,sector`` CSV schema."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticker", "sector"])
        for ticker, code in zip(sectors.tickers, sectors.codes):
            writer.writerow([ticker, code])
