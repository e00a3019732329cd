"""Stock partitions and block-averaged (coarse-grained) correlation matrices.

A partition splits the stock index set into disjoint blocks; block averaging
replaces an N x N correlation matrix by the B x B matrix of block means,
excluding the unit self-correlations from diagonal blocks.  The pair-count
weighted mean of the result equals the off-diagonal mean of the original
matrix exactly, so the average correlation survives coarse graining.

Two-block ("extreme") partitions come in three flavours: choice 1 groups the
strongly intra-correlated sectors (EG, FN, TC, UT) against the rest, choice 2
groups the strongly inter-correlated sectors (CD, FN, ID) against the rest,
and choice 3 is a seeded random equal split.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError
from .ingest import SECTOR_CODES, SectorMap
from .returns import CorrMatrix

PARTITION_KINDS = ("sectorial", "choice1", "choice2", "random")

CHOICE1_SECTORS = ("EG", "FN", "TC", "UT")
CHOICE2_SECTORS = ("CD", "FN", "ID")
# variant reading of the choice-2 block; selectable via ecg_partition(block_a_sectors=...)
CHOICE2_SECTORS_ALT = ("CD", "FN", "IT")


@dataclass
class Partition:
    """Disjoint blocks of stock indices covering 0..N-1."""

    blocks: tuple[np.ndarray, ...]
    labels: tuple[str, ...]
    kind: str

    def __post_init__(self):
        self.blocks = tuple(np.asarray(b, dtype=np.intp) for b in self.blocks)
        self.labels = tuple(self.labels)
        if self.kind not in PARTITION_KINDS:
            raise ValidationError(f"unknown partition kind {self.kind!r}")
        if len(self.labels) != len(self.blocks):
            raise ValidationError("one label per block required")
        if any(b.size == 0 for b in self.blocks):
            raise ValidationError("empty block in partition")
        flat = np.concatenate(self.blocks)
        if np.unique(flat).size != flat.size:
            raise ValidationError("partition blocks overlap")
        if not np.array_equal(np.sort(flat), np.arange(flat.size)):
            raise ValidationError("partition blocks must cover indices 0..N-1")
        if self.kind == "sectorial" and len(self.blocks) != 10:
            raise ValidationError("sectorial partition must have 10 blocks")
        if self.kind in ("choice1", "choice2", "random") and len(self.blocks) != 2:
            raise ValidationError(f"{self.kind} partition must have 2 blocks")
        if self.kind == "random":
            a, b = (blk.size for blk in self.blocks)
            if abs(a - b) > 1:
                raise ValidationError("random partition blocks must be equal-sized (within 1)")

    @property
    def n(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def sizes(self) -> np.ndarray:
        return np.array([b.size for b in self.blocks], dtype=np.int64)


@dataclass
class CGMatrix:
    """Block-averaged correlation matrix with its pair-count weights.

    ``pair_counts[a, b]`` is the number of ordered index pairs averaged into
    entry (a, b): n_a * (n_a - 1) on the diagonal, n_a * n_b off it.
    """

    values: np.ndarray
    pair_counts: np.ndarray
    epoch_index: int
    partition_kind: str
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        pc = np.asarray(self.pair_counts, dtype=np.int64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or pc.shape != v.shape:
            raise ValidationError("CG matrix and pair counts must be square and congruent")
        if np.abs(v - v.T).max(initial=0.0) > 1e-12:
            raise ValidationError("CG matrix not symmetric")
        if v.size and (np.abs(v).max() > 1.0 + 1e-12 or not np.isfinite(v).all()):
            raise ValidationError("CG entries must lie in [-1, 1]")
        self.values = v
        self.pair_counts = pc

    @property
    def n_blocks(self) -> int:
        return self.values.shape[0]


def sectorial_partition(sectors: SectorMap) -> Partition:
    """One block per sector code, in canonical code order."""
    by_sector = sectors.indices_by_sector()
    empty = [c for c in SECTOR_CODES if by_sector[c].size == 0]
    if empty:
        raise ValidationError(f"sector(s) with no stocks: {', '.join(empty)}")
    return Partition(
        blocks=tuple(by_sector[c] for c in SECTOR_CODES),
        labels=SECTOR_CODES,
        kind="sectorial",
    )


def ecg_partition(
    choice: int,
    sectors: SectorMap,
    seed: int | None = None,
    block_a_sectors: tuple[str, ...] | None = None,
) -> Partition:
    """Two-block partition for extreme coarse graining.

    Choice 1 and 2 split by sector membership (see module docstring), with
    ``block_a_sectors`` overriding the default sector set.  Choice 3 draws a
    random equal split and requires a seed.
    """
    if choice not in (1, 2, 3):
        raise ValidationError(f"choice must be 1, 2 or 3, got {choice!r}")
    if choice == 3:
        if seed is None:
            raise ValidationError("choice 3 requires a seed")
        return random_equal_split(len(sectors.tickers), np.random.default_rng(seed))
    block_a = block_a_sectors or (CHOICE1_SECTORS if choice == 1 else CHOICE2_SECTORS)
    unknown = sorted(set(block_a) - set(SECTOR_CODES))
    if unknown:
        raise ValidationError(f"unknown sector codes in block: {', '.join(unknown)}")
    codes = np.asarray(sectors.codes)
    in_a = np.isin(codes, block_a)
    a, b = np.flatnonzero(in_a), np.flatnonzero(~in_a)
    if a.size == 0 or b.size == 0:
        raise ValidationError(
            f"choice {choice} split is degenerate: block A sectors {block_a} "
            "cover none or all of the stocks"
        )
    return Partition(
        blocks=(a, b),
        labels=("+".join(block_a), "rest"),
        kind=f"choice{choice}",
    )


def random_equal_split(n: int, rng: np.random.Generator) -> Partition:
    """Uniformly random split into blocks of sizes ceil(n/2) and floor(n/2)."""
    if n < 2:
        raise ValidationError(f"need at least 2 stocks to split, got {n}")
    perm = rng.permutation(n)
    half = (n + 1) // 2
    return Partition(
        blocks=(np.sort(perm[:half]), np.sort(perm[half:])),
        labels=("A", "B"),
        kind="random",
    )


def random_partition_ensemble(n: int, count: int = 1000, seed: int = 0) -> list[Partition]:
    """``count`` independent random equal splits from one seeded stream.

    Member streams are split by index, so parallel and sequential generation
    agree exactly.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    children = np.random.SeedSequence(seed).spawn(count)
    return [random_equal_split(n, np.random.default_rng(c)) for c in children]


def block_average(corr: CorrMatrix, partition: Partition) -> CGMatrix:
    """Average a correlation matrix over partition blocks.

    Diagonal entry (a, a) is the mean of C_ij over i != j within block a
    (self-correlations excluded); entry (a, b) is the mean over the cross
    block.  A block of size 1 has no off-diagonal pairs and is an error.
    """
    c = corr.values
    n = corr.n
    if partition.n != n:
        raise ValidationError(
            f"partition covers {partition.n} indices but matrix has {n}"
        )
    sizes = partition.sizes()
    singles = [partition.labels[a] for a in np.flatnonzero(sizes == 1)]
    if singles:
        raise ValidationError(
            f"diagonal block(s) of size 1 have no pairs to average: {', '.join(singles)}"
        )
    b = partition.n_blocks
    member = np.zeros((b, n), dtype=np.float64)
    for a, blk in enumerate(partition.blocks):
        member[a, blk] = 1.0
    sums = member @ c @ member.T
    sums = (sums + sums.T) / 2.0
    diag_self = np.array([np.diag(c)[blk].sum() for blk in partition.blocks])
    pair_counts = np.outer(sizes, sizes)
    np.fill_diagonal(pair_counts, sizes * (sizes - 1))
    values = sums.copy()
    values[np.diag_indices(b)] -= diag_self
    values /= pair_counts
    np.clip(values, -1.0, 1.0, out=values)
    return CGMatrix(
        values=values,
        pair_counts=pair_counts,
        epoch_index=corr.epoch_index,
        partition_kind=partition.kind,
        labels=partition.labels,
    )


def load_partition_csv(
    path: str | Path, tickers: tuple[str, ...], kind: str
) -> Partition:
    """Load a two-block override from a ``ticker,block`` CSV (block in {0, 1}).

    Replaces the sector-derived membership of ``choice1`` or ``choice2``;
    every ticker of the active table must be assigned.
    """
    if kind not in ("choice1", "choice2"):
        raise ValidationError(f"partition file may only override choice1/choice2, not {kind!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"partition file not found: {path}")
    assignment: dict[str, int] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["ticker", "block"]:
            raise DataError(f"{path} line 1: header must be 'ticker,block'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            ticker = row[0].strip()
            try:
                block = int(row[1])
            except (ValueError, IndexError):
                raise DataError(f"{path} line {lineno}: bad block value") from None
            if block not in (0, 1):
                raise ValidationError(f"{path} line {lineno}: block must be 0 or 1")
            assignment[ticker] = block
    missing = [t for t in tickers if t not in assignment]
    if missing:
        raise ValidationError(f"partition file misses ticker(s): {', '.join(missing[:10])}")
    flags = np.array([assignment[t] for t in tickers])
    a, b = np.flatnonzero(flags == 0), np.flatnonzero(flags == 1)
    if a.size == 0 or b.size == 0:
        raise ValidationError(f"{path}: both blocks must be non-empty")
    return Partition(blocks=(a, b), labels=("block0", "block1"), kind=kind)


def ecg_elements(cg: CGMatrix) -> tuple[float, float, float]:
    """The three free elements (x, y, z) of a 2x2 coarse-grained matrix."""
    if cg.n_blocks != 2:
        raise ValidationError(f"expected a 2x2 matrix, got {cg.n_blocks}x{cg.n_blocks}")
    v = cg.values
    return float(v[0, 0]), float(v[0, 1]), float(v[1, 1])
