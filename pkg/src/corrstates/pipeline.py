"""Pipeline orchestration: config, run execution, output tree, manifest.

A run executes ingest -> returns -> rolling correlations -> per-partition
coarse graining -> series/statistics -> clustering -> dynamics and writes one
directory tree of delimited outputs plus ``manifest.json``.  The manifest
echoes the fully-resolved configuration (with the output directory normalized
to ".") and the sha256 of every written file, so identical configurations
produce byte-identical manifests.  All files are written atomically (temp
file + rename).

Output tree, relative to the run directory::

    manifest.json
    quality.csv                    epochs with zero-variance stocks
    labeling_agreement.csv         pairwise state-labeling agreement
    inputs/                        generated CSVs when run from a synthetic spec
    <kind>/series.csv              epoch_index,date,avg_corr,lambda_min,...
    <kind>/states.csv              epoch_index,date,state
    <kind>/state_matrix_<s>.csv    per-state mean matrix
    <kind>/similarity.csv          strided epoch distance matrix
    <kind>/transition_counts.csv   and transition_probs.csv
    <kind>/equilibrium.csv         stationary distribution
    <kind>/markovianity.txt        Chapman-Kolmogorov gap report
    <kind>/xyz_scatter.csv         per-epoch (x, y, z), two-block kinds only
    random/ensemble_xyz.csv        per-member (x, y, z) over the full horizon
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import tempfile
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass, field, fields
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .coarse import (
    CHOICE1_SECTORS,
    CHOICE2_SECTORS,
    PARTITION_KINDS,
    CGMatrix,
    Partition,
    block_average,
    ecg_elements,
    ecg_partition,
    load_partition_csv,
    random_partition_ensemble,
    sectorial_partition,
)
from .dynamics import (
    ForbiddenTransitionReport,
    TransMatrix,
    equilibrium,
    forbidden_transition_check,
    markovianity_gap,
    transition_matrix,
    tridiagonal_mass,
)
from .errors import DataError, PipelineError, ValidationError
from .ingest import (
    PriceTable,
    SectorMap,
    filter_stocks,
    load_price_table,
    load_sector_map,
    write_price_table,
    write_sector_map,
)
from .returns import (
    EpochDumpWriter,
    ReturnsTable,
    epoch_count,
    iter_rolling_correlations,
    log_returns,
    pearson_matrix,
)
from .states import (
    StateSequence,
    cluster_epochs,
    compare_labelings,
    similarity_matrix,
    state_mean_matrices,
)
from .stats import (
    average_correlation,
    eigenvalues_2x2,
    element_moments,
    jacobi_eigenvalues,
    series_pearson,
)
from .synthetic import Regime, RegimeSpec, generate_prices, write_regime_csv

# Default crash-date annotations (config data only; no semantics attached).
DEFAULT_CRASH_DATES = (
    date(2007, 10, 11),
    date(2008, 9, 16),
    date(2010, 5, 6),
    date(2011, 8, 1),
    date(2015, 8, 18),
    date(2018, 9, 20),
    date(2020, 2, 24),
    date(2022, 1, 3),
)

SIMILARITY_TARGET_EPOCHS = 500


@dataclass
class RunConfig:
    """Fully-resolved run parameters (see README for the JSON schema)."""

    prices: Path | None = None
    sectors: Path | None = None
    synthetic: RegimeSpec | None = None
    out_dir: Path | None = None
    epoch_days: int = 20
    shift: int = 1
    partitions: tuple[str, ...] = PARTITION_KINDS
    k: int = 5
    seed: int = 0
    restarts: int = 100
    ensemble_count: int = 1000
    max_gap: int = 2
    pad_first_day: bool = True
    lag: int = 1
    stride: int | None = None
    similarity_metric: str = "l1"
    standardize: bool = False
    choice1_sectors: tuple[str, ...] = CHOICE1_SECTORS
    choice2_sectors: tuple[str, ...] = CHOICE2_SECTORS
    partition_files: dict[str, Path] = field(default_factory=dict)
    crash_dates: tuple[date, ...] = DEFAULT_CRASH_DATES
    dump_epochs: bool = False

    def __post_init__(self):
        if self.synthetic is None and (self.prices is None or self.sectors is None):
            raise ValidationError("config needs price/sector paths or a synthetic spec")
        if self.synthetic is not None and self.prices is not None:
            raise ValidationError("config may not mix file inputs with a synthetic spec")
        kinds = tuple(k for k in PARTITION_KINDS if k in self.partitions)
        unknown = sorted(set(self.partitions) - set(PARTITION_KINDS))
        if unknown:
            raise ValidationError(f"unknown partition kind(s): {', '.join(unknown)}")
        if not kinds:
            raise ValidationError("at least one partition kind must be selected")
        self.partitions = kinds
        if self.epoch_days < 2:
            raise ValidationError("epoch_days must be >= 2")
        if self.shift < 1:
            raise ValidationError("shift must be >= 1")
        if self.k < 2:
            raise ValidationError("k must be >= 2")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if self.ensemble_count < 0:
            raise ValidationError("ensemble_count must be >= 0")
        if self.lag < 1:
            raise ValidationError("lag must be >= 1")
        if self.stride is not None and self.stride < 1:
            raise ValidationError("stride must be >= 1")
        if self.similarity_metric not in ("l1", "l2"):
            raise ValidationError(f"unknown similarity metric {self.similarity_metric!r}")
        for kind in self.partition_files:
            if kind not in ("choice1", "choice2"):
                raise ValidationError(f"partition file override not supported for {kind!r}")
        self.prices = Path(self.prices) if self.prices is not None else None
        self.sectors = Path(self.sectors) if self.sectors is not None else None
        self.out_dir = Path(self.out_dir) if self.out_dir is not None else None
        self.partition_files = {k: Path(v) for k, v in self.partition_files.items()}
        self.choice1_sectors = tuple(self.choice1_sectors)
        self.choice2_sectors = tuple(self.choice2_sectors)
        self.crash_dates = tuple(self.crash_dates)

    _KNOWN_KEYS = {
        "prices", "sectors", "synthetic", "out_dir", "epoch_days", "shift",
        "partitions", "k", "seed", "restarts", "ensemble_count", "max_gap",
        "pad_first_day", "lag", "stride", "similarity_metric", "standardize",
        "choice1_sectors", "choice2_sectors", "partition_files", "crash_dates",
        "dump_epochs",
    }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = sorted(set(raw) - cls._KNOWN_KEYS)
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
        kwargs = dict(raw)
        if kwargs.get("synthetic") is not None:
            kwargs["synthetic"] = _regime_spec_from_dict(kwargs["synthetic"])
        if kwargs.get("crash_dates") is not None:
            kwargs["crash_dates"] = tuple(
                d if isinstance(d, date) else date.fromisoformat(d)
                for d in kwargs["crash_dates"]
            )
        if kwargs.get("partitions") is not None:
            kwargs["partitions"] = tuple(kwargs["partitions"])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        """Load a JSON config; explicit overrides win over file values."""
        try:
            with Path(path).open() as fh:
                raw = json.load(fh)
        except OSError as e:
            raise DataError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise DataError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ValidationError(f"config {path} must hold a JSON object")
        raw.update(overrides or {})
        return cls.from_dict(raw)

    def echo(self) -> dict:
        """JSON-serializable parameter echo with the output dir normalized."""
        out: dict = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "out_dir":
                out[f.name] = "." if v is not None else None
            elif isinstance(v, Path):
                out[f.name] = str(v)
            elif isinstance(v, RegimeSpec):
                out[f.name] = _regime_spec_to_dict(v)
            elif f.name == "crash_dates":
                out[f.name] = [d.isoformat() for d in v]
            elif f.name == "partition_files":
                out[f.name] = {k: str(p) for k, p in v.items()}
            elif isinstance(v, tuple):
                out[f.name] = list(v)
            else:
                out[f.name] = v
        return out


def _regime_spec_from_dict(raw: dict | RegimeSpec) -> RegimeSpec:
    if isinstance(raw, RegimeSpec):
        return raw
    known = {"n_stocks", "n_sectors", "day_count", "regimes", "seed", "start"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValidationError(f"unknown synthetic key(s): {', '.join(unknown)}")
    regimes = []
    for r in raw.get("regimes", ()):
        if isinstance(r, dict):
            regimes.append(
                Regime(
                    duration_days=r["duration_days"],
                    market_beta=r["market_beta"],
                    sector_beta=r["sector_beta"],
                    idiosyncratic_sigma=r["idiosyncratic_sigma"],
                )
            )
        else:
            regimes.append(Regime(*r))
    kwargs = dict(raw, regimes=tuple(regimes))
    if "start" in kwargs and not isinstance(kwargs["start"], date):
        kwargs["start"] = date.fromisoformat(kwargs["start"])
    return RegimeSpec(**kwargs)


def _regime_spec_to_dict(spec: RegimeSpec) -> dict:
    return {
        "n_stocks": spec.n_stocks,
        "n_sectors": spec.n_sectors,
        "day_count": spec.day_count,
        "seed": spec.seed,
        "start": spec.start.isoformat(),
        "regimes": [
            {
                "duration_days": r.duration_days,
                "market_beta": r.market_beta,
                "sector_beta": r.sector_beta,
                "idiosyncratic_sigma": r.idiosyncratic_sigma,
            }
            for r in spec.regimes
        ],
    }


@contextmanager
def _stage(name: str):
    """Tag pipeline errors with the stage they came from."""
    try:
        yield
    except PipelineError as e:
        raise type(e)(f"stage {name}: {e}") from e


def _fmt(v: float) -> str:
    return repr(float(v))


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _OutputTree:
    """Writes run outputs atomically and records their checksums."""

    def __init__(self, root: Path):
        self.root = root
        self.checksums: dict[str, str] = {}

    def write_text(self, relpath: str, text: str) -> None:
        payload = text.encode("utf-8")
        atomic_write_bytes(self.root / relpath, payload)
        self.checksums[relpath] = hashlib.sha256(payload).hexdigest()

    def write_rows(self, relpath: str, rows: Sequence[Sequence], comments: Sequence[str] = ()) -> None:
        buf = io.StringIO()
        for line in comments:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows(rows)
        self.write_text(relpath, buf.getvalue())

    def add_file(self, relpath: str) -> None:
        payload = (self.root / relpath).read_bytes()
        self.checksums[relpath] = hashlib.sha256(payload).hexdigest()


@dataclass
class KindResult:
    """Everything the pipeline derived for one partition kind."""

    kind: str
    partition: Partition
    matrices: list[CGMatrix]
    avg_corr: np.ndarray
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    moments: np.ndarray  # columns: variance, skewness, kurtosis
    states: StateSequence
    similarity_stride: int
    transition: TransMatrix
    equilibrium: np.ndarray
    tridiagonal_mass: float
    markov_gap: float
    forbidden: ForbiddenTransitionReport


def _build_partitions(config: RunConfig, sectors: SectorMap, split_seed: int) -> dict[str, Partition]:
    parts: dict[str, Partition] = {}
    for kind in config.partitions:
        if kind == "sectorial":
            parts[kind] = sectorial_partition(sectors)
        elif kind in ("choice1", "choice2"):
            if kind in config.partition_files:
                parts[kind] = load_partition_csv(
                    config.partition_files[kind], sectors.tickers, kind
                )
            else:
                choice = 1 if kind == "choice1" else 2
                block_a = (
                    config.choice1_sectors if kind == "choice1" else config.choice2_sectors
                )
                parts[kind] = ecg_partition(choice, sectors, block_a_sectors=block_a)
        else:
            parts[kind] = ecg_partition(3, sectors, seed=split_seed)
    return parts


def _epoch_lambdas(mats: list[CGMatrix]) -> tuple[np.ndarray, np.ndarray]:
    if mats[0].n_blocks == 2:
        lo = np.empty(len(mats))
        hi = np.empty(len(mats))
        for i, m in enumerate(mats):
            lo[i], hi[i] = eigenvalues_2x2(*ecg_elements(m))
        return lo, hi
    lo = np.empty(len(mats))
    hi = np.empty(len(mats))
    for i, m in enumerate(mats):
        eig = jacobi_eigenvalues(m.values)
        lo[i], hi[i] = eig[0], eig[-1]
    return lo, hi


def _analyze_kind(
    kind: str,
    partition: Partition,
    mats: list[CGMatrix],
    config: RunConfig,
) -> KindResult:
    avg = np.asarray([average_correlation(m) for m in mats])
    lmin, lmax = _epoch_lambdas(mats)
    moments = np.asarray([element_moments(m)[:3] for m in mats])
    states = cluster_epochs(
        mats, config.k, seed=config.seed, restarts=config.restarts,
        standardize=config.standardize,
    )
    stride = config.stride or max(1, -(-len(mats) // SIMILARITY_TARGET_EPOCHS))
    trans = transition_matrix(states, lag=config.lag)
    return KindResult(
        kind=kind,
        partition=partition,
        matrices=mats,
        avg_corr=avg,
        lambda_min=lmin,
        lambda_max=lmax,
        moments=moments,
        states=states,
        similarity_stride=stride,
        transition=trans,
        equilibrium=equilibrium(trans),
        tridiagonal_mass=tridiagonal_mass(trans),
        markov_gap=markovianity_gap(states, lag=config.lag),
        forbidden=forbidden_transition_check(trans, states),
    )


def _write_kind_outputs(
    tree: _OutputTree,
    res: KindResult,
    dates: list[date],
    config: RunConfig,
) -> None:
    kind = res.kind
    e_idx = np.arange(len(res.matrices))

    rows = [["epoch_index", "date", "avg_corr", "lambda_min", "lambda_max",
             "variance", "skewness", "kurtosis"]]
    for i in range(len(res.matrices)):
        rows.append([
            int(e_idx[i]), dates[i].isoformat(), _fmt(res.avg_corr[i]),
            _fmt(res.lambda_min[i]), _fmt(res.lambda_max[i]),
            _fmt(res.moments[i, 0]), _fmt(res.moments[i, 1]), _fmt(res.moments[i, 2]),
        ])
    tree.write_rows(f"{kind}/series.csv", rows)

    rows = [["epoch_index", "date", "state"]]
    for i in range(len(res.matrices)):
        rows.append([int(e_idx[i]), dates[i].isoformat(), int(res.states.labels[i])])
    tree.write_rows(f"{kind}/states.csv", rows)

    for sm in state_mean_matrices(res.states, res.matrices):
        labels = res.partition.labels
        rows = [["block", *labels]]
        for a, lab in enumerate(labels):
            rows.append([lab, *(_fmt(v) for v in sm.values[a])])
        tree.write_rows(
            f"{kind}/state_matrix_{sm.state}.csv",
            rows,
            comments=[
                f"state={sm.state} mean_corr={_fmt(sm.mean_corr)} "
                f"sigma_corr={_fmt(sm.sigma_corr)} n_members={sm.n_members}"
            ],
        )

    sim = similarity_matrix(res.matrices, stride=res.similarity_stride,
                            metric=config.similarity_metric)
    rows = [["epoch_index", *map(int, sim.epoch_index)]]
    for i, ei in enumerate(sim.epoch_index):
        rows.append([int(ei), *(_fmt(v) for v in sim.values[i])])
    tree.write_rows(
        f"{kind}/similarity.csv", rows,
        comments=[f"stride={sim.stride} metric={config.similarity_metric}"],
    )

    state_hdr = ["state", *(str(s) for s in range(1, res.states.k + 1))]
    rows = [state_hdr]
    for i in range(res.states.k):
        rows.append([i + 1, *(int(c) for c in res.transition.counts[i])])
    tree.write_rows(f"{kind}/transition_counts.csv", rows)
    rows = [state_hdr]
    for i in range(res.states.k):
        rows.append([i + 1, *(_fmt(v) for v in res.transition.values[i])])
    tree.write_rows(f"{kind}/transition_probs.csv", rows)

    rows = [["state", "probability"]]
    for i, p in enumerate(res.equilibrium):
        rows.append([i + 1, _fmt(p)])
    tree.write_rows(f"{kind}/equilibrium.csv", rows)

    forb = res.forbidden
    forb_line = (
        "skipped (k != 5)"
        if forb.skipped
        else ("passed" if forb.passed else f"FAILED lower_to_top={forb.lower_to_top} "
              f"from_fourth={forb.from_fourth} epochs={list(forb.offending_epochs)}")
    )
    tree.write_text(
        f"{kind}/markovianity.txt",
        "\n".join([
            f"partition_kind: {kind}",
            f"lag_epochs: {config.lag}",
            f"chapman_kolmogorov_gap: {_fmt(res.markov_gap)}",
            "note: gap compares T(2 lag) with T(lag)^2 over occupied rows;",
            "  a small gap is necessary but not sufficient for Markovianity.",
            "note: with overlapping epochs consecutive states are dependent",
            "  by construction; use lag equal to the epoch length for",
            "  non-overlapping dynamics.",
            f"tridiagonal_mass: {_fmt(res.tridiagonal_mass)}",
            f"top_state_entry_check: {forb_line}",
            "",
        ]),
    )

    if res.partition.n_blocks == 2:
        rows = [["epoch_index", "date", "state", "x", "y", "z"]]
        for i, m in enumerate(res.matrices):
            x, y, z = ecg_elements(m)
            rows.append([
                int(e_idx[i]), dates[i].isoformat(), int(res.states.labels[i]),
                _fmt(x), _fmt(y), _fmt(z),
            ])
        tree.write_rows(f"{kind}/xyz_scatter.csv", rows)


def run_pipeline(config: RunConfig) -> dict:
    """Execute the full pipeline and return the manifest dictionary."""
    if config.out_dir is None:
        raise ValidationError("config has no output directory")
    out_root = Path(config.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    tree = _OutputTree(out_root)

    root_seq = np.random.SeedSequence(config.seed)
    split_seed, ensemble_seed = (int(s) for s in root_seq.generate_state(2))

    with _stage("ingest"):
        if config.synthetic is not None:
            ds = generate_prices(config.synthetic)
            raw_table = ds.table
            _write_synthetic_inputs(tree, ds)
        else:
            raw_table = load_price_table(config.prices)
        table = filter_stocks(raw_table, config.max_gap)
        if table.n_stocks == 0:
            raise ValidationError("no stocks survive the gap filter")
        if config.synthetic is not None:
            sectors = SectorMap(
                tickers=table.tickers,
                codes=tuple(
                    ds.sectors.codes[ds.sectors.tickers.index(t)] for t in table.tickers
                ),
            )
        else:
            sectors = load_sector_map(config.sectors, table)

    with _stage("returns"):
        returns = log_returns(table, pad_first_day=config.pad_first_day)

    with _stage("partitions"):
        partitions = _build_partitions(config, sectors, split_seed)

    with _stage("correlations"):
        n_epochs = epoch_count(returns.n_days, config.epoch_days, config.shift)
        cg: dict[str, list[CGMatrix]] = {kind: [] for kind in config.partitions}
        dates: list[date] = []
        quality_rows: list[list] = []
        dump_cm = (
            EpochDumpWriter(out_root / "epoch_matrices.bin", table.n_stocks, n_epochs)
            if config.dump_epochs
            else nullcontext(None)
        )
        with dump_cm as dump:
            for c in iter_rolling_correlations(returns, config.epoch_days, config.shift):
                try:
                    for kind in config.partitions:
                        cg[kind].append(block_average(c, partitions[kind]))
                except PipelineError as e:
                    raise type(e)(f"epoch {c.epoch_index} ({c.epoch_end}): {e}") from e
                dates.append(c.epoch_end)
                if c.degenerate:
                    quality_rows.append([
                        c.epoch_index,
                        c.epoch_end.isoformat(),
                        len(c.degenerate),
                        ";".join(table.tickers[i] for i in c.degenerate),
                    ])
                if dump is not None:
                    dump.write(c)
        if config.dump_epochs:
            tree.add_file("epoch_matrices.bin")
        tree.write_rows(
            "quality.csv",
            [["epoch_index", "date", "n_degenerate", "tickers"], *quality_rows],
        )

    results: dict[str, KindResult] = {}
    for kind in config.partitions:
        with _stage(f"analysis[{kind}]"):
            results[kind] = _analyze_kind(kind, partitions[kind], cg[kind], config)
            _write_kind_outputs(tree, results[kind], dates, config)

    with _stage("agreement"):
        rows = [["kind_a", "kind_b", "pearson", "adjusted_rand"]]
        kinds = list(config.partitions)
        for i, ka in enumerate(kinds):
            for kb in kinds[i + 1 :]:
                rep = compare_labelings(results[ka].states, results[kb].states)
                rows.append([ka, kb, _fmt(rep.pearson), _fmt(rep.adjusted_rand)])
        tree.write_rows("labeling_agreement.csv", rows)

    if "random" in config.partitions and config.ensemble_count > 0:
        with _stage("ensemble"):
            _write_ensemble(tree, returns, config, ensemble_seed)

    manifest = _build_manifest(config, table, raw_table, returns, dates, results, tree)
    payload = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(out_root / "manifest.json", payload.encode("utf-8"))
    return manifest


def _write_synthetic_inputs(tree: _OutputTree, ds) -> None:
    inputs = tree.root / "inputs"
    inputs.mkdir(parents=True, exist_ok=True)
    write_price_table(ds.table, inputs / "prices.csv")
    write_sector_map(ds.sectors, inputs / "sectors.csv")
    write_regime_csv(ds.table.days, ds.regime_ids, inputs / "regimes.csv")
    for name in ("prices.csv", "sectors.csv", "regimes.csv"):
        tree.add_file(f"inputs/{name}")


def _write_ensemble(
    tree: _OutputTree, returns: ReturnsTable, config: RunConfig, seed: int
) -> None:
    full = pearson_matrix(returns, (0, returns.n_days))
    members = random_partition_ensemble(
        len(returns.tickers), count=config.ensemble_count, seed=seed
    )
    rows = [["member", "x", "y", "z", "avg_corr", "lambda_min", "lambda_max"]]
    for m, part in enumerate(members):
        cgm = block_average(full, part)
        x, y, z = ecg_elements(cgm)
        lo, hi = eigenvalues_2x2(x, y, z)
        rows.append([m, _fmt(x), _fmt(y), _fmt(z),
                     _fmt(average_correlation(cgm)), _fmt(lo), _fmt(hi)])
    tree.write_rows("random/ensemble_xyz.csv", rows)


def _build_manifest(
    config: RunConfig,
    table: PriceTable,
    raw_table: PriceTable,
    returns: ReturnsTable,
    dates: list[date],
    results: dict[str, KindResult],
    tree: _OutputTree,
) -> dict:
    kind_summary = {}
    for kind, res in results.items():
        couplings = {}
        if len(res.avg_corr) >= 2:
            couplings = {
                "avg_corr_vs_lambda_max": series_pearson(res.avg_corr, res.lambda_max),
                "avg_corr_vs_lambda_min": series_pearson(res.avg_corr, res.lambda_min),
                "lambda_max_vs_lambda_min": series_pearson(res.lambda_max, res.lambda_min),
            }
        kind_summary[kind] = {
            "block_sizes": res.partition.sizes().tolist(),
            "block_labels": list(res.partition.labels),
            "state_avg_corr": [float(v) for v in res.states.state_avg_corr],
            "state_sigma": [float(v) for v in res.states.state_sigma],
            "inertia": float(res.states.inertia),
            "equilibrium": [float(v) for v in res.equilibrium],
            "tridiagonal_mass": float(res.tridiagonal_mass),
            "markovianity_gap": float(res.markov_gap),
            "top_state_entry_ok": res.forbidden.passed,
            "similarity_stride": res.similarity_stride,
            "series_pearson": couplings,
        }
    return {
        "tool": {"name": "corrstates", "version": __version__},
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "config": config.echo(),
        "seeds": {
            "master": config.seed,
            "kmeans": config.seed,
            "derived": "random split and ensemble streams are drawn from the master seed sequence",
        },
        "conventions": {
            "moments": "population (1/n) normalization throughout",
            "kurtosis": "excess kurtosis (normal distribution = 0)",
            "window": (
                "epochs slide over the return-day grid; "
                "count = floor((return_days - epoch_days) / shift) + 1"
            ),
            "pad_first_day": (
                "first price day kept with a zero return, so a T-day price grid "
                "yields T return days"
                if config.pad_first_day
                else "first price day dropped; a T-day price grid yields T-1 return days"
            ),
            "epoch_date": "each epoch is reported under its last (most recent) day",
            "state_order": "state labels 1..k ascend with average correlation",
            "similarity": f"{config.similarity_metric} mean over distinct matrix entries",
            "choice2_block": list(config.choice2_sectors),
        },
        "data": {
            "stocks_loaded": raw_table.n_stocks,
            "stocks_after_filter": table.n_stocks,
            "price_days": table.n_days,
            "return_days": returns.n_days,
            "epochs": len(dates),
            "first_epoch_end": dates[0].isoformat(),
            "last_epoch_end": dates[-1].isoformat(),
        },
        "partitions": kind_summary,
        "outputs": dict(sorted(tree.checksums.items())),
    }


def write_report(run_dir: str | Path) -> Path:
    """Render a plain-text summary of a completed run into ``report.txt``."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"no manifest.json under {run_dir}; run the pipeline first")
    manifest = json.loads(manifest_path.read_text())
    conv = manifest["conventions"]
    data = manifest["data"]
    lines = [
        f"corrstates {manifest['tool']['version']} run report",
        "=" * 50,
        "",
        "Conventions",
        f"  moments:        {conv['moments']}",
        f"  kurtosis:       {conv['kurtosis']}",
        f"  window:         {conv['window']}",
        f"  first day:      {conv['pad_first_day']}",
        f"  state order:    {conv['state_order']}",
        f"  similarity:     {conv['similarity']}",
        "",
        "Data",
        f"  stocks:         {data['stocks_loaded']} loaded, "
        f"{data['stocks_after_filter']} after gap filter",
        f"  price days:     {data['price_days']}",
        f"  return days:    {data['return_days']}",
        f"  epochs:         {data['epochs']} "
        f"({data['first_epoch_end']} .. {data['last_epoch_end']})",
        "",
    ]
    for kind, s in manifest["partitions"].items():
        lines += [
            f"Partition: {kind} (blocks {s['block_sizes']})",
            "  state avg corr:   "
            + ", ".join(f"{v:.4f}" for v in s["state_avg_corr"]),
            "  equilibrium:      "
            + ", ".join(f"{v:.4f}" for v in s["equilibrium"]),
            f"  tridiagonal mass: {s['tridiagonal_mass']:.4f}",
            f"  markovianity gap: {s['markovianity_gap']:.4f}",
            f"  top-state entry:  "
            + {True: "only from the state below (passed)", False: "VIOLATED",
               None: "not checked (k != 5)"}[s["top_state_entry_ok"]],
        ]
        if s["series_pearson"]:
            c = s["series_pearson"]
            lines.append(
                "  couplings:        "
                f"corr(avg,lmax)={c['avg_corr_vs_lambda_max']:.4f}, "
                f"corr(avg,lmin)={c['avg_corr_vs_lambda_min']:.4f}, "
                f"corr(lmax,lmin)={c['lambda_max_vs_lambda_min']:.4f}"
            )
        lines.append("")
    agreement = run_dir / "labeling_agreement.csv"
    if agreement.exists():
        lines.append("Labeling agreement (pairs of partition kinds)")
        with agreement.open() as fh:
            for row in list(csv.reader(fh))[1:]:
                if len(row) == 4:
                    lines.append(
                        f"  {row[0]} vs {row[1]}: pearson={float(row[2]):.4f}, "
                        f"ARI={float(row[3]):.4f}"
                    )
        lines.append("")
    text = "\n".join(lines)
    path = run_dir / "report.txt"
    atomic_write_bytes(path, text.encode("utf-8"))
    return path
