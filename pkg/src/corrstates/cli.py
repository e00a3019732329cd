"""Command-line interface.

Verbs: ``ingest`` (validate inputs), ``synth`` (generate a synthetic
dataset), ``run`` (execute the pipeline), ``figures`` (render SVGs for a
completed run), ``report`` (plain-text summary of a completed run).

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical failure.
Flags mirror the run-config fields; when both a config file and flags are
given, explicit flags win.
"""

from __future__ import annotations

import sys
from datetime import date
from pathlib import Path

import click

from .errors import DataError, NumericalError, PipelineError, ValidationError
from .ingest import (
    filter_stocks,
    gap_run_lengths,
    load_price_table,
    load_sector_map,
    write_price_table,
    write_sector_map,
)
from .pipeline import RunConfig, run_pipeline, write_report
from .synthetic import (
    Regime,
    RegimeSpec,
    generate_prices,
    inject_gaps,
    write_regime_csv,
)

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


@click.group()
def cli():
    """Coarse-grained correlation matrices and market states."""


@cli.command()
@click.option("--prices", required=True, type=click.Path(path_type=Path))
@click.option("--sectors", type=click.Path(path_type=Path))
@click.option("--max-gap", default=2, show_default=True, help="Longest tolerated quote gap.")
def ingest(prices: Path, sectors: Path | None, max_gap: int):
    """Load and validate a price table, report the gap filter outcome."""
    table = load_price_table(prices)
    kept = filter_stocks(table, max_gap)
    runs = gap_run_lengths(table)
    click.echo(f"loaded {table.n_stocks} tickers x {table.n_days} days")
    click.echo(f"gap filter (max {max_gap} consecutive missing days): "
               f"{kept.n_stocks} tickers survive, {table.n_stocks - kept.n_stocks} removed")
    dropped = [t for t, r in zip(table.tickers, runs) if r > max_gap]
    if dropped:
        click.echo("removed: " + ", ".join(dropped[:20]) + (" ..." if len(dropped) > 20 else ""))
    if sectors is not None:
        smap = load_sector_map(sectors, kept)
        counts = ", ".join(f"{c}={n}" for c, n in smap.counts().items() if n)
        click.echo(f"sector coverage ok: {counts}")


def _parse_regimes(text: str) -> tuple[Regime, ...]:
    regimes = []
    for part in text.split(","):
        fields = part.strip().split(":")
        if len(fields) != 4:
            raise ValidationError(
                f"regime {part!r} must be duration:market_beta:sector_beta:sigma"
            )
        regimes.append(
            Regime(int(fields[0]), float(fields[1]), float(fields[2]), float(fields[3]))
        )
    return tuple(regimes)


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--stocks", default=40, show_default=True)
@click.option("--sector-count", default=4, show_default=True)
@click.option("--days", default=1500, show_default=True)
@click.option(
    "--regimes",
    default="300:0.1:0.3:1.0,300:0.3:0.3:1.0,300:0.9:0.3:1.0,300:2.7:0.3:1.0,300:8.1:0.3:1.0",
    show_default=True,
    help="Comma-separated duration:market_beta:sector_beta:sigma blocks.",
)
@click.option("--seed", default=0, show_default=True)
@click.option("--start", default="2018-01-02", show_default=True)
@click.option("--gap-rate", default=0.0, show_default=True, help="Probability of starting a quote gap per day.")
@click.option("--max-run", default=2, show_default=True, help="Longest injected gap run.")
def synth(out_dir: Path, stocks: int, sector_count: int, days: int, regimes: str,
          seed: int, start: str, gap_rate: float, max_run: int):
    """Generate a synthetic dataset (prices, sectors, ground-truth regimes)."""
    regime_list = _parse_regimes(regimes)
    if sum(r.duration_days for r in regime_list) != days:
        raise ValidationError("regime durations must sum to --days")
    spec = RegimeSpec(
        n_stocks=stocks, n_sectors=sector_count, day_count=days,
        regimes=regime_list, seed=seed, start=date.fromisoformat(start),
    )
    ds = generate_prices(spec)
    table = ds.table
    if gap_rate > 0:
        table = inject_gaps(table, gap_rate, max_run, seed=seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_price_table(table, out_dir / "prices.csv")
    write_sector_map(ds.sectors, out_dir / "sectors.csv")
    write_regime_csv(table.days, ds.regime_ids, out_dir / "regimes.csv")
    click.echo(f"wrote prices.csv, sectors.csv, regimes.csv under {out_dir}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              help="JSON config file; explicit flags override its values.")
@click.option("--prices", type=click.Path(path_type=Path))
@click.option("--sectors", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path))
@click.option("--epoch-days", type=int)
@click.option("--shift", type=int)
@click.option("--partitions", type=str,
              help="Comma-separated subset of sectorial,choice1,choice2,random.")
@click.option("--k", type=int)
@click.option("--seed", type=int)
@click.option("--restarts", type=int)
@click.option("--ensemble-count", type=int)
@click.option("--max-gap", type=int)
@click.option("--pad-first-day/--no-pad-first-day", default=None)
@click.option("--lag", type=int)
@click.option("--stride", type=int)
@click.option("--similarity-metric", type=click.Choice(["l1", "l2"]))
@click.option("--standardize/--no-standardize", default=None)
@click.option("--choice1-sectors", type=str, help="Comma-separated sector codes for block A.")
@click.option("--choice2-sectors", type=str, help="Comma-separated sector codes for block A.")
@click.option("--choice1-partition", type=click.Path(path_type=Path),
              help="ticker,block CSV overriding the choice-1 membership.")
@click.option("--choice2-partition", type=click.Path(path_type=Path),
              help="ticker,block CSV overriding the choice-2 membership.")
@click.option("--crash-dates", type=str, help="Comma-separated ISO dates; empty string for none.")
@click.option("--dump-epochs", is_flag=True, default=None,
              help="Also write the packed epoch-matrix binary.")
def run(config_path: Path | None, **flags):
    """Run the full pipeline and write the output tree plus manifest."""
    overrides: dict = {}
    for key, value in flags.items():
        if value is None:
            continue
        if key == "partitions":
            overrides[key] = [p.strip() for p in value.split(",") if p.strip()]
        elif key in ("choice1_sectors", "choice2_sectors"):
            overrides[key] = [c.strip() for c in value.split(",") if c.strip()]
        elif key == "crash_dates":
            overrides[key] = [d.strip() for d in value.split(",") if d.strip()]
        elif key in ("choice1_partition", "choice2_partition"):
            overrides.setdefault("partition_files", {})[key.split("_")[0]] = str(value)
        elif key in ("prices", "sectors", "out_dir"):
            overrides[key] = str(value)
        else:
            overrides[key] = value
    if config_path is not None:
        config = RunConfig.from_json_file(config_path, overrides)
    else:
        config = RunConfig.from_dict(overrides)
    manifest = run_pipeline(config)
    click.echo(f"run complete: {manifest['data']['epochs']} epochs, "
               f"{len(manifest['outputs'])} output files under {config.out_dir}")


@cli.command()
@click.option("--run", "run_dir", required=True, type=click.Path(path_type=Path))
def figures(run_dir: Path):
    """Render SVG figures for a completed run directory."""
    from .figures import emit_figures

    written = emit_figures(run_dir)
    click.echo(f"wrote {len(written)} figure/sidecar files under {run_dir}")


@cli.command()
@click.option("--run", "run_dir", required=True, type=click.Path(path_type=Path))
def report(run_dir: Path):
    """Write and print report.txt for a completed run directory."""
    path = write_report(run_dir)
    click.echo(path.read_text())


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return EXIT_VALIDATION
    except ValidationError as e:
        click.echo(f"validation error: {e}", err=True)
        return EXIT_VALIDATION
    except NumericalError as e:
        click.echo(f"numerical failure: {e}", err=True)
        return EXIT_NUMERICAL
    except (DataError, OSError) as e:
        click.echo(f"i/o error: {e}", err=True)
        return EXIT_IO
    except PipelineError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
