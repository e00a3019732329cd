"""Figure rendering for completed runs.

All figures are written as SVG next to the delimited output they visualize,
and every figure has a sidecar CSV holding exactly the plotted values (for
``similarity``, ``transition_probs`` and ``xyz_scatter`` the pipeline CSV of
the same stem is that sidecar).  Rendering is deterministic: the SVG hash
salt is pinned and creation-date metadata is stripped.
"""

from __future__ import annotations

import csv
import io
import json
from datetime import date
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.figure import Figure

from .errors import DataError, ValidationError
from .pipeline import atomic_write_bytes

_SVG_RC = {
    "svg.hashsalt": "corrstates",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.titlesize": 10,
    "figure.dpi": 100,
}

_STATE_CMAP = plt.get_cmap("viridis")


def _state_color(state: int, k: int):
    return _STATE_CMAP((state - 1) / max(k - 1, 1))


def save_figure(fig: Figure, path: str | Path) -> Path:
    """Write a figure as deterministic SVG and release it."""
    path = Path(path)
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def state_timeline_figure(
    dates: list[date],
    states: np.ndarray,
    avg_corr: np.ndarray,
    lambda_min: np.ndarray,
    lambda_max: np.ndarray,
    k: int,
    crash_dates: tuple[date, ...] = (),
    title: str = "",
) -> Figure:
    """Dot-row state evolution stacked over the derived series.

    Panels: (a) per-epoch state, (b) average correlation, (c) largest
    eigenvalue, (d) smallest eigenvalue, with dashed verticals at the crash
    annotation dates.
    """
    fig, axes = plt.subplots(4, 1, figsize=(10, 7), sharex=True)
    ax_state, ax_avg, ax_lmax, ax_lmin = axes
    for s in range(1, k + 1):
        sel = states == s
        ax_state.plot(
            np.asarray(dates, dtype=object)[sel], states[sel],
            linestyle="none", marker=".", markersize=2.5,
            color=_state_color(s, k), label=f"state {s}",
        )
    ax_state.set_yticks(range(1, k + 1))
    ax_state.set_ylabel("state")
    ax_state.set_ylim(0.5, k + 0.5)
    if title:
        ax_state.set_title(title)

    ax_avg.plot(dates, avg_corr, lw=0.6, color="tab:blue")
    ax_avg.set_ylabel("avg corr")
    ax_lmax.plot(dates, lambda_max, lw=0.6, color="tab:red")
    ax_lmax.set_ylabel(r"$\lambda_{max}$")
    ax_lmin.plot(dates, lambda_min, lw=0.6, color="tab:green")
    ax_lmin.set_ylabel(r"$\lambda_{min}$")
    ax_lmin.set_xlabel("epoch end date")

    for ax in axes:
        for d in crash_dates:
            ax.axvline(d, linestyle="--", color="0.4", lw=0.7)
        ax.set_xlim(dates[0], dates[-1])
    fig.tight_layout()
    return fig


def state_matrices_figure(
    matrices: list[tuple[int, np.ndarray, float, float]],
    block_labels: tuple[str, ...],
    kind: str,
) -> Figure:
    """One heatmap per state mean matrix, annotated with mean and spread."""
    k = len(matrices)
    fig, axes = plt.subplots(1, k, figsize=(2.2 * k + 1, 2.8))
    if k == 1:
        axes = [axes]
    im = None
    for ax, (state, values, mean_corr, sigma_corr) in zip(axes, matrices):
        im = ax.imshow(values, vmin=-1, vmax=1, cmap="RdBu_r")
        ax.set_title(f"state {state}\n" rf"$\bar c$={mean_corr:.3f}, $\sigma_c$={sigma_corr:.3f}")
        b = values.shape[0]
        if b <= 10:
            ax.set_xticks(range(b), block_labels, rotation=90, fontsize=6)
            ax.set_yticks(range(b), block_labels, fontsize=6)
    fig.suptitle(kind)
    fig.colorbar(im, ax=axes, shrink=0.8)
    return fig


def heatmap_figure(
    values: np.ndarray,
    title: str,
    cmap: str = "viridis",
    vmin: float | None = None,
    vmax: float | None = None,
    annotate: bool = False,
    tick_labels: tuple[str, ...] | None = None,
) -> Figure:
    """Plain dense heatmap (similarity and transition matrices)."""
    fig, ax = plt.subplots(figsize=(4.4, 4))
    im = ax.imshow(values, cmap=cmap, vmin=vmin, vmax=vmax)
    ax.set_title(title)
    if tick_labels is not None:
        ax.set_xticks(range(len(tick_labels)), tick_labels)
        ax.set_yticks(range(len(tick_labels)), tick_labels)
    if annotate:
        for i in range(values.shape[0]):
            for j in range(values.shape[1]):
                ax.text(
                    j, i, f"{values[i, j]:.3f}", ha="center", va="center",
                    fontsize=7,
                    color="white" if values[i, j] > 0.6 * np.max(values) else "black",
                )
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    return fig


def xyz_scatter_figure(
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    states: np.ndarray,
    k: int,
    kind: str,
) -> Figure:
    """Pairwise (x, y), (x, z), (y, z) scatters colored by market state."""
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.4))
    panels = (("x", x, "y", y), ("x", x, "z", z), ("y", y, "z", z))
    for ax, (xl, xv, yl, yv) in zip(axes, panels):
        for s in range(1, k + 1):
            sel = states == s
            ax.plot(
                xv[sel], yv[sel], linestyle="none", marker=".", markersize=2,
                color=_state_color(s, k), label=f"state {s}",
            )
        ax.set_xlabel(xl)
        ax.set_ylabel(yl)
    axes[-1].legend(loc="best", fontsize=6, markerscale=3)
    fig.suptitle(f"{kind}: matrix elements by state")
    fig.tight_layout()
    return fig


def _read_rows(path: Path) -> list[list[str]]:
    if not path.exists():
        raise DataError(f"missing pipeline output: {path}")
    with path.open(newline="") as fh:
        return [row for row in csv.reader(fh) if row and not row[0].startswith("#")]


def _read_columns(path: Path) -> dict[str, list[str]]:
    rows = _read_rows(path)
    header, body = rows[0], rows[1:]
    return {name: [r[i] for r in body] for i, name in enumerate(header)}


def emit_figures(run_dir: str | Path) -> list[Path]:
    """Render every figure for a completed run directory.

    Reads ``manifest.json`` for the configuration echo and the per-kind CSVs
    for the plotted values; returns the list of written files.
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"no manifest.json under {run_dir}; run the pipeline first")
    manifest = json.loads(manifest_path.read_text())
    crash_dates = tuple(
        date.fromisoformat(d) for d in manifest["config"]["crash_dates"]
    )
    k = int(manifest["config"]["k"])
    written: list[Path] = []

    for kind, summary in manifest["partitions"].items():
        kind_dir = run_dir / kind
        series = _read_columns(kind_dir / "series.csv")
        states_rows = _read_columns(kind_dir / "states.csv")
        dates = [date.fromisoformat(d) for d in series["date"]]
        states = np.array([int(s) for s in states_rows["state"]])
        avg = np.array([float(v) for v in series["avg_corr"]])
        lmin = np.array([float(v) for v in series["lambda_min"]])
        lmax = np.array([float(v) for v in series["lambda_max"]])

        fig = state_timeline_figure(
            dates, states, avg, lmin, lmax, k,
            crash_dates=crash_dates, title=f"{kind}: market state evolution",
        )
        written.append(save_figure(fig, kind_dir / "states_timeline.svg"))
        sidecar = [["epoch_index", "date", "state", "avg_corr", "lambda_min", "lambda_max"]]
        for i in range(len(dates)):
            sidecar.append([
                series["epoch_index"][i], series["date"][i], states[i],
                series["avg_corr"][i], series["lambda_min"][i], series["lambda_max"][i],
            ])
        _write_csv(kind_dir / "states_timeline.csv", sidecar)
        written.append(kind_dir / "states_timeline.csv")

        block_labels = tuple(summary["block_labels"])
        state_mats = []
        mat_sidecar = [["state", "row_block", "col_block", "value", "mean_corr", "sigma_corr"]]
        for s in range(1, k + 1):
            rows = _read_rows(kind_dir / f"state_matrix_{s}.csv")
            values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
            comment = (kind_dir / f"state_matrix_{s}.csv").read_text().splitlines()[0]
            meta = dict(
                item.split("=") for item in comment.lstrip("# ").split() if "=" in item
            )
            mean_c, sigma_c = float(meta["mean_corr"]), float(meta["sigma_corr"])
            state_mats.append((s, values, mean_c, sigma_c))
            for a, ra in enumerate(block_labels):
                for b, rb in enumerate(block_labels):
                    mat_sidecar.append([s, ra, rb, repr(values[a, b]), repr(mean_c), repr(sigma_c)])
        fig = state_matrices_figure(state_mats, block_labels, kind)
        written.append(save_figure(fig, kind_dir / "state_matrices.svg"))
        _write_csv(kind_dir / "state_matrices.csv", mat_sidecar)
        written.append(kind_dir / "state_matrices.csv")

        sim_rows = _read_rows(kind_dir / "similarity.csv")
        sim = np.array([[float(v) for v in r[1:]] for r in sim_rows[1:]])
        fig = heatmap_figure(sim, f"{kind}: epoch similarity", cmap="viridis")
        written.append(save_figure(fig, kind_dir / "similarity.svg"))

        tr_rows = _read_rows(kind_dir / "transition_probs.csv")
        tr = np.array([[float(v) for v in r[1:]] for r in tr_rows[1:]])
        fig = heatmap_figure(
            tr, f"{kind}: transition matrix", cmap="Blues", vmin=0, vmax=1,
            annotate=True, tick_labels=tuple(str(s) for s in range(1, k + 1)),
        )
        written.append(save_figure(fig, kind_dir / "transition_probs.svg"))

        xyz_path = kind_dir / "xyz_scatter.csv"
        if xyz_path.exists():
            xyz = _read_columns(xyz_path)
            fig = xyz_scatter_figure(
                np.array([float(v) for v in xyz["x"]]),
                np.array([float(v) for v in xyz["y"]]),
                np.array([float(v) for v in xyz["z"]]),
                np.array([int(v) for v in xyz["state"]]),
                k,
                kind,
            )
            written.append(save_figure(fig, kind_dir / "xyz_scatter.svg"))
    return written


def _write_csv(path: Path, rows: list[list]) -> None:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))
