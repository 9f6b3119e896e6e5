"""Figures for reports: trace/residual overlays, training curves, metric bars.

Every figure writer takes the same series it plots, so the CLI can dump
those series as CSV next to the image.
"""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import FormatError  # noqa: E402

TRACE_COLUMNS = ("sample", "true", "estimate", "residual")
HISTORY_COLUMNS = ("epoch", "loss", "step_size")
REPORT_COLUMNS = ("record", "mse", "correlation", "quality_db")


def trace_overlay(sample, true, estimate, path, title=None):
    """Two stacked panels: estimate over truth, then the residual."""
    sample = np.asarray(sample)
    true = np.asarray(true)
    estimate = np.asarray(estimate)
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(9, 5), sharex=True)
    top.plot(sample, true, color="tab:red", ls=":", lw=1.2, label="true")
    top.plot(sample, estimate, color="tab:blue", lw=1.0, label="estimate")
    top.set_ylabel("reflectivity")
    top.legend(loc="upper right", frameon=False, fontsize=8)
    bottom.plot(sample, true, color="tab:red", ls=":", lw=1.2, label="true")
    bottom.plot(sample, estimate - true, color="k", lw=1.0, label="residual")
    bottom.set_ylabel("residual")
    bottom.set_xlabel("time sample")
    bottom.legend(loc="upper right", frameon=False, fontsize=8)
    if title:
        top.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def training_curves(epoch, loss, step_size, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(epoch, loss, color="tab:blue", label="train MSE")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    twin = ax.twinx()
    twin.plot(epoch, step_size, color="tab:orange", ls="--", label="step size")
    twin.set_ylabel("step size")
    twin.set_ylim(0, 0.15)
    fig.legend(loc="upper right", frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def metric_panels(record, mse, corr, quality, path):
    fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
    for ax, values, label in zip(axes, (mse, corr, quality),
                                 ("MSE", "correlation", "Q (dB)")):
        values = np.asarray(values, dtype=float)
        ax.bar(record, np.where(np.isfinite(values), values, np.nan), width=0.8)
        ax.axhline(np.nanmean(values[np.isfinite(values)]) if np.isfinite(values).any() else 0,
                   color="k", lw=0.8, ls="--")
        ax.set_ylabel(label)
    axes[-1].set_xlabel("record")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def section_image(grid, path, title=None, clip=99.0):
    grid = np.asarray(grid)
    vmax = np.percentile(np.abs(grid), clip) or 1.0
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.imshow(grid, aspect="auto", cmap="gray", vmin=-vmax, vmax=vmax)
    ax.set_xlabel("trace")
    ax.set_ylabel("time sample")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def read_table(path):
    """Read a CSV written by this package into ``(header, columns)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path} is empty")
    header = tuple(rows[0])
    body = rows[1:]
    cols = {h: [r[i] for r in body if len(r) == len(header)] for i, h in enumerate(header)}
    return header, cols


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def plot_table(src, dest):
    """Render a report CSV (traces, history or metrics) to ``dest``.

    A ``.csv`` destination receives the plotted series instead of an image.
    """
    header, cols = read_table(src)
    if dest.lower().endswith(".csv"):
        n = len(next(iter(cols.values()))) if cols else 0
        write_table(dest, header, [[cols[h][i] for h in header] for i in range(n)])
        return
    if header[:4] == TRACE_COLUMNS:
        f = {h: np.array(cols[h], dtype=float) for h in TRACE_COLUMNS}
        trace_overlay(f["sample"], f["true"], f["estimate"], dest)
    elif header[:3] == HISTORY_COLUMNS:
        f = {h: np.array(cols[h], dtype=float) for h in HISTORY_COLUMNS}
        training_curves(f["epoch"], f["loss"], f["step_size"], dest)
    elif header[:4] == REPORT_COLUMNS:
        keep = [i for i, r in enumerate(cols["record"]) if r.isdigit()]
        f = {h: np.array([cols[h][i] for i in keep], dtype=float) for h in REPORT_COLUMNS}
        metric_panels(f["record"], f["mse"], f["correlation"], f["quality_db"], dest)
    else:
        raise FormatError(f"unrecognized report columns {header}")
