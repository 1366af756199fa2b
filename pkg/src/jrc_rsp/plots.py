"""Static SVG plots of the CSV artifacts (RMSE curves, images, MUSIC spectra)."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so repeated runs write identical files
matplotlib.rcParams["svg.hashsalt"] = "jrc-rsp"
_SVG_META = {"Date": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def _read_rows(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return list(reader.fieldnames or []), list(reader)


def csv_kind(path) -> str:
    """``rmse``, ``image`` or ``spectrum`` judged from the header row."""
    header, _ = _read_rows(path)
    if {"rmse_pct", "target", "param"} <= set(header):
        return "rmse"
    if header and all(h.startswith("az") for h in header):
        return "image"
    if {"velocity_mps", "mu"} <= set(header):
        return "spectrum"
    raise ValueError(f"{path}: unrecognized CSV header {header[:4]}")


def plot_rmse(csv_path, out_path, param: str = "range") -> Path:
    """Span-normalized RMSE against the swept value, one line per target."""
    _, rows = _read_rows(csv_path)
    rows = [r for r in rows if r["param"] == param]
    if not rows:
        raise ValueError(f"{csv_path}: no rows for param {param!r}")
    sweep = rows[0].get("sweep") or "snr"
    xkey = "snr_db" if sweep == "snr" else "value"
    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict[tuple, list] = {}
    for r in rows:
        key = (int(r["target"]),) if sweep != "wordlength" else (int(r["target"]), r["value"])
        series.setdefault(key, []).append(r)
    for key, rs in sorted(series.items()):
        if sweep == "wordlength":
            xs = [float(r["snr_db"]) for r in rs]
            label = f"target {key[0]} {key[1]}"
        else:
            xs = [float(r[xkey]) for r in rs]
            label = f"target {key[0]}"
        ys = [float(r["rmse_pct"]) for r in rs]
        order = np.argsort(xs, kind="stable")
        ax.plot(np.asarray(xs)[order], np.asarray(ys)[order], marker="o", label=label)
    ax.set_xlabel("SNR (dB)" if sweep in ("snr", "wordlength") else sweep)
    ax.set_ylabel(f"{param} RMSE (% of span)")
    ax.set_yscale("symlog", linthresh=0.1)
    ax.axhline(0.5, color="grey", lw=0.8, ls="--")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_image(csv_path, out_path, range_res: float | None = None) -> Path:
    """Heatmap of a range-azimuth magnitude CSV in dB."""
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    db = 20 * np.log10(np.maximum(data, 1e-30) / max(data.max(), 1e-30))
    fig, ax = plt.subplots(figsize=(6, 4))
    extent = None
    if range_res is not None:
        extent = (0, data.shape[1], data.shape[0] * range_res, 0)
    im = ax.imshow(db, aspect="auto", vmin=-60, vmax=0, cmap="viridis", extent=extent)
    ax.set_xlabel("azimuth bin")
    ax.set_ylabel("range (m)" if range_res else "range bin")
    fig.colorbar(im, ax=ax, label="dB")
    fig.tight_layout()
    return _save(fig, out_path)


def plot_spectrum(csv_path, out_path) -> Path:
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(data["velocity_mps"], data["mu_db"])
    ax.set_xlabel("velocity (m/s)")
    ax.set_ylabel("MUSIC pseudo-spectrum (dB)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_csv(csv_path, out_path=None) -> Path:
    """Dispatch on :func:`csv_kind`; the SVG goes next to the CSV by default."""
    out_path = Path(csv_path).with_suffix(".svg") if out_path is None else out_path
    kind = csv_kind(csv_path)
    if kind == "rmse":
        return plot_rmse(csv_path, out_path)
    if kind == "image":
        return plot_image(csv_path, out_path)
    return plot_spectrum(csv_path, out_path)
