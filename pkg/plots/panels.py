"""Figure panels rendered from the pipeline's CSV/JSON outputs.

Reads only the documented file schemas (samples_R*.csv, loss_history.csv,
field_*.csv, bench_*.csv) and emits PNG files.  Styling choices: histogram
bins follow the Freedman-Diaconis rule, loss curves use a log y axis, field
heatmaps share one color scale, benchmark curves render log-log.  Output is
deterministic: fixed figure sizes, fixed DPI, no timestamps.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 110


class SchemaError(ValueError):
    """An input file is missing a required column."""


def read_table(path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path) as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        missing = [c for c in required if c not in names]
        if missing:
            raise SchemaError(f"{path.name}: missing column(s) {', '.join(missing)}")
        rows = list(reader)
    out: dict[str, np.ndarray] = {}
    for name in names:
        column = [r[name] for r in rows]
        try:
            out[name] = np.array(column, dtype=float)
        except ValueError:
            out[name] = np.array(column)
    return out


def fd_bins(values: np.ndarray) -> int:
    """Freedman-Diaconis bin count, clamped to something plottable."""
    values = values[np.isfinite(values)]
    if values.size < 2:
        return 1
    q75, q25 = np.percentile(values, [75, 25])
    iqr = q75 - q25
    if iqr <= 0:
        return 10
    width = 2.0 * iqr / values.size ** (1.0 / 3.0)
    span = values.max() - values.min()
    if span <= 0 or width <= 0:
        return 10
    return max(1, min(200, math.ceil(span / width)))


def plot_loss(loss_csv, out_path=None):
    data = read_table(loss_csv, ("epoch", "total", "physics", "initial", "boundary"))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in ("total", "physics", "initial", "boundary"):
        style = "-" if name == "total" else "--"
        ax.plot(data["epoch"], data[name], style, label=name,
                linewidth=2 if name == "total" else 1)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("Surrogate training loss")
    ax.legend()
    fig.tight_layout()
    if out_path:
        fig.savefig(out_path, dpi=DPI)
        plt.close(fig)
    return fig


def _field_grid(table):
    x = np.unique(table["x_m"])
    t = np.unique(table["t_s"])
    grid = np.full((t.size, x.size), np.nan)
    xi = np.searchsorted(x, table["x_m"])
    ti = np.searchsorted(t, table["t_s"])
    grid[ti, xi] = table[[k for k in table if k not in ("x_m", "t_s", "scheme")][0]]
    return x, t, grid


def plot_field(fdm_csv, pinn_csv, error_csv, out_path=None):
    fdm = read_table(fdm_csv, ("x_m", "t_s", "T_C"))
    if "scheme" in fdm:
        keep = fdm["scheme"] == "explicit"
        fdm = {k: v[keep] for k, v in fdm.items() if k != "scheme"}
    pinn = read_table(pinn_csv, ("x_m", "t_s", "T_C"))
    err = read_table(error_csv, ("x_m", "t_s", "abs_error_C"))

    fig, axes = plt.subplots(1, 3, figsize=(14, 4.2))
    panels = [("numerical solution", fdm, "T_C"), ("surrogate prediction", pinn, "T_C"),
              ("absolute error", err, "abs_error_C")]
    vmin = min(panels[0][1]["T_C"].min(), panels[1][1]["T_C"].min())
    vmax = max(panels[0][1]["T_C"].max(), panels[1][1]["T_C"].max())
    for ax, (title, table, col) in zip(axes, panels):
        x, t, grid = _field_grid(table)
        shared = col == "T_C"
        im = ax.pcolormesh(
            x * 1e3, t, grid, shading="auto", cmap="inferno",
            vmin=vmin if shared else None, vmax=vmax if shared else None,
        )
        ax.set_xlabel("x [mm]")
        ax.set_ylabel("t [s]")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, label="degC")
        if col == "abs_error_C":
            flat = int(np.nanargmax(grid))
            ti, xi = np.unravel_index(flat, grid.shape)
            ax.plot(x[xi] * 1e3, t[ti], "c*", markersize=12)
            ax.annotate(f"max {grid[ti, xi]:.2f} C", (x[xi] * 1e3, t[ti]),
                        color="cyan", xytext=(5, 5), textcoords="offset points")
    fig.tight_layout()
    if out_path:
        fig.savefig(out_path, dpi=DPI)
        plt.close(fig)
    return fig


def plot_posterior(samples_csvs, out_path=None):
    """Four posterior panels; returns (figure, per-level stats).

    samples_csvs maps the reliability-level label (e.g. "0.95") to its CSV.
    Every CSV row becomes exactly one point in the scatter panels.
    """
    tables = {}
    for label, path in sorted(samples_csvs.items(), key=lambda kv: float(kv[0])):
        tables[label] = read_table(
            path, ("k", "rho_cp", "alpha", "T_back_pinn", "T_back_fdm", "weight")
        )

    fig, axes = plt.subplots(2, 2, figsize=(12, 9))
    stats = {}

    ax = axes[0, 0]
    for label, tb in tables.items():
        temps = tb["T_back_fdm"]
        temps = temps[np.isfinite(temps)]
        if temps.size == 0:  # fall back when FDM re-verification was subsampled away
            temps = tb["T_back_pinn"]
        stats[label] = {"mean_T_back": float(temps.mean()), "n": int(tb["k"].size)}
        ax.hist(temps, bins=fd_bins(temps), density=True, alpha=0.55,
                label=f"R={label} (mean {temps.mean():.1f} C)")
    ax.set_xlabel("back temperature [degC]")
    ax.set_ylabel("density")
    ax.set_title("target back-temperature distributions")
    ax.legend()

    ax = axes[0, 1]
    for label, tb in tables.items():
        ax.hist(tb["rho_cp"] / 1e6, bins=fd_bins(tb["rho_cp"] / 1e6), density=True,
                alpha=0.55, label=f"R={label}")
    ax.set_xlabel("thermal density [MJ/(m^3 K)]")
    ax.set_ylabel("density")
    ax.set_title("thermal density distribution")
    ax.legend()

    ax = axes[1, 0]
    for label, tb in tables.items():
        ax.scatter(tb["k"], tb["alpha"] * 1e7, s=4, alpha=0.4, label=f"R={label}")
    ax.set_xlabel("thermal conductivity [W/(m K)]")
    ax.set_ylabel("thermal diffusivity [1e-7 m^2/s]")
    ax.set_title("conductivity vs diffusivity")
    ax.legend(markerscale=3)

    ax = axes[1, 1]
    for label, tb in tables.items():
        temps = np.where(np.isfinite(tb["T_back_fdm"]), tb["T_back_fdm"], tb["T_back_pinn"])
        ax.scatter(tb["alpha"] * 1e7, temps, s=4, alpha=0.4, label=f"R={label}")
    ax.set_xlabel("thermal diffusivity [1e-7 m^2/s]")
    ax.set_ylabel("back temperature [degC]")
    ax.set_title("diffusivity vs back temperature (k <= cap boundary visible)")
    ax.legend(markerscale=3)

    fig.tight_layout()
    if out_path:
        fig.savefig(out_path, dpi=DPI)
        plt.close(fig)
    return fig, stats


def plot_bench(inference_csv, smc_csv, out_path=None):
    inf = read_table(inference_csv, ("batch", "fdm_time_s", "pinn_time_s"))
    smc = read_table(smc_csv, ("workers", "time_s"))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    ax1.loglog(inf["batch"], inf["fdm_time_s"], "o-", label="sequential FDM")
    ax1.loglog(inf["batch"], inf["pinn_time_s"], "s-", label="batched surrogate")
    ax1.set_xlabel("simulations")
    ax1.set_ylabel("wall time [s]")
    ax1.set_title("inference time vs batch size")
    ax1.legend()
    ax2.plot(smc["workers"], smc["time_s"], "o-")
    ax2.set_xlabel("workers")
    ax2.set_ylabel("wall time [s]")
    ax2.set_ylim(bottom=0)
    ax2.set_title("SMC wall time vs worker count")
    fig.tight_layout()
    if out_path:
        fig.savefig(out_path, dpi=DPI)
        plt.close(fig)
    return fig
