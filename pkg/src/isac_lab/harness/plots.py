"""Plot-script emission.

Each experiment writes a standalone ``plot.py`` next to its CSV files. The
scripts use only the standard ``csv`` module and matplotlib, read the CSVs
from their own directory and save PNGs there. Nothing here imports
matplotlib; the scripts are plain text.
"""

from __future__ import annotations

_HEADER = '''"""Render the CSV results in this directory (requires matplotlib)."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def read(name):
    with open(HERE / name, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def num(v):
    return float(v) if v not in ("", None) else float("nan")

'''


def line_plot(csv_name: str, x: str, ys, logx=False, logy=False, ylabel="") -> str:
    return _HEADER + f'''
rows = read({csv_name!r})
xs = [num(r[{x!r}]) for r in rows]
fig, ax = plt.subplots()
for col in {list(ys)!r}:
    ax.plot(xs, [num(r[col]) for r in rows], marker="o", label=col)
ax.set_xscale({"log" if logx else "linear"!r})
ax.set_yscale({"log" if logy else "linear"!r})
ax.set_xlabel({x!r})
ax.set_ylabel({ylabel!r})
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.savefig(HERE / {csv_name.replace(".csv", ".png")!r}, dpi=150)
'''


def grouped_plot(csv_name: str, x: str, y: str, group: str, logx=False, ylabel="") -> str:
    return _HEADER + f'''
rows = read({csv_name!r})
fig, ax = plt.subplots()
for g in dict.fromkeys(r[{group!r}] for r in rows):
    sel = [r for r in rows if r[{group!r}] == g]
    ax.plot([num(r[{x!r}]) for r in sel], [num(r[{y!r}]) for r in sel], marker="o", label=g)
ax.set_xscale({"log" if logx else "linear"!r})
ax.set_xlabel({x!r})
ax.set_ylabel({ylabel!r})
ax.grid(True, alpha=0.3)
ax.legend()
fig.savefig(HERE / {csv_name.replace(".csv", ".png")!r}, dpi=150)
'''


def psd_plot(csv_name: str) -> str:
    return _HEADER + f'''
rows = read({csv_name!r})
cols = [c for c in rows[0] if c not in ("freq_normalized", "mask_db")]
f = [num(r["freq_normalized"]) for r in rows]
fig, ax = plt.subplots()
for c in cols:
    ax.plot(f, [num(r[c]) for r in rows], lw=0.8, label=c)
ax.plot(f, [num(r["mask_db"]) for r in rows], "k--", label="mask")
ax.set_xlabel("frequency / occupied bandwidth")
ax.set_ylabel("PSD (dB re. full-band in-band level)")
ax.set_ylim(-60, 15)
ax.grid(True, alpha=0.3)
ax.legend()
fig.savefig(HERE / "psd.png", dpi=150)
'''


def mse_plot(csv_name: str) -> str:
    return _HEADER + f'''
rows = read({csv_name!r})
for channel in dict.fromkeys(r["channel"] for r in rows):
    fig, ax = plt.subplots()
    sel = [r for r in rows if r["channel"] == channel]
    for key in dict.fromkeys((r["scheme"], r["cp_len"]) for r in sel):
        pts = [r for r in sel if (r["scheme"], r["cp_len"]) == key]
        ax.plot([num(r["snr_db"]) for r in pts], [num(r["mse_db"]) for r in pts],
                marker="o", label=f"{{key[0]}} Ncp={{key[1]}}")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("MSE (dB)")
    ax.set_title(channel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    fig.savefig(HERE / f"{csv_name.replace('.csv', '')}_{{channel}}.png", dpi=150)
'''


def map_plot(stems) -> str:
    stems = ["map_" + s for s in stems]
    return _HEADER + f'''
for stem in {stems!r}:
    if not (HERE / (stem + ".csv")).exists():
        continue
    with open(HERE / (stem + ".csv"), newline="") as fh:
        data = list(csv.reader(fh))
    doppler = [int(v) for v in data[0][1:]]
    grid = [[max(num(v), -40.0) for v in row[1:]] for row in data[1:]]
    fig, ax = plt.subplots()
    im = ax.imshow(grid, aspect="auto", origin="lower", cmap="viridis",
                   extent=[doppler[0], doppler[-1], 0, len(grid)])
    ax.set_xlabel("Doppler bin")
    ax.set_ylabel("delay bin")
    ax.set_title(stem)
    fig.colorbar(im, label="dB re. peak")
    fig.savefig(HERE / (stem + ".png"), dpi=150)
'''
