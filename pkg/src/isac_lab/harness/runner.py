"""Monte Carlo execution, aggregation and result files.

Trial ``i`` of a sweep point always draws from the lane
``(experiment, point_key, i)`` of the master seed, so results do not depend
on worker count or completion order. Per-trial outputs are collected into
an array indexed by trial number before anything is averaged.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..numerics import RandomStream
from .config import ExperimentConfig


@dataclass
class AggregateResult:
    """Monte Carlo average of one metric along one sweep.

    ``stderr`` is ``None`` when only one trial was run.
    """

    name: str
    metric: str
    units: str
    x_name: str
    x: list
    mean: np.ndarray
    stderr: np.ndarray | None
    n_trials: int
    extra: dict = field(default_factory=dict)

    def to_summary(self) -> dict:
        return {
            "metric": self.metric,
            "units": self.units,
            "x_name": self.x_name,
            "x": [_jsonable(v) for v in self.x],
            "mean": [_jsonable(v) for v in self.mean],
            "stderr": None if self.stderr is None else [_jsonable(v) for v in self.stderr],
            "n_trials": self.n_trials,
        }


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def aggregate(name: str, samples, x, x_name: str, metric: str, units: str = "",
              extra: dict | None = None) -> AggregateResult:
    """Mean and standard error over axis 0 of a ``(trials, points)`` array.

    NaN entries (e.g. trials with no usable estimate) are left out per point.
    """
    a = np.asarray(samples, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    n = a.shape[0]
    valid = np.sum(~np.isnan(a), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"), warnings.catch_warnings():
        # points with a single valid sample get a NaN stderr
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(a, axis=0) if np.any(valid) else np.full(a.shape[1], np.nan)
        stderr = None
        if n > 1:
            stderr = np.nanstd(a, axis=0, ddof=1) / np.sqrt(valid)
    return AggregateResult(name, metric, units, x_name, list(x), mean, stderr, n, extra or {})


def _run_chunk(args):
    fn, seed, lane, indices = args
    return [fn(RandomStream(seed, lane + (i,))) for i in indices]


def monte_carlo(fn, n_trials: int, seed: int, lane: tuple, workers: int = 1) -> list:
    """Evaluate ``fn(stream)`` for trials ``0 .. n_trials-1``.

    With ``workers > 1`` the trials are split into contiguous chunks and run
    in a process pool (``fn`` must then be picklable, e.g. a
    ``functools.partial`` of a module-level function). The returned list is
    in trial order either way.
    """
    if n_trials < 1:
        raise ValueError("need at least one trial")
    if workers <= 1 or n_trials < 2 * workers:
        return _run_chunk((fn, seed, lane, range(n_trials)))
    bounds = np.linspace(0, n_trials, workers + 1).astype(int)
    chunks = [(fn, seed, lane, range(a, b)) for a, b in zip(bounds[:-1], bounds[1:])]
    out = []
    with ProcessPoolExecutor(workers) as pool:
        for part in pool.map(_run_chunk, chunks):
            out.extend(part)
    return out


@dataclass
class Table:
    """A CSV-ready table: header plus rows of plain values."""

    name: str
    header: list
    rows: list

    def write(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def curve_table(res: AggregateResult) -> Table:
    header = [res.x_name, "mean", "stderr", "n_trials"]
    rows = []
    for i, x in enumerate(res.x):
        se = None if res.stderr is None else res.stderr[i]
        rows.append([x, res.mean[i], se, res.n_trials])
    return Table(res.name, header, rows)


@dataclass
class ExperimentOutput:
    """Everything an experiment produces; written by ``write_outputs``."""

    results: list[AggregateResult] = field(default_factory=list)
    tables: list[Table] = field(default_factory=list)
    plot: str | None = None
    notes: list[str] = field(default_factory=list)
    # (file stem, DelayDopplerMap) pairs exported as dB grids
    maps: list = field(default_factory=list)

    def result(self, name: str) -> AggregateResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def write_outputs(cfg: ExperimentConfig, output: ExperimentOutput, wall_time: float,
                  out_dir: Path) -> list[Path]:
    """Write one CSV per curve/table, ``summary.json``, ``timing.json`` and ``plot.py``.

    ``summary.json`` holds only deterministic content so that repeated runs
    are byte identical; the wall time goes to ``timing.json``.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for res in output.results:
        path = out_dir / f"{res.name}.csv"
        curve_table(res).write(path)
        written.append(path)
    for tab in output.tables:
        path = out_dir / f"{tab.name}.csv"
        tab.write(path)
        written.append(path)
    for stem, ddm in output.maps:
        path = out_dir / f"{stem}.csv"
        ddm.to_csv(path)
        written.append(path)
    summary = {
        "config": cfg.to_dict(),
        "metrics": {r.name: r.to_summary() for r in output.results},
        "tables": [t.name for t in output.tables],
        "notes": output.notes,
    }
    path = out_dir / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(path)
    path = out_dir / "timing.json"
    path.write_text(json.dumps({"wall_time_s": round(wall_time, 3),
                                "workers": cfg.workers}, indent=2) + "\n")
    written.append(path)
    if output.plot:
        path = out_dir / "plot.py"
        path.write_text(output.plot)
        written.append(path)
    return written


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentOutput:
    """Run a catalog experiment and, if ``cfg.out`` is set, write its files."""
    from .experiments import get_experiment

    exp = get_experiment(cfg.experiment)
    t0 = time.perf_counter()
    output = exp.run(cfg)
    wall = time.perf_counter() - t0
    if write and cfg.out is not None:
        write_outputs(cfg, output, wall, Path(cfg.out))
    return output
