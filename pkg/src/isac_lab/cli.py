"""Command-line entry point ``isac-lab``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness.config import ConfigError, build_config, load_file
from .harness.experiments import builtin_experiments, complexity_tables, get_experiment, signaling_table
from .harness.runner import run_experiment
from .metrics import formula_discrepancy


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isac-lab", description="Uplink OFDM ISAC link-level simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a catalog experiment")
    run.add_argument("experiment")
    run.add_argument("--config", type=Path, help="YAML file with parameter overrides")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    run.add_argument("--out", type=Path, help="output directory (default results/<experiment>)")
    run.add_argument("--set", dest="assignments", action="append", default=[],
                     metavar="KEY=VALUE", help="override one parameter, e.g. system.cp_len=32")
    run.add_argument("--workers", type=int, help="worker processes")
    sub.add_parser("list", help="list catalog experiments")
    tab = sub.add_parser("tables", help="print the complexity and signaling tables")
    tab.add_argument("--n", type=int, default=256, help="number of subcarriers")
    return ap


def _print_table(table, out) -> None:
    cells = [[str(h) for h in table.header]] + [
        [f"{v:g}" if isinstance(v, float) else str(v) for v in row] for row in table.rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    for j, row in enumerate(cells):
        print("  ".join(c.rjust(w) for c, w in zip(row, widths)), file=out)
        if j == 0:
            print("  ".join("-" * w for w in widths), file=out)


def cmd_list(out=None) -> int:
    out = sys.stdout if out is None else out
    for name, exp in sorted(builtin_experiments().items()):
        print(f"{name:18s} {exp.default_trials:>6d} trials  {exp.description}", file=out)
    return 0


def cmd_tables(n: int, out=None) -> int:
    out = sys.stdout if out is None else out
    formulas, complexity = complexity_tables(n)
    print(f"Complexity formulas (real operations per OFDM symbol, N={n})", file=out)
    _print_table(formulas, out)
    print(file=out)
    print("Complexity (totals and per-UE values, per-UE rounded up)", file=out)
    _print_table(complexity, out)
    print(file=out)
    print("Control signaling", file=out)
    _print_table(signaling_table(n), out)
    notes = formula_discrepancy(n)
    if notes:
        print(file=out)
        print("Note: BS additions use the tabulated convention (K x FFT additions).", file=out)
        print("The general BS-addition formula (K x multiplication kernel + 2N) gives:", file=out)
        for line in notes:
            print(f"  {line}", file=out)
    return 0


def cmd_run(args, out=None) -> int:
    out = sys.stdout if out is None else out
    exp = get_experiment(args.experiment)
    file_data = load_file(args.config) if args.config else None
    cfg = build_config(exp.name, exp.defaults, exp.default_trials, file_data,
                       args.assignments, args.seed, args.trials,
                       args.out or Path("results") / exp.name)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("workers: must be >= 1")
        cfg.workers = args.workers
    output = run_experiment(cfg)
    for res in output.results:
        means = ", ".join(f"{m:.4g}" for m in res.mean)
        print(f"{res.name}: {means}", file=out)
    for note in output.notes:
        print(note, file=out)
    print(f"wrote results to {cfg.out}", file=out)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            return cmd_list()
        if args.command == "tables":
            if args.n < 2 or args.n & (args.n - 1):
                raise ConfigError(f"--n: must be a power of two >= 2, got {args.n}")
            return cmd_tables(args.n)
        return cmd_run(args)
    except ConfigError as exc:
        print(f"isac-lab: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"isac-lab: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
