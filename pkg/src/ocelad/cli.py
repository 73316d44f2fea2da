"""Command-line entry points: generate scenario files, run experiments, plot metrics."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ConfigError, load_experiment
from .experiment import read_metrics_csv, run_experiment, trial_seed
from .metric import InvalidInputError
from .svgplot import Series, line_chart
from .synthdata import constraint_stream, generate_dataset, write_dataset_csv, write_stream

PLOT_KINDS = ("knn", "nmi", "regret")


def cmd_generate(args) -> int:
    cfg = load_experiment(args.config)
    out_dir = args.out or cfg.outputs
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(trial_seed(cfg.scenario.seed, 0))
    data = generate_dataset(cfg.scenario, rng)
    stream = constraint_stream(cfg.scenario, data, rng)
    dataset_path = os.path.join(out_dir, "dataset.csv")
    stream_path = os.path.join(out_dir, "stream.txt")
    write_dataset_csv(dataset_path, data)
    write_stream(stream_path, stream)
    print(dataset_path)
    print(stream_path)
    return 0


def cmd_run(args) -> int:
    cfg = load_experiment(args.config)
    out_dir = args.out or cfg.outputs
    rows = run_experiment(cfg, out_dir)
    for name in rows:
        print(os.path.join(out_dir, f"{name}.csv"))
    return 0


def _aggregate(rows, kind: str, threshold: float) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Collapse per-trial rows to one value per checkpoint time."""
    by_t: dict[int, list[tuple]] = {}
    for row in rows:
        by_t.setdefault(row[0], []).append(row)
    xs, ys = [], []
    for t in sorted(by_t):
        group = by_t[t]
        if kind == "knn":
            val = float(np.mean([r[2] for r in group]))
        elif kind == "nmi":
            val = float(np.mean([r[3] > threshold for r in group]))
        else:
            val = float(np.mean([r[5] for r in group]))
        xs.append(float(t))
        ys.append(val)
    return tuple(xs), tuple(ys)


def cmd_plot(args) -> int:
    series = []
    for path in args.csv:
        rows = read_metrics_csv(path)
        if not rows:
            raise InvalidInputError(f"{path}: no data rows to plot")
        label = os.path.splitext(os.path.basename(path))[0]
        xs, ys = _aggregate(rows, args.kind, args.threshold)
        series.append(Series(label, xs, ys))
    labels = {
        "knn": "mean kNN error",
        "nmi": f"P(NMI > {args.threshold:g})",
        "regret": "mean cumulative regret",
    }
    y_range = (0.0, 1.0) if args.kind in ("knn", "nmi") else None
    svg = line_chart(
        series,
        title=args.title or labels[args.kind],
        ylabel=labels[args.kind],
        markers=tuple(args.marker),
        y_range=y_range,
    )
    with open(args.out, "w") as fh:
        fh.write(svg)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocelad",
        description="Adaptive online metric learning: scenario generation, experiments, plots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write dataset CSV and constraint-stream file")
    gen.add_argument("config", help="experiment config (YAML)")
    gen.add_argument("--out", default=None, help="output directory (default: config outputs)")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="run all algorithms x trials, write metrics CSVs")
    run.add_argument("config", help="experiment config (YAML)")
    run.add_argument("--out", default=None, help="output directory (default: config outputs)")
    run.set_defaults(func=cmd_run)

    plot = sub.add_parser("plot", help="render an SVG line chart from metrics CSVs")
    plot.add_argument("csv", nargs="+", help="metrics CSV file(s), one curve each")
    plot.add_argument("--kind", choices=PLOT_KINDS, required=True)
    plot.add_argument("--out", default="plot.svg", help="output SVG path")
    plot.add_argument("--threshold", type=float, default=0.8, help="NMI exceedance threshold")
    plot.add_argument("--marker", type=float, action="append", default=[],
                      help="vertical marker at time t (repeatable)")
    plot.add_argument("--title", default="", help="chart title")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
