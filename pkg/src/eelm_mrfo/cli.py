"""Command-line entry point: ``eelm {featurize,train,benchmark-optimizers,protocol,report}``.

Every command writes ``command_manifest.json`` into ``--out`` before it
exits, including when it fails with a handled error. The ``volatile`` field
of that manifest holds timestamps and is the only part that differs between
identical invocations.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import config as cfg
from .benchmarks import FUNCTIONS, get_function
from .elm import RegressionData, predict
from .harness import (
    MinMaxScaler,
    fixture_corpus_path,
    read_report_csv,
    run_protocol,
    synthetic_dataset,
    write_manifests,
    write_report_csv,
    write_scatter_csv,
)
from .metrics import r_squared, rmse
from .optimizers import KINDS, OptimizerSpec, minimize_with
from .rdf import featurize, read_feature_csv, write_feature_csv
from .structure import StructureParseError, read_xyz
from .trainer import train

log = logging.getLogger("eelm_mrfo")


class CommandError(Exception):
    """A handled failure: reported on stderr with exit status 1."""


def _write_command_manifest(out: Path, command: str, args: argparse.Namespace, status: str,
                            message: str, outputs: dict, started: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    record = {
        "command": command,
        "status": status,
        "message": message,
        "seed": getattr(args, "seed", None),
        "arguments": {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
                      if k not in ("func", "jobs")},
        "outputs": outputs,
        "volatile": {
            "finished_utc": datetime.now(timezone.utc).isoformat(),
            "wall_clock_seconds": time.perf_counter() - started,
            "jobs": getattr(args, "jobs", None),
        },
    }
    (out / "command_manifest.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _load_config(args):
    try:
        return cfg.load(args.config)
    except cfg.ConfigError as exc:
        raise CommandError(str(exc)) from None


def _load_dataset(args, parser) -> tuple[RegressionData, float, str]:
    """Dataset from flags, falling back to the ``[dataset]`` section."""
    spec = cfg.dataset_spec(parser)
    if getattr(args, "dataset", None):
        spec.path, spec.synthetic = str(args.dataset), None
    if getattr(args, "synthetic", None):
        spec.synthetic, spec.path = args.synthetic, None
    if getattr(args, "samples", None):
        spec.samples = args.samples
    if spec.path is not None:
        path = Path(spec.path)
        if not path.is_file():
            raise CommandError(f"dataset file not found: {path}")
        try:
            fd = read_feature_csv(path)
        except ValueError as exc:
            raise CommandError(str(exc)) from None
        if fd.targets is None:
            raise CommandError(f"{path}: no 'target' column")
        x, t = fd.features, fd.targets
        if spec.max_target is not None:
            keep = t < spec.max_target
            x, t = x[keep], t[keep]
        if len(t) == 0:
            raise CommandError(f"{path}: no rows left to train on")
        scale = 1000.0 if spec.rmse_scale is None else spec.rmse_scale
        units = spec.units or ("meV/atom" if scale == 1000.0 else "target units")
        return RegressionData(x, t), scale, units
    try:
        data = synthetic_dataset(spec.synthetic, spec.samples, spec.noise, spec.seed)
    except ValueError as exc:
        raise CommandError(str(exc)) from None
    return data, spec.rmse_scale or 1.0, spec.units or "target units"


def cmd_featurize(args) -> dict:
    path = Path(args.structures) if args.structures else fixture_corpus_path()
    if not path.is_file():
        raise CommandError(f"structure file not found: {path}")
    try:
        structures = read_xyz(path)
    except StructureParseError as exc:
        raise CommandError(str(exc)) from None
    if not structures:
        raise CommandError(f"{path}: no structures found")
    parser = _load_config(args)
    rdf = cfg.rdf_config(parser)
    try:
        ds = featurize(structures, rdf, with_targets=not args.no_targets, references=cfg.references(parser))
    except ValueError as exc:
        raise CommandError(str(exc)) from None
    output = Path(args.output) if args.output else args.out / "features.csv"
    output.parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(output, ds)
    n_cols = len(ds.columns) + (1 if ds.targets is not None else 0)
    print(f"wrote {output}: {ds.n_rows} rows x {n_cols} columns")
    return {"features": str(output), "rows": ds.n_rows, "columns": n_cols, "rdf_config": ds.metadata["rdf_config"]}


def cmd_train(args) -> dict:
    parser = _load_config(args)
    data, scale, units = _load_dataset(args, parser)
    entries = cfg.model_entries(parser)
    if args.model:
        entries = [e for e in entries if e.name == args.model]
        if not entries:
            raise CommandError(f"no [model {args.model}] section in the config")
    entry = entries[0] if entries else cfg.default_models()[2]
    config = entry.config
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    scaler = MinMaxScaler.fit(data.inputs)
    scaled = RegressionData(scaler.transform(data.inputs), data.targets)
    model, manifest = train(scaled, config)
    pred = predict(model, scaled.inputs)
    manifest.labels = {"model": entry.name}
    args.out.mkdir(parents=True, exist_ok=True)
    payload = {"name": entry.name, "scaler": {"low": scaler.low.tolist(), "span": scaler.span.tolist()},
               "model": model.to_dict()}
    (args.out / "model.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
    write_manifests(args.out / "manifests.jsonl", [manifest.to_dict()])
    train_rmse = rmse(pred, scaled.targets) * scale
    print(f"{entry.name}: training RMSE {train_rmse:.6g} {units}, R2 {r_squared(pred, scaled.targets):.4f}")
    return {"model": str(args.out / "model.json"), "manifests": str(args.out / "manifests.jsonl"),
            "train_rmse": train_rmse}


def _benchmark_task(task):
    fname, dim, kind, seed, population, iterations, lower, upper = task
    fn = get_function(fname)
    spec = OptimizerSpec(kind, population, iterations, fn.lower if lower is None else lower,
                         fn.upper if upper is None else upper, seed)
    return minimize_with(spec, fn.func, dim).history


def cmd_benchmark(args) -> dict:
    parser = _load_config(args)
    suite = cfg.suite_spec(parser)
    for name in ("functions", "optimizers", "dimensions"):
        value = getattr(args, name)
        if value:
            setattr(suite, name, [int(v) for v in value.split(",")] if name == "dimensions" else value.split(","))
    if args.seeds is not None:
        suite.seeds = args.seeds
    if args.iterations is not None:
        suite.iterations = args.iterations
    if args.lower is not None:
        suite.lower = args.lower
    if args.upper is not None:
        suite.upper = args.upper
    unknown = [f for f in suite.functions if f not in FUNCTIONS]
    if unknown:
        raise CommandError(f"unknown test function(s) {unknown}; expected from {sorted(FUNCTIONS)}")
    bad = [k for k in suite.optimizers if k not in KINDS]
    if bad:
        raise CommandError(f"unknown optimizer(s) {bad}; expected from {list(KINDS)}")
    if suite.seeds < 1:
        raise CommandError("seeds must be at least 1")
    if suite.iterations < 0 or suite.population < 1 or any(d < 1 for d in suite.dimensions):
        raise CommandError("iterations must be >= 0, population and dimensions >= 1")
    base = args.seed or 0
    tasks = [(f, d, k, base + s, suite.population, suite.iterations, suite.lower, suite.upper)
             for f in suite.functions for d in suite.dimensions for k in suite.optimizers
             for s in range(suite.seeds)]
    histories = _map(_benchmark_task, tasks, args.jobs)

    args.out.mkdir(parents=True, exist_ok=True)
    hist_path, summary_path = args.out / "histories.csv", args.out / "summary.csv"
    with open(hist_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "dimension", "optimizer", "seed", "iteration", "best_fitness"])
        for task, hist in zip(tasks, histories):
            for it, value in enumerate(hist):
                w.writerow([task[0], task[1], task[2], task[3], it, repr(float(value))])
    rows = []
    for i in range(0, len(tasks), suite.seeds):
        finals = [float(h[-1]) for h in histories[i:i + suite.seeds]]
        f, d, k = tasks[i][:3]
        rows.append([f, d, k, suite.seeds, statistics.median(finals), statistics.fmean(finals), min(finals),
                     max(finals)])
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "dimension", "optimizer", "seeds", "median_final", "mean_final", "min_final",
                    "max_final"])
        for r in rows:
            w.writerow(r[:4] + [repr(float(v)) for v in r[4:]])
    for r in rows:
        print(f"{r[0]:>10} D={r[1]:<3} {r[2]:>12}: median final {r[4]:.4g}")
    return {"histories": str(hist_path), "summary": str(summary_path)}


def _map(func, items, jobs):
    if jobs <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * jobs))))


def cmd_protocol(args) -> dict:
    parser = _load_config(args)
    data, scale, units = _load_dataset(args, parser)
    plan = cfg.fold_plan(parser, seed=args.seed, runs=args.runs, folds=args.folds)
    models = cfg.model_entries(parser) or cfg.default_models(args.hidden_nodes or 300)
    if data.n_samples < plan.fold_count:
        raise CommandError(f"{data.n_samples} samples cannot fill {plan.fold_count} folds")
    report = run_protocol(data, models, plan, jobs=args.jobs, rmse_scale=scale, rmse_units=units)
    names = [m.name for m in models]

    args.out.mkdir(parents=True, exist_ok=True)
    paths = {"report": args.out / "report.csv", "manifests": args.out / "manifests.jsonl",
             "scatter": args.out / "scatter.csv"}
    write_report_csv(paths["report"], report)
    write_manifests(paths["manifests"], [c.manifest for c in report.cells])
    n_scatter = write_scatter_csv(paths["scatter"], report, names)
    failed = [c for c in report.cells if c.status != "ok"]
    for c in failed:
        log.warning("cell %s run %d fold %d failed: %s", c.model, c.run, c.fold, c.error)
    _print_table([{"model": a.model, "train_r2": a.train_r2, "test_rmse": a.test_rmse, "test_r2": a.test_r2,
                   "test_rmse_std": a.test_rmse_std} for a in report.aggregates], units)
    if len(failed) == len(report.cells):
        raise CommandError("every protocol cell failed")
    return {**{k: str(v) for k, v in paths.items()}, "cells": len(report.cells), "failed_cells": len(failed),
            "scatter_rows": n_scatter, "rmse_units": units}


def _print_table(rows, units=""):
    print(f"{'model':<16} {'train R2':>9} {'test RMSE':>12} {'(std)':>10} {'test R2':>8}")
    for r in rows:
        print(f"{r['model']:<16} {float(r['train_r2']):9.4f} {float(r['test_rmse']):12.5g} "
              f"{float(r['test_rmse_std']):10.3g} {float(r['test_r2']):8.4f}")
    if units:
        print(f"RMSE in {units}")


def cmd_report(args) -> dict:
    path = Path(args.report) if args.report else args.out / "report.csv"
    if not path.is_file():
        raise CommandError(f"report file not found: {path}")
    rows = [r for r in read_report_csv(path) if r.get("row_type") == "aggregate"]
    if not rows:
        raise CommandError(f"{path}: no aggregate rows")
    _print_table(rows)
    return {"report": str(path), "models": [r["model"] for r in rows]}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI-style config file")
    common.add_argument("--seed", type=int, help="seed override (U64)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes; 1 forces the serial path (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="eelm", description="Partial-RDF featurization, evolutionary ELM training and optimizer benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", parents=[common], help="extended-XYZ structures -> partial-RDF feature CSV")
    p.add_argument("structures", nargs="?", help="extended-XYZ file (default: bundled Li-Ge fixture corpus)")
    p.add_argument("--output", help="feature CSV path (default: OUT/features.csv)")
    p.add_argument("--no-targets", action="store_true", help="skip formation-energy targets")
    p.set_defaults(func=cmd_featurize)

    data_flags = argparse.ArgumentParser(add_help=False)
    data_flags.add_argument("--dataset", help="feature CSV with a final 'target' column")
    data_flags.add_argument("--synthetic", help="synthetic dataset kind: sinc1d, friedman1, linear")
    data_flags.add_argument("--samples", type=int, help="synthetic sample count")

    p = sub.add_parser("train", parents=[common, data_flags], help="train one model on a dataset")
    p.add_argument("--model", help="name of the [model NAME] section to train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark-optimizers", parents=[common],
                       help="run optimizers over standard test functions")
    p.add_argument("--functions", help="comma list from sphere, rastrigin, rosenbrock")
    p.add_argument("--dimensions", help="comma list of dimensions")
    p.add_argument("--optimizers", help=f"comma list from {', '.join(KINDS)}")
    p.add_argument("--seeds", type=int, help="number of seeds per combination")
    p.add_argument("--iterations", type=int)
    p.add_argument("--lower", type=float, help="override the function's lower bound")
    p.add_argument("--upper", type=float, help="override the function's upper bound")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("protocol", parents=[common, data_flags], help="repeated k-fold comparison of models")
    p.add_argument("--runs", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--hidden-nodes", type=int, help="hidden nodes for the default model set")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("report", parents=[common], help="print the aggregate table of a protocol report")
    p.add_argument("report", nargs="?", help="report CSV (default: OUT/report.csv)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    started = time.perf_counter()
    try:
        outputs = args.func(args)
    except (CommandError, cfg.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_command_manifest(args.out, args.command, args, "error", str(exc), {}, started)
        return 1
    _write_command_manifest(args.out, args.command, args, "ok", "", outputs, started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
