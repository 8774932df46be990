"""Batch command line: synth, fit, transform, eval, bench.

Errors print a single ``error[<category>]: <detail>`` line on stderr.
Exit codes: 0 success, 2 input/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DataFormatError,
    Dataset,
    DomainPair,
    load_dataset,
    load_labels,
    make_synthetic_shift,
    save_dataset,
    save_labels,
)
from .pipeline import (
    AdaptationConfig,
    ConfigError,
    baseline_pca,
    baseline_raw,
    evaluate,
    fit,
    grid_search,
    knn1_predict,
    load_model,
    model_to_dict,
    save_model,
    transform,
)
from .solver import SolverError

EXIT_INPUT = 2
EXIT_NUMERIC = 3

# the bundled synthetic pair
SYNTH_DEFAULTS = {"seed": 7, "n_per_class": 100, "shift": (3.0, 0.0), "rotation": 0.5}

# flag name -> config field
_FLAG_FIELDS = {
    "rules": "rules",
    "dim": "dim",
    "alpha": "alpha",
    "beta": "beta",
    "lam": "lam",
    "iters": "iters",
    "standardize": "standardize",
}
# config-file keys accepted besides the field names
_FILE_ALIASES = {"lambda": "lam", "K": "rules", "m": "dim", "T": "iters"}


class InputError(Exception):
    pass


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _plain_labels(labels):
    return [v.item() if isinstance(v, np.generic) else v for v in labels]


def _header(path) -> list:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        first = next(csv.reader(fh), [])
    return [h.strip() for h in first]


def resolve_config(args, d: int) -> tuple[AdaptationConfig, dict]:
    """Defaults < config file < flags. Returns the config and each value's origin."""
    values = {}
    origin = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {path} is not valid JSON: {exc}") from None
        for key, val in raw.items():
            key = _FILE_ALIASES.get(key, key)
            if key not in _FLAG_FIELDS.values():
                raise InputError(f"unknown config key {key!r} in {path}")
            values[key] = val
            origin[key] = "file"
    for flag, key in _FLAG_FIELDS.items():
        val = getattr(args, flag, None)
        if val is not None:
            values[key] = val
            origin[key] = "flag"
    rules = int(values.get("rules", AdaptationConfig.rules))
    if "dim" not in values:
        values["dim"] = min(AdaptationConfig.dim, rules * (d + 1))
        origin["dim"] = "default (capped at K(d+1))"
    cfg = AdaptationConfig(**values)
    for key in asdict(cfg):
        origin.setdefault(key, "default")
    return cfg.validate(d), origin


def load_pair(args) -> tuple[DomainPair, dict]:
    if args.synthetic:
        seed = SYNTH_DEFAULTS["seed"] if args.seed is None else args.seed
        pair = make_synthetic_shift(
            seed, SYNTH_DEFAULTS["n_per_class"], SYNTH_DEFAULTS["shift"], SYNTH_DEFAULTS["rotation"]
        )
        desc = {"source": "synthetic", **SYNTH_DEFAULTS, "seed": seed}
        desc["shift"] = list(desc["shift"])
        return pair, desc
    if not args.source or not args.target:
        raise InputError("either --synthetic or both --source and --target are required")
    source = load_dataset(args.source, args.label_column)
    truth = load_labels(args.truth, args.label_column) if args.truth else None
    if args.label_column in _header(args.target):
        # labels in the target file are held out as evaluation truth
        with_labels = load_dataset(args.target, args.label_column)
        target = Dataset(with_labels.features)
        if truth is None:
            truth = with_labels.labels
    else:
        target = load_dataset(args.target)
    if truth is not None and len(truth) != target.n:
        raise InputError(f"truth has {len(truth)} labels, target has {target.n} rows")
    if source.d != target.d:
        raise InputError(f"feature dimension mismatch: source d={source.d}, target d={target.d}")
    desc = {"source": str(args.source), "target": str(args.target), "truth": args.truth}
    return DomainPair(source, target, truth), desc


def _baselines(pair: DomainPair, cfg: AdaptationConfig) -> dict:
    if pair.target_truth is None:
        return {}
    return {
        "knn_raw": evaluate(baseline_raw(pair, "none"), pair.target_truth),
        "knn_standardized": evaluate(baseline_raw(pair, cfg.standardize), pair.target_truth),
        "knn_pca": evaluate(baseline_pca(pair, cfg.dim, cfg.standardize), pair.target_truth),
    }


def _fit_report(pair, desc, cfg, origin, model) -> dict:
    acc = None
    if pair.target_truth is not None:
        acc = evaluate(model.target_predictions, pair.target_truth)
    return {
        "tool": "trltsk",
        "version": __version__,
        "data": {
            **desc,
            "n_source": pair.source.n,
            "n_target": pair.target.n,
            "d": pair.source.d,
            "classes": list(model.classes),
        },
        "config": asdict(cfg),
        "config_origin": origin,
        "iterations": model_to_dict(model)["diagnostics"],
        "target_accuracy": acc,
    }


def cmd_fit(args) -> int:
    timings = {}
    t0 = time.perf_counter()
    pair, desc = load_pair(args)
    cfg, origin = resolve_config(args, pair.source.d)
    timings["load"] = time.perf_counter() - t0

    grid_info = None
    if args.grid or args.grid_file:
        grid = None
        if args.grid_file:
            grid = json.loads(Path(args.grid_file).read_text(encoding="utf-8"))
            grid = {_FILE_ALIASES.get(k, k): v for k, v in grid.items()}
        t = time.perf_counter()
        results, best = grid_search(pair, cfg, grid, jobs=args.jobs)
        timings["grid"] = time.perf_counter() - t
        grid_info = {
            "criterion": "target_accuracy" if pair.target_truth is not None else "objective",
            "n_configs": len(results),
            "best": {"config": asdict(best.config), "accuracy": best.accuracy,
                     "objective": best.objective},
            "results": [
                {"config": asdict(r.config), "accuracy": r.accuracy, "objective": r.objective}
                for r in results
            ],
        }
        cfg = best.config
        origin = {k: "grid" for k in origin}

    t = time.perf_counter()
    model = fit(pair, cfg)
    timings["fit"] = time.perf_counter() - t
    t = time.perf_counter()
    baselines = _baselines(pair, cfg)
    timings["baselines"] = time.perf_counter() - t

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    report = _fit_report(pair, desc, cfg, origin, model)
    report["baselines"] = baselines
    report["model_file"] = "model.json"
    if grid_info is not None:
        report["grid"] = grid_info
    if args.write_predictions:
        save_labels(_plain_labels(model.target_predictions), out / "target_predictions.csv",
                    args.label_column)
    _write_json(out / "report.json", report)
    timings["total"] = time.perf_counter() - t0
    # kept apart so report.json is reproducible byte for byte
    _write_json(out / "timings.json", timings)
    acc = report["target_accuracy"]
    print(f"model written to {out / 'model.json'}" + (f"; target accuracy {acc:.4f}" if acc is not None else ""))
    return 0


def cmd_transform(args) -> int:
    model = load_model(args.model)
    label_col = args.label_column if args.label_column in _header(args.data) else None
    data = load_dataset(args.data, label_col)
    if data.d != model.d:
        raise InputError(f"data has d={data.d}, model expects d={model.d}")
    if args.domain not in ("source", "target"):
        raise InputError(f"unknown domain {args.domain!r}; use 'source' or 'target'")
    z = transform(model, data, args.domain)
    save_dataset(Dataset(z), args.out, feature_names=[f"z{j + 1}" for j in range(z.shape[1])])
    print(f"wrote {z.shape[0]} x {z.shape[1]} to {args.out}")
    return 0


def cmd_eval(args) -> int:
    train = load_dataset(args.train)
    labels = load_labels(args.labels, args.label_column)
    test = load_dataset(args.test)
    truth = load_labels(args.truth, args.label_column)
    if len(labels) != train.n:
        raise InputError(f"{len(labels)} labels for {train.n} training rows")
    if len(truth) != test.n:
        raise InputError(f"{len(truth)} truth labels for {test.n} test rows")
    if train.d != test.d:
        raise InputError(f"train d={train.d} differs from test d={test.d}")
    pred = knn1_predict(train.features, labels, test.features)
    acc = evaluate(pred, truth)
    if args.predictions:
        save_labels(pred, args.predictions, args.label_column)
    print(json.dumps({"accuracy": acc, "n_test": test.n, "classifier": "1nn"}, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    pair = make_synthetic_shift(args.seed, args.n_per_class, tuple(args.shift), args.rotation)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(pair.source, out / "source.csv", args.label_column)
    save_dataset(pair.target, out / "target.csv")
    save_labels(pair.target_truth, out / "target_truth.csv", args.label_column)
    print(f"wrote source.csv ({pair.source.n} rows), target.csv, target_truth.csv to {out}")
    return 0


def cmd_bench(args) -> int:
    pair, desc = load_pair(args)
    if pair.target_truth is None:
        raise InputError("bench needs target ground truth (--truth or a labeled target file)")
    cfg, origin = resolve_config(args, pair.source.d)
    stages = {}
    t = time.perf_counter()
    raw = evaluate(baseline_raw(pair, "none"), pair.target_truth)
    stages["knn_raw"] = time.perf_counter() - t
    t = time.perf_counter()
    std = evaluate(baseline_raw(pair, cfg.standardize), pair.target_truth)
    stages["knn_standardized"] = time.perf_counter() - t
    t = time.perf_counter()
    pca = evaluate(baseline_pca(pair, cfg.dim, cfg.standardize), pair.target_truth)
    stages["knn_pca"] = time.perf_counter() - t
    t = time.perf_counter()
    model = fit(pair, cfg)
    stages["fit"] = time.perf_counter() - t
    report = _fit_report(pair, desc, cfg, origin, model)
    report["baselines"] = {"knn_raw": raw, "knn_standardized": std, "knn_pca": pca}
    report["timings"] = stages
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _add_data_args(p):
    p.add_argument("--source", help="labeled source CSV")
    p.add_argument("--target", help="target CSV (a label column, if present, is held out as truth)")
    p.add_argument("--truth", help="CSV holding target ground truth, evaluation only")
    p.add_argument("--label-column", default="label")
    p.add_argument("--synthetic", action="store_true", help="use the bundled synthetic pair")
    p.add_argument("--seed", type=int, help="seed for --synthetic (default 7)")


def _add_config_args(p):
    p.add_argument("--config", help="JSON config file; flags take precedence")
    p.add_argument("--rules", type=int, help="number of fuzzy rules K (default 3)")
    p.add_argument("--dim", type=int, help="output dimension m (default min(20, K(d+1)))")
    p.add_argument("--alpha", type=float, help="ridge weight, must be > 0 (default 0.1)")
    p.add_argument("--beta", type=float, help="scatter weight (default 0.01)")
    p.add_argument("--lambda", dest="lam", type=float, help="target variance weight (default 0.01)")
    p.add_argument("--iters", type=int, help="pseudo-label iterations T (default 5)")
    p.add_argument("--standardize", choices=["per-domain", "pooled", "none"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trltsk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model and write model.json + report.json")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--grid", action="store_true", help="sweep the default parameter grid")
    p.add_argument("--grid-file", help="JSON mapping parameter -> list of values")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--write-predictions", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("transform", help="map a dataset into the learned feature space")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--domain", required=True, help="source or target")
    p.add_argument("--label-column", default="label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("eval", help="1NN accuracy of test rows against labeled training rows")
    p.add_argument("--train", required=True)
    p.add_argument("--labels", required=True, help="CSV with the training labels")
    p.add_argument("--test", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--predictions", help="optional CSV to write predictions to")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic shifted pair")
    p.add_argument("--seed", type=int, default=SYNTH_DEFAULTS["seed"])
    p.add_argument("--n-per-class", type=int, default=SYNTH_DEFAULTS["n_per_class"])
    p.add_argument("--shift", type=float, nargs=2, default=list(SYNTH_DEFAULTS["shift"]))
    p.add_argument("--rotation", type=float, default=SYNTH_DEFAULTS["rotation"])
    p.add_argument("--label-column", default="label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="baselines and a fit with per-stage timings")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InputError, DataFormatError, ConfigError, FileNotFoundError, ValueError,
            TypeError, KeyError) as exc:
        print(f"error[input]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error[numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
