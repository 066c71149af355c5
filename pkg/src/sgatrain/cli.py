"""Command-line front end: generate / train / eval / saliency / ablate.

Exit codes: 0 success, 2 input or validation error, 3 numeric failure
during training. Diagnostics go to stderr; results go to files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .ablation import (
    ablate,
    write_aggregate_csv,
    write_cells_csv,
    write_table_csv,
)
from .data import load_dataset, save_dataset, generate
from .errors import ConfigError, NumericBlowupError
from .masking import SaliencyMap
from .metrics import (
    evaluate,
    roc_points,
    positive_scores,
    saliency_overlap,
    write_eval_report,
    write_roc_csv,
)
from .network import input_gradient, load_model, save_model
from .pgm import saliency_to_pixels, write_pgm
from .runconfig import load_config
from .training import train, write_train_log

SPLIT_FILES = ("train.sgad", "val.sgad", "test_iid.sgad", "test_ood.sgad")


def cmd_generate(args) -> int:
    config = load_config(args.config)
    splits = generate(config.to_synthetic_spec())
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, ds in zip(SPLIT_FILES, splits):
        save_dataset(ds, out_dir / name)
        print(f"{name}: {ds.n} samples x {ds.dim} features")
    return 0


def _load_splits(data_dir):
    data_dir = Path(data_dir)
    return tuple(load_dataset(data_dir / name) for name in SPLIT_FILES)


def cmd_train(args) -> int:
    config = load_config(args.config)
    train_set, val_set, _, _ = _load_splits(args.data_dir)
    params, log = train(config.to_train_config(), train_set, val_set)
    model_path = Path(args.model_out)
    if model_path.parent != Path(""):
        model_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(params, model_path)
    log_path = args.log_out or str(model_path) + ".train.csv"
    write_train_log(log, log_path)
    print(f"model: {model_path}")
    print(f"log: {log_path} (selected epoch {log.selected_epoch})")
    return 0


def cmd_eval(args) -> int:
    params = load_model(args.model)
    test_iid = load_dataset(args.test_iid)
    test_ood = load_dataset(args.test_ood)
    report = evaluate(params, test_iid, test_ood)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_eval_report(report, out_dir / "eval_report.csv")
    for name, ds in (("roc_iid.csv", test_iid), ("roc_ood.csv", test_ood)):
        points = roc_points(positive_scores(params, ds.features), ds.labels)
        write_roc_csv(points, out_dir / name)
    print(
        f"auroc_iid={report.auroc_iid:.4f} auroc_ood={report.auroc_ood:.4f} "
        f"difference={report.difference:+.4f} average={report.average:.4f}"
    )
    return 0


def cmd_saliency(args) -> int:
    params = load_model(args.model)
    dataset = load_dataset(args.dataset)
    indices = [int(i) for i in args.indices.split(",") if i.strip()]
    if not indices:
        raise ConfigError("no sample indices given")
    bad = [i for i in indices if not 0 <= i < dataset.n]
    if bad:
        raise ConfigError(f"sample indices out of range (0..{dataset.n - 1}): {bad}")
    side = int(np.sqrt(dataset.dim))
    if side * side != dataset.dim:
        raise ConfigError(f"dataset features ({dataset.dim}) are not a square image")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in indices:
        label = int(dataset.labels[i])
        grad = input_gradient(params, dataset.features[i : i + 1], label)
        write_pgm(
            saliency_to_pixels(grad).reshape(side, side),
            out_dir / f"saliency_{i:04d}.pgm",
        )
        overlap = saliency_overlap(
            SaliencyMap(grad, label), dataset.relevant_mask, args.q
        )
        rows.append((i, overlap))
    with open(out_dir / "overlap.csv", "w") as fh:
        fh.write("sample_index,overlap\n")
        for i, overlap in rows:
            fh.write(f"{i},{overlap!r}\n")
    print(f"wrote {len(rows)} heatmaps to {out_dir}")
    return 0


def cmd_ablate(args) -> int:
    config = load_config(args.config)
    datasets = _load_splits(args.data_dir)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    report = ablate(config.to_train_config(), args.parameter, values, seeds, datasets)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = args.parameter
    write_cells_csv(report, out_dir / f"{prefix}_cells.csv")
    write_aggregate_csv(report, out_dir / f"{prefix}_aggregate.csv")
    write_table_csv(report, out_dir / f"{prefix}_table.csv")
    print(f"best {args.parameter} by average AUROC: {report.best_value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgatrain",
        description="Saliency-guided adversarial training on a planted-shortcut benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate the four dataset splits")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train per the config's method")
    p.add_argument("--config", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--log-out", default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on IID and OOD test sets")
    p.add_argument("--model", required=True)
    p.add_argument("--test-iid", required=True)
    p.add_argument("--test-ood", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("saliency", help="export saliency heatmaps and overlap scores")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--indices", required=True, help="comma-separated sample indices")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--q", type=float, default=0.1)
    p.set_defaults(fn=cmd_saliency)

    p = sub.add_parser("ablate", help="sweep k_fraction or lambda over seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--parameter", required=True, choices=("k_fraction", "lambda"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", required=True, help="comma-separated seeds")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NumericBlowupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
