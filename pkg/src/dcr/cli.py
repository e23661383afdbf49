"""Command-line front end: dataset synthesis, training, ablation sweeps, distribution dumps.

Exit codes: 0 success, 1 internal or numerical failure, 2 usage/input error.
Every command is deterministic given identical flags; timestamps appear only
in the manifest's metadata field. Report commands render a PNG figure next
to each delimited output unless --no-plot is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .data import (
    dataset_from_manifest,
    generate_dataset,
    load_csv,
    load_manifest,
    save_csv,
    save_manifest,
)
from .errors import ConfigError, DataError, DcrError
from .experiments import METHODS, SWEEP_AXES, run_experiment, sweep_config
from .training import TrainConfig

RANGES = {"pm1": (-1.0, 1.0), "unit": (0.0, 1.0)}


def _add_generation_flags(parser, required_out=True):
    parser.add_argument("--n", type=int, default=2000, help="number of samples")
    parser.add_argument("--dim", type=int, default=16, help="feature dimension")
    parser.add_argument("--k", type=int, default=4, help="number of annotators")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--shift-scale", type=float, default=0.5,
                        help="annotator mean shift, as a fraction of the true-score span")
    parser.add_argument("--perturb-scale", type=float, default=0.05,
                        help="local perturbation, as a fraction of the true-score span")
    parser.add_argument("--range", choices=sorted(RANGES), default="pm1",
                        help="label output range: pm1 = [-1,1], unit = [0,1]")
    parser.add_argument("--kind", choices=("linear", "mlp-random"), default="linear",
                        help="latent ground-truth function family")
    parser.add_argument("--noise", type=float, default=0.0, help="latent score noise level")
    if required_out:
        parser.add_argument("--out", required=True, help="output directory")


def _add_training_flags(parser):
    parser.add_argument("--method", choices=METHODS, default="dcr")
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--batch", type=int, default=128)
    parser.add_argument("--lr", type=float, default=0.01)
    parser.add_argument("--momentum", type=float, default=0.9)
    parser.add_argument("--weight-decay", type=float, default=5e-4)
    parser.add_argument("--gamma", type=float, default=0.0, help="ranking margin")
    parser.add_argument("--lambda1", type=float, default=0.2,
                        help="weight of the distribution regularizer")
    parser.add_argument("--lambda2", type=float, default=0.2,
                        help="weight of the annotator cross-entropy")
    parser.add_argument("--lambda3", type=float, default=0.2,
                        help="weight of the annotator confusion term")
    parser.add_argument("--adv-mode", choices=("alternate", "grl"), default="alternate")
    parser.add_argument("--eval-interval", type=int, default=20)
    parser.add_argument("--split-fraction", type=float, default=0.8)
    parser.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def _config_from_args(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        margin=args.gamma,
        reg_weight=args.lambda1,
        ce_weight=args.lambda2,
        confusion_weight=args.lambda3,
        adversarial_mode=args.adv_mode,
        seed=args.seed,
        eval_interval=args.eval_interval,
    )


def _generate_from_args(args):
    low, high = RANGES[args.range]
    return generate_dataset(
        n=args.n, dim=args.dim, annotators=args.k, seed=args.seed,
        shift_scale=args.shift_scale, perturb_scale=args.perturb_scale,
        low=low, high=high, kind=args.kind, noise=args.noise,
    )


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.manifest:
        manifest = load_manifest(args.manifest)
        dataset = dataset_from_manifest(manifest)
    else:
        dataset, manifest = _generate_from_args(args)
    manifest.setdefault("metadata", {})["created"] = datetime.now(timezone.utc).isoformat()
    save_csv(dataset, out / "dataset.csv")
    save_manifest(manifest, out / "manifest.json")
    print(f"wrote {out / 'dataset.csv'} ({dataset.size} samples, {dataset.dim} features)")
    print(f"{'annotator':>9} {'count':>6} {'mean':>9} {'std':>9} {'min':>9} {'max':>9}")
    for k in dataset.annotators():
        sub = dataset.labels[dataset.annotator_ids == k]
        print(f"{k:>9d} {len(sub):>6d} {sub.mean():>9.4f} {sub.std():>9.4f} "
              f"{sub.min():>9.4f} {sub.max():>9.4f}")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_csv(args.data)
    config = _config_from_args(args)
    result = run_experiment(dataset, args.method, config,
                            split_fraction=args.split_fraction,
                            checkpoint_path=out / "checkpoint.json")
    with (out / "history.jsonl").open("w", encoding="utf-8") as fh:
        for record in result.history:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    _write_json(out / "metrics.json", {
        "method": result.method,
        "config": asdict(result.config),
        "metrics": result.report.to_dict(),
    })
    if not args.no_plot and result.history:
        from .plots import save_training_curves

        save_training_curves(result.history, out / "training_curves.png")
    row = result.report.csv_row()
    print(f"method={result.method} PRA={row['pra']:.4f} "
          f"SROCC={row['srocc']:.4f} PLCC={row['plcc']:.4f}")
    return 0


def _parse_values(raw: str, axis: str) -> list[float]:
    try:
        values = [float(v) for v in raw.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"cannot parse sweep values {raw!r}") from None
    if axis != "none" and not values:
        raise ConfigError("sweep needs at least one value")
    if axis == "k" and any(v != int(v) or v < 1 for v in values):
        raise ConfigError(f"annotator counts must be positive integers, got {raw!r}")
    return values


def cmd_ablate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}, expected one of {METHODS}")
    values = _parse_values(args.values, args.sweep) if args.sweep != "none" else [None]
    base_config = _config_from_args(args)

    if args.sweep != "k":
        if args.data:
            dataset = load_csv(args.data)
        else:
            dataset, _ = _generate_from_args(args)

    rows = []
    for value in values:
        if args.sweep == "k":
            args_k = argparse.Namespace(**vars(args))
            args_k.k = int(value)
            dataset, _ = _generate_from_args(args_k)
        config = base_config if value is None else sweep_config(base_config, args.sweep, value)
        for method in methods:
            result = run_experiment(dataset, method, config,
                                    split_fraction=args.split_fraction)
            rows.append({
                "method": method,
                "sweep": args.sweep,
                "value": "" if value is None else value,
                **result.report.csv_row(),
            })
    table = out / "ablation.csv"
    with table.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["method", "sweep", "value",
                                                "pra", "srocc", "plcc"])
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
    if not args.no_plot:
        from .plots import save_ablation_chart

        save_ablation_chart(rows, args.sweep, out / "ablation.png")
    for row in rows:
        print(f"{row['method']:>12} {args.sweep}={row['value']} "
              f"PRA={row['pra']:.4f} SROCC={row['srocc']:.4f} PLCC={row['plcc']:.4f}")
    return 0


def cmd_distributions(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_csv(args.data)
    edges = np.linspace(dataset.labels.min(), dataset.labels.max(), args.bins + 1)
    blocks = {}
    with (out / "histogram.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["annotator", "bin_index", "bin_left", "bin_right", "count"])
        for k in dataset.annotators():
            sub = dataset.labels[dataset.annotator_ids == k]
            counts, _ = np.histogram(sub, bins=edges)
            blocks[int(k)] = (edges.tolist(), counts.tolist())
            for b, count in enumerate(counts):
                writer.writerow([int(k), b, repr(float(edges[b])),
                                 repr(float(edges[b + 1])), int(count)])
    if not args.no_plot:
        from .plots import save_label_histograms

        save_label_histograms(blocks, out / "histogram.png")
    print(f"wrote {out / 'histogram.csv'} ({len(blocks)} annotators, {args.bins} bins)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcr",
        description="Disjoint contrastive regression experiments on synthetic annotator data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="synthesize a biased multi-annotator dataset")
    _add_generation_flags(p_gen)
    p_gen.add_argument("--manifest", default=None,
                       help="regenerate from an existing manifest instead of flags")
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", help="train one method on a dataset CSV")
    p_train.add_argument("--data", required=True, help="dataset CSV path")
    p_train.add_argument("--seed", type=int, default=0, help="master seed")
    p_train.add_argument("--out", required=True, help="output directory")
    _add_training_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_abl = sub.add_parser("ablate", help="sweep a knob across methods, one CSV row per run")
    p_abl.add_argument("--data", default=None,
                       help="dataset CSV (ignored for the k sweep, which regenerates)")
    p_abl.add_argument("--sweep", choices=SWEEP_AXES, default="none")
    p_abl.add_argument("--values", default="", help="comma-separated sweep values")
    p_abl.add_argument("--methods", default="dcr", help="comma-separated method tags")
    _add_generation_flags(p_abl, required_out=False)
    p_abl.add_argument("--out", required=True, help="output directory")
    _add_training_flags(p_abl)
    p_abl.set_defaults(func=cmd_ablate)

    p_dist = sub.add_parser("distributions", help="per-annotator label histogram dump")
    p_dist.add_argument("--data", required=True, help="dataset CSV path")
    p_dist.add_argument("--bins", type=int, default=20)
    p_dist.add_argument("--out", required=True, help="output directory")
    p_dist.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p_dist.set_defaults(func=cmd_distributions)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DcrError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
