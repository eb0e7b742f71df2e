"""Command-line entry points.

Subcommands: ``generate``, ``train``, ``table1``, ``heatmap``,
``toy-multilabel``, ``theory``. Exit codes: 0 success, 2 validation error,
3 training failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bags import MILConfig
from .errors import MillabError, TrainingError, ValidationError
from .experiments import (
    DEFAULT_GRID_RESOLUTION,
    DEFAULT_GRID_WINDOW,
    ExperimentConfig,
    ToyMultiLabelConfig,
    make_arch,
    render_heatmap,
    run_table1,
    run_theory_report,
    run_toy_multilabel,
    save_dataset,
    write_manifest,
    _ensure_dir,
)
from .metrics import average_precision
from .nets import TrainConfig, forward, load_checkpoint, save_checkpoint, train
from .synth import SynthSpec, generate


def _add_spec_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bag-size", type=int, default=100, help="instances per bag")
    parser.add_argument(
        "--positives-per-bag", type=int, default=1, help="positives in each positive bag"
    )
    parser.add_argument(
        "--imbalance", type=float, default=20.0, help="negative/positive bag ratio"
    )
    parser.add_argument("--pos-bags", type=int, default=100, help="positive bag count")
    parser.add_argument("--skew", type=float, default=0.8, help="right-line fraction of positive-bag negatives")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scale", type=float, default=1.0, help="multiplier on the positive-bag count")


def _spec_from_args(args: argparse.Namespace) -> SynthSpec:
    return SynthSpec(
        config=MILConfig(
            bag_size=args.bag_size,
            positives_per_bag=args.positives_per_bag,
            imbalance=args.imbalance,
            n_pos_bags=args.pos_bags,
        ),
        skew=args.skew,
        seed=args.seed,
        scale=args.scale,
    )


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def cmd_generate(args: argparse.Namespace) -> int:
    out = save_dataset(_spec_from_args(args), args.out)
    print(f"wrote dataset to {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    dataset = generate(spec)
    config = TrainConfig(
        epochs=args.epochs,
        learning_rates=_parse_floats(args.lrs),
    )
    from .losses import analytic_si_rates

    rates = analytic_si_rates(spec.scaled_config) if args.loss == "uc" else None
    model = train(
        dataset.training_view(),
        loss=args.loss,
        arch=make_arch(args.arch),
        config=config,
        seed=args.seed,
        rates=rates,
    )
    scores = forward(model.params, dataset.features)
    ap = average_precision(scores, dataset.truth_labels).ap
    out = _ensure_dir(args.out)
    run_config = {
        "spec": spec.to_json_dict(),
        "loss": args.loss,
        "arch": args.arch,
        "epochs": args.epochs,
        "learning_rates": list(config.learning_rates),
        "seed": args.seed,
    }
    from .experiments import config_digest

    save_checkpoint(model, out / "checkpoint.json", config_digest(run_config))
    (out / "train_result.json").write_text(
        json.dumps(
            {
                "ap": ap,
                "chosen_lr": model.chosen_lr,
                "final_train_loss": model.final_train_loss,
                "diagnostics": list(model.diagnostics),
            },
            indent=2,
        )
        + "\n"
    )
    write_manifest(out, "train", run_config)
    print(
        f"{args.loss}/{args.arch}: ap={ap:.4f} lr={model.chosen_lr:g} "
        f"final_loss={model.final_train_loss:.6f}"
    )
    return 0


def cmd_table1(args: argparse.Namespace) -> int:
    from dataclasses import replace

    if args.config:
        config = ExperimentConfig.from_json_dict(
            json.loads(Path(args.config).read_text())
        )
    else:
        config = ExperimentConfig(spec=SynthSpec(config=MILConfig(
            bag_size=100, positives_per_bag=1, imbalance=20.0, n_pos_bags=100)))

    spec = config.spec
    spec_overrides = {}
    if args.bag_size is not None or args.positives_per_bag is not None \
            or args.imbalance is not None or args.pos_bags is not None:
        spec_overrides["config"] = MILConfig(
            bag_size=args.bag_size or spec.config.bag_size,
            positives_per_bag=args.positives_per_bag or spec.config.positives_per_bag,
            imbalance=args.imbalance or spec.config.imbalance,
            n_pos_bags=args.pos_bags or spec.config.n_pos_bags,
        )
    if args.skew is not None:
        spec_overrides["skew"] = args.skew
    if args.scale is not None:
        spec_overrides["scale"] = args.scale
    if args.seed is not None:
        spec_overrides["seed"] = args.seed
    if spec_overrides:
        spec = replace(spec, **spec_overrides)

    train_cfg = config.train
    if args.epochs is not None:
        train_cfg = replace(train_cfg, epochs=args.epochs)

    updates: dict = {"spec": spec, "train": train_cfg, "n_workers": args.workers}
    if args.seeds is not None:
        updates["seeds"] = _parse_ints(args.seeds)
    if args.losses is not None:
        updates["losses"] = tuple(args.losses.split(","))
    if args.archs is not None:
        updates["archs"] = tuple(args.archs.split(","))
    config = replace(config, **updates)

    table = run_table1(config, output_dir=args.out)
    print(table.render_text())
    if any(c.failed for c in table.cells):
        return 3
    return 0


def cmd_heatmap(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    out = _ensure_dir(args.out)
    x0, x1, y0, y1 = args.window
    nx, ny = args.resolution
    render_heatmap(
        model.params,
        x_range=(x0, x1),
        y_range=(y0, y1),
        resolution=(nx, ny),
        out_basename=out / args.name,
    )
    write_manifest(
        out,
        "heatmap",
        {
            "checkpoint": str(args.checkpoint),
            "window": list(args.window),
            "resolution": list(args.resolution),
        },
    )
    print(f"wrote heatmap files to {out}/{args.name}.{{csv,pgm,png}}")
    return 0


def cmd_toy_multilabel(args: argparse.Namespace) -> int:
    cfg = ToyMultiLabelConfig(
        n_labels=args.labels,
        bag_size=args.bag_size,
        positives_per_bag=args.positives_per_bag,
        imbalances=_parse_floats(args.imbalances) if args.imbalances else (),
        n_bags=args.bags,
        skew=args.skew,
        seed=args.seed,
        train=TrainConfig(epochs=args.epochs, learning_rates=_parse_floats(args.lrs)),
    )
    result = run_toy_multilabel(cfg, output_dir=args.out)
    for name, value in result.mean_ap.items():
        print(f"{name}: bag-level mAP = {value:.4f}")
    print(f"gap = {result.gap:.4f}")
    return 0


def cmd_theory(args: argparse.Namespace) -> int:
    report = run_theory_report(_spec_from_args(args), output_dir=args.out)
    print(json.dumps(report, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="millab",
        description="Single-instance learning on unbalanced multi-instance data: "
        "synthetic benchmark, training protocol, theory checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset (CSV + spec.json)")
    _add_spec_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one (loss, arch) pair and save a checkpoint")
    _add_spec_flags(p)
    p.add_argument("--loss", choices=("si", "uc"), default="si")
    p.add_argument("--arch", choices=("linear", "two_layer"), default="two_layer")
    p.add_argument("--epochs", type=int, default=100_000)
    p.add_argument("--lrs", default="1e-4,1e-5,1e-6", help="comma-separated learning rates")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("table1", help="run the full AP table over (loss, arch, lr, seed)")
    p.add_argument("--config", help="JSON file with a full experiment config")
    p.add_argument("--bag-size", type=int, default=None)
    p.add_argument("--positives-per-bag", type=int, default=None)
    p.add_argument("--imbalance", type=float, default=None)
    p.add_argument("--pos-bags", type=int, default=None)
    p.add_argument("--skew", type=float, default=None)
    p.add_argument("--seed", type=int, default=None, help="override the data seed")
    p.add_argument("--scale", type=float, default=None, help="override the size multiplier")
    p.add_argument("--seeds", default=None, help="comma-separated training seed list")
    p.add_argument("--epochs", type=int, default=None, help="override epoch budget")
    p.add_argument("--losses", default=None, help="comma-separated subset of si,uc")
    p.add_argument("--archs", default=None, help="comma-separated subset of linear,two_layer")
    p.add_argument("--workers", type=int, default=0, help="process pool size (0 = cpu count)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("heatmap", help="render score heatmap files for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="heatmap", help="output file basename")
    p.add_argument(
        "--window",
        type=float,
        nargs=4,
        default=[*DEFAULT_GRID_WINDOW[0], *DEFAULT_GRID_WINDOW[1]],
        metavar=("X0", "X1", "Y0", "Y1"),
    )
    p.add_argument(
        "--resolution",
        type=int,
        nargs=2,
        default=list(DEFAULT_GRID_RESOLUTION),
        metavar=("NX", "NY"),
    )
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser(
        "toy-multilabel", help="SI vs soft-NOR bag objectives on a toy multi-label benchmark"
    )
    p.add_argument("--labels", type=int, default=5)
    p.add_argument("--bags", type=int, default=210)
    p.add_argument("--bag-size", type=int, default=20)
    p.add_argument("--positives-per-bag", type=int, default=2)
    p.add_argument("--imbalances", help="comma-separated per-label imbalance ratios")
    p.add_argument("--skew", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=4000)
    p.add_argument("--lrs", default="3e-3,1e-3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_toy_multilabel)

    p = sub.add_parser("theory", help="closed-form theorem quantities for a spec")
    _add_spec_flags(p)
    p.add_argument("--out", help="also write theory_report.json + manifest here")
    p.set_defaults(func=cmd_theory)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return 3
    except (MillabError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
