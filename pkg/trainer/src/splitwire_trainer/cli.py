"""Trainer command line: train | export | eval-grid.

Outputs land in the inference package's formats: weight containers for the
engine and accuracy CSVs for the planner.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import torch

from .config import TrainConfig
from .evaluate import eval_grid, snr_sweep_configs
from .export import export_weights, write_manifest
from .models import build_model
from .train import train


def _config_from(args) -> TrainConfig:
    return TrainConfig(
        dataset=args.dataset,
        model=args.model,
        split=args.split,
        n_c=args.n_c,
        decompress_stages=args.stages,
        snr_db=args.snr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        seed=args.seed,
        data_dir=args.data_dir,
        device=args.device,
        num_workers=args.num_workers,
        limit_train_batches=args.limit_train_batches,
        limit_eval_batches=args.limit_eval_batches,
    )


def _add_config_args(p):
    p.add_argument("--dataset", choices=("cifar10", "cifar100"), default="cifar100")
    p.add_argument("--model", choices=("resnet18", "resnet34"), default="resnet34")
    p.add_argument("--split", default=None, help="SP-1 .. SP-5; omit to train the unsplit baseline")
    p.add_argument("--n-c", type=int, default=1024)
    p.add_argument("--stages", type=int, choices=(1, 2), default=2)
    p.add_argument("--snr", type=float, default=None, help="train-time channel SNR in dB; omit for no noise")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data-dir", default="./data")
    p.add_argument("--device", default="cpu")
    p.add_argument("--num-workers", type=int, default=2)
    p.add_argument("--limit-train-batches", type=int, default=0, help="smoke runs: cap batches per epoch")
    p.add_argument("--limit-eval-batches", type=int, default=0)


def cmd_train(args) -> int:
    config = _config_from(args)
    result = train(config)
    print(f"best top1 {result.best_top1:.4f} at epoch {result.best_epoch}")
    outputs = []
    if args.out:
        export_weights(result.model, args.out)
        outputs.append(args.out)
        print(f"wrote {args.out}")
    if args.checkpoint:
        torch.save({"state_dict": result.model.state_dict(), "best_top1": result.best_top1,
                    "config": config.to_manifest()}, args.checkpoint)
        outputs.append(args.checkpoint)
    if args.manifest:
        write_manifest(args.manifest, config, outputs)
    return 0


def cmd_export(args) -> int:
    config = _config_from(args)
    model, _ = build_model(config)
    payload = torch.load(args.checkpoint, map_location="cpu", weights_only=False)
    state = payload.get("state_dict", payload) if isinstance(payload, dict) else payload
    model.load_state_dict(state)
    export_weights(model, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_eval_grid(args) -> int:
    base = _config_from(args)
    snrs = [float(s) for s in args.snrs.split(",") if s.strip()]
    configs = []
    for split in args.splits.split(","):
        for n_c in (int(v) for v in args.n_cs.split(",")):
            configs.extend(snr_sweep_configs(replace(base, split=split.strip(), n_c=n_c), snrs))
    state_dicts = None
    if args.checkpoint:
        payload = torch.load(args.checkpoint, map_location="cpu", weights_only=False)
        state = payload.get("state_dict", payload) if isinstance(payload, dict) else payload
        state_dicts = {i: state for i in range(len(configs))}
    csv_text = eval_grid(configs, state_dicts=state_dicts, provenance=args.provenance)
    Path(args.out).write_text(csv_text)
    print(f"wrote {args.out} ({len(configs)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splitwire-trainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration and export artifacts")
    _add_config_args(p)
    p.add_argument("--out", default=None, help="weight container path (.swwt)")
    p.add_argument("--checkpoint", default=None, help="torch checkpoint path (.pt)")
    p.add_argument("--manifest", default=None, help="run manifest JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export", help="convert a torch checkpoint into a weight container")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval-grid", help="accuracy sweep over (split, n_c, snr) into the planner CSV schema")
    _add_config_args(p)
    p.add_argument("--splits", default="SP-2,SP-3,SP-4")
    p.add_argument("--n-cs", default="1024")
    p.add_argument("--snrs", default="0,3,5")
    p.add_argument("--checkpoint", default=None, help="evaluate these trained weights in every cell")
    p.add_argument("--provenance", default="trainer-eval")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_grid)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
