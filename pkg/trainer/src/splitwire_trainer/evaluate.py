"""Accuracy-grid evaluation writing the planner's CSV schema."""

from __future__ import annotations

import csv
import io
from dataclasses import replace

import torch

from .config import TrainConfig
from .data import cifar_loaders
from .models import build_model
from .train import evaluate_top1

CSV_HEADER = ("model", "split", "n_c", "snr_db", "top1", "provenance")


def eval_grid(configs, state_dicts=None, loaders=None, provenance="trainer-eval") -> str:
    """Evaluate each configuration and emit `model,split,n_c,snr_db,top1` CSV.

    state_dicts optionally maps config index -> trained state dict; absent
    entries evaluate the freshly initialized model (only useful for schema
    smoke tests). loaders overrides the dataset pipeline.
    """
    rows = []
    for i, config in enumerate(configs):
        if config.split is None:
            raise ValueError(
                "the accuracy-table schema records split configurations; evaluate the unsplit "
                "baseline separately and note it in the run manifest"
            )
        torch.manual_seed(config.seed)
        model, _ = build_model(config)
        if state_dicts and i in state_dicts:
            model.load_state_dict(state_dicts[i])
        _, test_loader = loaders if loaders is not None else cifar_loaders(config)
        top1 = evaluate_top1(model, test_loader, config.device, config.limit_eval_batches)
        snr = f"{config.snr_db:g}" if config.snr_db is not None else "inf"
        rows.append((config.model, config.split, config.n_c, snr, f"{top1:.4f}", provenance))

    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(CSV_HEADER)
    writer.writerows(rows)
    return out.getvalue()


def snr_sweep_configs(base: TrainConfig, snrs) -> list:
    return [replace(base, snr_db=snr) for snr in snrs]
