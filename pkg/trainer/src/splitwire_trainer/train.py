"""Training loop: SGD with cosine annealing, best-checkpoint tracking."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import torch
from torch import nn

from .config import TrainConfig
from .data import cifar_loaders
from .models import build_model


def set_deterministic(seed: int):
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)
    if torch.cuda.is_available():  # pragma: no cover
        torch.cuda.manual_seed_all(seed)
        torch.backends.cudnn.benchmark = False


@dataclass
class TrainResult:
    best_top1: float
    best_epoch: int
    history: list
    model: nn.Module
    description: object  # the splitwire graph or split model that was trained


@torch.no_grad()
def evaluate_top1(model, loader, device="cpu", limit_batches=0) -> float:
    model.eval()
    correct = total = 0
    for i, (x, y) in enumerate(loader):
        if limit_batches and i >= limit_batches:
            break
        logits = model(x.to(device))
        correct += int((logits.argmax(dim=1).cpu() == y).sum())
        total += len(y)
    return correct / max(total, 1)


def train(config: TrainConfig, loaders=None) -> TrainResult:
    """Train per the configured recipe and keep the best validation weights.

    loaders overrides the CIFAR pipeline (used by smoke tests); the default
    requires the dataset on disk.
    """
    set_deterministic(config.seed)
    model, description = build_model(config)
    device = torch.device(config.device)
    model.to(device)

    train_loader, test_loader = loaders if loaders is not None else cifar_loaders(config)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=config.lr, momentum=config.momentum, weight_decay=config.weight_decay
    )
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=config.epochs)
    criterion = nn.CrossEntropyLoss()

    best_top1, best_epoch, best_state = -1.0, -1, None
    history = []
    for epoch in range(config.epochs):
        model.train()
        running, seen = 0.0, 0
        for i, (x, y) in enumerate(train_loader):
            if config.limit_train_batches and i >= config.limit_train_batches:
                break
            optimizer.zero_grad()
            loss = criterion(model(x.to(device)), y.to(device))
            loss.backward()
            optimizer.step()
            running += float(loss) * len(y)
            seen += len(y)
        scheduler.step()

        top1 = evaluate_top1(model, test_loader, device, config.limit_eval_batches)
        history.append({"epoch": epoch, "loss": running / max(seen, 1), "top1": top1})
        if top1 > best_top1:
            best_top1, best_epoch = top1, epoch
            best_state = copy.deepcopy(model.state_dict())

    if best_state is not None:
        model.load_state_dict(best_state)
    return TrainResult(best_top1=best_top1, best_epoch=best_epoch, history=history,
                       model=model, description=description)
