"""Dataset loading: CIFAR-10/100 from a local directory, plus a synthetic
set for smoke tests."""

from __future__ import annotations

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset


def cifar_loaders(config):
    """Train/test loaders with pad-4 random crop, horizontal flip, and
    per-channel normalization. The dataset must already exist locally."""
    import torchvision
    from torchvision import transforms

    mean, std = config.stats()
    train_tf = [transforms.ToTensor(), transforms.Normalize(mean, std)]
    if config.augment:
        train_tf = [transforms.RandomCrop(32, padding=4), transforms.RandomHorizontalFlip()] + train_tf
    test_tf = [transforms.ToTensor(), transforms.Normalize(mean, std)]

    cls = torchvision.datasets.CIFAR10 if config.dataset == "cifar10" else torchvision.datasets.CIFAR100
    try:
        train = cls(config.data_dir, train=True, download=False, transform=transforms.Compose(train_tf))
        test = cls(config.data_dir, train=False, download=False, transform=transforms.Compose(test_tf))
    except RuntimeError as exc:
        raise FileNotFoundError(
            f"{config.dataset} not found under {config.data_dir!r}; place the torchvision "
            f"{config.dataset} archive there (or pass --data-dir) before training"
        ) from exc

    train_loader = DataLoader(train, batch_size=config.batch_size, shuffle=True,
                              num_workers=config.num_workers, drop_last=False)
    test_loader = DataLoader(test, batch_size=config.batch_size, shuffle=False,
                             num_workers=config.num_workers)
    return train_loader, test_loader


class SyntheticBands(Dataset):
    """Tiny learnable stand-in for CIFAR: the class index is a bright
    horizontal band's position. Used by smoke tests only."""

    def __init__(self, size: int, num_classes: int = 4, seed: int = 0):
        rng = np.random.Generator(np.random.Philox(seed))
        self.images = rng.normal(0, 0.3, size=(size, 3, 32, 32)).astype(np.float32)
        self.labels = rng.integers(0, num_classes, size=size)
        band = 32 // num_classes
        for i, label in enumerate(self.labels):
            self.images[i, :, label * band : (label + 1) * band, :] += 3.0
        self.num_classes = num_classes

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, idx):
        return torch.from_numpy(self.images[idx]), int(self.labels[idx])


def synthetic_loaders(config, train_size=256, test_size=128, num_classes=4):
    train = SyntheticBands(train_size, num_classes, seed=config.seed)
    test = SyntheticBands(test_size, num_classes, seed=config.seed + 1)
    return (
        DataLoader(train, batch_size=config.batch_size, shuffle=True),
        DataLoader(test, batch_size=config.batch_size),
    )
