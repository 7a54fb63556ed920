"""Training configuration with the published recipe as defaults."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

# Per-channel dataset statistics; recorded in every run manifest so the
# inference side can normalize inputs identically.
DATASET_STATS = {
    "cifar10": ((0.4914, 0.4822, 0.4465), (0.2470, 0.2435, 0.2616)),
    "cifar100": ((0.5071, 0.4865, 0.4409), (0.2673, 0.2564, 0.2762)),
}

NUM_CLASSES = {"cifar10": 10, "cifar100": 100}


@dataclass
class TrainConfig:
    dataset: str = "cifar100"
    model: str = "resnet34"
    split: str | None = None  # None trains the unsplit baseline
    n_c: int = 1024
    decompress_stages: int = 2
    snr_db: float | None = None  # None disables the channel-noise layer
    epochs: int = 100
    batch_size: int = 128
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 0
    data_dir: str = "./data"
    device: str = "cpu"
    num_workers: int = 2
    # smoke-run controls; 0 means use everything
    limit_train_batches: int = 0
    limit_eval_batches: int = 0
    augment: bool = True

    def __post_init__(self):
        if self.dataset not in NUM_CLASSES:
            raise ValueError(f"dataset must be one of {sorted(NUM_CLASSES)}")
        if self.model not in ("resnet18", "resnet34"):
            raise ValueError("model must be resnet18 or resnet34")
        if self.decompress_stages not in (1, 2):
            raise ValueError("decompress_stages must be 1 or 2")

    @property
    def num_classes(self) -> int:
        return NUM_CLASSES[self.dataset]

    @property
    def depth(self) -> int:
        return 18 if self.model == "resnet18" else 34

    def stats(self):
        return DATASET_STATS[self.dataset]

    def to_manifest(self) -> dict:
        manifest = asdict(self)
        mean, std = self.stats()
        manifest["normalization"] = {"mean": list(mean), "std": list(std)}
        return manifest
