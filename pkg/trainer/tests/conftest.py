import pytest
import torch

from splitwire_trainer.config import TrainConfig


@pytest.fixture(autouse=True)
def _single_threaded_deterministic():
    torch.set_num_threads(2)
    yield


@pytest.fixture()
def smoke_config():
    return TrainConfig(
        dataset="cifar10",
        model="resnet18",
        split="SP-2",
        n_c=256,
        snr_db=5.0,
        epochs=2,
        batch_size=32,
        lr=0.05,
        seed=7,
        num_workers=0,
        limit_train_batches=6,
        limit_eval_batches=4,
        augment=False,
    )
