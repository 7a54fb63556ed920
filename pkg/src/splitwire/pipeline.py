"""Local end-to-end split inference and input plumbing.

run_local drives the same encoder/receiver functions the networked mode
uses, so a fixed noise seed produces bit-identical noisy vectors in both
modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import run_graph
from .graph import ModelGraph, SplitModel, infer_shapes
from .wire import encoder_payload, receiver_pipeline

# Per-channel normalization constants applied to decoded images, recorded in
# every run manifest so results stay comparable with trained weights.
CIFAR100_MEAN = (0.5071, 0.4865, 0.4409)
CIFAR100_STD = (0.2673, 0.2564, 0.2762)
CIFAR10_MEAN = (0.4914, 0.4822, 0.4465)
CIFAR10_STD = (0.2470, 0.2435, 0.2616)


@dataclass(frozen=True)
class LocalRun:
    label: int
    payload: bytes
    zhat_bytes: bytes


def run_local(model: SplitModel, weights, x, *, snr_db: float, dtype: str = "f32", seed: int = 1) -> LocalRun:
    """Encoder -> serialized payload -> noise -> decoder, all in-process."""
    payload, _, _ = encoder_payload(model, weights, x, dtype)
    label, zhat_bytes = receiver_pipeline(model, weights, payload, dtype, snr_db, seed)
    return LocalRun(label=label, payload=payload, zhat_bytes=zhat_bytes)


def monolithic_graph(model: SplitModel) -> ModelGraph:
    """Encoder and decoder concatenated into one graph (no channel between)."""
    merged = ModelGraph(
        f"{model.vanilla.name}/{model.split.key}/monolithic",
        model.encoder.input_shape,
        model.encoder.layers + model.decoder.layers,
    )
    return infer_shapes(merged)


def run_monolithic(model: SplitModel, weights, x) -> np.ndarray:
    return run_graph(monolithic_graph(model), weights, x)


def random_input(shape, seed: int) -> np.ndarray:
    """Seeded uniform [0,1) image, for dataset-free runs."""
    rng = np.random.Generator(np.random.Philox(seed))
    dims = shape.as_tuple() if hasattr(shape, "as_tuple") else tuple(shape)
    return rng.random(dims).astype(np.float32)


def load_image(path, shape, dataset: str = "cifar100") -> np.ndarray:
    """Load an input image as a normalized (C,H,W) float32 array.

    Raw little-endian float32 CHW files (.bin/.raw/.f32) are read verbatim.
    Anything else is decoded with Pillow, resized, scaled to [0,1], and
    normalized with the per-channel constants for the named dataset.
    """
    path = str(path)
    dims = shape.as_tuple() if hasattr(shape, "as_tuple") else tuple(shape)
    if path.endswith((".bin", ".raw", ".f32")):
        data = np.fromfile(path, dtype="<f4")
        if data.size != int(np.prod(dims)):
            raise ValueError(f"{path}: {data.size} floats do not fill shape {dims}")
        return data.reshape(dims).copy()

    from PIL import Image

    mean, std = (CIFAR10_MEAN, CIFAR10_STD) if dataset == "cifar10" else (CIFAR100_MEAN, CIFAR100_STD)
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((dims[2], dims[1]))
    arr = np.asarray(rgb, dtype=np.float32) / 255.0  # (H,W,C)
    arr = np.transpose(arr, (2, 0, 1))
    mean_a = np.asarray(mean, dtype=np.float32)[:, None, None]
    std_a = np.asarray(std, dtype=np.float32)[:, None, None]
    return ((arr - mean_a) / std_a).astype(np.float32)
