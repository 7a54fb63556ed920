"""Export trained torch models into the inference engine's weight container."""

from __future__ import annotations

import json
from pathlib import Path

from splitwire import load_weights, save_weights
from splitwire.weights import serialize_weights


def export_weights(model, path=None):
    """Serialize a trained model's tensors into container bytes.

    The model must expose export_tensors() (GraphModule-based models do);
    unsupported layers surface there. When path is given the container is
    written and verified by re-loading.
    """
    if not hasattr(model, "export_tensors"):
        raise TypeError(f"{type(model).__name__} cannot be exported; expected a GraphModule-based model")
    tensors = model.export_tensors()
    data = serialize_weights(tensors)
    if path is not None:
        Path(path).write_bytes(data)
        load_weights(path)  # fail fast on anything the engine would reject
    return data


def fingerprint_of(data: bytes) -> str:
    return load_weights(data).fingerprint.hex()


def write_manifest(path, config, outputs: dict):
    """Record the training configuration and output hashes next to the artifacts."""
    import hashlib

    manifest = {
        "tool": "splitwire-trainer",
        "config": config.to_manifest(),
        "outputs": [
            {"path": str(p), "sha256": hashlib.sha256(Path(p).read_bytes()).hexdigest()} for p in outputs
        ],
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
