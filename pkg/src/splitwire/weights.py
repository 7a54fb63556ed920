"""Weight storage and the binary weight-container format.

Container layout (all integers little-endian):

    magic "SWWT" | version u16 | manifest_length u32 | manifest | blob

The manifest is UTF-8 JSON: an ordered list of entries
{"name", "dtype": "f32", "shape": [...], "offset", "byte_length"} with
offsets relative to the blob start; entries must be contiguous and
non-overlapping. The blob holds little-endian float32 values.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import struct

import numpy as np

MAGIC = b"SWWT"
VERSION = 1
_HEAD = struct.Struct("<4sHI")


class WeightError(KeyError):
    """Missing or mis-shaped weight tensor."""

    def __str__(self):  # keep the plain message, not KeyError's repr
        return self.args[0] if self.args else ""


class WeightFormatError(ValueError):
    """Malformed weight container."""


class WeightStore:
    """Immutable name -> float32 tensor mapping with a content fingerprint."""

    def __init__(self, tensors: dict):
        self._tensors = {}
        for name, arr in tensors.items():
            a = np.ascontiguousarray(arr, dtype=np.float32)
            a.setflags(write=False)
            self._tensors[str(name)] = a
        self.sha256 = hashlib.sha256(serialize_weights(self._tensors)).hexdigest()
        self.fingerprint = bytes.fromhex(self.sha256[:16])

    def get(self, name: str, shape: tuple | None = None) -> np.ndarray:
        try:
            arr = self._tensors[name]
        except KeyError:
            raise WeightError(f"missing weight {name!r}") from None
        if shape is not None and arr.shape != tuple(shape):
            raise WeightError(f"weight {name!r} has shape {arr.shape}, expected {tuple(shape)}")
        return arr

    def names(self):
        return list(self._tensors)

    def __contains__(self, name):
        return name in self._tensors

    def __len__(self):
        return len(self._tensors)


def serialize_weights(tensors: dict) -> bytes:
    """Encode a name -> array mapping into container bytes."""
    manifest = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        raw = a.tobytes()
        manifest.append(
            {"name": str(name), "dtype": "f32", "shape": list(a.shape), "offset": offset, "byte_length": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    mbytes = json.dumps(manifest, separators=(",", ":")).encode("utf-8")
    return _HEAD.pack(MAGIC, VERSION, len(mbytes)) + mbytes + b"".join(blobs)


def save_weights(store, path) -> bytes:
    tensors = store._tensors if isinstance(store, WeightStore) else store
    data = serialize_weights(tensors)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def load_weights(source) -> WeightStore:
    """Load a weight container from bytes, a path, or a binary stream."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()

    if len(data) < _HEAD.size:
        raise WeightFormatError("truncated: container shorter than its header")
    magic, version, mlen = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise WeightFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise WeightFormatError(f"unsupported container version {version}")
    if len(data) < _HEAD.size + mlen:
        raise WeightFormatError("truncated: manifest shorter than declared")
    try:
        manifest = json.loads(data[_HEAD.size : _HEAD.size + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, list):
        raise WeightFormatError("manifest must be a list of entries")

    blob = data[_HEAD.size + mlen :]
    tensors = {}
    expected_offset = 0
    for entry in manifest:
        try:
            name, dtype = entry["name"], entry["dtype"]
            shape = tuple(int(d) for d in entry["shape"])
            offset, byte_length = int(entry["offset"]), int(entry["byte_length"])
        except (KeyError, TypeError, ValueError) as exc:
            raise WeightFormatError(f"malformed manifest entry {entry!r}") from exc
        if dtype != "f32":
            raise WeightFormatError(f"unsupported dtype {dtype!r} for {name!r}")
        if name in tensors:
            raise WeightFormatError(f"duplicate tensor name {name!r}")
        if offset != expected_offset:
            raise WeightFormatError(f"non-contiguous blob entry {name!r} (offset {offset}, expected {expected_offset})")
        if byte_length != 4 * math.prod(shape):
            raise WeightFormatError(f"{name!r}: byte_length {byte_length} does not match shape {shape}")
        if offset + byte_length > len(blob):
            raise WeightFormatError(f"truncated: blob ends inside {name!r}")
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=byte_length // 4, offset=offset).reshape(shape)
        expected_offset = offset + byte_length
    if expected_offset != len(blob):
        raise WeightFormatError(f"blob has {len(blob) - expected_offset} trailing bytes beyond the manifest")
    return WeightStore(tensors)


def _primitive_layers(model):
    from .graph import ModelGraph  # local import keeps this module importable standalone
    from .layers import BasicBlock

    graphs = [model] if isinstance(model, ModelGraph) else [model.encoder, model.decoder]
    for graph in graphs:
        for layer in graph.layers:
            if isinstance(layer, BasicBlock):
                yield from layer.sublayers()
            else:
                yield layer


def random_weights(model, seed: int = 0) -> WeightStore:
    """Seeded random weights for a graph or split model (test fixture).

    Conv/linear tensors draw uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)];
    batch norms initialize to the identity transform.
    """
    from .layers import BatchNorm, Conv, ConvTranspose, FullyConnected

    rng = np.random.Generator(np.random.Philox(seed))
    tensors = {}

    def uniform(name, shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        tensors[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)

    for layer in _primitive_layers(model):
        if isinstance(layer, (Conv, ConvTranspose, FullyConnected)):
            entries = dict(layer.param_entries())
            if isinstance(layer, FullyConnected):
                fan_in = layer.in_features
            else:
                fan_in = layer.in_channels * layer.kernel * layer.kernel
            for name, shape in entries.items():
                uniform(name, shape, fan_in)
        elif isinstance(layer, BatchNorm):
            for name, shape in layer.param_entries():
                ones = name.endswith((".gamma", ".running_var"))
                tensors[name] = (np.ones if ones else np.zeros)(shape, dtype=np.float32)
    return WeightStore(tensors)
