"""Wireless-channel model for the transmitted feature vector.

Covers the noise level implied by a configured SNR, L2 normalization and
scaling of the feature vector, additive white Gaussian corruption, optional
8-bit payload quantization, and payload size accounting. All randomness is
caller-seeded and platform independent.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace

import numpy as np

VALID_DTYPES = ("f32", "u8")
# scale f32 + zero_point i32 carried alongside u8 payloads
QUANT_SIDEINFO_BITS = 64
_SIDEINFO = struct.Struct("<fi")


@dataclass(frozen=True)
class ChannelProfile:
    """Channel description: SNR in dB, rate in bits/second, payload dtype."""

    snr_db: float
    rate_r: float
    payload_dtype: str = "f32"

    def __post_init__(self):
        if self.rate_r <= 0:
            raise ValueError("rate_r must be > 0")
        if self.payload_dtype not in VALID_DTYPES:
            raise ValueError(f"payload_dtype must be one of {VALID_DTYPES}")


@dataclass(frozen=True)
class FeatureVector:
    """The transmitted representation z (or its noisy counterpart).

    state is 'raw', 'normalized', or 'noisy'. normalize_and_scale guarantees
    an L2 norm of sqrt(n_c) on its output; dequantized vectors recover that
    norm only up to quantization error.
    """

    values: np.ndarray
    n_c: int
    state: str = "raw"

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32).reshape(-1)
        object.__setattr__(self, "values", arr)
        if self.n_c < 1 or arr.size != self.n_c:
            raise ValueError(f"feature vector has {arr.size} values, declared n_c={self.n_c}")
        if self.state not in ("raw", "normalized", "noisy"):
            raise ValueError(f"unknown state {self.state!r}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature vector contains non-finite values")


def sigma_from_snr(snr_db: float) -> float:
    """Noise standard deviation for a given SNR: 1/sqrt(10^(snr_db/10))."""
    return 1.0 / math.sqrt(10.0 ** (snr_db / 10.0))


def normalize_array(values) -> np.ndarray:
    """L2-normalize and scale by sqrt(n): unit average per-dimension power."""
    flat = np.asarray(values, dtype=np.float64).reshape(-1)
    norm = float(np.sqrt(np.sum(flat * flat)))
    if norm == 0.0:
        raise ValueError("degenerate feature: zero vector cannot be normalized")
    return (flat * (math.sqrt(flat.size) / norm)).astype(np.float32)


def normalize_and_scale(z: FeatureVector) -> FeatureVector:
    """Return z / ||z|| * sqrt(n_c) in the 'normalized' state."""
    return FeatureVector(normalize_array(z.values), z.n_c, "normalized")


def standard_normal(n: int, seed: int) -> np.ndarray:
    """n standard-normal float64 draws, reproducible across platforms.

    Box-Muller over a Philox counter-based uniform stream; the same seed
    yields the same draws everywhere, which keeps networked and local noise
    injection bit-identical.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1]: keeps log() finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * m, dtype=np.float64)
    out[0::2] = r * np.cos(2.0 * np.pi * u2)
    out[1::2] = r * np.sin(2.0 * np.pi * u2)
    return out[:n]


def awgn(z: FeatureVector, sigma: float, seed: int) -> FeatureVector:
    """Corrupt a normalized feature vector with i.i.d. Gaussian noise.

    sigma == 0 returns the values unchanged (state still flips to 'noisy').
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if z.state != "normalized":
        raise ValueError(f"awgn expects a normalized feature vector, got state {z.state!r}")
    if sigma == 0.0:
        return replace(z, state="noisy")
    noisy = (z.values.astype(np.float64) + sigma * standard_normal(z.n_c, seed)).astype(np.float32)
    return FeatureVector(noisy, z.n_c, "noisy")


def quantize(z: FeatureVector):
    """Affine 8-bit quantization over [min, max] of z.

    Returns (payload bytes, scale, zero_point) with
    dequantized = scale * (q - zero_point). A constant vector round-trips
    exactly (encoded as scale = constant, q = 1).
    """
    v = z.values.astype(np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        q = np.full(z.n_c, 0 if lo == 0.0 else 1, dtype=np.uint8)
        return q.tobytes(), np.float32(lo).item(), 0
    scale = np.float32((hi - lo) / 255.0).item()  # stored as f32 on the wire
    zero_point = int(round(-lo / scale))
    q = np.clip(np.rint(v / scale) + zero_point, 0, 255).astype(np.uint8)
    return q.tobytes(), scale, zero_point


def dequantize(payload: bytes, scale: float, zero_point: int, state: str = "normalized") -> FeatureVector:
    q = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    values = (np.float64(np.float32(scale)) * (q - zero_point)).astype(np.float32)
    return FeatureVector(values, q.size, state)


def encode_payload(z: FeatureVector, dtype: str) -> bytes:
    """Serialize a feature vector for transport (f32 LE, or u8 + side info)."""
    if dtype == "f32":
        return z.values.astype("<f4").tobytes()
    if dtype == "u8":
        data, scale, zero_point = quantize(z)
        return _SIDEINFO.pack(scale, zero_point) + data
    raise ValueError(f"unknown payload dtype {dtype!r}")


def decode_payload(raw: bytes, dtype: str, n_c: int, state: str = "normalized") -> FeatureVector:
    if dtype == "f32":
        if len(raw) != 4 * n_c:
            raise ValueError(f"f32 payload of {len(raw)} bytes does not hold {n_c} values")
        return FeatureVector(np.frombuffer(raw, dtype="<f4").copy(), n_c, state)
    if dtype == "u8":
        if len(raw) != _SIDEINFO.size + n_c:
            raise ValueError(f"u8 payload of {len(raw)} bytes does not hold {n_c} values plus side info")
        scale, zero_point = _SIDEINFO.unpack_from(raw)
        return dequantize(raw[_SIDEINFO.size :], scale, zero_point, state)
    raise ValueError(f"unknown payload dtype {dtype!r}")


def payload_bits(n_c: int, dtype: str, split=None) -> int:
    """Semantic payload size in bits, excluding constant frame framing.

    At SP-6 the payload is one class index (16 bits). At SP-0 callers pass
    the flattened input size as n_c, so the generic formula applies there
    too. u8 payloads carry 64 bits of quantization side info.
    """
    if split is not None and getattr(split, "id", None) == 6:
        return 16
    if dtype == "f32":
        return 32 * n_c
    if dtype == "u8":
        return 8 * n_c + QUANT_SIDEINFO_BITS
    raise ValueError(f"unknown payload dtype {dtype!r}")
