"""Deterministic forward-pass numerics for split models.

Inference only. Tensors are dense float32 arrays in (channels, height,
width) layout; dot products accumulate in float64 before casting back, so
reruns on one platform are bit-identical and cross-platform drift stays in
the last float32 bits.
"""

from __future__ import annotations

import numpy as np

from .graph import ModelGraph
from .layers import (
    Argmax,
    BasicBlock,
    BatchNorm,
    Conv,
    ConvTranspose,
    Flatten,
    FullyConnected,
    GlobalAvgPool,
    Identity,
    MaxPool,
    NormalizeScale,
    ReLU,
    normalize_padding,
)


class EngineError(ValueError):
    """Invalid tensor or weight fed to the engine."""


def _as_tensor(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float32)
    if arr.ndim != 3:
        raise EngineError(f"expected a (C,H,W) tensor, got shape {arr.shape}")
    return arr


def _check_finite(arr: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise EngineError(f"non-finite values at {where}")
    return arr


def _pad(x: np.ndarray, padding) -> np.ndarray:
    pt, pb, pl, pr = normalize_padding(padding)
    if pt == pb == pl == pr == 0:
        return x
    return np.pad(x, ((0, 0), (pt, pb), (pl, pr)))


def conv2d(x, weight, bias=None, stride: int = 1, padding=0) -> np.ndarray:
    """Direct 2-D cross-correlation.

    weight is (C_out, C_in, k, k); output spatial dims follow
    floor((H + pads - k)/stride) + 1.
    """
    x = _as_tensor(x)
    w = np.asarray(weight, dtype=np.float32)
    c_out, c_in, k, k2 = w.shape
    if k != k2:
        raise EngineError("only square kernels are supported")
    if x.shape[0] != c_in:
        raise EngineError(f"conv2d: input has {x.shape[0]} channels, weight expects {c_in}")
    xp = _pad(x, padding)
    oh = (xp.shape[1] - k) // stride + 1
    ow = (xp.shape[2] - k) // stride + 1
    if oh < 1 or ow < 1:
        raise EngineError("conv2d: kernel does not fit the padded input")

    cols = np.empty((c_in, k, k, oh, ow), dtype=np.float64)
    for ky in range(k):
        for kx in range(k):
            cols[:, ky, kx] = xp[:, ky : ky + stride * oh : stride, kx : kx + stride * ow : stride]
    out = w.reshape(c_out, -1).astype(np.float64) @ cols.reshape(c_in * k * k, oh * ow)
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64)[:, None]
    return out.reshape(c_out, oh, ow).astype(np.float32)


def conv_transpose2d(x, weight, bias=None, stride: int = 1, padding=0, output_padding: int = 0) -> np.ndarray:
    """Fractionally-strided convolution (scatter-add of kernel copies).

    weight is (C_in, C_out, k, k); output spatial dims follow
    (H - 1)*stride - pads + k + output_padding.
    """
    x = _as_tensor(x)
    w = np.asarray(weight, dtype=np.float32)
    c_in, c_out, k, k2 = w.shape
    if k != k2:
        raise EngineError("only square kernels are supported")
    if x.shape[0] != c_in:
        raise EngineError(f"conv_transpose2d: input has {x.shape[0]} channels, weight expects {c_in}")
    pt, pb, pl, pr = normalize_padding(padding)
    h, wd = x.shape[1], x.shape[2]
    full_h = (h - 1) * stride + k
    full_w = (wd - 1) * stride + k
    oh = full_h - pt - pb + output_padding
    ow = full_w - pl - pr + output_padding
    if oh < 1 or ow < 1:
        raise EngineError("conv_transpose2d: output collapses")

    x64 = x.astype(np.float64)
    w64 = w.astype(np.float64)
    full = np.zeros((c_out, full_h, full_w), dtype=np.float64)
    for ky in range(k):
        for kx in range(k):
            # (C_in,C_out) x (C_in,H,W) -> (C_out,H,W), scattered with stride
            full[:, ky : ky + stride * h : stride, kx : kx + stride * wd : stride] += np.tensordot(
                w64[:, :, ky, kx], x64, axes=([0], [0])
            )
    out = np.zeros((c_out, oh, ow), dtype=np.float64)
    src_h = min(full_h - pt, oh)
    src_w = min(full_w - pl, ow)
    out[:, :src_h, :src_w] = full[:, pt : pt + src_h, pl : pl + src_w]
    if bias is not None:
        out += np.asarray(bias, dtype=np.float64)[:, None, None]
    return out.astype(np.float32)


def batchnorm_infer(x, gamma, beta, mean, var, eps: float = 1e-5) -> np.ndarray:
    """Inference-mode batch norm: y = (x - mean)/sqrt(var + eps)*gamma + beta."""
    x = _as_tensor(x)
    gamma, beta, mean, var = (np.asarray(v, dtype=np.float64) for v in (gamma, beta, mean, var))
    for name, v in (("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)):
        if v.shape != (x.shape[0],):
            raise EngineError(f"batchnorm_infer: {name} has shape {v.shape}, expected ({x.shape[0]},)")
    scale = gamma / np.sqrt(var + eps)
    shift = beta - mean * scale
    return (x.astype(np.float64) * scale[:, None, None] + shift[:, None, None]).astype(np.float32)


def linear(x, weight, bias=None) -> np.ndarray:
    """y = W x + b over a flat vector."""
    v = np.asarray(x, dtype=np.float32).reshape(-1)
    w = np.asarray(weight, dtype=np.float32)
    if w.ndim != 2 or w.shape[1] != v.size:
        raise EngineError(f"linear: weight {w.shape} incompatible with input of size {v.size}")
    out = w.astype(np.float64) @ v.astype(np.float64)
    if bias is not None:
        b = np.asarray(bias, dtype=np.float64)
        if b.shape != (w.shape[0],):
            raise EngineError(f"linear: bias shape {b.shape} incompatible with {w.shape[0]} outputs")
        out += b
    return out.astype(np.float32)


def global_avg_pool(x) -> np.ndarray:
    """Average each channel over all spatial positions (row-major accumulation)."""
    x = _as_tensor(x)
    c, h, w = x.shape
    return (x.reshape(c, h * w).astype(np.float64).sum(axis=1) / (h * w)).astype(np.float32).reshape(c, 1, 1)


def relu(x) -> np.ndarray:
    return np.maximum(_as_tensor(x), np.float32(0.0))


def max_pool2d(x, kernel: int, stride: int, padding=0) -> np.ndarray:
    x = _as_tensor(x)
    pt, pb, pl, pr = normalize_padding(padding)
    # pad with -inf so padded cells never win the max
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr)), constant_values=-np.inf)
    oh = (xp.shape[1] - kernel) // stride + 1
    ow = (xp.shape[2] - kernel) // stride + 1
    out = np.full((x.shape[0], oh, ow), -np.inf, dtype=np.float32)
    for ky in range(kernel):
        for kx in range(kernel):
            np.maximum(out, xp[:, ky : ky + stride * oh : stride, kx : kx + stride * ow : stride], out=out)
    return out


def normalize_scale(x) -> np.ndarray:
    """L2-normalize the flattened tensor and scale by sqrt(numel)."""
    x = _as_tensor(x)
    flat = x.reshape(-1).astype(np.float64)
    norm = float(np.sqrt(np.sum(flat * flat)))
    if norm == 0.0:
        raise EngineError("degenerate feature: zero vector cannot be normalized")
    return (flat * (np.sqrt(flat.size) / norm)).astype(np.float32).reshape(x.shape)


def argmax_label(logits) -> int:
    flat = np.asarray(logits).reshape(-1)
    return int(np.argmax(flat))


def _run_basic_block(block: BasicBlock, weights, x: np.ndarray) -> np.ndarray:
    g = weights.get
    n = block.name
    out = conv2d(x, g(f"{n}.conv1.weight"), stride=block.stride, padding=1)
    out = batchnorm_infer(out, g(f"{n}.bn1.gamma"), g(f"{n}.bn1.beta"), g(f"{n}.bn1.running_mean"), g(f"{n}.bn1.running_var"))
    out = relu(out)
    out = conv2d(out, g(f"{n}.conv2.weight"), stride=1, padding=1)
    out = batchnorm_infer(out, g(f"{n}.bn2.gamma"), g(f"{n}.bn2.beta"), g(f"{n}.bn2.running_mean"), g(f"{n}.bn2.running_var"))
    if block.has_projection:
        shortcut = conv2d(x, g(f"{n}.downsample.conv.weight"), stride=block.stride, padding=0)
        shortcut = batchnorm_infer(
            shortcut,
            g(f"{n}.downsample.bn.gamma"),
            g(f"{n}.downsample.bn.beta"),
            g(f"{n}.downsample.bn.running_mean"),
            g(f"{n}.downsample.bn.running_var"),
        )
    else:
        shortcut = x
    return relu(out + shortcut)


def _apply_layer(layer, weights, x: np.ndarray) -> np.ndarray:
    if isinstance(layer, Conv):
        bias = weights.get(f"{layer.name}.bias") if layer.bias else None
        return conv2d(x, weights.get(f"{layer.name}.weight"), bias, layer.stride, layer.padding)
    if isinstance(layer, ConvTranspose):
        bias = weights.get(f"{layer.name}.bias") if layer.bias else None
        return conv_transpose2d(
            x, weights.get(f"{layer.name}.weight"), bias, layer.stride, layer.padding, layer.output_padding
        )
    if isinstance(layer, BatchNorm):
        n = layer.name
        return batchnorm_infer(
            x, weights.get(f"{n}.gamma"), weights.get(f"{n}.beta"),
            weights.get(f"{n}.running_mean"), weights.get(f"{n}.running_var"),
        )
    if isinstance(layer, BasicBlock):
        return _run_basic_block(layer, weights, x)
    if isinstance(layer, ReLU):
        return relu(x)
    if isinstance(layer, MaxPool):
        return max_pool2d(x, layer.kernel, layer.stride, layer.padding)
    if isinstance(layer, GlobalAvgPool):
        return global_avg_pool(x)
    if isinstance(layer, Flatten):
        return x.reshape(-1, 1, 1)
    if isinstance(layer, FullyConnected):
        bias = weights.get(f"{layer.name}.bias") if layer.bias else None
        return linear(x, weights.get(f"{layer.name}.weight"), bias).reshape(-1, 1, 1)
    if isinstance(layer, NormalizeScale):
        return normalize_scale(x)
    if isinstance(layer, Argmax):
        return np.array([[[argmax_label(x)]]], dtype=np.float32)
    if isinstance(layer, Identity):
        return x
    raise EngineError(f"unsupported layer kind {type(layer).__name__}")


def run_graph(graph: ModelGraph, weights, x) -> np.ndarray:
    """Apply the graph's layers sequentially to one (C,H,W) input.

    Deterministic: identical inputs and weights give bit-identical outputs
    on the same platform. Missing or mis-shaped weights are reported with
    the owning layer's name.
    """
    x = _check_finite(_as_tensor(x), "run_graph input")
    if x.shape != graph.input_shape.as_tuple():
        raise EngineError(f"{graph.name}: input shape {x.shape} != declared {graph.input_shape}")
    for layer in graph.layers:
        try:
            x = _apply_layer(layer, weights, x)
        except Exception as exc:
            raise EngineError(f"{graph.name}: layer {layer.name!r}: {exc}") from exc
    return _check_finite(x, "run_graph output")
