"""Classifier graph construction and split-point partitioning.

Builds ResNet-18/34 graphs (CIFAR and standard variants), runs shape
inference, and cuts a graph at one of the seven named split points into an
encoder/decoder pair joined by a flat feature vector of dimension n_c.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

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
    ShapeError,
    TensorShape,
)

STAGE_BLOCKS = {18: (2, 2, 2, 2), 34: (3, 4, 6, 3)}
STAGE_CHANNELS = (64, 128, 256, 512)


@dataclass(frozen=True)
class ModelGraph:
    name: str
    input_shape: TensorShape
    layers: tuple
    output_shapes: tuple | None = None

    @property
    def output_shape(self) -> TensorShape:
        if self.output_shapes is None:
            raise ValueError(f"{self.name}: shapes not inferred yet")
        return self.output_shapes[-1] if self.output_shapes else self.input_shape

    def layer_index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(f"{self.name}: no layer named {name!r}")

    def param_entries(self):
        entries = []
        for layer in self.layers:
            entries.extend(layer.param_entries())
        return entries


def infer_shapes(graph: ModelGraph, input_shape: TensorShape | None = None) -> ModelGraph:
    """Annotate every layer with its output shape.

    Deterministic; rejects shape-incompatible graphs naming the offending
    layer index.
    """
    shape = input_shape or graph.input_shape
    shapes = []
    for i, layer in enumerate(graph.layers):
        try:
            shape = layer.out_shape(shape)
        except ShapeError as exc:
            raise ShapeError(f"{graph.name}: layer {i} ({layer.name}): {exc}") from exc
        shapes.append(shape)
    return replace(graph, input_shape=input_shape or graph.input_shape, output_shapes=tuple(shapes))


def build_resnet(depth: int, variant: str = "cifar", num_classes: int = 100) -> ModelGraph:
    """Build a basic-block residual network graph with shapes inferred.

    The cifar variant opens with a single 3x3 stride-1 convolution (64
    filters, no max pool) on 32x32 inputs; the standard variant keeps the
    original 7x7 stride-2 convolution plus 3x3 max pool on 224x224 inputs.
    """
    if depth not in STAGE_BLOCKS:
        raise ValueError(f"unsupported depth {depth}; expected one of {sorted(STAGE_BLOCKS)}")
    if variant not in ("cifar", "standard"):
        raise ValueError(f"unsupported variant {variant!r}")
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")

    layers = []
    if variant == "cifar":
        input_shape = TensorShape(3, 32, 32)
        layers += [Conv("conv1", 3, 64, 3, 1, 1, bias=False), BatchNorm("bn1", 64), ReLU("relu1")]
    else:
        input_shape = TensorShape(3, 224, 224)
        layers += [
            Conv("conv1", 3, 64, 7, 2, 3, bias=False),
            BatchNorm("bn1", 64),
            ReLU("relu1"),
            MaxPool("maxpool", 3, 2, 1),
        ]

    in_ch = 64
    for stage, (blocks, out_ch) in enumerate(zip(STAGE_BLOCKS[depth], STAGE_CHANNELS), start=2):
        for j in range(blocks):
            stride = 2 if (j == 0 and stage > 2) else 1
            layers.append(BasicBlock(f"conv{stage}_x.{j}", in_ch, out_ch, stride))
            in_ch = out_ch

    layers += [
        GlobalAvgPool("avgpool"),
        Flatten("flatten"),
        FullyConnected("fc", 512, num_classes),
    ]
    graph = ModelGraph(f"resnet{depth}-{variant}", input_shape, tuple(layers))
    return infer_shapes(graph)


@dataclass(frozen=True)
class SplitPoint:
    id: int
    key: str
    boundary: str

    def __str__(self):
        return self.key


SPLIT_POINTS = (
    SplitPoint(0, "SP-0", "input-conv1"),
    SplitPoint(1, "SP-1", "conv1-conv2_x"),
    SplitPoint(2, "SP-2", "conv2_x-conv3_x"),
    SplitPoint(3, "SP-3", "conv3_x-conv4_x"),
    SplitPoint(4, "SP-4", "conv4_x-conv5_x"),
    SplitPoint(5, "SP-5", "conv5_x-avgpool_fc"),
    SplitPoint(6, "SP-6", "logits-argmax"),
)

INNER_SPLIT_POINTS = SPLIT_POINTS[1:6]


def split_point(value) -> SplitPoint:
    """Resolve a SplitPoint from its id (0..6), key ('SP-2'), or itself."""
    if isinstance(value, SplitPoint):
        return value
    if isinstance(value, int):
        if 0 <= value <= 6:
            return SPLIT_POINTS[value]
    elif isinstance(value, str):
        key = value.strip().upper()
        for sp in SPLIT_POINTS:
            if key == sp.key:
                return sp
        if key.isdigit():
            return split_point(int(key))
    raise ValueError(f"unknown split point {value!r}; expected SP-0 .. SP-6")


@dataclass(frozen=True)
class SplitModel:
    """An encoder/decoder pair produced by cutting a graph at a split point.

    The encoder ends with compression + NormalizeScale and outputs (n_c,1,1);
    the decoder starts with decompression restoring the boundary shape.
    SP-0 degenerates to an identity encoder (raw-input transport) and SP-6
    to an identity decoder (label transport).
    """

    encoder: ModelGraph
    decoder: ModelGraph
    split: SplitPoint
    n_c: int
    decompress_stages: int
    vanilla: ModelGraph
    boundary_shape: TensorShape | None

    @property
    def name(self) -> str:
        return f"{self.vanilla.name}/{self.split.key}/nc{self.n_c}"

    def param_entries(self):
        return self.encoder.param_entries() + self.decoder.param_entries()


def _boundary_index(graph: ModelGraph, sp: SplitPoint) -> int:
    """Index of the first decoder-side layer for an inner split point."""
    if sp.id == 1:
        marker = "conv2_x"
    elif sp.id in (2, 3, 4):
        marker = f"conv{sp.id + 1}_x"
    else:  # SP-5 cuts before the pooling head
        marker = "avgpool"
    for i, layer in enumerate(graph.layers):
        if layer.name == marker or layer.name.startswith(marker + "."):
            return i
    raise ValueError(f"{graph.name}: graph has no {marker!r} boundary; build it with build_resnet")


def _compression_plan(boundary: TensorShape, n_c: int):
    """Geometry of the single compression convolution.

    Projects the boundary map onto a small square grid g x g (g in 4, 2, 1)
    with n_c // g**2 channels, so the flattened output has exactly n_c
    elements. Kernel 4 (or the full frame when the grid collapses to 1x1);
    stride and padding are solved so the output grid is exact; padding may
    be asymmetric ('same'-style) when the geometry demands it.
    """
    c, h, w = boundary.as_tuple()
    for g in (4, 2, 1):
        if g > min(h, w) or n_c % (g * g) != 0:
            continue
        c_z = n_c // (g * g)
        if g == 1:
            kernel, stride = h, h
        else:
            kernel = min(4, h)
            stride = max(1, h // g)
        total = max(0, stride * (g - 1) + kernel - h)
        pa, pb = total // 2, total - total // 2
        return c_z, g, kernel, stride, (pa, pb, pa, pb)
    raise ValueError(f"no compression grid divides n_c={n_c} for boundary {boundary}")


# Decompression mid-channel width per boundary spatial size, calibrated to
# the published per-split accounting; anything unlisted uses 256.
DECOMPRESS_MID_CHANNELS = {8: 128}


def _decompression_plan(boundary: TensorShape, n_c: int, stages: int, mid_channels: int | None):
    """Transposed-convolution chain restoring the boundary map from (n_c,1,1).

    Each stage uses kernel == stride. The two-stage form expands to an
    intermediate g1 x g1 grid first (g1 the largest of 4, 2, 1 that divides
    the boundary size and leaves the second stage a real upsampling step).
    """
    c, h, w = boundary.as_tuple()
    if h != w:
        raise ValueError(f"split boundaries must be square, got {boundary}")
    if stages == 1:
        return [(n_c, c, h)]
    g1 = 1
    for g in (4, 2):
        if h % g == 0 and g < h:
            g1 = g
            break
    mid = mid_channels or DECOMPRESS_MID_CHANNELS.get(h, 256)
    return [(n_c, mid, g1), (mid, c, h // g1)]


def apply_split(
    graph: ModelGraph,
    split,
    n_c: int | None = None,
    decompress_stages: int = 2,
    mid_channels: int | None = None,
) -> SplitModel:
    """Cut a classifier graph at a split point.

    For inner splits (SP-1..SP-5) the encoder is the backbone prefix plus a
    compression convolution, Flatten, and NormalizeScale; the decoder is the
    decompression chain plus the backbone suffix. n_c must not exceed the
    flattened boundary size. SP-0 returns an identity encoder with the full
    graph as decoder; SP-6 the full graph plus Argmax with an identity
    decoder (n_c is ignored at both).
    """
    sp = split_point(split)
    if graph.output_shapes is None:
        graph = infer_shapes(graph)

    if sp.id == 0:
        encoder = infer_shapes(ModelGraph(f"{graph.name}/encoder", graph.input_shape, (Identity("identity"),)))
        decoder = replace(graph, name=f"{graph.name}/decoder")
        return SplitModel(encoder, decoder, sp, graph.input_shape.numel(), decompress_stages, graph, graph.input_shape)

    if sp.id == 6:
        encoder = infer_shapes(
            ModelGraph(f"{graph.name}/encoder", graph.input_shape, graph.layers + (Argmax("argmax"),))
        )
        decoder = infer_shapes(ModelGraph(f"{graph.name}/decoder", TensorShape(1, 1, 1), (Identity("identity"),)))
        return SplitModel(encoder, decoder, sp, 1, decompress_stages, graph, None)

    if n_c is None or n_c < 1:
        raise ValueError("n_c must be a positive count for SP-1..SP-5")
    if decompress_stages not in (1, 2):
        raise ValueError("decompress_stages must be 1 or 2")

    cut = _boundary_index(graph, sp)
    boundary = graph.output_shapes[cut - 1] if cut > 0 else graph.input_shape
    if n_c > boundary.numel():
        raise ValueError(
            f"n_c={n_c} exceeds the flattened boundary size {boundary.numel()} at {sp.key}; compression must compress"
        )

    c_z, grid, kernel, stride, padding = _compression_plan(boundary, n_c)
    enc_layers = graph.layers[:cut] + (
        Conv("compress.conv", boundary.channels, c_z, kernel, stride, padding),
        Flatten("compress.flatten"),
        NormalizeScale("normalize"),
    )
    encoder = infer_shapes(ModelGraph(f"{graph.name}/encoder", graph.input_shape, enc_layers))

    dec_layers = []
    for i, (c_in, c_out, k) in enumerate(_decompression_plan(boundary, n_c, decompress_stages, mid_channels)):
        dec_layers.append(ConvTranspose(f"decompress.{i}", c_in, c_out, k, k))
        dec_layers.append(ReLU(f"decompress.relu{i}"))
    dec_layers = tuple(dec_layers) + graph.layers[cut:]
    decoder = infer_shapes(ModelGraph(f"{graph.name}/decoder", TensorShape(n_c, 1, 1), dec_layers))

    if decoder.output_shapes[2 * decompress_stages - 1] != boundary:
        raise ShapeError(
            f"decompression restores {decoder.output_shapes[2 * decompress_stages - 1]}, expected {boundary}"
        )
    return SplitModel(encoder, decoder, sp, n_c, decompress_stages, graph, boundary)
