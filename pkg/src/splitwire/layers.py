"""Layer specifications: shape rules, parameter tensors, and MAC costs.

Every layer kind is a frozen dataclass carrying its structural parameters.
Three methods form the shared contract used by graph construction and
accounting:

    out_shape(s)      input shape -> output shape (raises ShapeError)
    param_entries()   ordered (tensor name, tensor shape) pairs
    macs(s)           multiply-accumulate count given the input shape

MAC convention: convolutions, transposed convolutions, and fully connected
layers count output_positions * kernel_elements * in_channels; everything
else (batch norm, activations, pooling, residual adds) counts zero.
Transposed convolutions are costed per *output* position, the convention
used by common model profilers.
"""

from __future__ import annotations

from dataclasses import dataclass


class ShapeError(ValueError):
    """A layer cannot accept the shape it was given."""


@dataclass(frozen=True)
class TensorShape:
    channels: int
    height: int
    width: int

    def __post_init__(self):
        if min(self.channels, self.height, self.width) < 1:
            raise ShapeError(f"all dimensions must be >= 1, got {self}")

    def numel(self) -> int:
        return self.channels * self.height * self.width

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    def __str__(self):
        return f"({self.channels},{self.height},{self.width})"


# Padding is an int (same on all sides) or (top, bottom, left, right).
Padding = "int | tuple[int, int, int, int]"


def normalize_padding(padding) -> tuple[int, int, int, int]:
    if isinstance(padding, int):
        if padding < 0:
            raise ShapeError("padding must be >= 0")
        return (padding, padding, padding, padding)
    pads = tuple(int(p) for p in padding)
    if len(pads) != 4 or min(pads) < 0:
        raise ShapeError(f"padding must be an int or 4-tuple, got {padding!r}")
    return pads


def _conv_out(size: int, kernel: int, stride: int, pad_a: int, pad_b: int) -> int:
    out = (size + pad_a + pad_b - kernel) // stride + 1
    if out < 1:
        raise ShapeError(
            f"kernel {kernel}/stride {stride} does not fit size {size} with padding ({pad_a},{pad_b})"
        )
    return out


@dataclass(frozen=True)
class Conv:
    name: str
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: "int | tuple" = 0
    bias: bool = True

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1:
            raise ShapeError("kernel and stride must be >= 1")
        normalize_padding(self.padding)

    def out_shape(self, s: TensorShape) -> TensorShape:
        if s.channels != self.in_channels:
            raise ShapeError(f"{self.name}: expected {self.in_channels} channels, got {s.channels}")
        pt, pb, pl, pr = normalize_padding(self.padding)
        return TensorShape(
            self.out_channels,
            _conv_out(s.height, self.kernel, self.stride, pt, pb),
            _conv_out(s.width, self.kernel, self.stride, pl, pr),
        )

    def param_entries(self):
        entries = [(f"{self.name}.weight", (self.out_channels, self.in_channels, self.kernel, self.kernel))]
        if self.bias:
            entries.append((f"{self.name}.bias", (self.out_channels,)))
        return entries

    def macs(self, s: TensorShape) -> int:
        o = self.out_shape(s)
        return o.height * o.width * self.out_channels * self.kernel * self.kernel * self.in_channels


@dataclass(frozen=True)
class ConvTranspose:
    name: str
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: "int | tuple" = 0
    output_padding: int = 0
    bias: bool = True

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1:
            raise ShapeError("kernel and stride must be >= 1")
        if not 0 <= self.output_padding < self.stride:
            raise ShapeError("output_padding must be in [0, stride)")
        normalize_padding(self.padding)

    def out_shape(self, s: TensorShape) -> TensorShape:
        if s.channels != self.in_channels:
            raise ShapeError(f"{self.name}: expected {self.in_channels} channels, got {s.channels}")
        pt, pb, pl, pr = normalize_padding(self.padding)
        oh = (s.height - 1) * self.stride - (pt + pb) + self.kernel + self.output_padding
        ow = (s.width - 1) * self.stride - (pl + pr) + self.kernel + self.output_padding
        if oh < 1 or ow < 1:
            raise ShapeError(f"{self.name}: output collapses to {oh}x{ow}")
        return TensorShape(self.out_channels, oh, ow)

    def param_entries(self):
        entries = [(f"{self.name}.weight", (self.in_channels, self.out_channels, self.kernel, self.kernel))]
        if self.bias:
            entries.append((f"{self.name}.bias", (self.out_channels,)))
        return entries

    def macs(self, s: TensorShape) -> int:
        o = self.out_shape(s)
        return o.height * o.width * self.out_channels * self.kernel * self.kernel * self.in_channels


@dataclass(frozen=True)
class BatchNorm:
    name: str
    features: int

    def out_shape(self, s: TensorShape) -> TensorShape:
        if s.channels != self.features:
            raise ShapeError(f"{self.name}: expected {self.features} channels, got {s.channels}")
        return s

    def param_entries(self):
        f = (self.features,)
        return [
            (f"{self.name}.gamma", f),
            (f"{self.name}.beta", f),
            (f"{self.name}.running_mean", f),
            (f"{self.name}.running_var", f),
        ]

    def macs(self, s: TensorShape) -> int:
        return 0


@dataclass(frozen=True)
class ReLU:
    name: str

    def out_shape(self, s: TensorShape) -> TensorShape:
        return s

    def param_entries(self):
        return []

    def macs(self, s: TensorShape) -> int:
        return 0


@dataclass(frozen=True)
class MaxPool:
    name: str
    kernel: int
    stride: int
    padding: "int | tuple" = 0

    def out_shape(self, s: TensorShape) -> TensorShape:
        pt, pb, pl, pr = normalize_padding(self.padding)
        return TensorShape(
            s.channels,
            _conv_out(s.height, self.kernel, self.stride, pt, pb),
            _conv_out(s.width, self.kernel, self.stride, pl, pr),
        )

    def param_entries(self):
        return []

    def macs(self, s: TensorShape) -> int:
        return 0


@dataclass(frozen=True)
class BasicBlock:
    """Residual block: two 3x3 convolutions with a shortcut.

    A 1x1 projection shortcut is present exactly when the block changes
    channel count or strides.
    """

    name: str
    in_channels: int
    out_channels: int
    stride: int = 1

    @property
    def has_projection(self) -> bool:
        return self.stride != 1 or self.in_channels != self.out_channels

    def sublayers(self):
        parts = [
            Conv(f"{self.name}.conv1", self.in_channels, self.out_channels, 3, self.stride, 1, bias=False),
            BatchNorm(f"{self.name}.bn1", self.out_channels),
            Conv(f"{self.name}.conv2", self.out_channels, self.out_channels, 3, 1, 1, bias=False),
            BatchNorm(f"{self.name}.bn2", self.out_channels),
        ]
        if self.has_projection:
            parts.append(
                Conv(f"{self.name}.downsample.conv", self.in_channels, self.out_channels, 1, self.stride, 0, bias=False)
            )
            parts.append(BatchNorm(f"{self.name}.downsample.bn", self.out_channels))
        return parts

    def out_shape(self, s: TensorShape) -> TensorShape:
        if s.channels != self.in_channels:
            raise ShapeError(f"{self.name}: expected {self.in_channels} channels, got {s.channels}")
        return TensorShape(self.out_channels, s.height // self.stride, s.width // self.stride)

    def param_entries(self):
        entries = []
        for sub in self.sublayers():
            entries.extend(sub.param_entries())
        return entries

    def macs(self, s: TensorShape) -> int:
        out = self.out_shape(s)
        total = 0
        for sub in self.sublayers():
            if isinstance(sub, Conv):
                # conv1 and the projection see the input shape, conv2 the output shape
                total += sub.macs(s if sub.in_channels == self.in_channels else out)
        return total


@dataclass(frozen=True)
class GlobalAvgPool:
    name: str

    def out_shape(self, s: TensorShape) -> TensorShape:
        return TensorShape(s.channels, 1, 1)

    def param_entries(self):
        return []

    def macs(self, s: TensorShape) -> int:
        return 0


@dataclass(frozen=True)
class Flatten:
    name: str

    def out_shape(self, s: TensorShape) -> TensorShape:
        return TensorShape(s.numel(), 1, 1)

    def param_entries(self):
        return []

    def macs(self, s: TensorShape) -> int:
        return 0


@dataclass(frozen=True)
class FullyConnected:
    name: str
    in_features: int
    out_features: int
    bias: bool = True

    def out_shape(self, s: TensorShape) -> TensorShape:
        if s.numel() != self.in_features or s.height != 1 or s.width != 1:
            raise ShapeError(f"{self.name}: expected ({self.in_features},1,1), got {s}")
        return TensorShape(self.out_features, 1, 1)

    def param_entries(self):
        entries = [(f"{self.name}.weight", (self.out_features, self.in_features))]
        if self.bias:
            entries.append((f"{self.name}.bias", (self.out_features,)))
        return entries

    def macs(self, s: TensorShape) -> int:
        return self.in_features * self.out_features


@dataclass(frozen=True)
class NormalizeScale:
    """L2-normalize the flattened input and scale by sqrt(numel).

    Leaves the output with unit average per-dimension power so a configured
    channel SNR is meaningful.
    """

    name: str

    def out_shape(self, s: TensorShape) -> TensorShape:
        return s

    def param_entries(self):
        return []

    def macs(self, s: TensorShape) -> int:
        return 0


@dataclass(frozen=True)
class Argmax:
    name: str

    def out_shape(self, s: TensorShape) -> TensorShape:
        return TensorShape(1, 1, 1)

    def param_entries(self):
        return []

    def macs(self, s: TensorShape) -> int:
        return 0


@dataclass(frozen=True)
class Identity:
    name: str

    def out_shape(self, s: TensorShape) -> TensorShape:
        return s

    def param_entries(self):
        return []

    def macs(self, s: TensorShape) -> int:
        return 0


LayerSpec = (
    Conv,
    ConvTranspose,
    BatchNorm,
    ReLU,
    MaxPool,
    BasicBlock,
    GlobalAvgPool,
    Flatten,
    FullyConnected,
    NormalizeScale,
    Argmax,
    Identity,
)
