"""Torch modules built directly from splitwire graph specifications.

Walking the inference package's layer specs guarantees that the trained
architecture is structurally identical to what the inference engine will
run, and gives every tensor the exact container name the engine expects.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

try:
    from splitwire import apply_split, build_resnet
    from splitwire import layers as sl
except ImportError as exc:  # pragma: no cover
    raise ImportError(
        "the splitwire package is required; install it from the repository root "
        "(pip install -e . --no-build-isolation) before installing the trainer"
    ) from exc


class NormalizeScale(nn.Module):
    """Per-sample L2 normalization scaled to unit average dimension power."""

    def forward(self, z):
        flat = z.flatten(1)
        norm = flat.norm(dim=1, keepdim=True).clamp_min(1e-12)
        out = flat * (math.sqrt(flat.shape[1]) / norm)
        return out.view(z.shape)


class GaussianChannel(nn.Module):
    """Additive white Gaussian noise on the transmitted feature vector."""

    def __init__(self, sigma: float = 0.0):
        super().__init__()
        self.sigma = float(sigma)

    def forward(self, z):
        if self.sigma == 0.0:
            return z
        return z + self.sigma * torch.randn_like(z)

    def extra_repr(self):
        return f"sigma={self.sigma:g}"


def _torch_layer(spec):
    if isinstance(spec, sl.Conv):
        pt, pb, pl, pr = sl.normalize_padding(spec.padding)
        conv = nn.Conv2d(spec.in_channels, spec.out_channels, spec.kernel, spec.stride, 0, bias=spec.bias)
        if pt == pb == pl == pr == 0:
            return conv
        return nn.Sequential(nn.ZeroPad2d((pl, pr, pt, pb)), conv)
    if isinstance(spec, sl.ConvTranspose):
        pt, pb, pl, pr = sl.normalize_padding(spec.padding)
        if not (pt == pb and pl == pr):
            raise ValueError(f"{spec.name}: asymmetric transposed-conv padding is not supported")
        return nn.ConvTranspose2d(
            spec.in_channels, spec.out_channels, spec.kernel, spec.stride, (pt, pl), spec.output_padding,
            bias=spec.bias,
        )
    if isinstance(spec, sl.BatchNorm):
        return nn.BatchNorm2d(spec.features)
    if isinstance(spec, sl.ReLU):
        return nn.ReLU(inplace=True)
    if isinstance(spec, sl.MaxPool):
        pt, pb, pl, pr = sl.normalize_padding(spec.padding)
        if not (pt == pb and pl == pr):
            raise ValueError(f"{spec.name}: asymmetric pooling padding is not supported")
        return nn.MaxPool2d(spec.kernel, spec.stride, (pt, pl))
    if isinstance(spec, sl.GlobalAvgPool):
        return nn.AdaptiveAvgPool2d(1)
    if isinstance(spec, sl.NormalizeScale):
        return NormalizeScale()
    if isinstance(spec, sl.Identity):
        return nn.Identity()
    raise ValueError(f"unsupported layer kind {type(spec).__name__} ({spec.name})")


class TorchBasicBlock(nn.Module):
    def __init__(self, spec: "sl.BasicBlock"):
        super().__init__()
        self.spec = spec
        self.conv1 = nn.Conv2d(spec.in_channels, spec.out_channels, 3, spec.stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(spec.out_channels)
        self.conv2 = nn.Conv2d(spec.out_channels, spec.out_channels, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(spec.out_channels)
        if spec.has_projection:
            self.downsample_conv = nn.Conv2d(spec.in_channels, spec.out_channels, 1, spec.stride, bias=False)
            self.downsample_bn = nn.BatchNorm2d(spec.out_channels)

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)), inplace=True)
        out = self.bn2(self.conv2(out))
        shortcut = self.downsample_bn(self.downsample_conv(x)) if self.spec.has_projection else x
        return F.relu(out + shortcut, inplace=True)


class GraphModule(nn.Module):
    """Sequential execution of a splitwire ModelGraph in (B,C,H,W) tensors.

    Flatten and the classifier head keep a trailing 1x1 spatial pair so the
    module composes with channel layers and other GraphModules; callers
    flatten the final logits.
    """

    def __init__(self, graph):
        super().__init__()
        self.graph = graph
        self.specs = list(graph.layers)
        modules = []
        for spec in self.specs:
            if isinstance(spec, sl.BasicBlock):
                modules.append(TorchBasicBlock(spec))
            elif isinstance(spec, sl.FullyConnected):
                modules.append(nn.Linear(spec.in_features, spec.out_features, bias=spec.bias))
            elif isinstance(spec, (sl.Flatten, sl.Argmax)):
                modules.append(nn.Identity())
            else:
                modules.append(_torch_layer(spec))
        self.blocks = nn.ModuleList(modules)

    def forward(self, x):
        for spec, module in zip(self.specs, self.blocks):
            if isinstance(spec, sl.Flatten):
                x = x.flatten(1).unsqueeze(-1).unsqueeze(-1)
            elif isinstance(spec, sl.FullyConnected):
                x = module(x.flatten(1)).unsqueeze(-1).unsqueeze(-1)
            elif isinstance(spec, sl.Argmax):
                x = x.flatten(1).argmax(dim=1, keepdim=True).float().unsqueeze(-1).unsqueeze(-1)
            else:
                x = module(x)
        return x

    def export_tensors(self) -> dict:
        """Container-ready {tensor name: float32 array} in graph order."""
        out = {}
        for spec, module in zip(self.specs, self.blocks):
            out.update(_export_layer(spec, module))
        return out


def _np(tensor):
    return tensor.detach().cpu().numpy().astype("float32")


def _export_conv_like(name, module):
    entries = {f"{name}.weight": _np(module.weight)}
    if module.bias is not None:
        entries[f"{name}.bias"] = _np(module.bias)
    return entries


def _export_bn(name, module):
    return {
        f"{name}.gamma": _np(module.weight),
        f"{name}.beta": _np(module.bias),
        f"{name}.running_mean": _np(module.running_mean),
        f"{name}.running_var": _np(module.running_var),
    }


def _export_layer(spec, module) -> dict:
    if isinstance(spec, sl.Conv):
        conv = module[1] if isinstance(module, nn.Sequential) else module
        return _export_conv_like(spec.name, conv)
    if isinstance(spec, sl.ConvTranspose):
        return _export_conv_like(spec.name, module)
    if isinstance(spec, sl.BatchNorm):
        return _export_bn(spec.name, module)
    if isinstance(spec, sl.FullyConnected):
        return _export_conv_like(spec.name, module)
    if isinstance(spec, sl.BasicBlock):
        out = {}
        out.update(_export_conv_like(f"{spec.name}.conv1", module.conv1))
        out.update(_export_bn(f"{spec.name}.bn1", module.bn1))
        out.update(_export_conv_like(f"{spec.name}.conv2", module.conv2))
        out.update(_export_bn(f"{spec.name}.bn2", module.bn2))
        if spec.has_projection:
            out.update(_export_conv_like(f"{spec.name}.downsample.conv", module.downsample_conv))
            out.update(_export_bn(f"{spec.name}.downsample.bn", module.downsample_bn))
        return out
    return {}


class SplitClassifier(nn.Module):
    """Encoder -> (optional AWGN) -> decoder, trained end to end."""

    def __init__(self, split_model, sigma: float = 0.0):
        super().__init__()
        self.split_model = split_model
        self.encoder = GraphModule(split_model.encoder)
        self.channel = GaussianChannel(sigma)
        self.decoder = GraphModule(split_model.decoder)

    def forward(self, x):
        z = self.encoder(x)
        return self.decoder(self.channel(z)).flatten(1)

    def export_tensors(self) -> dict:
        out = self.encoder.export_tensors()
        out.update(self.decoder.export_tensors())
        return out


class VanillaClassifier(nn.Module):
    def __init__(self, graph):
        super().__init__()
        self.graph_module = GraphModule(graph)

    def forward(self, x):
        return self.graph_module(x).flatten(1)

    def export_tensors(self) -> dict:
        return self.graph_module.export_tensors()


def build_model(config):
    """Torch model (plus the splitwire description) for a TrainConfig."""
    from splitwire.channel import sigma_from_snr

    graph = build_resnet(config.depth, "cifar", config.num_classes)
    if config.split is None:
        return VanillaClassifier(graph), graph
    if config.split in ("SP-0", "SP-6", 0, 6):
        raise ValueError(
            f"{config.split} is a degenerate transport (raw input / label); train the unsplit "
            "baseline instead (omit --split)"
        )
    split_model = apply_split(graph, config.split, config.n_c, config.decompress_stages)
    sigma = 0.0 if config.snr_db is None else sigma_from_snr(config.snr_db)
    return SplitClassifier(split_model, sigma), split_model
