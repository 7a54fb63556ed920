"""FLOP and parameter accounting for graphs and split models.

FLOPs are multiply-accumulate counts of Conv/ConvTranspose/FullyConnected
layers only (see layers module for the exact convention). Parameter totals
count batch-norm statistics as four values per channel (affine pair plus
running mean/variance); the per-tensor breakdown allows other conventions
to be reproduced, e.g. weight-only counts that exclude batch norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .graph import ModelGraph, SplitModel, infer_shapes


@dataclass(frozen=True)
class FlopReport:
    """MAC counts for a (possibly split) model.

    f_m_t / f_m_r are the transmitter/receiver side counts; f_m is the
    unsplit baseline. For an unsplit graph f_m_t == f_m and f_m_r == 0.
    """

    f_m_t: int
    f_m_r: int
    f_m: int
    per_layer_t: tuple = field(repr=False, default=())
    per_layer_r: tuple = field(repr=False, default=())

    @property
    def total(self) -> int:
        return self.f_m_t + self.f_m_r

    @property
    def proportion_t(self) -> float:
        return 100.0 * self.f_m_t / self.total if self.total else 0.0

    @property
    def proportion_r(self) -> float:
        return 100.0 * self.f_m_r / self.total if self.total else 0.0


@dataclass(frozen=True)
class ParamReport:
    params_t: int
    params_r: int
    per_tensor_t: tuple = field(repr=False, default=())
    per_tensor_r: tuple = field(repr=False, default=())

    @property
    def params_total(self) -> int:
        return self.params_t + self.params_r

    @property
    def proportion_t(self) -> float:
        return 100.0 * self.params_t / self.params_total if self.params_total else 0.0

    @property
    def proportion_r(self) -> float:
        return 100.0 * self.params_r / self.params_total if self.params_total else 0.0


def _graph_macs(graph: ModelGraph):
    if graph.output_shapes is None:
        graph = infer_shapes(graph)
    shape = graph.input_shape
    per_layer = []
    for layer, out in zip(graph.layers, graph.output_shapes):
        per_layer.append((layer.name, layer.macs(shape)))
        shape = out
    return tuple(per_layer)


def _graph_params(graph: ModelGraph):
    return tuple((name, math.prod(shape)) for name, shape in graph.param_entries())


def count_flops(model) -> FlopReport:
    """MAC report for a ModelGraph or SplitModel (shapes must be inferable)."""
    if isinstance(model, SplitModel):
        per_t = _graph_macs(model.encoder)
        per_r = _graph_macs(model.decoder)
        f_m = sum(m for _, m in _graph_macs(model.vanilla))
        return FlopReport(sum(m for _, m in per_t), sum(m for _, m in per_r), f_m, per_t, per_r)
    per_t = _graph_macs(model)
    total = sum(m for _, m in per_t)
    return FlopReport(total, 0, total, per_t, ())


def count_params(model) -> ParamReport:
    """Exact integer parameter counts for a ModelGraph or SplitModel."""
    if isinstance(model, SplitModel):
        per_t = _graph_params(model.encoder)
        per_r = _graph_params(model.decoder)
        return ParamReport(sum(n for _, n in per_t), sum(n for _, n in per_r), per_t, per_r)
    per_t = _graph_params(model)
    return ParamReport(sum(n for _, n in per_t), 0, per_t, ())


def conv_weight_params(report_side: tuple) -> int:
    """Sum a per-tensor breakdown excluding batch-norm tensors.

    Matches the weight-only convention some published tables use.
    """
    bn_suffixes = (".gamma", ".beta", ".running_mean", ".running_var")
    return sum(n for name, n in report_side if not name.endswith(bn_suffixes))
