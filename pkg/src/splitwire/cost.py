"""Latency model: per-side computation time, communication time, totals.

Computation time is linear in FLOPs with a device-specific per-FLOP
coefficient (valid inside the compute-bound regime; no memory-bound
correction is modeled). Communication time is payload bits over the channel
rate. The dimensionless variant normalizes by the unsplit model's FLOPs
with beta the receiver/transmitter speed ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

from .accounting import FlopReport
from .channel import ChannelProfile


@dataclass(frozen=True)
class DeviceProfile:
    """Seconds of processing time per FLOP."""

    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")


@dataclass(frozen=True)
class CostReport:
    t_m_t: float
    t_m_r: float
    t_comm: float
    payload_bits: int

    @property
    def t_comp(self) -> float:
        return self.t_m_t + self.t_m_r

    @property
    def t_task(self) -> float:
        return self.t_comp + self.t_comm

    def to_dict(self) -> dict:
        return {
            "t_m_t": self.t_m_t,
            "t_m_r": self.t_m_r,
            "t_comp": self.t_comp,
            "t_comm": self.t_comm,
            "t_task": self.t_task,
            "payload_bits": self.payload_bits,
        }


def computation_time(flops: int, device: DeviceProfile) -> float:
    return device.alpha * flops


def total_task_time(
    report: FlopReport, dev_t: DeviceProfile, dev_r: DeviceProfile, bits: int, channel: ChannelProfile
) -> CostReport:
    return CostReport(
        t_m_t=computation_time(report.f_m_t, dev_t),
        t_m_r=computation_time(report.f_m_r, dev_r),
        t_comm=bits / channel.rate_r,
        payload_bits=bits,
    )


def normalized_comp(f_m_t: int, f_m_r: int, f_m: int, beta: float) -> float:
    """Computation cost relative to running the unsplit model at the transmitter."""
    if f_m <= 0:
        raise ValueError("f_m must be > 0")
    if beta <= 0:
        raise ValueError("beta must be > 0")
    return f_m_t / f_m + beta * (f_m_r / f_m)


def beta_sweep(report: FlopReport, beta_grid) -> list:
    """(beta, normalized cost) rows; monotone non-decreasing when f_m_r > 0."""
    grid = list(beta_grid)
    if not grid:
        raise ValueError("beta grid must be non-empty")
    return [(beta, normalized_comp(report.f_m_t, report.f_m_r, report.f_m, beta)) for beta in grid]
