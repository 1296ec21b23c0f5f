"""Anti-wrapping phase losses.

Each loss is the mean circular distance between predicted and natural phase
(instantaneous phase), their frequency differences (group delay) or their
time differences (instantaneous angular frequency). Inputs are ``(F, N)`` or
``(batch, F, N)``; per-matrix means are averaged over the batch.

Functions accept tensors (differentiable) or arrays (returns a float).
``reduction="none"`` keeps one value per matrix instead of the batch mean.
"""
from dataclasses import dataclass

import numpy as np
import torch

from .phasemath import anti_wrap_torch


@dataclass(frozen=True)
class LossConfig:
    enable_ip: bool = True
    enable_gd: bool = True
    enable_iaf: bool = True
    anti_wrap_enabled: bool = True

    def __post_init__(self):
        if not (self.enable_ip or self.enable_gd or self.enable_iaf):
            raise ValueError("at least one loss term must be enabled")


@dataclass
class LossBreakdown:
    ip: float
    gd: float
    iaf: float
    total: float

    def as_dict(self):
        return {"ip": self.ip, "gd": self.gd, "iaf": self.iaf, "total": self.total}


def _tensors(p_hat, p):
    numpy_in = not isinstance(p_hat, torch.Tensor)
    if numpy_in:
        p_hat = torch.as_tensor(np.asarray(p_hat, dtype=np.float64))
    if not isinstance(p, torch.Tensor):
        p = torch.as_tensor(np.asarray(p, dtype=np.float64), dtype=p_hat.dtype)
    if p_hat.shape != p.shape:
        raise ValueError(f"shape mismatch: {tuple(p_hat.shape)} vs {tuple(p.shape)}")
    if p_hat.dim() not in (2, 3):
        raise ValueError("expected (F, N) or (batch, F, N) phase")
    return p_hat, p, numpy_in


def _mean_distance(residual, anti_wrap, reduction="mean"):
    dist = anti_wrap_torch(residual) if anti_wrap else residual.abs()
    per_matrix = dist.mean(dim=(-2, -1))
    if reduction == "none":
        return per_matrix
    if reduction != "mean":
        raise ValueError(f"reduction must be 'mean' or 'none', got {reduction!r}")
    return per_matrix.mean()


def _out(value, numpy_in):
    if not numpy_in:
        return value
    return float(value) if value.dim() == 0 else value.detach().numpy()


def loss_ip(p_hat, p, anti_wrap=True, reduction="mean"):
    """Instantaneous phase loss."""
    p_hat, p, np_in = _tensors(p_hat, p)
    return _out(_mean_distance(p_hat - p, anti_wrap, reduction), np_in)


def loss_gd(p_hat, p, anti_wrap=True, reduction="mean"):
    """Group delay loss: frequency-axis differences."""
    p_hat, p, np_in = _tensors(p_hat, p)
    if p.shape[-1] < 2:
        raise ValueError("group delay loss needs at least two frequency bins")
    d = (p_hat[..., 1:] - p_hat[..., :-1]) - (p[..., 1:] - p[..., :-1])
    return _out(_mean_distance(d, anti_wrap, reduction), np_in)


def loss_iaf(p_hat, p, anti_wrap=True, reduction="mean"):
    """Instantaneous angular frequency loss: time-axis differences."""
    p_hat, p, np_in = _tensors(p_hat, p)
    if p.shape[-2] < 2:
        raise ValueError("instantaneous frequency loss needs at least two frames")
    d = (p_hat[..., 1:, :] - p_hat[..., :-1, :]) - (p[..., 1:, :] - p[..., :-1, :])
    return _out(_mean_distance(d, anti_wrap, reduction), np_in)


def loss_total(p_hat, p, cfg=None):
    """Unweighted sum of the enabled terms.

    Returns
    -------
    total : tensor or float
        Differentiable when the inputs are tensors.
    breakdown : LossBreakdown
        Plain floats; disabled terms are reported as 0.
    """
    cfg = cfg or LossConfig()
    p_hat, p, np_in = _tensors(p_hat, p)
    aw = cfg.anti_wrap_enabled
    zero = p_hat.new_zeros(())
    ip = loss_ip(p_hat, p, aw) if cfg.enable_ip else zero
    gd = loss_gd(p_hat, p, aw) if cfg.enable_gd else zero
    iaf = loss_iaf(p_hat, p, aw) if cfg.enable_iaf else zero
    total = ip + gd + iaf
    breakdown = LossBreakdown(*(float(v.detach()) for v in (ip, gd, iaf, total)))
    return _out(total, np_in), breakdown
