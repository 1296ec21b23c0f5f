"""Residual convolutional phase predictor.

Log-amplitude frames go through a trunk of dilated residual 1-D
convolutions (time axis, frequency bins as channels). Two parallel output
convolutions then emit a pseudo real and a pseudo imaginary part, and their
angle is the predicted wrapped phase. With ``use_parallel_estimation=False``
a single linear output convolution emits the phase directly, unconstrained.

Checkpoint container (all integers little-endian)::

    b"NSPP1"              magic / version
    u32 header_len
    header_len bytes      UTF-8 JSON: {"model_config", "tensors": [[name, shape], ...],
                          "extra": {...}}
    float32 data          every tensor in header order, row-major, little-endian
"""
import io
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .phasemath import phi_torch

MAGIC = b"NSPP1"


class CheckpointError(ValueError):
    """Unreadable, corrupt or incompatible checkpoint."""


@dataclass(frozen=True)
class ModelConfig:
    input_bins: int = 513
    trunk_channels: int = 512
    pre_kernel: int = 7
    block_kernels: tuple = (3, 7, 11)
    sub_block_dilations: tuple = (1, 3, 5)
    output_kernel: int = 7
    lrelu_slope: float = 0.1
    use_parallel_estimation: bool = True
    init_std: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "block_kernels", tuple(self.block_kernels))
        object.__setattr__(self, "sub_block_dilations", tuple(self.sub_block_dilations))
        kernels = (self.pre_kernel, self.output_kernel) + self.block_kernels
        if any(k < 1 or k % 2 == 0 for k in kernels):
            raise ValueError(f"kernel sizes must be odd and positive, got {kernels}")
        if any(d < 1 for d in self.sub_block_dilations):
            raise ValueError("dilations must be positive")
        if self.input_bins < 1 or self.trunk_channels < 1:
            raise ValueError("input_bins and trunk_channels must be positive")
        if not self.block_kernels or not self.sub_block_dilations:
            raise ValueError("need at least one block and one sub-block")

    def to_dict(self):
        d = asdict(self)
        d["block_kernels"] = list(self.block_kernels)
        d["sub_block_dilations"] = list(self.sub_block_dilations)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @property
    def receptive_radius(self):
        """Frames on each side that can influence one output frame."""
        pre = (self.pre_kernel - 1) // 2
        out = (self.output_kernel - 1) // 2
        block = max(
            sum((k - 1) // 2 * d + (k - 1) // 2 for d in self.sub_block_dilations)
            for k in self.block_kernels
        )
        return pre + block + out


def _conv(cin, cout, kernel, dilation=1):
    return nn.Conv1d(cin, cout, kernel, dilation=dilation, padding=(kernel - 1) // 2 * dilation)


class SubBlock(nn.Module):
    """LReLU, dilated conv, LReLU, conv, residual add."""

    def __init__(self, channels, kernel, dilation, slope):
        super().__init__()
        self.dilated = _conv(channels, channels, kernel, dilation)
        self.conv = _conv(channels, channels, kernel)
        self.slope = slope

    def forward(self, x):
        y = self.dilated(F.leaky_relu(x, self.slope))
        y = self.conv(F.leaky_relu(y, self.slope))
        return x + y


class ResBlock(nn.Sequential):
    def __init__(self, channels, kernel, dilations, slope):
        super().__init__(*(SubBlock(channels, kernel, d, slope) for d in dilations))


class PhaseNet(nn.Module):
    """Network mapping ``(batch, F, N)`` log-amplitude to ``(batch, F, N)`` phase."""

    def __init__(self, config=None):
        super().__init__()
        cfg = config or ModelConfig()
        self.config = cfg
        self.pre = _conv(cfg.input_bins, cfg.trunk_channels, cfg.pre_kernel)
        self.blocks = nn.ModuleList(
            ResBlock(cfg.trunk_channels, k, cfg.sub_block_dilations, cfg.lrelu_slope)
            for k in cfg.block_kernels
        )
        if cfg.use_parallel_estimation:
            self.real_head = _conv(cfg.trunk_channels, cfg.input_bins, cfg.output_kernel)
            self.imag_head = _conv(cfg.trunk_channels, cfg.input_bins, cfg.output_kernel)
        else:
            self.phase_head = _conv(cfg.trunk_channels, cfg.input_bins, cfg.output_kernel)

    def trunk(self, log_amp):
        """Trunk features, ``(batch, F, N) -> (batch, C, F)``."""
        x = self.pre(log_amp.transpose(1, 2))
        y = sum(block(x) for block in self.blocks) / len(self.blocks)
        return F.leaky_relu(y, self.config.lrelu_slope)

    def forward(self, log_amp, return_parts=False):
        if log_amp.dim() == 2:
            log_amp = log_amp.unsqueeze(0)
        if log_amp.shape[-1] != self.config.input_bins:
            raise ValueError(
                f"input has {log_amp.shape[-1]} bins, model expects {self.config.input_bins}"
            )
        h = self.trunk(log_amp)
        if not self.config.use_parallel_estimation:
            phase = self.phase_head(h).transpose(1, 2)
            return (phase, None, None) if return_parts else phase
        real = self.real_head(h).transpose(1, 2)
        imag = self.imag_head(h).transpose(1, 2)
        phase = phi_torch(real, imag)
        return (phase, real, imag) if return_parts else phase


def init_params(model, seed=0):
    """Normal(0, init_std) kernels and zero biases, drawn from a seeded NumPy RNG.

    Drawing from NumPy keeps initialisation identical across torch versions.
    """
    rng = np.random.default_rng(seed)
    std = model.config.init_std
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith(".bias"):
                p.zero_()
            else:
                p.copy_(torch.from_numpy(rng.normal(0.0, std, size=tuple(p.shape))))
    return model


def build_model(config=None, seed=0):
    return init_params(PhaseNet(config), seed)


# --------------------------------------------------------------------------
# checkpoint container


def write_container(fh, model_config, tensors, extra=None):
    """Write named float32 tensors plus JSON metadata in the NSPP1 layout."""
    names = list(tensors)
    arrays = [np.ascontiguousarray(np.asarray(tensors[n], dtype="<f4")) for n in names]
    header = {
        "model_config": model_config.to_dict() if model_config is not None else None,
        "tensors": [[n, list(a.shape)] for n, a in zip(names, arrays)],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    fh.write(MAGIC)
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)
    for a in arrays:
        fh.write(a.tobytes())


def read_container(fh):
    """Inverse of :func:`write_container`; returns ``(config, tensors, extra)``."""
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}; expected {MAGIC!r} (wrong version or not a checkpoint)")
    raw = fh.read(4)
    if len(raw) != 4:
        raise CheckpointError("truncated checkpoint header")
    (n,) = struct.unpack("<I", raw)
    try:
        header = json.loads(fh.read(n).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    tensors = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        buf = fh.read(4 * count)
        if len(buf) != 4 * count:
            raise CheckpointError(f"truncated data for tensor {name!r}")
        tensors[name] = np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
    if fh.read(1):
        raise CheckpointError("trailing bytes after last tensor")
    cfg = header.get("model_config")
    return (ModelConfig.from_dict(cfg) if cfg else None), tensors, header.get("extra", {})


def save_model(model, path, extra=None):
    state = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    with open(path, "wb") as fh:
        write_container(fh, model.config, state, extra)


def load_model(path):
    """Rebuild a :class:`PhaseNet` in eval mode from any NSPP1 file.

    Optimizer entries (names starting with ``optim.``) are ignored.
    """
    with open(path, "rb") as fh:
        cfg, tensors, _ = read_container(fh)
    if cfg is None:
        raise CheckpointError("checkpoint carries no model config")
    model = PhaseNet(cfg)
    wanted = model.state_dict()
    state = {}
    for k in wanted:
        if k not in tensors:
            raise CheckpointError(f"checkpoint lacks parameter {k!r}")
        if tuple(tensors[k].shape) != tuple(wanted[k].shape):
            raise CheckpointError(f"shape mismatch for {k!r}")
        state[k] = torch.from_numpy(tensors[k])
    model.load_state_dict(state)
    return model.eval()


def model_bytes(model):
    buf = io.BytesIO()
    write_container(buf, model.config, {k: v.detach().numpy() for k, v in model.state_dict().items()})
    return buf.getvalue()
