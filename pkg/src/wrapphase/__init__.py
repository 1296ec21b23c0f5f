"""Wrapped phase spectrum prediction from amplitude spectra.

A residual convolutional network maps log-amplitude spectra to phase through
two parallel heads (pseudo real and imaginary parts), trained with circular
losses on the phase itself, its frequency differences and its time
differences. Griffin-Lim is included as the baseline.
"""
from .estimators import GriffinLim, PhasePredictor
from .griffinlim import GlConfig, griffin_lim, reconstruct
from .losses import LossBreakdown, LossConfig, loss_gd, loss_iaf, loss_ip, loss_total
from .metrics import EvalReport, UndefinedMetricError, f0_rmse, rtf, snr
from .model import CheckpointError, ModelConfig, PhaseNet, build_model, load_model, save_model
from .phasemath import anti_wrap, phi
from .spectral import StftConfig, Waveform, amplitude, analyze, istft, log_amplitude, phase_of, stft
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "CheckpointError", "EvalReport", "GlConfig", "GriffinLim", "LossBreakdown", "LossConfig",
    "ModelConfig", "PhaseNet", "PhasePredictor", "StftConfig", "TrainConfig", "UndefinedMetricError",
    "Waveform", "amplitude", "analyze", "anti_wrap", "build_model", "f0_rmse", "griffin_lim", "istft",
    "load_checkpoint", "load_model", "log_amplitude", "loss_gd", "loss_iaf", "loss_ip", "loss_total",
    "phase_of", "phi", "reconstruct", "rtf", "save_checkpoint", "save_model", "snr", "stft", "train",
]
