"""Input checks shared by the estimators, the library functions and the CLI.

They mirror ``sklearn.utils.validation``: each returns a cleaned float64 array
or raises ``ValueError`` with a message naming the offending input.
"""
import numpy as np
from sklearn.utils.validation import check_array

from .phasemath import PI


def check_matrix(m, name="input", n_bins=None, min_frames=1):
    m = check_array(m, dtype=np.float64, ensure_2d=True, ensure_min_samples=min_frames,
                    input_name=name)
    if n_bins is not None and m.shape[1] != n_bins:
        raise ValueError(f"{name} has {m.shape[1]} bins, expected {n_bins}")
    return m


def check_amplitude(amp, stft_cfg=None):
    n_bins = stft_cfg.n_bins if stft_cfg is not None else None
    amp = check_matrix(amp, "amplitude", n_bins)
    if np.any(amp < 0):
        raise ValueError("amplitude spectrogram has negative entries")
    return amp


def check_phase(phase, shape=None):
    phase = check_matrix(phase, "phase")
    if shape is not None and phase.shape != tuple(shape):
        raise ValueError(f"phase shape {phase.shape} != {tuple(shape)}")
    if np.any(phase <= -PI) or np.any(phase > PI):
        raise ValueError("phase entries must lie in (-pi, pi]")
    return phase


def check_waveform(x, name="waveform"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if x.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite samples")
    return x


def check_waveforms(X, name="X"):
    """Accept one waveform or a sequence of them; always return a list."""
    if isinstance(X, np.ndarray) and X.ndim == 1:
        return [check_waveform(X, name)]
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return [check_waveform(row, name) for row in X]
    out = [check_waveform(getattr(x, "samples", x), name) for x in X]
    if not out:
        raise ValueError(f"{name} holds no waveforms")
    return out
