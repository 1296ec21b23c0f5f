"""Short-time Fourier analysis/synthesis and frame-wise differentials.

Conventions (fixed for the whole package):

* periodic Hann analysis window of ``window_length`` samples, centred in an
  ``fft_size`` buffer (zero padded on both sides);
* centred framing: the signal is reflection padded by ``window_length // 2``
  on each side, so frame ``t`` is centred on sample ``t * hop_length`` and
  ``F = len // hop + 1``;
* ISTFT is weighted overlap-add normalised by the summed squared window,
  the least-squares inverse of the analysis.

Spectrograms are ``(F, N)`` arrays, frames by frequency bins.
"""
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import get_window

from .phasemath import phi

_WINDOWS = ("hann",)


@dataclass(frozen=True)
class StftConfig:
    """Analysis parameters. Defaults are 20 ms / 5 ms at 16 kHz, 1024-point FFT."""

    sample_rate: int = 16000
    window_length: int = 320
    hop_length: int = 80
    fft_size: int = 1024
    window_kind: str = "hann"
    centered: bool = True

    def __post_init__(self):
        if not (0 < self.hop_length <= self.window_length <= self.fft_size):
            raise ValueError(
                "need 0 < hop_length <= window_length <= fft_size, got "
                f"{self.hop_length}, {self.window_length}, {self.fft_size}"
            )
        if self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.window_kind not in _WINDOWS:
            raise ValueError(f"unsupported window {self.window_kind!r}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def n_bins(self):
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples):
        if self.centered:
            return n_samples // self.hop_length + 1
        return max(0, (n_samples - self.window_length) // self.hop_length + 1)

    def window(self):
        return get_window(self.window_kind, self.window_length, fftbins=True)

    def to_dict(self):
        return asdict(self)


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform must be one-dimensional (mono)")
        if self.samples.size == 0:
            raise ValueError("waveform is empty")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


def _as_samples(wave, cfg):
    if isinstance(wave, Waveform):
        if wave.sample_rate != cfg.sample_rate:
            raise ValueError(
                f"sample rate mismatch: waveform {wave.sample_rate} Hz, "
                f"config {cfg.sample_rate} Hz"
            )
        return wave.samples
    x = np.asarray(wave, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("waveform must be one-dimensional")
    if x.size == 0:
        raise ValueError("waveform is empty")
    return x


def _padded_window(cfg):
    win = np.zeros(cfg.fft_size)
    off = (cfg.fft_size - cfg.window_length) // 2
    win[off:off + cfg.window_length] = cfg.window()
    return win, off


def _reflect_pad(x, pad):
    # numpy's reflect mode needs len > pad; fall back to repeated reflection
    # (mode="symmetric" would duplicate the edge sample).
    if x.size > pad:
        return np.pad(x, pad, mode="reflect")
    if x.size == 1:
        return np.pad(x, pad, mode="edge")
    out = x
    while (out.size - x.size) // 2 < pad:
        out = np.pad(out, min(out.size - 1, pad), mode="reflect")
    extra = (out.size - x.size) // 2 - pad
    return out[extra:out.size - extra]


def stft(wave, cfg=None):
    """Complex spectrogram of a waveform.

    Parameters
    ----------
    wave : Waveform or array_like
        Mono signal. A bare array is assumed to be at ``cfg.sample_rate``.
    cfg : StftConfig, optional

    Returns
    -------
    ndarray, complex128, shape (F, N)
    """
    cfg = cfg or StftConfig()
    x = _as_samples(wave, cfg)
    half = cfg.window_length // 2
    if cfg.centered:
        x = _reflect_pad(x, half)
    n_frames = cfg.n_frames(x.size - 2 * half if cfg.centered else x.size)
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.window_length)
    frames = frames[::cfg.hop_length][:n_frames]
    buf = np.zeros((n_frames, cfg.fft_size))
    off = (cfg.fft_size - cfg.window_length) // 2
    buf[:, off:off + cfg.window_length] = frames * cfg.window()
    return np.fft.rfft(buf, axis=1)


def istft(spec, cfg=None, length=None):
    """Least-squares overlap-add inverse of :func:`stft`.

    Parameters
    ----------
    spec : ndarray, complex, shape (F, N)
    cfg : StftConfig, optional
    length : int, optional
        Output length in samples; defaults to ``(F - 1) * hop``.

    Returns
    -------
    ndarray, float64, shape (length,)
    """
    cfg = cfg or StftConfig()
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != cfg.n_bins:
        raise ValueError(
            f"spectrogram shape {spec.shape} inconsistent with {cfg.n_bins} bins"
        )
    n_frames = spec.shape[0]
    if length is None:
        length = (n_frames - 1) * cfg.hop_length
    if length < 0:
        raise ValueError("length must be non-negative")
    if n_frames == 0:
        return np.zeros(length)
    if cfg.centered and cfg.n_frames(length) > n_frames:
        raise ValueError(
            f"length {length} needs {cfg.n_frames(length)} frames, spectrogram has {n_frames}"
        )
    win = cfg.window()
    off = (cfg.fft_size - cfg.window_length) // 2
    frames = np.fft.irfft(spec, n=cfg.fft_size, axis=1)[:, off:off + cfg.window_length]
    frames = frames * win
    total = cfg.window_length + cfg.hop_length * (n_frames - 1)
    out = np.zeros(total)
    norm = np.zeros(total)
    wsq = win ** 2
    for t in range(n_frames):
        s = t * cfg.hop_length
        out[s:s + cfg.window_length] += frames[t]
        norm[s:s + cfg.window_length] += wsq
    start = cfg.window_length // 2 if cfg.centered else 0
    out = out[start:start + length]
    norm = norm[start:start + length]
    if out.size < length:
        out = np.pad(out, (0, length - out.size))
        norm = np.pad(norm, (0, length - norm.size), constant_values=1.0)
    tiny = np.finfo(np.float64).tiny
    if np.any(norm[: min(length, total - start)] <= tiny):
        raise ValueError("window-square normalisation vanishes; window/hop are degenerate")
    return out / np.where(norm > tiny, norm, 1.0)


def amplitude(spec):
    spec = np.asarray(spec)
    return np.hypot(spec.real, spec.imag)


def log_amplitude(amp, floor=1e-5):
    """Natural log of the amplitude, clamped below at ``floor``."""
    if not floor > 0:
        raise ValueError(f"floor must be positive, got {floor}")
    return np.log(np.maximum(np.asarray(amp, dtype=np.float64), floor))


def phase_of(spec):
    """Wrapped phase in (-pi, pi] of every bin."""
    spec = np.asarray(spec)
    return phi(spec.real, spec.imag)


def diff_freq(m):
    """Forward difference along the frequency axis, ``(F, N) -> (F, N-1)``."""
    m = np.asarray(m)
    if m.shape[-1] < 2:
        raise ValueError("need at least two frequency bins")
    return m[..., 1:] - m[..., :-1]


def diff_time(m):
    """Forward difference along the frame axis, ``(F, N) -> (F-1, N)``."""
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-2] < 2:
        raise ValueError("need at least two frames")
    return m[..., 1:, :] - m[..., :-1, :]


def analyze(wave, cfg=None, floor=1e-5):
    """Log-amplitude and wrapped phase of a waveform, both ``(F, N)``."""
    spec = stft(wave, cfg)
    return log_amplitude(amplitude(spec), floor), phase_of(spec)
