"""Griffin-Lim phase retrieval and amplitude/phase resynthesis."""
from dataclasses import dataclass

import numpy as np

from .phasemath import wrap
from .spectral import StftConfig, amplitude, istft, phase_of, stft
from .validation import check_amplitude, check_phase

EPS = 1e-8


@dataclass(frozen=True)
class GlConfig:
    """Iteration count and phase initialisation.

    ``init`` is ``"zero"``, ``"random"`` (uniform, seeded by ``seed``) or
    ``"provided"`` (pass ``init_phase`` to :func:`griffin_lim`).
    """

    iterations: int = 100
    init: str = "zero"
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.init not in ("zero", "random", "provided"):
            raise ValueError(f"unknown init {self.init!r}")


def _initial_phase(shape, cfg, init_phase):
    if cfg.init == "zero":
        return np.zeros(shape)
    if cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        return wrap(rng.uniform(-np.pi, np.pi, size=shape))
    if init_phase is None:
        raise ValueError("init='provided' requires init_phase")
    init_phase = np.asarray(init_phase, dtype=np.float64)
    if init_phase.shape != shape:
        raise ValueError(f"init_phase shape {init_phase.shape} != amplitude shape {shape}")
    return wrap(init_phase)


def griffin_lim(amp, cfg=None, stft_cfg=None, length=None, init_phase=None, callback=None):
    """Estimate a phase spectrogram consistent with ``amp``.

    Each iteration resynthesises ``amp * exp(1j * phase)``, re-analyses it and
    keeps the phase of the result. Bins whose re-analysed magnitude falls
    below ``1e-8`` retain their previous phase.

    Parameters
    ----------
    amp : ndarray, shape (F, N)
        Linear amplitude spectrogram.
    cfg : GlConfig, optional
    stft_cfg : StftConfig, optional
    length : int, optional
        Signal length used for the intermediate ISTFT; defaults to
        ``(F - 1) * hop``.
    init_phase : ndarray, optional
        Starting phase when ``cfg.init == "provided"``.
    callback : callable, optional
        Called as ``callback(n, phase)`` before iteration ``n`` and once more
        after the last one.

    Returns
    -------
    ndarray, shape (F, N), values in (-pi, pi]
    """
    cfg = cfg or GlConfig()
    stft_cfg = stft_cfg or StftConfig()
    amp = check_amplitude(amp, stft_cfg)
    if length is None:
        length = (amp.shape[0] - 1) * stft_cfg.hop_length
    phase = _initial_phase(amp.shape, cfg, init_phase)
    for n in range(cfg.iterations):
        if callback is not None:
            callback(n, phase)
        s = stft(istft(amp * np.exp(1j * phase), stft_cfg, length), stft_cfg)
        keep = amplitude(s) < EPS
        phase = np.where(keep, phase, phase_of(s))
    if callback is not None:
        callback(cfg.iterations, phase)
    return phase


def consistency_residual(amp, phase, stft_cfg=None, length=None):
    """Squared distance ``||A - |STFT(ISTFT(A e^{jP}))| ||^2``."""
    stft_cfg = stft_cfg or StftConfig()
    if length is None:
        length = (amp.shape[0] - 1) * stft_cfg.hop_length
    s = stft(istft(amp * np.exp(1j * phase), stft_cfg, length), stft_cfg)
    return float(np.sum((amp - amplitude(s)) ** 2))


def reconstruct(amp, phase, stft_cfg=None, length=None):
    """Waveform from an amplitude and a phase spectrogram."""
    stft_cfg = stft_cfg or StftConfig()
    amp = check_amplitude(amp, stft_cfg)
    phase = check_phase(phase, shape=amp.shape)
    return istft(amp * np.exp(1j * phase), stft_cfg, length)
