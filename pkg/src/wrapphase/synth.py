"""Deterministic speech-like test utterances.

A small source-filter synthesiser: a Rosenberg glottal pulse train with a
wandering F0 drives a time-varying cascade of formant resonators; fricatives
are band-passed noise; pauses carry a low noise floor. The signals have the
properties the phase tools care about (harmonic structure, formant envelopes,
voiced/unvoiced alternation, onsets) without needing a speech corpus.
"""
import numpy as np
from scipy.signal import butter, lfilter, sosfilt

# (F1, F2, F3) targets in Hz
VOWELS = {
    "a": (730, 1090, 2440),
    "i": (270, 2290, 3010),
    "u": (300, 870, 2240),
    "e": (530, 1840, 2480),
    "o": (570, 840, 2410),
    "ae": (660, 1720, 2410),
}
BANDWIDTHS = (80.0, 100.0, 140.0)
BLOCK = 80


def _rosenberg(frac, open_q=0.6, close_q=0.25):
    t1 = open_q
    t2 = open_q + close_q
    g = np.zeros_like(frac)
    rise = frac < t1
    g[rise] = 0.5 * (1 - np.cos(np.pi * frac[rise] / t1))
    fall = (frac >= t1) & (frac < t2)
    g[fall] = np.cos(0.5 * np.pi * (frac[fall] - t1) / close_q)
    return g


def _f0_contour(n, sr, rng, base):
    t = np.arange(n) / sr
    dur = n / sr
    contour = base * (1.15 - 0.3 * t / max(dur, 1e-9))
    for _ in range(2):
        f = rng.uniform(0.5, 2.5)
        contour *= 1 + rng.uniform(0.02, 0.05) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    # cycle-to-cycle jitter: white noise smoothed over ~5 ms
    jitter = np.convolve(rng.standard_normal(n), np.ones(80) / 80, mode="same")
    return contour * (1 + 0.05 * jitter)


def _resonate(x, freqs, sr):
    """Cascade of 2-pole resonators with per-block coefficients.

    ``freqs`` has shape (n_blocks, 3).
    """
    y = x
    for k in range(3):
        out = np.empty_like(y)
        zi = np.zeros(2)
        for b in range(freqs.shape[0]):
            s = slice(b * BLOCK, (b + 1) * BLOCK)
            if s.start >= y.size:
                break
            r = np.exp(-np.pi * BANDWIDTHS[k] / sr)
            theta = 2 * np.pi * freqs[b, k] / sr
            a = [1.0, -2 * r * np.cos(theta), r * r]
            g = 1 - 2 * r * np.cos(theta) + r * r
            out[s], zi = lfilter([g], a, y[s], zi=zi)
        y = out
    return y


def _ramp(n, ramp):
    env = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        w = 0.5 * (1 - np.cos(np.pi * np.arange(ramp) / ramp))
        env[:ramp] = w
        env[n - ramp:] = w[::-1]
    return env


def speech_like(seed=0, duration=1.0, sample_rate=16000, f0=None, peak=0.6):
    """Synthesise one utterance.

    Parameters
    ----------
    seed : int
        Fully determines the output.
    duration : float
        Length in seconds.
    sample_rate : int
    f0 : float, optional
        Mean fundamental in Hz; drawn from a male or female range if omitted.
    peak : float
        Peak absolute amplitude of the result.

    Returns
    -------
    ndarray, float64
    """
    rng = np.random.default_rng(seed)
    sr = sample_rate
    n = int(round(duration * sr))
    if f0 is None:
        f0 = rng.uniform(95, 135) if rng.random() < 0.5 else rng.uniform(175, 235)

    # segment plan: alternate voiced stretches with fricatives and pauses
    kinds, lengths = [], []
    pos = 0
    lead = int(rng.uniform(0.03, 0.08) * sr)
    kinds.append("sil")
    lengths.append(lead)
    pos += lead
    while pos < n:
        r = rng.random()
        if r < 0.6:
            kind, seg = "voiced", rng.uniform(0.12, 0.3)
        elif r < 0.85:
            kind, seg = "fric", rng.uniform(0.05, 0.12)
        else:
            kind, seg = "sil", rng.uniform(0.03, 0.08)
        seg = int(seg * sr)
        kinds.append(kind)
        lengths.append(min(seg, n - pos))
        pos += seg

    n_blocks = -(-n // BLOCK)
    vowel_names = list(VOWELS)
    targets = np.array([VOWELS[vowel_names[rng.integers(len(vowel_names))]]
                        for _ in range(len(kinds) + 1)], dtype=float)
    # formant tracks: piecewise-linear glides between random vowel targets
    bounds = np.concatenate([[0], np.cumsum(lengths)]) / BLOCK
    freqs = np.empty((n_blocks, 3))
    for k in range(3):
        freqs[:, k] = np.interp(np.arange(n_blocks), bounds, targets[: bounds.size, k])

    contour = _f0_contour(n, sr, rng, f0)
    phase = np.cumsum(contour / sr)
    glottal = _rosenberg(np.mod(phase, 1.0))
    source = np.diff(glottal, prepend=glottal[0])
    source += 0.02 * rng.standard_normal(n) * np.abs(source).max()

    voiced_env = np.zeros(n)
    fric_env = np.zeros(n)
    start = 0
    for kind, seg in zip(kinds, lengths):
        if seg <= 0:
            continue
        env = _ramp(seg, int(0.015 * sr))
        if kind == "voiced":
            voiced_env[start:start + seg] = env * rng.uniform(0.6, 1.0)
        elif kind == "fric":
            fric_env[start:start + seg] = env * rng.uniform(0.2, 0.5)
        start += seg

    voiced = _resonate(source * voiced_env, freqs, sr)
    voiced /= max(np.abs(voiced).max(), 1e-12)
    lo = rng.uniform(2500, 4000)
    sos = butter(4, [lo, min(7600, lo + rng.uniform(2000, 3500))], btype="band", fs=sr, output="sos")
    fric = sosfilt(sos, rng.standard_normal(n))
    fric /= max(np.abs(fric).max(), 1e-12)
    x = voiced + fric * fric_env
    x += 10 ** (-65 / 20) * rng.standard_normal(n)
    return peak * x / np.abs(x).max()


def corpus(n_utterances, seed=0, duration=1.0, sample_rate=16000):
    """List of ``n_utterances`` distinct utterances."""
    return [speech_like(seed * 100003 + i, duration, sample_rate) for i in range(n_utterances)]


def steady_vowel(f0=150.0, duration=1.0, sample_rate=16000, vowel="a", seed=0):
    """Constant-pitch vowel; used as a pitch reference."""
    sr = sample_rate
    n = int(round(duration * sr))
    rng = np.random.default_rng(seed)
    t = np.arange(n) / sr
    glottal = _rosenberg(np.mod(f0 * t, 1.0))
    source = np.diff(glottal, prepend=glottal[0])
    freqs = np.tile(np.array(VOWELS[vowel], dtype=float), (-(-n // BLOCK), 1))
    y = _resonate(source, freqs, sr) * _ramp(n, int(0.02 * sr))
    y += 1e-4 * rng.standard_normal(n) * np.abs(y).max()
    return 0.5 * y / np.abs(y).max()
