"""Objective measures: segmental SNR, F0-RMSE in cents, real-time factor."""
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import medfilt

from .validation import check_waveform

SNR_CAP_DB = 60.0
SNR_FRAME_S = 0.025
SNR_ENERGY_FLOOR_DBFS = -60.0

F0_FRAME_S = 0.025
F0_HOP_S = 0.005
F0_MIN_HZ = 60.0
F0_MAX_HZ = 400.0
VOICING_THRESHOLD = 0.3
F0_SILENCE_DB = -40.0
F0_MEDIAN = 5
F0_MIN_RUN = 6


class UndefinedMetricError(ValueError):
    """Raised when a metric has no frames to average over."""


def _trim(reference, test):
    reference = check_waveform(reference, "reference")
    test = check_waveform(test, "test")
    n = min(reference.size, test.size)
    return reference[:n], test[:n]


def snr(reference, test, sample_rate=16000):
    """Segmental SNR in dB.

    Non-overlapping 25 ms frames; only frames whose reference mean-square
    level exceeds -60 dBFS count. Each frame's SNR is capped at 60 dB and
    the result is the mean over counted frames. Signals are trimmed to the
    shorter length.
    """
    x, y = _trim(reference, test)
    flen = int(round(SNR_FRAME_S * sample_rate))
    n_frames = x.size // flen
    if n_frames == 0:
        n_frames, flen = 1, x.size
    xs = x[: n_frames * flen].reshape(n_frames, flen)
    es = (x[: n_frames * flen] - y[: n_frames * flen]).reshape(n_frames, flen)
    sig = np.sum(xs ** 2, axis=1)
    noise = np.sum(es ** 2, axis=1)
    level = 10 * np.log10(np.maximum(sig / flen, 1e-300))
    active = level > SNR_ENERGY_FLOOR_DBFS
    if not np.any(active):
        raise UndefinedMetricError("reference has no frames above -60 dBFS")
    with np.errstate(divide="ignore"):
        per_frame = 10 * np.log10(sig[active]) - 10 * np.log10(noise[active])
    per_frame = np.minimum(per_frame, SNR_CAP_DB)
    return float(np.mean(per_frame))


def f0_track(x, sample_rate=16000, fmin=F0_MIN_HZ, fmax=F0_MAX_HZ,
             threshold=VOICING_THRESHOLD):
    """Frame-wise F0 by normalised cross-correlation.

    Each 25 ms frame (5 ms hop) is correlated with its lagged copy over lags covering
    ``fmin..fmax``. The chosen lag is the shortest local maximum within 85%
    of the best one, refined by parabolic interpolation. A frame is unvoiced
    (reported as 0) when its peak correlation is below ``threshold`` or its
    energy is more than 40 dB under the loudest frame. Voiced runs shorter
    than 6 frames (30 ms) are dropped and the rest are median-smoothed over
    5 frames to remove isolated octave jumps.

    Returns
    -------
    ndarray, shape (n_frames,)
        F0 in Hz, 0 for unvoiced frames.
    """
    x = check_waveform(x)
    w = int(round(F0_FRAME_S * sample_rate))
    hop = int(round(F0_HOP_S * sample_rate))
    lag_min = int(math.floor(sample_rate / fmax))
    lag_max = int(math.ceil(sample_rate / fmin))
    padded = np.concatenate([x, np.zeros(w + lag_max + 1)])
    n_frames = max(1, 1 + (x.size - w) // hop) if x.size >= w else 1
    lags = np.arange(lag_min - 1, lag_max + 2)
    f0 = np.zeros(n_frames)
    energies = np.array([padded[t * hop:t * hop + w] @ padded[t * hop:t * hop + w]
                         for t in range(n_frames)])
    gate = energies.max() * 10 ** (F0_SILENCE_DB / 10)
    for t in range(n_frames):
        s = t * hop
        frame = padded[s:s + w]
        e0 = energies[t]
        if e0 <= max(gate, 1e-10):
            continue
        segs = np.lib.stride_tricks.sliding_window_view(padded[s + lags[0]:s + lags[-1] + w], w)
        cross = segs @ frame
        energy = np.einsum("ij,ij->i", segs, segs)
        nccf = cross / np.sqrt(e0 * np.maximum(energy, 1e-20))
        inner = nccf[1:-1]
        peaks = np.flatnonzero((inner >= nccf[:-2]) & (inner > nccf[2:])) + 1
        if peaks.size == 0:
            continue
        best = nccf[peaks].max()
        if best < threshold:
            continue
        k = peaks[nccf[peaks] >= 0.85 * best][0]
        a, b, c = nccf[k - 1], nccf[k], nccf[k + 1]
        denom = a - 2 * b + c
        delta = 0.5 * (a - c) / denom if denom < 0 else 0.0
        f0[t] = sample_rate / (lags[k] + delta)
    return _smooth_voiced(f0)


def _smooth_voiced(f0):
    out = f0.copy()
    voiced = f0 > 0
    edges = np.flatnonzero(np.diff(np.concatenate([[0], voiced.astype(int), [0]])))
    for a, b in zip(edges[::2], edges[1::2]):
        if b - a < F0_MIN_RUN:
            out[a:b] = 0.0
        else:
            out[a:b] = medfilt(f0[a:b], F0_MEDIAN)
    return out


def f0_rmse(reference, test, sample_rate=16000):
    """RMS of ``1200 * log2(f_test / f_ref)`` over frames voiced in both."""
    ref = f0_track(check_waveform(reference, "reference"), sample_rate)
    tst = f0_track(check_waveform(test, "test"), sample_rate)
    n = min(ref.size, tst.size)
    ref, tst = ref[:n], tst[:n]
    both = (ref > 0) & (tst > 0)
    if not np.any(both):
        raise UndefinedMetricError("no frames are voiced in both signals")
    cents = 1200.0 * np.log2(tst[both] / ref[both])
    return float(np.sqrt(np.mean(cents ** 2)))


def rtf(generation_seconds, audio_seconds):
    """Real-time factor: generation time over audio duration."""
    if not audio_seconds > 0:
        raise ValueError(f"audio duration must be positive, got {audio_seconds}")
    if generation_seconds < 0:
        raise ValueError("generation time must be non-negative")
    return generation_seconds / audio_seconds


@dataclass
class UtteranceScore:
    name: str
    snr_db: float
    f0_rmse_cents: float | None
    duration_s: float
    gen_time_s: float = 0.0


@dataclass
class EvalReport:
    """Per-utterance scores plus aggregates.

    ``mean_f0_rmse_cents`` ignores utterances where F0-RMSE is undefined.
    """

    system: str = ""
    utterances: list = field(default_factory=list)

    def add(self, score):
        self.utterances.append(score)

    @property
    def mean_snr_db(self):
        return float(np.mean([u.snr_db for u in self.utterances]))

    @property
    def mean_f0_rmse_cents(self):
        vals = [u.f0_rmse_cents for u in self.utterances if u.f0_rmse_cents is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def total_gen_time_s(self):
        return float(sum(u.gen_time_s for u in self.utterances))

    @property
    def total_duration_s(self):
        return float(sum(u.duration_s for u in self.utterances))

    @property
    def rtf(self):
        return rtf(self.total_gen_time_s, self.total_duration_s)

    def to_dict(self):
        return {
            "system": self.system,
            "utterances": [asdict(u) for u in self.utterances],
            "mean_snr_db": self.mean_snr_db,
            "mean_f0_rmse_cents": self.mean_f0_rmse_cents,
            "total_gen_time_s": self.total_gen_time_s,
            "total_duration_s": self.total_duration_s,
            "rtf": self.rtf,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        rep = cls(system=d.get("system", ""))
        for u in d["utterances"]:
            rep.add(UtteranceScore(**u))
        return rep


def format_table(reports):
    """Aligned text table with SNR / F0-RMSE / RTF columns, one row per system."""
    head = f"{'system':<16}{'SNR(dB)':>10}{'F0-RMSE(cent)':>16}{'RTF':>18}"
    lines = [head, "-" * len(head)]
    for rep in reports:
        f0 = rep.mean_f0_rmse_cents
        f0s = f"{f0:.1f}" if f0 is not None else "n/a"
        r = rep.rtf
        speed = f"{r:.3f} ({1 / r:.1f}x)" if r > 0 else f"{r:.3f}"
        lines.append(f"{rep.system or '-':<16}{rep.mean_snr_db:>10.2f}{f0s:>16}{speed:>18}")
    return "\n".join(lines)
