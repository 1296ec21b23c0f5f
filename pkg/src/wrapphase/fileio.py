"""WAV and spectrogram-dump I/O.

WAV: 16-bit PCM mono RIFF only. Anything else, including a sample rate that
differs from the expected one, raises :class:`AudioFormatError`; there is no
resampling.

PHSC dump (one matrix per file, little-endian)::

    b"PHSC"   magic
    u32       version (1)
    u32       F (rows, frames)
    u32       N (columns, bins)
    float32   F * N values, row-major
"""
import struct
import wave
from pathlib import Path

import numpy as np

PHSC_MAGIC = b"PHSC"
PHSC_VERSION = 1


class AudioFormatError(ValueError):
    pass


def read_wav(path, expected_rate=16000):
    """Samples in [-1, 1) as float64, and the sample rate."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            comp = w.getcomptype()
            data = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"{path}: not a PCM WAV file ({exc})") from None
    if comp != "NONE" or width != 2:
        raise AudioFormatError(f"{path}: need 16-bit PCM, got {8 * width}-bit {comp}")
    if channels != 1:
        raise AudioFormatError(f"{path}: need mono, got {channels} channels")
    if expected_rate is not None and rate != expected_rate:
        raise AudioFormatError(
            f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz (resampling is not supported)"
        )
    if not data:
        raise AudioFormatError(f"{path}: no samples")
    return np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0, rate


def write_wav(path, samples, sample_rate=16000):
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0 - 1.0 / 32768)
    pcm = np.round(x * 32768.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())


def write_phsc(path, matrix):
    m = np.ascontiguousarray(np.asarray(matrix, dtype="<f4"))
    if m.ndim != 2:
        raise ValueError("PHSC holds a single 2-D matrix")
    with open(path, "wb") as fh:
        fh.write(PHSC_MAGIC)
        fh.write(struct.pack("<III", PHSC_VERSION, *m.shape))
        fh.write(m.tobytes())


def read_phsc(path):
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16 or head[:4] != PHSC_MAGIC:
            raise ValueError(f"{path}: not a PHSC file")
        version, rows, cols = struct.unpack("<III", head[4:])
        if version != PHSC_VERSION:
            raise ValueError(f"{path}: unsupported PHSC version {version}")
        data = fh.read()
    if len(data) != 4 * rows * cols:
        raise ValueError(f"{path}: expected {rows}x{cols} floats, found {len(data) // 4}")
    return np.frombuffer(data, dtype="<f4").reshape(rows, cols).astype(np.float64)


def list_wavs(directory):
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".wav")
