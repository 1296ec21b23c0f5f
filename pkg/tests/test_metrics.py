import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import resample

from wrapphase import synth
from wrapphase.metrics import (EvalReport, UndefinedMetricError, UtteranceScore, f0_rmse, f0_track,
                               format_table, rtf, snr)


@pytest.fixture(scope="module")
def vowel():
    return synth.steady_vowel(150.0, duration=1.0)


def test_snr_identity_hits_cap(speech):
    assert snr(speech, speech) == 60.0


def test_snr_negation(speech):
    assert snr(speech, -speech) == pytest.approx(-10 * np.log10(4), abs=1e-9)


def test_snr_per_frame_noise_oracle(rng):
    # Constant-level noise, scaled per 25 ms frame to exactly -20 dB.
    x = rng.uniform(-0.5, 0.5, 16000)
    flen = 400
    noise = rng.uniform(-1, 1, 16000)
    for s in range(0, 16000, flen):
        seg = slice(s, s + flen)
        noise[seg] *= np.sqrt(np.sum(x[seg] ** 2) / np.sum(noise[seg] ** 2) / 100)
    assert snr(x, x + noise) == pytest.approx(20.0, abs=0.5)


def test_snr_trims_and_rejects_silence(speech):
    assert snr(speech, np.concatenate([speech, np.ones(100)])) == 60.0
    with pytest.raises(UndefinedMetricError):
        snr(np.zeros(1000), np.zeros(1000))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 1.5), st.integers(0, 10_000))
def test_snr_joint_scale_invariance(c, seed):
    # Frame selection uses an absolute level; keep every frame far above it
    # so scaling cannot move frames across the threshold.
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, 4000)
    y = x + 0.1 * rng.standard_normal(4000)
    assert snr(c * x, c * y) == pytest.approx(snr(x, y), abs=1e-9)


def test_f0_tracker_on_steady_vowel(vowel):
    f0 = f0_track(vowel)
    voiced = f0[f0 > 0]
    assert voiced.size > 0.8 * f0.size
    assert np.median(voiced) == pytest.approx(150.0, rel=0.01)


def test_f0_rmse_identity_and_semitone(vowel):
    assert f0_rmse(vowel, vowel) == 0.0
    factor = 2 ** (1 / 12)
    shifted = resample(vowel, int(round(vowel.size / factor)))
    assert f0_rmse(vowel, shifted) == pytest.approx(100.0, abs=5.0)


def test_f0_rmse_symmetric(vowel):
    other = synth.steady_vowel(160.0, duration=1.0)
    assert f0_rmse(vowel, other) == pytest.approx(f0_rmse(other, vowel), rel=1e-12)


def test_f0_rmse_white_noise_undefined(rng):
    noise = 0.3 * rng.standard_normal(16000)
    with pytest.raises(UndefinedMetricError):
        f0_rmse(noise, noise)


def test_rtf():
    assert rtf(5.1, 100) == pytest.approx(0.051)
    assert 1 / rtf(5.1, 100) == pytest.approx(19.6, abs=0.05)
    assert rtf(0, 10) == 0
    assert rtf(10, 10) == 1.0
    assert rtf(4, 10) * 2 == pytest.approx(rtf(8, 10))
    with pytest.raises(ValueError):
        rtf(1, 0)


def test_report_aggregates_and_json():
    rep = EvalReport("sys")
    rep.add(UtteranceScore("a", 5.0, 10.0, 2.0, 0.5))
    rep.add(UtteranceScore("b", 3.0, None, 3.0, 0.5))
    assert rep.mean_snr_db == 4.0
    assert rep.mean_f0_rmse_cents == 10.0
    assert rep.rtf == pytest.approx(0.2)
    back = EvalReport.from_dict(json.loads(rep.to_json()))
    assert back.to_dict() == rep.to_dict()
    table = format_table([rep])
    assert "SNR(dB)" in table and "F0-RMSE(cent)" in table and "RTF" in table
    assert "4.00" in table and "(5.0x)" in table
