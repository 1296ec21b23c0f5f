"""scikit-learn style front ends.

``PhasePredictor`` wraps network training and inference, ``GriffinLim`` the
iterative baseline. Both follow the estimator contract: hyperparameters are
plain ``__init__`` arguments (so ``get_params``/``set_params``/``clone``
work), learned state ends in an underscore, and ``fit`` returns ``self``.

Conventions for inputs:

* ``fit``, ``transform`` and ``score`` take waveforms: one 1-D array or a
  list of them, sampled at ``sample_rate``.
* ``predict`` takes linear amplitude spectrograms ``(F, N)`` (or a list) and
  returns wrapped phase spectrograms of the same shape.
"""
import time

import numpy as np
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import griffinlim as gl
from .losses import LossConfig
from .metrics import snr
from .model import ModelConfig, load_model, save_model
from .phasemath import PI
from .spectral import StftConfig, amplitude, log_amplitude, stft
from .trainer import SegmentDataset, TrainConfig, train
from .validation import check_amplitude, check_waveforms


def _stft_config(est):
    return StftConfig(sample_rate=est.sample_rate, window_length=est.window_length,
                      hop_length=est.hop_length, fft_size=est.fft_size)


def _as_list(X):
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return [X], True
    return list(X), False


def to_principal(phase):
    """Cast network output to float64 and fold it into (-pi, pi].

    float32 ``pi`` exceeds float64 ``pi`` by ~9e-8; such values map to ``pi``.
    """
    p = np.asarray(phase, dtype=np.float64)
    p = np.where(p > PI, PI, p)
    return np.where(p <= -PI, PI, p)


class PhasePredictor(TransformerMixin, BaseEstimator):
    """Predict wrapped phase spectra from amplitude spectra with a residual CNN.

    Parameters
    ----------
    trunk_channels, pre_kernel, block_kernels, sub_block_dilations, output_kernel, lrelu_slope
        Network shape; defaults give the full-size model.
    use_parallel_estimation : bool
        Emit phase through pseudo real/imaginary heads (True) or a single
        unconstrained linear head (False).
    anti_wrap : bool
        Use circular distance in the losses (True) or plain absolute error.
    loss_terms : tuple of {"ip", "gd", "iaf"}
    learning_rate, lr_decay, betas, weight_decay
        AdamW settings; ``lr_decay`` is applied once per epoch.
    batch_size, segment_samples, max_epochs, max_steps
        Training budget. ``max_steps=None`` means run all epochs.
    log_floor : float
        Amplitude floor before the logarithm.
    sample_rate, window_length, hop_length, fft_size
        STFT settings.
    seed : int
        Initialisation and crop schedule.
    checkpoint_dir : str, optional
        If set, checkpoints and the training log are written there.

    Attributes
    ----------
    model_ : PhaseNet
    history_ : list of dict
        Training log records.
    n_bins_ : int
    """

    def __init__(self, trunk_channels=512, pre_kernel=7, block_kernels=(3, 7, 11),
                 sub_block_dilations=(1, 3, 5), output_kernel=7, lrelu_slope=0.1,
                 use_parallel_estimation=True, anti_wrap=True, loss_terms=("ip", "gd", "iaf"),
                 learning_rate=2e-4, lr_decay=0.999, betas=(0.8, 0.99), weight_decay=0.01,
                 batch_size=16, segment_samples=8000, max_epochs=3100, max_steps=None,
                 log_floor=1e-5, sample_rate=16000, window_length=320, hop_length=80,
                 fft_size=1024, seed=0, checkpoint_dir=None):
        self.trunk_channels = trunk_channels
        self.pre_kernel = pre_kernel
        self.block_kernels = block_kernels
        self.sub_block_dilations = sub_block_dilations
        self.output_kernel = output_kernel
        self.lrelu_slope = lrelu_slope
        self.use_parallel_estimation = use_parallel_estimation
        self.anti_wrap = anti_wrap
        self.loss_terms = loss_terms
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.betas = betas
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.segment_samples = segment_samples
        self.max_epochs = max_epochs
        self.max_steps = max_steps
        self.log_floor = log_floor
        self.sample_rate = sample_rate
        self.window_length = window_length
        self.hop_length = hop_length
        self.fft_size = fft_size
        self.seed = seed
        self.checkpoint_dir = checkpoint_dir

    def _configs(self):
        stft_cfg = _stft_config(self)
        model_cfg = ModelConfig(
            input_bins=stft_cfg.n_bins, trunk_channels=self.trunk_channels,
            pre_kernel=self.pre_kernel, block_kernels=tuple(self.block_kernels),
            sub_block_dilations=tuple(self.sub_block_dilations),
            output_kernel=self.output_kernel, lrelu_slope=self.lrelu_slope,
            use_parallel_estimation=self.use_parallel_estimation,
        )
        terms = set(self.loss_terms)
        if not terms <= {"ip", "gd", "iaf"}:
            raise ValueError(f"unknown loss terms {sorted(terms - {'ip', 'gd', 'iaf'})}")
        loss_cfg = LossConfig("ip" in terms, "gd" in terms, "iaf" in terms, self.anti_wrap)
        train_cfg = TrainConfig(
            lr_init=self.learning_rate, lr_decay_per_epoch=self.lr_decay,
            adam_beta1=self.betas[0], adam_beta2=self.betas[1], weight_decay=self.weight_decay,
            batch_size=self.batch_size, segment_samples=self.segment_samples,
            max_epochs=self.max_epochs, max_steps=self.max_steps, seed=self.seed,
        )
        return train_cfg, model_cfg, loss_cfg, stft_cfg

    def fit(self, X, y=None):
        """Train on waveforms ``X``; ``y`` is ignored (targets come from ``X``)."""
        waves = check_waveforms(X)
        train_cfg, model_cfg, loss_cfg, stft_cfg = self._configs()
        dataset = SegmentDataset(waves, stft_cfg, self.segment_samples, self.seed)
        state, logbook = train(train_cfg, model_cfg, loss_cfg, out_dir=self.checkpoint_dir,
                               dataset=dataset, stft_cfg=stft_cfg)
        self.model_ = state.model.eval()
        self.history_ = logbook.records
        self.n_bins_ = stft_cfg.n_bins
        return self

    @classmethod
    def from_checkpoint(cls, path, **params):
        """Inference-ready estimator from a saved model or training checkpoint."""
        model = load_model(path)
        c = model.config
        est = cls(trunk_channels=c.trunk_channels, pre_kernel=c.pre_kernel,
                  block_kernels=c.block_kernels, sub_block_dilations=c.sub_block_dilations,
                  output_kernel=c.output_kernel, lrelu_slope=c.lrelu_slope,
                  use_parallel_estimation=c.use_parallel_estimation,
                  fft_size=2 * (c.input_bins - 1), **params)
        est.model_ = model
        est.history_ = []
        est.n_bins_ = c.input_bins
        return est

    def save(self, path):
        check_is_fitted(self, "model_")
        save_model(self.model_, path)

    @torch.no_grad()
    def predict(self, X):
        """Wrapped phase for amplitude spectrogram(s) ``X``."""
        check_is_fitted(self, "model_")
        mats, single = _as_list(X)
        out = []
        for amp in mats:
            amp = check_amplitude(amp)
            if amp.shape[1] != self.n_bins_:
                raise ValueError(f"amplitude has {amp.shape[1]} bins, model expects {self.n_bins_}")
            la = torch.tensor(log_amplitude(amp, self.log_floor), dtype=torch.float32)
            phase = self.model_(la.unsqueeze(0))[0].numpy()
            if self.model_.config.use_parallel_estimation:
                phase = to_principal(phase)
            out.append(phase.astype(np.float64))
        return out[0] if single else out

    def transform(self, X):
        """Resynthesise waveforms from their amplitude and the predicted phase.

        Per-utterance inference times (seconds) are kept in ``timings_``.
        """
        waves = check_waveforms(X)
        cfg = _stft_config(self)
        outs, self.timings_ = [], []
        for x in waves:
            amp = amplitude(stft(x, cfg))
            t0 = time.perf_counter()
            phase = self.predict(amp)
            y = gl.istft(amp * np.exp(1j * phase), cfg, x.size)
            self.timings_.append(time.perf_counter() - t0)
            outs.append(y)
        return outs

    def score(self, X, y=None):
        """Mean segmental SNR (dB) of the resynthesis against ``X``."""
        waves = check_waveforms(X)
        return float(np.mean([snr(x, r, self.sample_rate) for x, r in zip(waves, self.transform(waves))]))


class GriffinLim(TransformerMixin, BaseEstimator):
    """Griffin-Lim phase retrieval as a stateless transformer.

    ``fit`` only validates parameters; ``predict`` maps amplitude to phase and
    ``transform`` maps waveforms to their Griffin-Lim resynthesis.
    """

    def __init__(self, n_iter=100, init="zero", seed=0, sample_rate=16000,
                 window_length=320, hop_length=80, fft_size=1024):
        self.n_iter = n_iter
        self.init = init
        self.seed = seed
        self.sample_rate = sample_rate
        self.window_length = window_length
        self.hop_length = hop_length
        self.fft_size = fft_size

    def fit(self, X=None, y=None):
        self.gl_config_ = gl.GlConfig(self.n_iter, self.init, self.seed)
        self.stft_config_ = _stft_config(self)
        return self

    def predict(self, X, length=None):
        check_is_fitted(self, "gl_config_")
        mats, single = _as_list(X)
        out = [gl.griffin_lim(check_amplitude(a, self.stft_config_), self.gl_config_,
                              self.stft_config_, length) for a in mats]
        return out[0] if single else out

    def transform(self, X):
        check_is_fitted(self, "gl_config_")
        outs, self.timings_ = [], []
        for x in check_waveforms(X):
            amp = amplitude(stft(x, self.stft_config_))
            t0 = time.perf_counter()
            phase = gl.griffin_lim(amp, self.gl_config_, self.stft_config_, x.size)
            y = gl.reconstruct(amp, phase, self.stft_config_, x.size)
            self.timings_.append(time.perf_counter() - t0)
            outs.append(y)
        return outs

    def score(self, X, y=None):
        waves = check_waveforms(X)
        return float(np.mean([snr(x, r, self.sample_rate) for x, r in zip(waves, self.transform(waves))]))
