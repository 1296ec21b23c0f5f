"""Training loop, segment dataset and resumable checkpoints.

One epoch is one random, hop-aligned crop from every utterance, visited in a
seeded random order. Crops and order for epoch ``e`` depend only on
``(seed, e)``, so a run resumed mid-epoch replays exactly the batches an
uninterrupted run would have seen.

The learning rate during epoch ``e`` is ``lr_init * lr_decay_per_epoch**e``.
"""
import json
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .fileio import list_wavs, read_wav
from .losses import LossConfig, loss_total
from .model import CheckpointError, ModelConfig, PhaseNet, build_model, read_container, write_container
from .spectral import StftConfig, analyze

log = logging.getLogger(__name__)


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    data_dir: str = ""
    lr_init: float = 2e-4
    lr_decay_per_epoch: float = 0.999
    adam_beta1: float = 0.8
    adam_beta2: float = 0.99
    weight_decay: float = 0.01
    batch_size: int = 16
    segment_samples: int = 8000
    max_epochs: int = 3100
    max_steps: int | None = None
    seed: int = 0
    checkpoint_every: int = 1000
    val_dir: str | None = None

    def __post_init__(self):
        if not 0 < self.lr_decay_per_epoch <= 1:
            raise ValueError("lr_decay_per_epoch must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.segment_samples < 1:
            raise ValueError("segment_samples must be >= 1")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")

    def lr_at(self, epoch):
        return self.lr_init * self.lr_decay_per_epoch ** epoch


def lr_schedule(cfg, n_epochs):
    return [cfg.lr_at(e) for e in range(n_epochs)]


# --------------------------------------------------------------------------
# data


class SegmentDataset:
    """Waveforms cut into fixed-length, hop-aligned crops with features.

    Parameters
    ----------
    waves : list of ndarray
    stft_cfg : StftConfig
    segment_samples : int
        Must be a multiple of the hop. Shorter waveforms are zero-padded.
    seed : int
    names : list of str, optional
    """

    def __init__(self, waves, stft_cfg=None, segment_samples=8000, seed=0, names=None):
        self.stft_cfg = stft_cfg or StftConfig()
        if segment_samples % self.stft_cfg.hop_length:
            raise ValueError(
                f"segment_samples {segment_samples} is not a multiple of hop {self.stft_cfg.hop_length}"
            )
        if not waves:
            raise ValueError("dataset is empty")
        self.segment_samples = segment_samples
        self.seed = seed
        self.names = list(names) if names is not None else [f"utt{i}" for i in range(len(waves))]
        self.padded = []
        self.waves = []
        for name, w in zip(self.names, waves):
            w = np.asarray(w, dtype=np.float64)
            if w.size < segment_samples:
                log.warning("%s: %d samples < segment %d, zero-padded", name, w.size, segment_samples)
                self.padded.append(name)
                w = np.pad(w, (0, segment_samples - w.size))
            self.waves.append(w)

    def __len__(self):
        return len(self.waves)

    def crop_plan(self, epoch):
        """``(order, starts)`` for one epoch."""
        rng = np.random.default_rng([self.seed, epoch])
        order = rng.permutation(len(self.waves))
        hop = self.stft_cfg.hop_length
        starts = np.array([
            hop * rng.integers(0, (self.waves[i].size - self.segment_samples) // hop + 1)
            for i in order
        ])
        return order, starts

    def features(self, index, start):
        crop = self.waves[index][start:start + self.segment_samples]
        return analyze(crop, self.stft_cfg)

    def batches(self, epoch, batch_size):
        order, starts = self.crop_plan(epoch)
        for b in range(0, len(order), batch_size):
            feats = [self.features(i, s) for i, s in zip(order[b:b + batch_size], starts[b:b + batch_size])]
            log_amp = torch.tensor(np.stack([f[0] for f in feats]), dtype=torch.float32)
            phase = torch.tensor(np.stack([f[1] for f in feats]), dtype=torch.float32)
            yield log_amp, phase

    def n_batches(self, batch_size):
        return math.ceil(len(self.waves) / batch_size)


def build_dataset(data_dir, stft_cfg=None, segment_samples=8000, seed=0):
    """Load every ``*.wav`` in ``data_dir`` into a :class:`SegmentDataset`."""
    stft_cfg = stft_cfg or StftConfig()
    path = Path(data_dir)
    if not path.is_dir():
        raise FileNotFoundError(f"data directory {data_dir} does not exist")
    files = list_wavs(path)
    if not files:
        raise ValueError(f"no WAV files in {data_dir}")
    waves = []
    for f in files:
        x, _ = read_wav(f, stft_cfg.sample_rate)
        waves.append(x)
    return SegmentDataset(waves, stft_cfg, segment_samples, seed, names=[f.name for f in files])


# --------------------------------------------------------------------------
# state and checkpoints


@dataclass
class TrainingState:
    model: PhaseNet
    optimizer: torch.optim.Optimizer
    train_cfg: TrainConfig
    loss_cfg: LossConfig = field(default_factory=LossConfig)
    stft_cfg: StftConfig = field(default_factory=StftConfig)
    epoch: int = 0
    batch_in_epoch: int = 0
    step: int = 0


def make_optimizer(model, cfg):
    return torch.optim.AdamW(
        model.parameters(),
        lr=cfg.lr_init,
        betas=(cfg.adam_beta1, cfg.adam_beta2),
        weight_decay=cfg.weight_decay,
    )


def new_state(train_cfg, model_cfg=None, loss_cfg=None, stft_cfg=None):
    model = build_model(model_cfg or ModelConfig(), seed=train_cfg.seed)
    return TrainingState(model, make_optimizer(model, train_cfg), train_cfg,
                         loss_cfg or LossConfig(), stft_cfg or StftConfig())


def _config_dict(cfg):
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def save_checkpoint(state, path):
    """Write model weights, Adam moments and counters to one NSPP1 file."""
    tensors = {k: v.detach().cpu().numpy() for k, v in state.model.state_dict().items()}
    names = [n for n, _ in state.model.named_parameters()]
    opt_state = state.optimizer.state_dict()["state"]
    steps = {}
    for i, name in enumerate(names):
        s = opt_state.get(i)
        if s:
            tensors[f"optim.{name}.exp_avg"] = s["exp_avg"].numpy()
            tensors[f"optim.{name}.exp_avg_sq"] = s["exp_avg_sq"].numpy()
            steps[name] = int(s["step"])
    extra = {
        "kind": "training",
        "epoch": state.epoch,
        "batch_in_epoch": state.batch_in_epoch,
        "step": state.step,
        "optim_steps": steps,
        "train_config": _config_dict(state.train_cfg),
        "loss_config": _config_dict(state.loss_cfg),
        "stft_config": _config_dict(state.stft_cfg),
    }
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        write_container(fh, state.model.config, tensors, extra)
    tmp.replace(path)


def load_checkpoint(path, train_cfg=None):
    """Restore a :class:`TrainingState`.

    ``train_cfg`` overrides the stored one (e.g. a new ``max_epochs``);
    optimizer moments are restored when present, so a model-only file gives
    a fresh optimizer.
    """
    with open(path, "rb") as fh:
        model_cfg, tensors, extra = read_container(fh)
    if model_cfg is None:
        raise CheckpointError(f"{path}: no model config")
    model = PhaseNet(model_cfg)
    sd = model.state_dict()
    try:
        model.load_state_dict({k: torch.from_numpy(tensors[k]) for k in sd})
    except (KeyError, RuntimeError) as exc:
        raise CheckpointError(f"{path}: parameters do not match the stored config ({exc})") from None
    stored_train = extra.get("train_config")
    if train_cfg is None:
        train_cfg = TrainConfig(**stored_train) if stored_train else TrainConfig()
    loss_cfg = LossConfig(**extra["loss_config"]) if "loss_config" in extra else LossConfig()
    stft_cfg = StftConfig(**extra["stft_config"]) if "stft_config" in extra else StftConfig()
    opt = make_optimizer(model, train_cfg)
    steps = extra.get("optim_steps", {})
    if steps:
        state = {}
        for i, (name, _) in enumerate(model.named_parameters()):
            if name in steps:
                state[i] = {
                    "step": torch.tensor(float(steps[name])),
                    "exp_avg": torch.from_numpy(tensors[f"optim.{name}.exp_avg"]),
                    "exp_avg_sq": torch.from_numpy(tensors[f"optim.{name}.exp_avg_sq"]),
                }
        sd_opt = opt.state_dict()
        sd_opt["state"] = state
        opt.load_state_dict(sd_opt)
    return TrainingState(model, opt, train_cfg, loss_cfg, stft_cfg,
                         epoch=extra.get("epoch", 0),
                         batch_in_epoch=extra.get("batch_in_epoch", 0),
                         step=extra.get("step", 0))


# --------------------------------------------------------------------------
# loop


class JsonlLog:
    """Append-only structured log; one JSON object per line."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.records = []

    def write(self, record):
        self.records.append(record)
        if self.path is not None:
            with open(self.path, "a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def _set_lr(opt, lr):
    for g in opt.param_groups:
        g["lr"] = lr


@torch.no_grad()
def evaluate_loss(model, dataset, loss_cfg, batch_size=16, epoch=0):
    totals = []
    for log_amp, phase in dataset.batches(epoch, batch_size):
        _, b = loss_total(model(log_amp), phase, loss_cfg)
        totals.append(b.total)
    return float(np.mean(totals))


def train(train_cfg, model_cfg=None, loss_cfg=None, out_dir=None, dataset=None,
          resume=None, stft_cfg=None, val_dataset=None, callback=None):
    """Run (or continue) training.

    Parameters
    ----------
    train_cfg : TrainConfig
    model_cfg, loss_cfg, stft_cfg : optional
        Ignored when resuming; the checkpoint's configs are used, and a
        differing ``model_cfg`` raises :class:`CheckpointError`.
    out_dir : path, optional
        Receives ``train_log.jsonl``, ``ckpt_<step>.nspp`` every
        ``checkpoint_every`` steps and ``final.nspp``.
    dataset : SegmentDataset, optional
        Defaults to ``build_dataset(train_cfg.data_dir, ...)``.
    resume : TrainingState or path, optional
    callback : callable, optional
        ``callback(state, breakdown)`` after every step; returning ``True``
        ends training after that step.

    Returns
    -------
    (TrainingState, JsonlLog)
    """
    if resume is not None:
        state = resume if isinstance(resume, TrainingState) else load_checkpoint(resume, train_cfg)
        if model_cfg is not None and model_cfg != state.model.config:
            raise CheckpointError(
                "model config of the checkpoint differs from the requested one; "
                f"checkpoint: {state.model.config}, requested: {model_cfg}"
            )
        state.train_cfg = train_cfg
    else:
        state = new_state(train_cfg, model_cfg, loss_cfg, stft_cfg)
    if dataset is None:
        dataset = build_dataset(train_cfg.data_dir, state.stft_cfg, train_cfg.segment_samples, train_cfg.seed)
    if val_dataset is None and train_cfg.val_dir:
        val_dataset = build_dataset(train_cfg.val_dir, state.stft_cfg, train_cfg.segment_samples, train_cfg.seed)

    out = Path(out_dir) if out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    logbook = JsonlLog(out / "train_log.jsonl" if out else None)
    for name in dataset.padded:
        logbook.write({"type": "warning", "file": name, "message": "zero-padded to segment length"})

    model, opt = state.model, state.optimizer
    model.train()
    cfg = train_cfg
    n_batches = dataset.n_batches(cfg.batch_size)
    done = False
    while state.epoch < cfg.max_epochs and not done:
        lr = cfg.lr_at(state.epoch)
        _set_lr(opt, lr)
        epoch_totals = []
        for b, (log_amp, phase) in enumerate(dataset.batches(state.epoch, cfg.batch_size)):
            if b < state.batch_in_epoch:
                continue
            total, brk = loss_total(model(log_amp), phase, state.loss_cfg)
            if not math.isfinite(brk.total):
                if out is not None:
                    np.savez(out / "nonfinite_batch.npz", log_amp=log_amp.numpy(), phase=phase.numpy())
                where = f"step {state.step} (epoch {state.epoch}, batch {b})"
                dump = "; offending batch dumped to nonfinite_batch.npz" if out is not None else ""
                raise NonFiniteLossError(f"non-finite loss at {where}{dump}")
            opt.zero_grad(set_to_none=True)
            total.backward()
            opt.step()
            state.step += 1
            state.batch_in_epoch = b + 1
            epoch_totals.append(brk.total)
            logbook.write({"type": "step", "step": state.step, "epoch": state.epoch, "lr": lr,
                           **brk.as_dict()})
            stop = callback is not None and callback(state, brk) is True
            if out is not None and state.step % cfg.checkpoint_every == 0:
                save_checkpoint(state, out / f"ckpt_{state.step:08d}.nspp")
            if stop or (cfg.max_steps is not None and state.step >= cfg.max_steps):
                done = True
                break
        if state.batch_in_epoch >= n_batches:
            record = {"type": "epoch", "epoch": state.epoch, "step": state.step, "lr": lr,
                      "mean_total": float(np.mean(epoch_totals)) if epoch_totals else None}
            if val_dataset is not None:
                model.eval()
                record["val_total"] = evaluate_loss(model, val_dataset, state.loss_cfg, cfg.batch_size)
                model.train()
            logbook.write(record)
            state.epoch += 1
            state.batch_in_epoch = 0
    model.eval()
    if out is not None:
        save_checkpoint(state, out / "final.nspp")
    return state, logbook


# --------------------------------------------------------------------------
# config files


def load_config(path):
    """Read a JSON config with optional ``train``, ``model``, ``loss``, ``stft`` sections."""
    with open(path) as fh:
        raw = json.load(fh)
    unknown = set(raw) - {"train", "model", "loss", "stft"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    try:
        return (
            TrainConfig(**raw.get("train", {})),
            ModelConfig.from_dict(raw.get("model", {})),
            LossConfig(**raw.get("loss", {})),
            StftConfig(**raw.get("stft", {})),
        )
    except TypeError as exc:
        raise ValueError(f"invalid config {path}: {exc}") from None


def dump_config(path, train_cfg, model_cfg, loss_cfg, stft_cfg):
    with open(path, "w") as fh:
        json.dump({"train": _config_dict(train_cfg), "model": model_cfg.to_dict(),
                   "loss": _config_dict(loss_cfg), "stft": _config_dict(stft_cfg)},
                  fh, indent=2, sort_keys=True)
