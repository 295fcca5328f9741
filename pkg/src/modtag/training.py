"""Optimization loop: random-crop epochs, Adam with a plateau schedule that
decays the learning rate and hands off to SGD+momentum, validation-based
checkpointing, and JSON-line logging.

The loop trains whatever Model it is given (construction stays with the
caller, so configs that describe architecture live elsewhere). Every source
of randomness is derived from TrainConfig.seed, making runs bit-reproducible.
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .data_io import load_clip_audio
from .dsp import AudioClip, stft_power
from .model import Model, save_checkpoint

SAMPLE_RATE = 16000
TASKS = ("tagging", "keyword")
_MIN_CROP_SAMPLES = 512  # one analysis frame


class NumericalError(ArithmeticError):
    """Loss became non-finite; carries the diagnostic context."""


@dataclass
class TrainConfig:
    task: str = "tagging"
    crop_seconds: float = 5.0  # 1.0 is the keyword-task convention
    batch_size: int = 16
    max_epochs: int = 60
    adam_lr: float = 1e-4
    plateau_patience: int = 3
    lr_decay: float = 0.1
    sgd_momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.crop_seconds * SAMPLE_RATE < _MIN_CROP_SAMPLES:
            raise ValueError(
                f"crop of {self.crop_seconds}s is shorter than one analysis frame"
            )
        if self.adam_lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0 < self.lr_decay < 1:
            raise ValueError("lr decay factor must lie in (0, 1)")
        if not 0 <= self.sgd_momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.plateau_patience < 1:
            raise ValueError("batch size, epoch budget and patience must be >= 1")

    @property
    def crop_samples(self) -> int:
        return int(round(self.crop_seconds * SAMPLE_RATE))


@dataclass
class TrainState:
    epoch: int = 0
    best_val_loss: float = float("inf")
    best_checkpoint_path: str | None = None
    current_optimizer: str = "adam"
    lr: float = 0.0
    rng_state: dict | None = None
    history: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# optimizers

class Adam:
    name = "adam"

    def __init__(self, params: dict, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = [params[k] for k in sorted(params)]
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p.data -= (self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)).astype(
                p.data.dtype, copy=False
            )

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


class SGDMomentum:
    name = "sgd"

    def __init__(self, params: dict, lr: float, momentum: float = 0.9):
        self.params = [params[k] for k in sorted(params)]
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            v *= self.momentum
            v += p.grad
            p.data -= (self.lr * v).astype(p.data.dtype, copy=False)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


# ---------------------------------------------------------------------------
# plateau schedule

@dataclass
class PlateauScheduler:
    """Tracks the best validation loss; signals a decay after ``patience``
    consecutive epochs without improvement."""

    patience: int
    best: float = float("inf")
    stale: int = 0
    n_decays: int = 0

    def observe(self, val_loss: float) -> bool:
        if val_loss < self.best:
            self.best = val_loss
            self.stale = 0
            return False
        self.stale += 1
        if self.stale >= self.patience:
            self.stale = 0
            self.n_decays += 1
            return True
        return False


# ---------------------------------------------------------------------------
# cropping

def sample_crop(clip: AudioClip, seconds: float, rng) -> AudioClip:
    """Uniform random crop of exactly seconds*rate samples; short clips are
    right-zero-padded."""
    n = int(round(seconds * clip.sample_rate))
    x = clip.samples
    if x.size < n:
        out = np.zeros(n, np.float32)
        out[: x.size] = x
    else:
        offset = int(rng.integers(0, x.size - n + 1))
        out = x[offset : offset + n].copy()
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


def center_crop(clip: AudioClip, seconds: float) -> AudioClip:
    """Deterministic middle crop with the same padding rule."""
    n = int(round(seconds * clip.sample_rate))
    x = clip.samples
    if x.size < n:
        out = np.zeros(n, np.float32)
        out[: x.size] = x
    else:
        offset = (x.size - n) // 2
        out = x[offset : offset + n].copy()
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


def consecutive_crops(clip: AudioClip, seconds: float) -> list:
    """Non-overlapping windows covering the clip; the tail is zero-padded."""
    n = int(round(seconds * clip.sample_rate))
    x = clip.samples
    n_crops = max(1, -(-x.size // n))
    crops = []
    for i in range(n_crops):
        chunk = x[i * n : (i + 1) * n]
        if chunk.size < n:
            chunk = np.concatenate([chunk, np.zeros(n - chunk.size, np.float32)])
        crops.append(AudioClip(samples=chunk.copy(), sample_rate=clip.sample_rate))
    return crops


# ---------------------------------------------------------------------------
# loss plumbing

def _batch_loss(model: Model, batch, audios, task: str):
    specs = [stft_power(a) for a in audios]
    logits = model(specs)
    if task == "tagging":
        targets = np.stack([c.labels for c in batch]).astype(np.float32)
        return T.bce_with_logits(logits, targets)
    labels = np.array([c.class_index for c in batch], dtype=np.int64)
    return T.cross_entropy(logits, labels)


def _validation_loss(model: Model, val_set, config: TrainConfig) -> float:
    model.eval()
    total, count = 0.0, 0
    for start in range(0, len(val_set), config.batch_size):
        batch = val_set[start : start + config.batch_size]
        audios = [
            center_crop(load_clip_audio(c.path), config.crop_seconds) for c in batch
        ]
        loss = _batch_loss(model, batch, audios, config.task)
        total += loss.item() * len(batch)
        count += len(batch)
    model.train()
    return total / count


# ---------------------------------------------------------------------------
# the loop

def train(model: Model, config: TrainConfig, train_set, val_set,
          out_dir) -> TrainState:
    """Run the full schedule; returns the final TrainState.

    Phase 1 is Adam at config.adam_lr. Each validation-loss plateau
    (plateau_patience epochs without improvement) decays the rate by
    lr_decay; the second decay also switches the optimizer to SGD with
    momentum at the decayed rate. A checkpoint is written to
    out_dir/best.modf whenever validation loss improves.
    """
    if not train_set or not val_set:
        raise ValueError("train and val splits must be nonempty")
    overlap = {c.path for c in train_set} & {c.path for c in val_set}
    if overlap:
        raise ValueError(f"splits share {len(overlap)} clip path(s)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"
    ckpt_path = out_dir / "best.modf"

    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7A41]))
    optimizer = Adam(model.parameters(), lr=config.adam_lr)
    scheduler = PlateauScheduler(patience=config.plateau_patience)
    state = TrainState(lr=config.adam_lr)
    model.train()

    with open(log_path, "w") as log:
        for epoch in range(1, config.max_epochs + 1):
            t0 = time.monotonic()
            order = rng.permutation(len(train_set))
            total, count = 0.0, 0
            for b, start in enumerate(range(0, len(order), config.batch_size)):
                batch = [train_set[i] for i in order[start : start + config.batch_size]]
                audios = [
                    sample_crop(load_clip_audio(c.path), config.crop_seconds, rng)
                    for c in batch
                ]
                optimizer.zero_grad()
                with T.Graph() as g:
                    loss = _batch_loss(model, batch, audios, config.task)
                    value = loss.item()
                    if not np.isfinite(value):
                        raise NumericalError(
                            f"non-finite training loss at epoch {epoch}, "
                            f"batch {b}, lr {state.lr:g}"
                        )
                    g.backward(loss)
                optimizer.step()
                total += value * len(batch)
                count += len(batch)
            train_loss = total / count

            val_loss = _validation_loss(model, val_set, config)
            if not np.isfinite(val_loss):
                raise NumericalError(
                    f"non-finite validation loss at epoch {epoch}, lr {state.lr:g}"
                )

            improved = val_loss < state.best_val_loss
            if improved:
                state.best_val_loss = val_loss
                save_checkpoint(
                    model, ckpt_path,
                    meta={"epoch": epoch, "val_loss": val_loss, "task": config.task},
                )
                state.best_checkpoint_path = str(ckpt_path)
            if scheduler.observe(val_loss):
                state.lr *= config.lr_decay
                if scheduler.n_decays == 2:
                    optimizer = SGDMomentum(
                        model.parameters(), lr=state.lr,
                        momentum=config.sgd_momentum,
                    )
                else:
                    optimizer.lr = state.lr
            state.current_optimizer = optimizer.name
            state.epoch = epoch

            record = {
                "epoch": epoch,
                "train_loss": round(train_loss, 6),
                "val_loss": round(val_loss, 6),
                "lr": state.lr,
                "optimizer": optimizer.name,
                "wall_seconds": round(time.monotonic() - t0, 3),
            }
            log.write(json.dumps(record) + "\n")
            log.flush()
            state.history.append(record)

    state.rng_state = rng.bit_generator.state
    return state


# ---------------------------------------------------------------------------
# inference-time aggregation

def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def predict_tagging_scores(model: Model, clips, crop_seconds: float = 5.0,
                           batch_size: int = 16) -> np.ndarray:
    """Per-clip sigmoid scores averaged over consecutive whole-clip crops."""
    model.eval()
    jobs = []
    for i, clip in enumerate(clips):
        for crop in consecutive_crops(load_clip_audio(clip.path), crop_seconds):
            jobs.append((i, crop))
    n_classes = model.config["n_classes"]
    scores = np.zeros((len(clips), n_classes), np.float64)
    counts = np.zeros(len(clips), np.int64)
    for start in range(0, len(jobs), batch_size):
        chunk = jobs[start : start + batch_size]
        logits = model([stft_power(crop) for _, crop in chunk]).data
        probs = _sigmoid(logits.astype(np.float64))
        for (i, _), p in zip(chunk, probs):
            scores[i] += p
            counts[i] += 1
    return scores / counts[:, None]


def predict_keyword_classes(model: Model, clips, crop_seconds: float = 1.0,
                            batch_size: int = 16) -> np.ndarray:
    """Predicted class index per clip from the deterministic center crop."""
    model.eval()
    out = np.zeros(len(clips), np.int64)
    for start in range(0, len(clips), batch_size):
        batch = clips[start : start + batch_size]
        specs = [
            stft_power(center_crop(load_clip_audio(c.path), crop_seconds))
            for c in batch
        ]
        logits = model(specs).data
        out[start : start + len(batch)] = logits.argmax(axis=1)
    return out
