"""Full model: learnable front end feeding the residual CNN.

Pipeline per clip: power spectrogram -> triangular filterbank (H harmonic
planes, F channels, log1p compression) -> sinc modulation filters (all-pass
plane plus M bandpass planes per harmonic) -> [H*(M+1), F, T] feature map.
The batch dimension is formed by running the front end per clip and
concatenating, so front-end parameters receive gradients from every clip.

``front_end="mel"`` is the single-plane variant (H forced to 1);
``front_end="harmonic"`` stacks H harmonic-shifted planes of the same
learnable filters.
"""

import numpy as np

from . import frontend_mel as fm
from . import frontend_tm as ft
from . import tensor as T
from .backend import ResNetBackend
from .tensor import Tensor
from .tensor_io import ContainerError, read_tensors, write_tensors

FRONT_ENDS = ("mel", "harmonic")


class Model:
    def __init__(self, mel: fm.TriangularFilterbank, mod: ft.SincModFilterbank,
                 backend: ResNetBackend, config: dict):
        self.mel = mel
        self.mod = mod
        self.backend = backend
        self.config = dict(config)

    @property
    def n_input_channels(self) -> int:
        return ft.count_output_channels(self.mel.n_harmonics, self.mod.n_filters)

    # -- mode handling -------------------------------------------------------
    def train(self):
        self.backend.train()
        return self

    def eval(self):
        self.backend.eval()
        return self

    # -- forward -------------------------------------------------------------
    def featurize(self, spec) -> ft.ModulationTensor:
        """Front-end feature map for one clip, differentiable in-graph."""
        return ft.modulate(fm.apply(self.mel, spec), self.mod)

    def forward(self, specs) -> Tensor:
        """Logits [B, n_classes] for a batch of equal-length spectrograms."""
        if not specs:
            raise ValueError("empty batch")
        frames = {s.n_frames for s in specs}
        if len(frames) > 1:
            raise ValueError(f"batch mixes frame counts {sorted(frames)}")
        maps = []
        for spec in specs:
            values = self.featurize(spec).values
            maps.append(T.reshape(values, (1,) + values.shape))
        batch = maps[0] if len(maps) == 1 else T.concat(maps, axis=0)
        return self.backend(batch)

    def __call__(self, specs) -> Tensor:
        return self.forward(specs)

    # -- parameter plumbing ----------------------------------------------------
    def parameters(self) -> dict:
        out = {}
        for prefix, owner in (("mel", self.mel), ("mod", self.mod),
                              ("backend", self.backend)):
            for name, p in owner.parameters().items():
                out[f"{prefix}.{name}"] = p
        return out

    def buffers(self) -> dict:
        return {f"backend.{k}": v for k, v in self.backend.buffers().items()}

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters().values())


def build_model(front_end: str = "harmonic", n_harmonics: int = 6,
                n_mod_filters: int = 1, n_mel_filters: int = 128,
                n_classes: int = 50, seed: int = 0,
                dtype=T.DEFAULT_DTYPE) -> Model:
    if front_end not in FRONT_ENDS:
        raise ValueError(f"front_end must be one of {FRONT_ENDS}, got {front_end!r}")
    if n_classes < 1:
        raise ValueError(f"need at least one output class, got {n_classes}")
    h = 1 if front_end == "mel" else n_harmonics
    mel = fm.init_filterbank(n_mel_filters, h, dtype=dtype)
    mod = ft.init_modfilterbank(n_mod_filters, dtype=dtype)
    in_ch = ft.count_output_channels(h, n_mod_filters)
    rng = np.random.default_rng(seed)
    backend = ResNetBackend(in_ch, n_classes, rng=rng, dtype=dtype)
    config = {
        "front_end": front_end,
        "n_harmonics": h,
        "n_mod_filters": n_mod_filters,
        "n_mel_filters": n_mel_filters,
        "n_classes": n_classes,
        "seed": seed,
    }
    return Model(mel=mel, mod=mod, backend=backend, config=config)


def save_checkpoint(model: Model, path, meta: dict | None = None) -> None:
    """Write parameters, batch-norm buffers and the build config to ``path``."""
    tensors = {f"param.{k}": p.data for k, p in model.parameters().items()}
    tensors.update({f"buffer.{k}": v for k, v in model.buffers().items()})
    full_meta = {"model": model.config}
    if meta:
        full_meta.update(meta)
    write_tensors(path, tensors, full_meta)


def load_checkpoint(path) -> tuple:
    """Rebuild a model from a checkpoint; returns (model, meta)."""
    tensors, meta = read_tensors(path)
    cfg = meta.get("model")
    if not isinstance(cfg, dict):
        raise ContainerError(f"{path}: checkpoint lacks a model config")
    model = build_model(**cfg)
    for name, p in model.parameters().items():
        key = f"param.{name}"
        if key not in tensors:
            raise ContainerError(f"{path}: missing parameter {name!r}")
        arr = tensors[key]
        if arr.shape != p.data.shape:
            raise ContainerError(
                f"{path}: parameter {name!r} has shape {arr.shape}, "
                f"model expects {p.data.shape}"
            )
        p.data = arr.astype(p.data.dtype, copy=False)
    model.backend.load_buffers({
        k[len("buffer.backend."):]: v
        for k, v in tensors.items() if k.startswith("buffer.backend.")
    })
    return model, meta
