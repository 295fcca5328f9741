"""Run configuration: plain key=value files with flag-style overrides.

One flat namespace covers the model shape (front end, harmonic count,
modulation filter count, channel count), the task, and the optimization
settings. Every consumer receives the same validated RunConfig, and every
run directory gets the effective values echoed back as a config file, so a
run can be reproduced from its own artifacts.
"""

from dataclasses import dataclass, fields
from pathlib import Path

from .training import TrainConfig


class ConfigError(ValueError):
    """Unparseable config file or invalid field value."""


@dataclass
class RunConfig:
    front_end: str = "harmonic"
    n_harmonics: int = 6
    n_mod_filters: int = 1
    n_mel_filters: int = 128
    task: str = "tagging"
    n_tags: int = 50
    crop_seconds: float = -1.0  # -1 means the task default (5 s / 1 s)
    batch_size: int = 16
    max_epochs: int = 60
    adam_lr: float = 1e-4
    plateau_patience: int = 3
    lr_decay: float = 0.1
    sgd_momentum: float = 0.9
    output_dir: str = "runs/run0"
    seed: int = 0

    def __post_init__(self):
        if self.crop_seconds == -1.0:
            self.crop_seconds = 5.0 if self.task == "tagging" else 1.0
        if self.front_end not in ("mel", "harmonic"):
            raise ConfigError(f"front_end must be mel or harmonic, got {self.front_end!r}")
        if self.n_harmonics < 1:
            raise ConfigError("n_harmonics must be >= 1")
        if self.n_mod_filters < 0:
            raise ConfigError("n_mod_filters must be >= 0")
        if self.n_mel_filters < 1:
            raise ConfigError("n_mel_filters must be >= 1")
        if self.n_tags < 1:
            raise ConfigError("n_tags must be >= 1")
        try:
            self.train_config()  # reuse the training-side validation
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            task=self.task,
            crop_seconds=self.crop_seconds,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            adam_lr=self.adam_lr,
            plateau_patience=self.plateau_patience,
            lr_decay=self.lr_decay,
            sgd_momentum=self.sgd_momentum,
            seed=self.seed,
        )

    def model_kwargs(self, n_classes: int) -> dict:
        return {
            "front_end": self.front_end,
            "n_harmonics": self.n_harmonics,
            "n_mod_filters": self.n_mod_filters,
            "n_mel_filters": self.n_mel_filters,
            "n_classes": n_classes,
            "seed": self.seed,
        }

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_NAMED_TYPES = {"int": int, "float": float, "str": str}
_FIELD_TYPES = {
    f.name: f.type if isinstance(f.type, type) else _NAMED_TYPES[f.type]
    for f in fields(RunConfig)
}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if kind is str:
        return raw
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"config key {key}: cannot parse {raw!r} as {kind.__name__}"
        ) from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """key=value lines; blank lines and # comments ignored; unknown keys error."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_run_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Config file first, then overrides on top; both optional."""
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        values.update(parse_config_text(p.read_text(), source=str(p)))
    for key, raw in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw) if isinstance(raw, str) else raw
    return RunConfig(**values)


def write_config_echo(config: RunConfig, path) -> None:
    lines = [f"{key}={config.to_dict()[key]}" for key in sorted(config.to_dict())]
    Path(path).write_text("\n".join(lines) + "\n")
