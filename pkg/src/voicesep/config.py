"""Experiment configuration: TOML/JSON files plus programmatic overrides.

Relative corpus paths resolve against the ``VOICESEP_DATA_ROOT``
environment variable when it is set, else against the config file's
directory (or the working directory for programmatic configs).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig
from .optim import AdamWConfig

try:
    import tomllib
except ModuleNotFoundError:  # py3.10
    import tomli as tomllib

__all__ = ["ExperimentConfig", "load_config", "DATA_ROOT_ENV"]

DATA_ROOT_ENV = "VOICESEP_DATA_ROOT"

ALPHA_MODES = ("ramp", "fixed", "none")


@dataclass
class ExperimentConfig:
    # data
    corpus_dir: Path | None = None
    train_pieces: list[Path] = field(default_factory=list)
    val_pieces: list[Path] = field(default_factory=list)
    split_seed: int = 0
    val_fraction: float = 0.1
    # preprocessing / graph
    truncate_overlaps: bool = True
    window_measures: int = 2
    during_inclusive: bool = False
    silence_last_offset: bool = False
    pe_sign_flip: bool = True
    # model / optimizer
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: AdamWConfig = field(default_factory=AdamWConfig)
    # loss schedule
    alpha_mode: str = "ramp"
    alpha_ramp: float = 0.02
    alpha_max: float = 1.0
    alpha_value: float = 1.0
    # run control
    epochs: int = 100
    patience: int = 20
    seed: int = 0
    tau: float = 0.5
    target_f1: float | None = None
    checkpoint_path: Path = Path("model.ckpt")
    log_path: Path = Path("training_log.csv")

    def validate(self) -> None:
        if self.alpha_mode not in ALPHA_MODES:
            raise ConfigError(f"alpha_mode must be one of {ALPHA_MODES}, got {self.alpha_mode!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau {self.tau} outside [0, 1]")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction {self.val_fraction} outside [0, 1)")
        if self.window_measures < 0:
            raise ConfigError("window_measures must be >= 0")
        if self.corpus_dir is None and not self.train_pieces:
            raise ConfigError("either corpus_dir or train_pieces must be given")

    def alpha_at(self, epoch: int) -> float:
        from .losses import alpha_schedule

        if self.alpha_mode == "none":
            return 0.0
        if self.alpha_mode == "fixed":
            return self.alpha_value
        return alpha_schedule(epoch, self.alpha_ramp, self.alpha_max)


def _resolve(path: str | Path, base: Path) -> Path:
    path = Path(path)
    if path.is_absolute():
        return path
    root = os.environ.get(DATA_ROOT_ENV)
    if root:
        return Path(root) / path
    return base / path


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read an experiment config from a ``.toml`` or ``.json`` file.

    ``overrides`` maps flat field names (e.g. ``"epochs"``, ``"model.hidden"``)
    onto replacement values and wins over the file.
    """
    path = Path(path)
    try:
        if path.suffix == ".toml":
            doc = tomllib.loads(path.read_text(encoding="utf-8"))
        elif path.suffix == ".json":
            doc = json.loads(path.read_text(encoding="utf-8"))
        else:
            raise ConfigError(f"config must be .toml or .json, got {path.suffix!r}")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(doc, base=path.parent, overrides=overrides)


def build_config(doc: dict, base: Path = Path("."), overrides: dict | None = None) -> ExperimentConfig:
    doc = dict(doc)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            doc.setdefault(section, {})[name] = value
        else:
            doc[key] = value

    def section(name: str) -> dict:
        sub = doc.pop(name, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"config section {name!r} must be a table/object")
        return sub

    model_doc = section("model")
    opt_doc = section("optimizer")
    known_model = {f.name for f in dataclasses.fields(ModelConfig)}
    known_opt = {f.name for f in dataclasses.fields(AdamWConfig)}
    for src, known, label in ((model_doc, known_model, "model"), (opt_doc, known_opt, "optimizer")):
        unknown = set(src) - known
        if unknown:
            raise ConfigError(f"unknown {label} config keys: {sorted(unknown)}")

    cfg = ExperimentConfig(model=ModelConfig(**model_doc), optimizer=AdamWConfig(**opt_doc))
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in doc.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)

    if cfg.corpus_dir is not None:
        cfg.corpus_dir = _resolve(cfg.corpus_dir, base)
    cfg.train_pieces = [_resolve(p, base) for p in cfg.train_pieces]
    cfg.val_pieces = [_resolve(p, base) for p in cfg.val_pieces]
    cfg.checkpoint_path = Path(cfg.checkpoint_path)
    cfg.log_path = Path(cfg.log_path)
    cfg.validate()
    return cfg
