"""Experiment configuration stored as a sectioned key = value text file."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .csvio import write_text_atomic
from .devicesim import DmParams, NvmParams
from .errors import ConfigurationError
from .readout import REGION_PRESETS, NonidealitySpec, PulseUpdateModel, TrainConfig
from .reservoir import ReservoirConfig, fsdd_config, mg_config
from .signalio import MfccConfig, MgParams

TASKS = ("fsdd", "mackey-glass", "device-demo")


@dataclass(frozen=True)
class RunOptions:
    task: str = "fsdd"
    seed: int = 0
    epochs: int = 200
    out: str = "runs/out"
    # FSDD source: a directory of {digit}_{speaker}_{index}.wav files or an
    # .npz of precomputed MFCC frames (keys X, y, lengths)
    data: str = "data/fsdd_mfcc13.npz"
    keep_fraction: float = 1.0
    max_samples: int = 0
    train_fraction: float = 0.75
    ideal_weights: bool = False
    n_seeds: int = 5
    sigmas: tuple = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
    regions: tuple = ("R1", "R2", "R3")
    mg_stride: int = 10
    closed_loop: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigurationError(f"task must be one of {', '.join(TASKS)}")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if not 0 < self.keep_fraction <= 1:
            raise ConfigurationError("keep_fraction must lie in (0, 1]")
        if self.max_samples < 0:
            raise ConfigurationError("max_samples must be >= 0")
        if self.n_seeds < 1:
            raise ConfigurationError("n_seeds must be >= 1")
        if self.mg_stride < 1:
            raise ConfigurationError("mg_stride must be >= 1")
        if self.seed < 0:
            raise ConfigurationError("seed must be >= 0")
        for r in self.regions:
            if r not in REGION_PRESETS:
                raise ConfigurationError(f"unknown region preset {r!r}")


@dataclass(frozen=True)
class ReadoutOptions:
    n_hidden: int = 64
    weight_range: float = 2.0
    lr: float = 1e-3
    batch: int = 32
    x_min: float = 0.0
    x_max: float = 2e-5
    p_max: float = 100.0
    a: float = 30.0

    def __post_init__(self):
        if self.n_hidden < 1 or self.batch < 1:
            raise ConfigurationError("n_hidden and batch must be >= 1")
        if not self.lr >= 0 or not self.weight_range > 0:
            raise ConfigurationError("lr must be >= 0 and weight_range > 0")
        self.pulse_model()

    def pulse_model(self) -> PulseUpdateModel:
        return PulseUpdateModel(self.x_min, self.x_max, self.p_max, self.a)

    def train_config(self, epochs: int, seed: int) -> TrainConfig:
        return TrainConfig(epochs=epochs, batch=self.batch, lr=self.lr, seed=seed)


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunOptions = field(default_factory=RunOptions)
    dm: DmParams = field(default_factory=DmParams)
    nvm: NvmParams = field(default_factory=NvmParams)
    reservoir: ReservoirConfig = field(default_factory=fsdd_config)
    mg_reservoir: ReservoirConfig = field(default_factory=mg_config)
    readout: ReadoutOptions = field(default_factory=ReadoutOptions)
    nonideality: NonidealitySpec = field(default_factory=NonidealitySpec)
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    mg: MgParams = field(default_factory=MgParams)

    def with_run(self, **changes) -> "ExperimentConfig":
        return replace(self, run=replace(self.run, **changes))

    def seeds(self, seed: int | None = None) -> dict[str, int]:
        """Independent per-purpose seeds derived from one run seed."""
        s = self.run.seed if seed is None else seed
        state = np.random.SeedSequence(s).generate_state(5)
        return dict(zip(("mask", "split", "init", "shuffle", "d2d"), (int(v) for v in state)))

    def hash(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:16]


# fields that are wired from elsewhere at run time rather than configured
_SKIP = {"reservoir": {"dm_params", "seed"}, "mg_reservoir": {"dm_params", "seed"},
         "nonideality": {"seed"}}


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _parse(text: str, default, key: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            proto = default[0] if default else ""
            return tuple(type(proto)(t) if not isinstance(proto, str) else t for t in items)
        if default is None or key == "region":
            return _parse_region(text)
        return text
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {text!r}") from None


def _parse_region(text: str):
    if not text:
        return None
    if text in REGION_PRESETS:
        return REGION_PRESETS[text]
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(text)
    return (float(parts[0]), float(parts[1]))


def dumps(config: ExperimentConfig) -> str:
    lines = []
    for sec in fields(config):
        obj = getattr(config, sec.name)
        lines.append(f"[{sec.name}]")
        for f in fields(obj):
            if f.name in _SKIP.get(sec.name, ()):
                continue
            lines.append(f"{f.name} = {_format(getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)


def loads(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse config text; keys not given keep the values from ``base``."""
    base = base or ExperimentConfig()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    known = {f.name for f in fields(base)}
    for name in parser.sections():
        if name not in known:
            raise ConfigurationError(f"unknown config section [{name}]")
    changes = {}
    for sec in fields(base):
        if not parser.has_section(sec.name):
            continue
        obj = getattr(base, sec.name)
        allowed = {f.name: f for f in fields(obj) if f.name not in _SKIP.get(sec.name, ())}
        updates = {}
        for key, raw in parser.items(sec.name):
            if key not in allowed:
                raise ConfigurationError(f"unknown key {key!r} in [{sec.name}]")
            updates[key] = _parse(raw, getattr(obj, key), key)
        try:
            changes[sec.name] = replace(obj, **updates)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"[{sec.name}]: {exc}") from None
    return replace(base, **changes)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)


def save(config: ExperimentConfig, path) -> Path:
    return write_text_atomic(path, dumps(config))


def as_dict(config: ExperimentConfig) -> dict:
    return dataclasses.asdict(config)
