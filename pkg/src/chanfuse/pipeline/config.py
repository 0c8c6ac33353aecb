"""Flat run configuration: one YAML mapping, typed and validated up front."""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Iterable

import yaml

from ..encoder import EncoderConfig
from ..errors import ConfigError
from ..memory import TcnConfig
from ..model import ModelConfig
from ..signal.preprocess import PreprocessConfig

SCHEMES = ("looc", "laboc")
CONTEXT_POLICIES = {"short": 180.0, "long": 3600.0}
SCALINGS = ("mad", "none")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5.5e-4
    key_lr_scale: float = 1.0
    batch_size: int = 32
    batches_per_epoch: int = 100
    pretrain_min_epochs: int = 25
    pretrain_max_epochs: int = 50
    plateau_window: int = 5
    plateau_delta: float = 0.005
    finetune_epochs: int = 5
    finetune_max_epochs: int = 10
    finetune_scheme: str = "looc"
    freeze_all_but_fusion: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.key_lr_scale <= 0:
            raise ConfigError("learning rates must be positive")
        if self.batch_size < 1 or self.batches_per_epoch < 1:
            raise ConfigError("batch_size and batches_per_epoch must be >= 1")
        if not 1 <= self.pretrain_min_epochs <= self.pretrain_max_epochs:
            raise ConfigError("need 1 <= pretrain_min_epochs <= pretrain_max_epochs")
        if self.plateau_window < 1 or self.plateau_delta < 0:
            raise ConfigError("plateau_window must be >= 1 and plateau_delta >= 0")
        if not 0 <= self.finetune_epochs <= self.finetune_max_epochs <= 10:
            raise ConfigError("need 0 <= finetune_epochs <= finetune_max_epochs <= 10")
        if 5 * self.finetune_epochs > self.pretrain_min_epochs:
            raise ConfigError(
                f"finetune_epochs={self.finetune_epochs} exceeds a fifth of pretrain_min_epochs={self.pretrain_min_epochs}"
            )
        if self.finetune_scheme not in SCHEMES:
            raise ConfigError(f"finetune_scheme must be one of {SCHEMES}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    data_dir: str = ""
    out_dir: str = ""
    # signal
    target_rate_hz: float = 512.0
    band_low_hz: float = 0.5
    band_high_hz: float = 120.0
    filter_order: int = 4
    input_scaling: str = "mad"
    window_s: float = 7.5
    stride_s: float = 1.0
    context_policy: str = "short"
    # model
    enc_levels: int = 4
    enc_kernel: int = 3
    enc_widths: tuple[int, ...] = (8, 16, 32, 64)
    dim: int = 128
    tcn_kernel: int = 3
    tcn_dilations: tuple[int, ...] = (1, 2, 4)
    tcn_hidden: int = 64
    memory_length: int = 14
    fusion: str = "hrr"
    head: str = "tcn"
    mlp_hidden: int = 64
    basis_seed: int = 0
    dtype: str = "float64"
    bundle_scale: str = "sum"
    # training
    learning_rate: float = 5.5e-4
    key_lr_scale: float = 1.0
    batch_size: int = 32
    batches_per_epoch: int = 100
    pretrain_min_epochs: int = 25
    pretrain_max_epochs: int = 50
    plateau_window: int = 5
    plateau_delta: float = 0.005
    finetune_epochs: int = 5
    finetune_max_epochs: int = 10
    finetune_scheme: str = "looc"
    freeze_all_but_fusion: bool = False
    # experiment
    test_subjects: tuple[str, ...] = ()
    n_test_subjects: int = 6
    pool_size: int = 0

    def __post_init__(self):
        if self.input_scaling not in SCALINGS:
            raise ConfigError(f"input_scaling must be one of {SCALINGS}")
        if self.context_policy not in CONTEXT_POLICIES:
            raise ConfigError(f"context_policy must be one of {sorted(CONTEXT_POLICIES)}")
        if self.window_s <= 0 or self.stride_s <= 0:
            raise ConfigError("window_s and stride_s must be positive")
        if not 0 < self.band_low_hz < self.band_high_hz < self.target_rate_hz / 2.0:
            raise ConfigError(
                f"band edges ({self.band_low_hz}, {self.band_high_hz}) Hz must lie below Nyquist of {self.target_rate_hz} Hz"
            )
        if self.pool_size < 0 or self.n_test_subjects < 0:
            raise ConfigError("pool_size and n_test_subjects must be non-negative")
        # building the sub-configs runs their validation too
        self.model_config()
        self.train_config()
        self.preprocess_config()

    @property
    def context_s(self) -> float:
        return CONTEXT_POLICIES[self.context_policy]

    @property
    def patch_length(self) -> int:
        return int(round(self.window_s * self.target_rate_hz))

    def model_config(self) -> ModelConfig:
        encoder = EncoderConfig(
            levels=self.enc_levels,
            kernel_size=self.enc_kernel,
            widths=tuple(self.enc_widths),
            output_dim=self.dim,
            patch_length=self.patch_length,
        )
        tcn = TcnConfig(kernel_size=self.tcn_kernel, dilations=tuple(self.tcn_dilations), hidden=self.tcn_hidden)
        return ModelConfig(
            encoder=encoder,
            tcn=tcn,
            memory_length=self.memory_length,
            basis_seed=self.basis_seed,
            fusion=self.fusion,
            head=self.head,
            mlp_hidden=self.mlp_hidden,
            init_seed=self.seed,
            dtype=self.dtype,
            bundle_scale=self.bundle_scale,
        )

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{n: getattr(self, n) for n in names})

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(
            target_rate_hz=self.target_rate_hz,
            band_low_hz=self.band_low_hz,
            band_high_hz=self.band_high_hz,
            filter_order=self.filter_order,
        )

    def replace(self, **changes) -> "RunConfig":
        return from_mapping({**self.to_dict(), **changes})

    def to_dict(self) -> dict[str, Any]:
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self)}

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _plain(value):
    return list(value) if isinstance(value, tuple) else value


def _coerce(name: str, value, default):
    """Convert ``value`` to the type of the field's default, rejecting lossy casts."""
    kind = type(default)
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{name}: expected true/false, got {value!r}")
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string, got {value!r}")
        return value
    if kind is tuple:
        if isinstance(value, (str, int)):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name}: expected a list, got {value!r}")
        if name == "test_subjects":
            return tuple(str(v) for v in value)
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{name}: expected a list of integers, got {value!r}")
        return tuple(value)
    raise ConfigError(f"{name}: unsupported field type")  # pragma: no cover


def from_mapping(raw: dict[str, Any] | None) -> RunConfig:
    raw = dict(raw or {})
    defaults = {f.name: f.default for f in fields(RunConfig)}
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    values = {k: _coerce(k, v, defaults[k]) for k, v in raw.items()}
    try:
        return RunConfig(**values)
    except TypeError as exc:  # pragma: no cover
        raise ConfigError(str(exc)) from None


def parse_override(text: str) -> tuple[str, Any]:
    """``key=value`` with the value parsed as a YAML scalar or list."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form key=value")
    try:
        return key.strip(), yaml.safe_load(value)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: {exc}") from None


def load_config(path: str | Path | None = None, overrides: Iterable[str] = (), **extra) -> RunConfig:
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a key-value mapping")
        raw.update(loaded or {})
    for item in overrides:
        key, value = parse_override(item)
        raw[key] = value
    raw.update({k: v for k, v in extra.items() if v is not None})
    return from_mapping(raw)


# Desk-scale settings used by the synthetic benchmark and the acceptance suite.
BENCHMARK = {
    "target_rate_hz": 64.0,
    "band_high_hz": 30.0,
    "enc_widths": [4, 8, 16, 32],
    "dtype": "float32",
    "learning_rate": 2e-3,
    "key_lr_scale": 30.0,
    "batches_per_epoch": 60,
}


def benchmark_config(**changes) -> RunConfig:
    return from_mapping({**BENCHMARK, **changes})
