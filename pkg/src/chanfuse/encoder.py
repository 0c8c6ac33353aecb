"""Per-channel short-term feature extraction.

An encoder maps a batch of single-channel patches ``(n, W)`` to features
``(n, d)``. Channels never interact inside an encoder, which is what lets the
rest of the model accept any channel count.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import torch
from torch import Tensor, nn

from . import nn as cfnn
from .errors import ConfigError, DataError, ShapeError


@dataclass(frozen=True)
class EncoderConfig:
    levels: int = 4
    kernel_size: int = 3
    widths: tuple[int, ...] = (8, 16, 32, 64)
    output_dim: int = 128
    patch_length: int = 3840
    bias: bool = True
    kind: str = "conv"

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigError("encoder levels must be >= 1")
        if len(self.widths) != self.levels:
            raise ConfigError(f"need one width per level: {self.levels} levels, widths {self.widths}")
        if self.output_dim < 2:
            raise ConfigError("encoder output_dim must be >= 2")
        if self.kernel_size < 1 or self.patch_length < 1:
            raise ConfigError("kernel_size and patch_length must be positive")


@dataclass(frozen=True)
class Patch:
    channel_index: int
    patch_index: int
    samples: np.ndarray


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    channel_index: int
    patch_index: int


class PatchEncoder(Protocol):
    """Anything that turns ``(n, W)`` single-channel patches into ``(n, d)`` features."""

    output_dim: int
    patch_length: int

    def __call__(self, x: Tensor) -> Tensor: ...


class ConvEncoder(nn.Module):
    """Stack of (causal conv, leaky ReLU, stride-2 decimation), then mean pool and a projection."""

    def __init__(self, config: EncoderConfig, generator: torch.Generator, dtype=cfnn.DEFAULT_DTYPE):
        super().__init__()
        self.config = config
        self.output_dim = config.output_dim
        self.patch_length = config.patch_length
        layers = []
        c_in = 1
        for width in config.widths:
            # stride-2 conv == stride-1 conv followed by keeping every other sample
            layers.append(
                cfnn.CausalConv1d(
                    c_in, width, config.kernel_size, stride=2, bias=config.bias, generator=generator, dtype=dtype
                )
            )
            c_in = width
        self.stages = nn.ModuleList(layers)
        self.project = cfnn.Linear(c_in, config.output_dim, bias=config.bias, generator=generator, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.dim() != 2 or x.shape[1] != self.patch_length:
            raise ShapeError(f"expected patches of shape (n, {self.patch_length}), got {tuple(x.shape)}")
        h = x.unsqueeze(1)
        for stage in self.stages:
            h = cfnn.leaky_relu(stage(h))
        return self.project(h.mean(dim=2))


ENCODERS = {"conv": ConvEncoder}


def build_encoder(config: EncoderConfig, generator: torch.Generator, dtype=cfnn.DEFAULT_DTYPE) -> nn.Module:
    try:
        cls = ENCODERS[config.kind]
    except KeyError:
        raise ConfigError(f"unknown encoder kind {config.kind!r}; available: {sorted(ENCODERS)}") from None
    return cls(config, generator, dtype)


def _param_dtype(encoder: nn.Module) -> torch.dtype:
    return next(encoder.parameters()).dtype


@torch.no_grad()
def encode(patch: Patch, encoder: nn.Module) -> FeatureVector:
    samples = np.asarray(patch.samples)
    if samples.ndim != 1 or samples.shape[0] != encoder.patch_length:
        raise ShapeError(f"patch has {samples.shape} samples, encoder expects {encoder.patch_length}")
    x = torch.as_tensor(samples, dtype=_param_dtype(encoder)).unsqueeze(0)
    values = encoder(x)[0].numpy().copy()
    return FeatureVector(values=values, channel_index=patch.channel_index, patch_index=patch.patch_index)


@torch.no_grad()
def encode_all(patches: Sequence[Patch], encoder: nn.Module) -> list[FeatureVector]:
    """Encode the C patches of one window, channel by channel, preserving order."""
    if not patches:
        return []
    indices = {p.patch_index for p in patches}
    if len(indices) != 1:
        raise DataError(f"patches from different windows in one call: {sorted(indices)}")
    return [encode(p, encoder) for p in patches]
