"""Long-term memory: stacks of consecutive fused vectors classified by a causal TCN."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import Tensor, nn

from . import nn as cfnn
from .errors import ConfigError, InsufficientDataError, ShapeError

DEFAULT_MEMORY = 14


@dataclass(frozen=True)
class TcnConfig:
    kernel_size: int = 3
    dilations: tuple[int, ...] = (1, 2, 4)
    hidden: int = 64

    def __post_init__(self):
        if self.kernel_size < 1 or self.hidden < 1 or not self.dilations:
            raise ConfigError("TCN needs kernel_size >= 1, hidden >= 1 and at least one block")
        if any(d < 1 for d in self.dilations):
            raise ConfigError("dilations must be positive")

    @property
    def blocks(self) -> int:
        return len(self.dilations)

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_size - 1) * sum(self.dilations)


@dataclass(frozen=True)
class MemoryStack:
    vectors: np.ndarray  # (M, d), oldest first
    end_patch_index: int
    window_s: float = 7.5

    @property
    def length(self) -> int:
        return self.vectors.shape[0]

    @property
    def effective_context_seconds(self) -> float:
        return self.window_s * self.length


class TemporalBlock(nn.Module):
    def __init__(self, c_in, c_out, kernel_size, dilation, generator, dtype):
        super().__init__()
        self.conv = cfnn.CausalConv1d(c_in, c_out, kernel_size, dilation=dilation, generator=generator, dtype=dtype)
        if c_in != c_out:
            self.residual = cfnn.CausalConv1d(c_in, c_out, 1, bias=False, generator=generator, dtype=dtype)
        else:
            self.residual = None

    def forward(self, x: Tensor) -> Tensor:
        res = x if self.residual is None else self.residual(x)
        return cfnn.leaky_relu(self.conv(x)) + res


class TCN(nn.Module):
    """Dilated causal conv blocks over ``(batch, d, M)``; reads out the last step as a logit."""

    def __init__(self, input_dim: int, config: TcnConfig, generator: torch.Generator, dtype=cfnn.DEFAULT_DTYPE):
        super().__init__()
        self.config = config
        blocks = []
        c_in = input_dim
        for dilation in config.dilations:
            blocks.append(TemporalBlock(c_in, config.hidden, config.kernel_size, dilation, generator, dtype))
            c_in = config.hidden
        self.blocks = nn.ModuleList(blocks)
        self.readout = cfnn.Linear(config.hidden, 1, generator=generator, dtype=dtype)

    @property
    def receptive_field(self) -> int:
        return self.config.receptive_field

    def forward(self, x: Tensor) -> Tensor:
        for block in self.blocks:
            x = block(x)
        return self.readout(x[:, :, -1]).squeeze(-1)


class MLPHead(nn.Module):
    """Ablation head: two-layer perceptron on the most recent fused vector only."""

    def __init__(self, input_dim: int, hidden: int, generator: torch.Generator, dtype=cfnn.DEFAULT_DTYPE):
        super().__init__()
        self.hidden = cfnn.Linear(input_dim, hidden, generator=generator, dtype=dtype)
        self.readout = cfnn.Linear(hidden, 1, generator=generator, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return self.readout(cfnn.leaky_relu(self.hidden(x[:, :, -1]))).squeeze(-1)


def slide_stacks(fused, memory_length: int = DEFAULT_MEMORY, window_s: float = 7.5) -> list[MemoryStack]:
    """One stack per end position, stride one patch.

    ``fused`` is a ``(n, d)`` array or a sequence of FusedVector in patch order.
    """
    if isinstance(fused, np.ndarray):
        arr = fused
        first = 0
    else:
        fused = list(fused)
        if not fused:
            raise InsufficientDataError("empty fused sequence")
        arr = np.stack([f.values for f in fused])
        first = fused[0].patch_index
        if [f.patch_index for f in fused] != list(range(first, first + len(fused))):
            raise ShapeError("fused vectors must have consecutive patch indices")
    n = arr.shape[0]
    if n < memory_length:
        raise InsufficientDataError(f"need at least {memory_length} fused vectors, got {n}")
    return [
        MemoryStack(vectors=arr[end - memory_length + 1 : end + 1], end_patch_index=first + end, window_s=window_s)
        for end in range(memory_length - 1, n)
    ]


@torch.no_grad()
def classify(stack: MemoryStack, head: TCN, memory_length: int = DEFAULT_MEMORY) -> float:
    """Seizure probability for one stack."""
    if stack.length != memory_length:
        raise ShapeError(f"stack has {stack.length} vectors, expected {memory_length}")
    if head.receptive_field < memory_length:
        raise ConfigError(f"receptive field {head.receptive_field} < memory length {memory_length}")
    dtype = next(head.parameters()).dtype
    x = torch.as_tensor(np.ascontiguousarray(stack.vectors.T), dtype=dtype).unsqueeze(0)
    return float(torch.sigmoid(head(x))[0])
