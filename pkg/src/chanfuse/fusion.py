"""Learnable holographic fusion of per-channel features.

Each channel ``i`` owns one unconstrained scalar ``u_i``; its key is the
fractional power ``rot(v, r_i)`` of a shared unitary basis with
``r_i = sigmoid(u_i) = m_i - 1`` and ``m_i in (1, 2)``. A window's fused vector
is the bundle of every channel's features bound to that channel's key. The
binding and its gradients are evaluated in the Fourier domain.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import Tensor, nn

from . import vsa
from .encoder import FeatureVector
from .errors import ChannelCountError, DomainError, ShapeError

INIT_LOW = 1.25
INIT_HIGH = 1.75


def init_key_values(n_channels: int) -> np.ndarray:
    """Mapped key values ``m`` of a fresh map: a linear ramp over [1.25, 1.75]."""
    if int(n_channels) < 1:
        raise DomainError(f"need at least one channel, got {n_channels}")
    if n_channels == 1:
        return np.array([(INIT_LOW + INIT_HIGH) / 2.0])
    return np.linspace(INIT_LOW, INIT_HIGH, int(n_channels))


def _logit(p: np.ndarray) -> np.ndarray:
    return np.log(p) - np.log1p(-p)


class ChannelKeyMap(nn.Module):
    """Per-subject key scalars; ``raw`` is the trainable, unconstrained parameter."""

    def __init__(self, subject_id: str, raw: Tensor):
        super().__init__()
        self.subject_id = str(subject_id)
        self.raw = nn.Parameter(raw)

    @property
    def n_channels(self) -> int:
        return self.raw.shape[0]

    def mapped(self) -> Tensor:
        return 1.0 + torch.sigmoid(self.raw)

    def angles(self) -> Tensor:
        return torch.sigmoid(self.raw)


def init_key_map(subject_id: str, n_channels: int, dtype=torch.float64) -> ChannelKeyMap:
    raw = _logit(init_key_values(n_channels) - 1.0)
    return ChannelKeyMap(subject_id, torch.tensor(raw, dtype=dtype))


# --- Fourier-domain binding --------------------------------------------------


def _spectra(angles: Tensor, phases: Tensor) -> Tensor:
    return torch.polar(torch.ones_like(angles[:, None] * phases), angles[:, None] * phases)


def fuse_forward(features: Tensor, angles: Tensor, phases: Tensor) -> Tensor:
    """``features`` (..., C, d), ``angles`` (C,), ``phases`` (d//2+1,) -> (..., d)."""
    d = features.shape[-1]
    keys = _spectra(angles, phases)
    return torch.fft.irfft((torch.fft.rfft(features, dim=-1) * keys).sum(dim=-2), n=d, dim=-1)


def fuse_backward(
    features: Tensor, angles: Tensor, phases: Tensor, grad_out: Tensor
) -> tuple[Tensor, Tensor]:
    """Gradients of ``<grad_out, fuse_forward(...)>`` w.r.t. features and angles.

    The feature gradient is the circular correlation of ``grad_out`` with each
    channel key. The angle gradient uses ``d/dr exp(i theta r) = i theta exp(i theta r)``
    bin by bin.
    """
    d = features.shape[-1]
    keys = _spectra(angles, phases)
    g_hat = torch.fft.rfft(grad_out, dim=-1).unsqueeze(-2)
    grad_features = torch.fft.irfft(g_hat * keys.conj(), n=d, dim=-1)
    dkeys = 1j * phases * keys
    bound_deriv = torch.fft.irfft(torch.fft.rfft(features, dim=-1) * dkeys, n=d, dim=-1)
    grad_angles = (bound_deriv * grad_out.unsqueeze(-2)).sum(dim=-1)
    grad_angles = grad_angles.reshape(-1, angles.shape[0]).sum(dim=0)
    return grad_features, grad_angles


class _HolographicFuse(torch.autograd.Function):
    @staticmethod
    def forward(ctx, features, angles, phases):
        ctx.save_for_backward(features, angles, phases)
        return fuse_forward(features, angles, phases)

    @staticmethod
    def backward(ctx, grad_out):
        features, angles, phases = ctx.saved_tensors
        grad_features, grad_angles = fuse_backward(features, angles, phases, grad_out)
        return grad_features, grad_angles, None


def holographic_fuse(features: Tensor, angles: Tensor, phases: Tensor) -> Tensor:
    if features.shape[-2] != angles.shape[0]:
        raise ChannelCountError(f"{features.shape[-2]} channels of features but {angles.shape[0]} keys")
    if phases.shape[0] != features.shape[-1] // 2 + 1:
        raise ShapeError(f"feature dim {features.shape[-1]} does not match basis with {phases.shape[0]} bins")
    return _HolographicFuse.apply(features, angles, phases.to(features.dtype))


def mean_fuse(features: Tensor) -> Tensor:
    """Ablation: plain channel mean, no keys."""
    return features.mean(dim=-2)


# --- object-level API --------------------------------------------------------


@dataclass(frozen=True)
class FusedVector:
    values: np.ndarray
    patch_index: int


def _stack_features(features: Sequence[FeatureVector]) -> tuple[np.ndarray, int]:
    if not features:
        raise ChannelCountError("no features to fuse")
    indices = {f.patch_index for f in features}
    if len(indices) != 1:
        raise ShapeError(f"features from different windows: {sorted(indices)}")
    dims = {len(f.values) for f in features}
    if len(dims) != 1:
        raise ShapeError(f"inconsistent feature dims {sorted(dims)}")
    return np.stack([np.asarray(f.values, dtype=np.float64) for f in features]), indices.pop()


def _check(features: np.ndarray, keys: ChannelKeyMap, basis: vsa.UnitaryBasis) -> None:
    if features.shape[0] != keys.n_channels:
        raise ChannelCountError(f"{features.shape[0]} feature vectors but key map has {keys.n_channels} channels")
    if features.shape[1] != basis.dim:
        raise ShapeError(f"feature dim {features.shape[1]} != basis dim {basis.dim}")


@torch.no_grad()
def fuse(features: Sequence[FeatureVector], keys: ChannelKeyMap, basis: vsa.UnitaryBasis) -> FusedVector:
    p, j = _stack_features(features)
    _check(p, keys, basis)
    angles = keys.angles().detach().to(torch.float64)
    out = fuse_forward(torch.as_tensor(p), angles, torch.tensor(basis.phases))
    return FusedVector(values=out.numpy(), patch_index=j)


@torch.no_grad()
def fuse_gradients(
    features: Sequence[FeatureVector],
    keys: ChannelKeyMap,
    basis: vsa.UnitaryBasis,
    upstream: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients w.r.t. each channel's features ``(C, d)`` and raw key params ``(C,)``."""
    p, _ = _stack_features(features)
    _check(p, keys, basis)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (basis.dim,):
        raise ShapeError(f"upstream gradient must have shape ({basis.dim},)")
    angles = keys.angles().detach().to(torch.float64)
    g_p, g_r = fuse_backward(torch.as_tensor(p), angles, torch.tensor(basis.phases), torch.as_tensor(upstream))
    g_u = g_r * angles * (1.0 - angles)
    return g_p.numpy(), g_u.numpy()


def key_similarity_matrix(keys: ChannelKeyMap, basis: vsa.UnitaryBasis) -> np.ndarray:
    angles = keys.angles().detach().to(torch.float64).numpy()
    return vsa.key_similarity_matrix_from_angles(basis, angles)


def group_similarity_summary(matrix: np.ndarray, groups: Sequence[int]) -> dict[str, float]:
    """Mean off-diagonal key similarity within and between planted channel groups."""
    groups = np.asarray(groups)
    same = groups[:, None] == groups[None, :]
    off = ~np.eye(len(groups), dtype=bool)
    within = matrix[same & off]
    between = matrix[~same]
    return {
        "within_mean": float(within.mean()) if within.size else float("nan"),
        "between_mean": float(between.mean()) if between.size else float("nan"),
    }


def write_similarity_csv(matrix: np.ndarray, labels: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(labels))
        for row in matrix:
            writer.writerow([repr(float(x)) for x in row])


def read_similarity_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])
