"""Windowing of recordings into fixed-length, strided patches."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InsufficientDataError
from .recording import Recording, ictal_mask

ICTAL_OVERLAP = 0.5


@dataclass(frozen=True)
class PatchGrid:
    """Patch layout of one recording; patch ``j`` covers samples ``[j*stride, j*stride + width)``."""

    n_patches: int
    width: int
    stride: int
    sampling_rate: float
    labels: np.ndarray

    @property
    def window_s(self) -> float:
        return self.width / self.sampling_rate

    @property
    def stride_s(self) -> float:
        return self.stride / self.sampling_rate

    def start_s(self, j) -> np.ndarray:
        return np.asarray(j) * self.stride_s

    def end_s(self, j) -> np.ndarray:
        return self.start_s(j) + self.window_s


def samples_for(seconds: float, fs: float) -> int:
    n = seconds * fs
    if abs(n - round(n)) > 1e-6 or round(n) < 1:
        raise ConfigError(f"{seconds} s is not a positive whole number of samples at {fs} Hz")
    return int(round(n))


def patch_count(n_samples: int, width: int, stride: int) -> int:
    if n_samples < width:
        return 0
    return (n_samples - width) // stride + 1


def label_patches(annotations, starts_s: np.ndarray, window_s: float) -> np.ndarray:
    """A patch is ictal iff at least half of its span overlaps annotated seizures."""
    return ictal_mask(annotations, starts_s, window_s) >= ICTAL_OVERLAP * window_s - 1e-9


def make_patches(rec: Recording, window_s: float = 7.5, stride_s: float = 1.0) -> PatchGrid:
    width = samples_for(window_s, rec.sampling_rate)
    stride = samples_for(stride_s, rec.sampling_rate)
    n = patch_count(rec.n_samples, width, stride)
    if n < 1:
        raise InsufficientDataError(f"recording of {rec.duration_s:.3f} s is shorter than one {window_s} s window")
    starts = np.arange(n) * stride / rec.sampling_rate
    labels = label_patches(rec.annotations, starts, width / rec.sampling_rate)
    return PatchGrid(n_patches=n, width=width, stride=stride, sampling_rate=rec.sampling_rate, labels=labels)


def patch_view(data: np.ndarray, grid: PatchGrid, first: int, count: int) -> np.ndarray:
    """Read-only ``(C, count, width)`` view of patches ``first .. first+count-1``."""
    if first < 0 or first + count > grid.n_patches:
        raise InsufficientDataError(f"patches {first}..{first + count - 1} outside 0..{grid.n_patches - 1}")
    start = first * grid.stride
    stop = start + (count - 1) * grid.stride + grid.width
    block = data[:, start:stop]
    return np.lib.stride_tricks.sliding_window_view(block, grid.width, axis=1)[:, :: grid.stride]


def intervals_from_labels(labels: np.ndarray, grid: PatchGrid) -> list[tuple[float, float]]:
    """Rebuild ictal intervals from patch labels (centre of first/last ictal patch)."""
    out = []
    labels = np.asarray(labels, dtype=bool)
    j = 0
    half = grid.window_s / 2.0
    while j < len(labels):
        if labels[j]:
            k = j
            while k + 1 < len(labels) and labels[k + 1]:
                k += 1
            out.append((float(grid.start_s(j) + half), float(grid.start_s(k) + half)))
            j = k + 1
        else:
            j += 1
    return out
