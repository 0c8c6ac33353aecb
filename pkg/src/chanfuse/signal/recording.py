from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..errors import DataError


@dataclass
class Recording:
    """Multichannel signal (channels x samples, microvolts) with ictal annotations in seconds."""

    subject_id: str
    data: np.ndarray
    sampling_rate: float
    channel_labels: list[str] = field(default_factory=list)
    annotations: list[tuple[float, float]] = field(default_factory=list)
    channel_groups: list[int] | None = None
    path: str | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise DataError(f"recording data must be 2-D (channels x samples), got {self.data.shape}")
        n_ch, n_samp = self.data.shape
        if n_ch < 1 or n_samp < 1:
            raise DataError("recording needs at least one channel and one sample")
        if self.sampling_rate <= 0:
            raise DataError("sampling rate must be positive")
        if not self.channel_labels:
            self.channel_labels = [f"ch{i:03d}" for i in range(n_ch)]
        if len(self.channel_labels) != n_ch:
            raise DataError(f"{len(self.channel_labels)} labels for {n_ch} channels")
        if self.channel_groups is not None and len(self.channel_groups) != n_ch:
            raise DataError("channel_groups must have one entry per channel")
        self.annotations = sorted((float(a), float(b)) for a, b in self.annotations)
        validate_annotations(self.annotations, self.duration_s)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sampling_rate

    def with_data(self, data: np.ndarray, sampling_rate: float | None = None) -> "Recording":
        return replace(self, data=data, sampling_rate=self.sampling_rate if sampling_rate is None else sampling_rate)


def validate_annotations(annotations: Sequence[tuple[float, float]], duration_s: float) -> None:
    prev_end = -np.inf
    for onset, offset in annotations:
        if not onset < offset:
            raise DataError(f"annotation onset {onset} must precede offset {offset}")
        if onset < 0 or offset > duration_s + 1e-9:
            raise DataError(f"annotation ({onset}, {offset}) outside [0, {duration_s}]")
        if onset < prev_end:
            raise DataError("annotations overlap")
        prev_end = offset


def ictal_mask(annotations: Sequence[tuple[float, float]], starts_s: np.ndarray, length_s: float) -> np.ndarray:
    """Seconds of each span ``[start, start + length]`` covered by annotations."""
    starts_s = np.asarray(starts_s, dtype=np.float64)
    ends = starts_s + length_s
    overlap = np.zeros_like(starts_s)
    for onset, offset in annotations:
        overlap += np.clip(np.minimum(ends, offset) - np.maximum(starts_s, onset), 0.0, None)
    return overlap
