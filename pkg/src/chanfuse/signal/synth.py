"""Synthetic multi-subject iEEG-like recordings with exact seizure annotations.

Channels are partitioned into groups (electrodes) that share a latent
background source. A seizure starts with a few seconds of low-voltage fast
activity in the subject's onset group, then turns into sustained rhythmic
high-amplitude bursts there. Two kinds of non-ictal events make the task
depend on space and on time:

* events of identical morphology, fast onset included, in a second group of
  the same size, separable from seizures only by *which* channels carry them;
* short bursts in the onset group, separable from a seizure only by what
  precedes them and by their duration, i.e. across several patches.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .. import seeds
from ..errors import ConfigError
from .recording import Recording

BACKGROUND_UV = 20.0
EVENT_GAP_S = 6.0


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 16
    channel_range: tuple[int, int] = (32, 128)
    group_size_range: tuple[int, int] = (4, 10)
    seizures_per_subject: int = 3
    seizure_duration_s: tuple[float, float] = (40.0, 70.0)
    pre_context_s: float = 90.0
    post_context_s: float = 90.0
    interictal_duration_s: float = 300.0
    sampling_rate: float = 128.0
    distractors_per_recording: int = 1
    short_bursts_per_recording: int = 3
    short_burst_s: tuple[float, float] = (7.0, 13.0)
    burst_gain: tuple[float, float] = (4.0, 6.0)
    fast_onset_s: tuple[float, float] = (4.0, 6.0)
    shuffle_groups: bool = False
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.channel_range
        if not 4 <= lo <= hi:
            raise ConfigError(f"channel range must satisfy 4 <= low <= high, got {self.channel_range}")
        g_lo, g_hi = self.group_size_range
        if not 2 <= g_lo <= g_hi:
            raise ConfigError("group sizes must satisfy 2 <= low <= high")
        if self.n_subjects < 1 or self.seizures_per_subject < 0:
            raise ConfigError("need at least one subject and a non-negative seizure count")
        if self.sampling_rate <= 0:
            raise ConfigError("sampling rate must be positive")
        if not 0 <= self.fast_onset_s[0] <= self.fast_onset_s[1] < self.seizure_duration_s[0]:
            raise ConfigError("fast onset must be non-negative and shorter than the shortest seizure")


@dataclass(frozen=True)
class SubjectLayout:
    subject_id: str
    groups: np.ndarray  # group id per channel
    onset_group: int
    distractor_group: int
    gains: np.ndarray
    alpha_hz: np.ndarray  # per group
    burst_hz: float
    channel_labels: list[str] = field(default_factory=list)

    @property
    def n_channels(self) -> int:
        return len(self.groups)

    def members(self, group: int) -> np.ndarray:
        return np.flatnonzero(self.groups == group)


def make_layout(subject_id: str, n_channels: int, spec: SynthSpec, rng: np.random.Generator) -> SubjectLayout:
    g_lo, g_hi = spec.group_size_range
    event_size = int(rng.integers(g_lo, min(g_hi, n_channels // 2) + 1))
    sizes = [event_size, event_size]
    remaining = n_channels - 2 * event_size
    while remaining > 0:
        s = int(rng.integers(g_lo, g_hi + 1))
        if remaining - s < g_lo:
            s = remaining
        sizes.append(s)
        remaining -= s
    order = rng.permutation(len(sizes))  # position of each group along the channel axis
    groups = np.concatenate([np.full(sizes[g], g) for g in order])
    labels = []
    for g in order:
        labels += [f"E{g:02d}c{k:02d}" for k in range(sizes[g])]
    if spec.shuffle_groups:
        perm = rng.permutation(n_channels)
        groups = groups[perm]
        labels = [labels[i] for i in perm]
    return SubjectLayout(
        subject_id=subject_id,
        groups=groups,
        onset_group=0,
        distractor_group=1,
        gains=rng.uniform(0.7, 1.3, size=n_channels),
        alpha_hz=rng.uniform(8.0, 12.0, size=len(sizes)),
        burst_hz=float(rng.uniform(2.5, 4.5)),
        channel_labels=labels,
    )


def _colored_noise(rng: np.random.Generator, shape: tuple[int, ...], pole: float = 0.95) -> np.ndarray:
    white = rng.standard_normal(shape)
    x = sps.lfilter([1.0], [1.0, -pole], white, axis=-1)
    return x / np.sqrt(1.0 / (1.0 - pole**2))


def _burst(rng: np.random.Generator, t: np.ndarray, onset: float, offset: float, base_hz: float) -> np.ndarray:
    """Rhythmic spike-and-wave-like waveform with 1 s onset/offset ramps."""
    env = np.clip(np.minimum(t - onset, offset - t), 0.0, 1.0)
    hz = base_hz * rng.uniform(0.9, 1.1)
    phase = 2 * np.pi * hz * (t - onset) + rng.uniform(0, 2 * np.pi)
    wave = np.sin(phase) + 0.45 * np.sin(2 * phase + 0.6) + 0.2 * np.sin(3 * phase + 1.1)
    return env * wave / 0.75


def _fast_onset(rng: np.random.Generator, t: np.ndarray, onset: float, offset: float) -> tuple[np.ndarray, np.ndarray]:
    """Envelope and waveform of low-voltage fast activity (14-20 Hz, 0.5 s ramps)."""
    env = np.clip(2.0 * np.minimum(t - onset, offset - t), 0.0, 1.0)
    hz = rng.uniform(14.0, 20.0)
    return env, np.sin(2 * np.pi * hz * (t - onset) + rng.uniform(0, 2 * np.pi))


def synth_recording(
    layout: SubjectLayout,
    duration_s: float,
    fs: float,
    rng: np.random.Generator,
    seizures: list[tuple[float, float]] = (),
    distractors: list[tuple[float, float]] = (),
    short_bursts: list[tuple[float, float]] = (),
    burst_gain: tuple[float, float] = (4.0, 6.0),
    fast_onset: Sequence[float] = (),
) -> Recording:
    """Seizures, then distractors, open with ``fast_onset[k]`` seconds of fast activity.

    Short bursts never have a fast onset.
    """
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    n_groups = int(layout.groups.max()) + 1
    mod = 1.0 + 0.3 * np.sin(2 * np.pi * rng.uniform(0.02, 0.1, size=(n_groups, 1)) * t + rng.uniform(0, 6.3, (n_groups, 1)))
    alpha = np.sin(2 * np.pi * layout.alpha_hz[:, None] * t + rng.uniform(0, 6.3, (n_groups, 1)))
    sources = 0.6 * mod * alpha + 0.8 * _colored_noise(rng, (n_groups, n))
    data = layout.gains[:, None] * sources[layout.groups] + 0.6 * _colored_noise(rng, (layout.n_channels, n))

    def add_event(group: int, onset: float, offset: float, lead: float = 0.0):
        members = layout.members(group)
        if lead > 0:
            env, fast = _fast_onset(rng, t, onset, onset + lead)
            # background flattens while the fast rhythm appears
            data[members] *= 1.0 - 0.6 * env
            data[members] += 1.2 * rng.uniform(0.8, 1.2, size=(len(members), 1)) * env * fast
        wave = _burst(rng, t, onset + lead, offset, layout.burst_hz)
        amp = rng.uniform(*burst_gain)
        per_channel = rng.uniform(0.8, 1.2, size=len(members))
        data[members] += amp * per_channel[:, None] * wave

    def lead(k: int) -> float:
        return fast_onset[k] if k < len(fast_onset) else 0.0

    for k, (onset, offset) in enumerate(seizures):
        add_event(layout.onset_group, onset, offset, lead(k))
    for k, (onset, offset) in enumerate(distractors):
        add_event(layout.distractor_group, onset, offset, lead(len(seizures) + k))
    for onset, offset in short_bursts:
        add_event(layout.onset_group, onset, offset)
    return Recording(
        subject_id=layout.subject_id,
        data=(BACKGROUND_UV * data).astype(np.float32),
        sampling_rate=fs,
        channel_labels=list(layout.channel_labels),
        annotations=list(seizures),
        channel_groups=[int(g) for g in layout.groups],
    )


def _place(rng, length: float, lo: float, hi: float, taken: list[tuple[float, float]], tries: int = 200):
    """Random interval of ``length`` inside [lo, hi] keeping EVENT_GAP_S from ``taken``."""
    for _ in range(tries):
        if hi - lo < length:
            return None
        start = rng.uniform(lo, hi - length)
        cand = (start, start + length)
        if all(cand[1] + EVENT_GAP_S <= a or cand[0] >= b + EVENT_GAP_S for a, b in taken):
            return cand
    return None


def synth_subject(spec: SynthSpec, index: int) -> tuple[SubjectLayout, list[Recording]]:
    rng = seeds.rng(spec.seed, f"synth-subject-{index}")
    subject_id = f"sub{index:02d}"
    n_channels = int(rng.integers(spec.channel_range[0], spec.channel_range[1] + 1))
    layout = make_layout(subject_id, n_channels, spec, rng)
    fs = spec.sampling_rate
    recordings = []
    n_recordings = max(spec.seizures_per_subject, 1)
    for _ in range(n_recordings):
        if spec.seizures_per_subject:
            sz_len = round(float(rng.uniform(*spec.seizure_duration_s)))
            onset = spec.pre_context_s
            seizures = [(onset, onset + sz_len)]
            leads = [float(rng.uniform(*spec.fast_onset_s))]
            duration = spec.pre_context_s + sz_len + spec.post_context_s
        else:
            seizures, leads = [], []
            duration = spec.interictal_duration_s
        taken = list(seizures)
        distractors = []
        for _ in range(spec.distractors_per_recording):
            length = round(float(rng.uniform(*spec.seizure_duration_s)))
            iv = _place(rng, length, 2.0, duration - 2.0, taken)
            if iv is not None:
                distractors.append(iv)
                taken.append(iv)
        leads += [float(rng.uniform(*spec.fast_onset_s)) for _ in distractors]
        shorts = []
        for _ in range(spec.short_bursts_per_recording):
            iv = _place(rng, float(rng.uniform(*spec.short_burst_s)), 2.0, duration - 2.0, taken)
            if iv is not None:
                shorts.append(iv)
                taken.append(iv)
        recordings.append(
            synth_recording(layout, duration, fs, rng, seizures, distractors, shorts, spec.burst_gain, leads)
        )
    return layout, recordings


def synth_generate(spec: SynthSpec) -> list[tuple[SubjectLayout, list[Recording]]]:
    return [synth_subject(spec, i) for i in range(spec.n_subjects)]


def benchmark_spec(seed: int = 0, **changes) -> SynthSpec:
    """The 16-subject grouped-channel benchmark, sized for one CPU core."""
    base = dict(n_subjects=16, channel_range=(16, 32), group_size_range=(3, 6), seed=seed)
    return SynthSpec(**{**base, **changes})
