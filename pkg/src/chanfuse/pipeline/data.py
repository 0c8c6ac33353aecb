"""Prepared subjects, labelled regions of recordings, and stack batching.

A *stack end* ``j`` is the index of the final patch of a memory stack; its
prediction is timestamped at the end of that patch. A *region* is a time
interval of one recording, and it selects every stack whose timestamp falls
inside it. Regions are the unit of train/test bookkeeping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import torch

from ..errors import DataError, InsufficientDataError, LeakageError
from ..signal.curation import CuratedDataset, merge_segments
from ..signal.io import load_recordings, read_manifest
from ..signal.patches import PatchGrid, make_patches, patch_view
from ..signal.preprocess import preprocess
from ..signal.recording import Recording
from .config import RunConfig

MAD_TO_SIGMA = 1.4826


@dataclass
class PreparedRecording:
    source: str
    data: np.ndarray  # (C, T) float32, preprocessed and scaled
    grid: PatchGrid
    annotations: list[tuple[float, float]]

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    def timestamps(self) -> np.ndarray:
        return self.grid.end_s(np.arange(self.grid.n_patches))


@dataclass(frozen=True)
class Region:
    recording: int
    start_s: float
    end_s: float
    seizure: int | None = None  # subject-level seizure index for ictal regions

    def overlaps(self, other: "Region") -> bool:
        return self.recording == other.recording and self.start_s < other.end_s and other.start_s < self.end_s


@dataclass
class PreparedSubject:
    subject_id: str
    recordings: list[PreparedRecording]
    channel_labels: list[str]
    channel_groups: list[int] | None = None
    extra_regions: list[Region] = field(default_factory=list)

    @property
    def n_channels(self) -> int:
        return self.recordings[0].n_channels

    def seizures(self) -> list[tuple[int, float, float]]:
        """``(recording, onset_s, offset_s)`` in recording then time order."""
        return [(i, a, b) for i, rec in enumerate(self.recordings) for a, b in rec.annotations]

    @property
    def n_seizures(self) -> int:
        return len(self.seizures())


def robust_scale(data: np.ndarray) -> float:
    """Median absolute deviation of all samples, as a standard deviation estimate."""
    mad = float(np.median(np.abs(data - np.median(data))))
    return MAD_TO_SIGMA * mad if mad > 0 else 1.0


def prepare_recording(rec: Recording, cfg: RunConfig, source: str) -> PreparedRecording:
    out = preprocess(rec, cfg.preprocess_config())
    data = out.data
    if cfg.input_scaling == "mad":
        data = data / robust_scale(data)
    grid = make_patches(out, cfg.window_s, cfg.stride_s)
    return PreparedRecording(
        source=source,
        data=np.ascontiguousarray(data, dtype=np.float32),
        grid=grid,
        annotations=list(out.annotations),
    )


def prepare_subject(recordings: Sequence[Recording], cfg: RunConfig) -> PreparedSubject:
    if not recordings:
        raise DataError("subject has no recordings")
    sid = recordings[0].subject_id
    if len({r.n_channels for r in recordings}) != 1:
        raise DataError(f"subject {sid}: channel count varies across recordings")
    prepared = [
        prepare_recording(r, cfg, r.path or f"{sid}#rec{i:02d}") for i, r in enumerate(recordings)
    ]
    return PreparedSubject(
        subject_id=sid,
        recordings=prepared,
        channel_labels=list(recordings[0].channel_labels),
        channel_groups=recordings[0].channel_groups,
    )


def load_dataset(data_dir: str | Path, cfg: RunConfig, subjects: Sequence[str] | None = None) -> dict[str, PreparedSubject]:
    """Read every ``*.json`` subject manifest under ``data_dir`` (curated manifests are skipped)."""
    root = Path(data_dir)
    if not root.is_dir():
        raise DataError(f"data directory {root} does not exist")
    out = {}
    for path in sorted(root.glob("*.json")):
        if path.name.endswith(".curated.json"):
            continue
        manifest = read_manifest(path)
        if subjects is not None and manifest.subject_id not in subjects:
            continue
        out[manifest.subject_id] = prepare_subject(load_recordings(manifest), cfg)
    if not out:
        raise DataError(f"no subject manifests found in {root}")
    if subjects is not None:
        missing = sorted(set(subjects) - set(out))
        if missing:
            raise DataError(f"subjects not found in {root}: {missing}")
    return out


def add_curated_regions(subject: PreparedSubject, curated: CuratedDataset) -> None:
    """Register curated non-ictal segments as additional training regions."""
    by_source = {rec.source: i for i, rec in enumerate(subject.recordings)}
    for source, start, end in merge_segments(curated.segments):
        if source not in by_source:
            raise DataError(f"curated segment refers to unknown recording {source}")
        subject.extra_regions.append(Region(by_source[source], start, end))


# --- regions -----------------------------------------------------------------


def seizure_regions(subject: PreparedSubject, context_s: float) -> list[Region]:
    """One region per seizure with ``context_s`` on each side.

    Neighbouring seizures in one recording split the gap between them at its
    midpoint, so regions never overlap.
    """
    regions = []
    k = 0
    for i, rec in enumerate(subject.recordings):
        duration = rec.data.shape[1] / rec.grid.sampling_rate
        ann = rec.annotations
        for n, (onset, offset) in enumerate(ann):
            lo = 0.0 if n == 0 else (ann[n - 1][1] + onset) / 2.0
            hi = duration if n == len(ann) - 1 else (offset + ann[n + 1][0]) / 2.0
            regions.append(Region(i, max(lo, onset - context_s), min(hi, offset + context_s), seizure=k))
            k += 1
    return regions


def background_regions(subject: PreparedSubject) -> list[Region]:
    """Whole seizure-free recordings plus any curated segments."""
    regions = [
        Region(i, 0.0, rec.data.shape[1] / rec.grid.sampling_rate)
        for i, rec in enumerate(subject.recordings)
        if not rec.annotations
    ]
    return regions + list(subject.extra_regions)


def training_regions(subject: PreparedSubject, context_s: float) -> list[Region]:
    return seizure_regions(subject, context_s) + background_regions(subject)


def stack_ends(rec: PreparedRecording, region: Region, memory_length: int) -> np.ndarray:
    """Final-patch indices of every full stack timestamped inside ``region``."""
    t = rec.timestamps()
    j = np.arange(rec.grid.n_patches)
    keep = (j >= memory_length - 1) & (t >= region.start_s - 1e-9) & (t <= region.end_s + 1e-9)
    return j[keep]


def check_disjoint(train: Sequence[Region], test: Sequence[Region]) -> None:
    for a in train:
        for b in test:
            if a.overlaps(b):
                raise LeakageError(f"training region {a} overlaps evaluation region {b}")


# --- batches -----------------------------------------------------------------


@dataclass(frozen=True)
class Batch:
    subject_id: str
    recording: int
    ends: np.ndarray
    labels: np.ndarray

    @property
    def segment_id(self) -> str:
        return f"rec{self.recording:02d}:{int(self.ends[0])}-{int(self.ends[-1])}"


@dataclass
class RegionStacks:
    subject_id: str
    recording: int
    ends: np.ndarray

    def __len__(self) -> int:
        return len(self.ends)


def region_stacks(subject: PreparedSubject, regions: Sequence[Region], memory_length: int) -> list[RegionStacks]:
    out = []
    for region in regions:
        ends = stack_ends(subject.recordings[region.recording], region, memory_length)
        if len(ends):
            out.append(RegionStacks(subject.subject_id, region.recording, ends))
    return out


def make_batch(subject: PreparedSubject, recording: int, ends: np.ndarray) -> Batch:
    labels = subject.recordings[recording].grid.labels[ends].astype(np.float64)
    return Batch(subject.subject_id, recording, np.asarray(ends), labels)


def chunk(ends: np.ndarray, size: int) -> list[np.ndarray]:
    """Split into runs of at most ``size`` consecutive ends (a gap also splits)."""
    if len(ends) == 0:
        return []
    breaks = np.flatnonzero(np.diff(ends) != 1) + 1
    out = []
    for run in np.split(ends, breaks):
        out += [run[i : i + size] for i in range(0, len(run), size)]
    return out


class PoolSampler:
    """Each batch comes from one uniformly drawn subject, then a stack-weighted region."""

    def __init__(self, subjects: dict[str, PreparedSubject], stacks: dict[str, list[RegionStacks]], batch_size: int, rng: np.random.Generator):
        self.subjects = subjects
        self.ids = sorted(s for s in stacks if stacks[s])
        if not self.ids:
            raise InsufficientDataError("no training stacks in the pre-training pool")
        self.stacks = stacks
        self.batch_size = batch_size
        self.rng = rng

    def draw(self) -> Batch:
        sid = self.ids[int(self.rng.integers(len(self.ids)))]
        regions = self.stacks[sid]
        sizes = np.array([len(r) for r in regions], dtype=np.float64)
        region = regions[int(self.rng.choice(len(regions), p=sizes / sizes.sum()))]
        runs = chunk(region.ends, len(region.ends))
        run = runs[int(self.rng.integers(len(runs)))] if len(runs) > 1 else runs[0]
        start = int(self.rng.integers(max(1, len(run) - self.batch_size + 1)))
        return make_batch(self.subjects[sid], region.recording, run[start : start + self.batch_size])


def epoch_batches(subject: PreparedSubject, stacks: Sequence[RegionStacks], batch_size: int, rng: np.random.Generator) -> Iterator[Batch]:
    """One pass over every stack, in shuffled chunks of consecutive ends."""
    pieces = [(r.recording, c) for r in stacks for c in chunk(r.ends, batch_size)]
    for k in rng.permutation(len(pieces)):
        rec, ends = pieces[int(k)]
        yield make_batch(subject, rec, ends)


def batch_inputs(subject: PreparedSubject, batch: Batch, memory_length: int) -> tuple[torch.Tensor, np.ndarray]:
    """Patches covering the batch ``(C, P, W)`` and the stack ends relative to them."""
    rec = subject.recordings[batch.recording]
    first = int(batch.ends[0]) - memory_length + 1
    count = int(batch.ends[-1]) - first + 1
    patches = np.ascontiguousarray(patch_view(rec.data, rec.grid, first, count))
    return torch.from_numpy(patches), batch.ends - first


def all_labels(subject: PreparedSubject, stacks: Sequence[RegionStacks]) -> np.ndarray:
    if not stacks:
        return np.zeros(0)
    return np.concatenate([subject.recordings[r.recording].grid.labels[r.ends] for r in stacks])
