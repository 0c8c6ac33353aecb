"""Delta-power stratified selection of non-ictal data for long recordings."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal as sps

from ..errors import CurationError
from .recording import Recording

DELTA_BAND = (0.5, 4.0)


@dataclass(frozen=True)
class Segment:
    source: str
    start_s: float
    end_s: float
    bin: int


@dataclass(frozen=True)
class IctalEvent:
    source: str
    onset_s: float
    offset_s: float
    start_s: float
    end_s: float


@dataclass
class CuratedDataset:
    subject_id: str
    window_s: float
    bin_count: int
    minutes_per_bin: float
    segments: list[Segment] = field(default_factory=list)
    ictal_events: list[IctalEvent] = field(default_factory=list)
    bin_edges: list[float] = field(default_factory=list)

    def minutes_in_bin(self, b: int) -> float:
        return sum(s.end_s - s.start_s for s in self.segments if s.bin == b) / 60.0

    def to_json(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "window_s": self.window_s,
            "bin_count": self.bin_count,
            "minutes_per_bin": self.minutes_per_bin,
            "bin_edges": self.bin_edges,
            "segments": [asdict(s) for s in self.segments],
            "ictal_events": [asdict(e) for e in self.ictal_events],
        }

    @classmethod
    def from_json(cls, raw: dict) -> "CuratedDataset":
        return cls(
            subject_id=raw["subject_id"],
            window_s=raw["window_s"],
            bin_count=raw["bin_count"],
            minutes_per_bin=raw["minutes_per_bin"],
            bin_edges=list(raw.get("bin_edges", [])),
            segments=[Segment(**s) for s in raw["segments"]],
            ictal_events=[IctalEvent(**e) for e in raw["ictal_events"]],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")


def window_delta_power(data: np.ndarray, fs: float, window: int) -> np.ndarray:
    """Channel-averaged delta-band power of consecutive non-overlapping windows.

    ``data`` is ``(C, n_windows * window)``; Hann-windowed periodogram per window.
    """
    n_ch, n = data.shape
    n_win = n // window
    blocks = data[:, : n_win * window].reshape(n_ch, n_win, window)
    freqs, pxx = sps.periodogram(blocks, fs=fs, window="hann", axis=-1, detrend="constant")
    band = (freqs >= DELTA_BAND[0]) & (freqs <= DELTA_BAND[1])
    df = freqs[1] - freqs[0]
    return pxx[..., band].sum(axis=-1).mean(axis=0) * df


def delta_curate(
    recordings: Sequence[Recording],
    bin_count: int = 5,
    minutes_per_bin: float = 20.0,
    window_s: float = 4.0,
    seed: int = 0,
    ictal_context_s: float = 180.0,
) -> CuratedDataset:
    """Stratify non-ictal windows into equal-count delta-power bins and sample each bin.

    Windows touching an ictal annotation are never candidates. Every ictal
    event is kept, with ``ictal_context_s`` of surrounding signal on both sides.
    """
    if not recordings:
        raise CurationError("no recordings to curate")
    subject_id = recordings[0].subject_id
    per_bin = int(round(minutes_per_bin * 60.0 / window_s))
    needed = per_bin * bin_count

    sources, starts, powers = [], [], []
    events = []
    for idx, rec in enumerate(recordings):
        source = rec.path or f"{subject_id}#{idx}"
        window = int(round(window_s * rec.sampling_rate))
        power = window_delta_power(np.asarray(rec.data, dtype=np.float64), rec.sampling_rate, window)
        win_start = np.arange(len(power)) * window_s
        clean = np.ones(len(power), dtype=bool)
        for onset, offset in rec.annotations:
            clean &= (win_start + window_s <= onset) | (win_start >= offset)
            events.append(
                IctalEvent(
                    source=source,
                    onset_s=onset,
                    offset_s=offset,
                    start_s=max(0.0, onset - ictal_context_s),
                    end_s=min(rec.duration_s, offset + ictal_context_s),
                )
            )
        sources += [source] * int(clean.sum())
        starts.append(win_start[clean])
        powers.append(power[clean])

    starts_arr = np.concatenate(starts) if starts else np.zeros(0)
    power_arr = np.concatenate(powers) if powers else np.zeros(0)
    available = len(power_arr)
    if available < needed:
        shortfall_min = (needed - available) * window_s / 60.0
        raise CurationError(
            f"subject {subject_id}: {available * window_s / 60.0:.2f} min of non-ictal signal, "
            f"{needed * window_s / 60.0:.2f} min required (short by {shortfall_min:.2f} min)"
        )

    order = np.argsort(power_arr, kind="stable")
    bins = np.array_split(order, bin_count)
    rng = np.random.default_rng(seed)
    segments = []
    edges = []
    for b, members in enumerate(bins):
        if len(members) < per_bin:
            raise CurationError(
                f"subject {subject_id}: delta bin {b} holds {len(members)} windows, {per_bin} required"
            )
        edges.append(float(power_arr[members[-1]]))
        chosen = np.sort(rng.choice(members, size=per_bin, replace=False))
        for i in chosen:
            s = float(starts_arr[i])
            segments.append(Segment(source=sources[i], start_s=s, end_s=s + window_s, bin=b))
    segments.sort(key=lambda s: (s.source, s.start_s))
    return CuratedDataset(
        subject_id=subject_id,
        window_s=window_s,
        bin_count=bin_count,
        minutes_per_bin=minutes_per_bin,
        segments=segments,
        ictal_events=events,
        bin_edges=edges,
    )


def merge_segments(segments: Sequence[Segment]) -> list[tuple[str, float, float]]:
    """Coalesce abutting selected windows into ``(source, start_s, end_s)`` regions."""
    out: list[list] = []
    for s in sorted(segments, key=lambda s: (s.source, s.start_s)):
        if out and out[-1][0] == s.source and abs(out[-1][2] - s.start_s) < 1e-9:
            out[-1][2] = s.end_s
        else:
            out.append([s.source, s.start_s, s.end_s])
    return [tuple(r) for r in out]
