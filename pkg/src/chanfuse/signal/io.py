"""On-disk format: one JSON manifest per subject plus header-less float32 payloads.

Payloads are little-endian float32, channel-major (all of channel 0, then
channel 1, ...); shapes come from the manifest.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, FormatError
from .recording import Recording

PAYLOAD_DTYPE = np.dtype("<f4")


@dataclass
class RecordingEntry:
    path: str
    sampling_rate_hz: float
    channels: int
    duration_s: float
    annotations: list[tuple[float, float]] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sampling_rate_hz))


@dataclass
class SubjectManifest:
    subject_id: str
    recordings: list[RecordingEntry]
    channel_labels: list[str] | None = None
    channel_groups: list[int] | None = None
    root: Path | None = None

    @property
    def seizure_count(self) -> int:
        return sum(len(r.annotations) for r in self.recordings)

    @property
    def n_channels(self) -> int:
        return self.recordings[0].channels

    def to_json(self) -> dict:
        out = {
            "subject_id": self.subject_id,
            "recordings": [
                {
                    "path": r.path,
                    "sampling_rate_hz": r.sampling_rate_hz,
                    "channels": r.channels,
                    "duration_s": r.duration_s,
                    "annotations": [{"onset_s": a, "offset_s": b} for a, b in r.annotations],
                }
                for r in self.recordings
            ],
        }
        if self.channel_labels is not None:
            out["channel_labels"] = list(self.channel_labels)
        if self.channel_groups is not None:
            out["channel_groups"] = [int(g) for g in self.channel_groups]
        return out

    def resolve(self, entry: RecordingEntry) -> Path:
        p = Path(entry.path)
        if not p.is_absolute() and self.root is not None:
            p = self.root / p
        return p


def write_payload(path: str | Path, data: np.ndarray) -> None:
    np.ascontiguousarray(data, dtype=PAYLOAD_DTYPE).tofile(path)


def read_payload(path: str | Path, channels: int, n_samples: int) -> np.ndarray:
    path = Path(path)
    expected = channels * n_samples * PAYLOAD_DTYPE.itemsize
    if not path.exists():
        raise DataError(f"missing recording payload {path}")
    size = path.stat().st_size
    if size != expected:
        raise FormatError(f"{path}: {size} bytes, manifest implies {expected}")
    return np.fromfile(path, dtype=PAYLOAD_DTYPE).reshape(channels, n_samples)


def write_subject(directory: str | Path, recordings: list[Recording]) -> Path:
    """Write payloads and the manifest for one subject; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not recordings:
        raise DataError("no recordings to write")
    subject_id = recordings[0].subject_id
    entries = []
    for i, rec in enumerate(recordings):
        name = f"{subject_id}_rec{i:02d}.f32"
        write_payload(directory / name, rec.data)
        entries.append(
            RecordingEntry(
                path=name,
                sampling_rate_hz=float(rec.sampling_rate),
                channels=rec.n_channels,
                duration_s=rec.n_samples / rec.sampling_rate,
                annotations=list(rec.annotations),
            )
        )
    manifest = SubjectManifest(
        subject_id=subject_id,
        recordings=entries,
        channel_labels=list(recordings[0].channel_labels),
        channel_groups=recordings[0].channel_groups,
    )
    path = directory / f"{subject_id}.json"
    path.write_text(json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path: str | Path) -> SubjectManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError(f"manifest {path} not found") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest {path} is not valid JSON: {exc}") from None
    try:
        entries = [
            RecordingEntry(
                path=r["path"],
                sampling_rate_hz=float(r["sampling_rate_hz"]),
                channels=int(r["channels"]),
                duration_s=float(r["duration_s"]),
                annotations=[(float(a["onset_s"]), float(a["offset_s"])) for a in r.get("annotations", [])],
            )
            for r in raw["recordings"]
        ]
        manifest = SubjectManifest(
            subject_id=str(raw["subject_id"]),
            recordings=entries,
            channel_labels=raw.get("channel_labels"),
            channel_groups=raw.get("channel_groups"),
            root=path.parent,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"manifest {path} is malformed: {exc}") from None
    if not entries:
        raise DataError(f"manifest {path} lists no recordings")
    if len({e.channels for e in entries}) != 1:
        raise DataError(f"subject {manifest.subject_id}: channel count varies across recordings")
    for e in entries:
        if not manifest.resolve(e).exists():
            raise DataError(f"subject {manifest.subject_id}: missing payload {e.path}")
    return manifest


def load_recordings(manifest: SubjectManifest) -> list[Recording]:
    out = []
    for e in manifest.recordings:
        data = read_payload(manifest.resolve(e), e.channels, e.n_samples)
        out.append(
            Recording(
                subject_id=manifest.subject_id,
                data=data,
                sampling_rate=e.sampling_rate_hz,
                channel_labels=list(manifest.channel_labels or []),
                annotations=e.annotations,
                channel_groups=manifest.channel_groups,
                path=str(manifest.resolve(e)),
            )
        )
    return out
