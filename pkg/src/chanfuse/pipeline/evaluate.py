"""Window-level metrics and evaluation reports."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from ..model import CAModel
from .data import PreparedSubject, Region, batch_inputs, chunk, make_batch, stack_ends

THRESHOLD = 0.5
METRICS = ("f1", "sensitivity", "specificity", "precision")


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.sensitivity
        return 2 * p * r / (p + r) if p + r else 0.0

    def metrics(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}


def confusion(predicted, actual) -> Confusion:
    predicted = np.asarray(predicted, dtype=bool)
    actual = np.asarray(actual, dtype=bool)
    return Confusion(
        tp=int(np.sum(predicted & actual)),
        fp=int(np.sum(predicted & ~actual)),
        fn=int(np.sum(~predicted & actual)),
        tn=int(np.sum(~predicted & ~actual)),
    )


def summarize(values: Sequence[float]) -> dict[str, float]:
    if not len(values):
        return {"median": 0.0, "mean": 0.0, "q1": 0.0, "q3": 0.0, "n": 0}
    arr = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
    return {"median": float(med), "mean": float(arr.mean()), "q1": float(q1), "q3": float(q3), "n": len(arr)}


@dataclass
class UnitResult:
    """One (sub-model, held-out seizure) evaluation."""

    subject_id: str
    seizure: int
    submodel: int
    confusion: Confusion

    def row(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "seizure": self.seizure,
            "submodel": self.submodel,
            **asdict(self.confusion),
            **self.confusion.metrics(),
        }


@dataclass
class EvalReport:
    variant: str
    units: list[UnitResult] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def extend(self, other: "EvalReport") -> None:
        self.units.extend(other.units)

    @property
    def totals(self) -> Confusion:
        out = Confusion()
        for u in self.units:
            out = out + u.confusion
        return out

    def subjects(self) -> dict[str, dict]:
        out = {}
        for sid in sorted({u.subject_id for u in self.units}):
            units = [u for u in self.units if u.subject_id == sid]
            pooled = Confusion()
            for u in units:
                pooled = pooled + u.confusion
            out[sid] = {
                "confusion": asdict(pooled),
                **{m: summarize([getattr(u.confusion, m) for u in units])["median"] for m in METRICS},
            }
        return out

    def summary(self) -> dict[str, dict]:
        return {m: summarize([getattr(u.confusion, m) for u in self.units]) for m in METRICS}

    def median(self, metric: str = "f1") -> float:
        return self.summary()[metric]["median"]

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "meta": self.meta,
            "units": [u.row() for u in self.units],
            "subjects": self.subjects(),
            "summary": self.summary(),
            "confusion": asdict(self.totals),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    def save_csv(self, path: str | Path) -> None:
        rows = [u.row() for u in self.units]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["subject_id"])
            writer.writeheader()
            writer.writerows(rows)

    @classmethod
    def from_json(cls, raw: dict) -> "EvalReport":
        units = [
            UnitResult(
                r["subject_id"], r["seizure"], r["submodel"], Confusion(r["tp"], r["fp"], r["fn"], r["tn"])
            )
            for r in raw["units"]
        ]
        return cls(variant=raw["variant"], units=units, meta=raw.get("meta", {}))


@torch.no_grad()
def predict(model: CAModel, subject: PreparedSubject, recording: int, ends: np.ndarray, chunk_size: int = 64) -> np.ndarray:
    """Seizure probabilities for the stacks ending at ``ends``."""
    model.eval()
    m = model.config.memory_length
    out = []
    for piece in chunk(np.asarray(ends), chunk_size):
        batch = make_batch(subject, recording, piece)
        patches, rel = batch_inputs(subject, batch, m)
        out.append(torch.sigmoid(model(patches, subject.subject_id, rel)).double().numpy())
    return np.concatenate(out) if out else np.zeros(0)


def evaluate_region(model: CAModel, subject: PreparedSubject, region: Region) -> Confusion:
    rec = subject.recordings[region.recording]
    ends = stack_ends(rec, region, model.config.memory_length)
    probs = predict(model, subject, region.recording, ends)
    return confusion(probs >= THRESHOLD, rec.grid.labels[ends])
