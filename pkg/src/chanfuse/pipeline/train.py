"""Two-stage training: pre-training on a subject pool, then per-subject fine-tuning."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch

from .. import nn as cfnn
from .. import seeds
from ..errors import DataError, LeakageError, SchemeError
from ..model import CAModel
from .checkpoint import Checkpoint, capture, restore
from .config import RunConfig, TrainConfig
from .data import (
    Batch,
    PoolSampler,
    PreparedSubject,
    all_labels,
    background_regions,
    batch_inputs,
    check_disjoint,
    epoch_batches,
    region_stacks,
    seizure_regions,
    training_regions,
)
from .evaluate import EvalReport, UnitResult, confusion, evaluate_region


def make_optimizer(model: CAModel, tc: TrainConfig) -> cfnn.Adam:
    params = model.trainable(tc.freeze_all_but_fusion)
    return cfnn.Adam(params.items(), tc.learning_rate, lr_scales={"keys.": tc.key_lr_scale})


def train_step(model: CAModel, opt: cfnn.Adam, subject: PreparedSubject, batch: Batch, weights) -> tuple[float, np.ndarray]:
    """One optimizer step; returns the loss and the batch's pre-update hard predictions."""
    model.train()
    opt.zero_grad()
    patches, rel = batch_inputs(subject, batch, model.config.memory_length)
    logits = model(patches, subject.subject_id, rel)
    targets = torch.as_tensor(batch.labels, dtype=logits.dtype)
    loss = cfnn.weighted_bce_with_logits(logits, targets, weights)
    cfnn.backward(loss)
    opt.step()
    return float(loss.detach()), (logits.detach() > 0).numpy()


def plateau_reached(history: Sequence[float], window: int, delta: float) -> bool:
    """True when the best of the last ``window`` values beats the earlier best by less than ``delta``."""
    if len(history) <= window:
        return False
    return max(history[-window:]) - max(history[:-window]) < delta


def should_stop(history: Sequence[float], tc: TrainConfig) -> bool:
    n = len(history)
    if n >= tc.pretrain_max_epochs:
        return True
    return n >= tc.pretrain_min_epochs and plateau_reached(history, tc.plateau_window, tc.plateau_delta)


# --- pre-training ------------------------------------------------------------


@dataclass
class PretrainResult:
    checkpoint: Checkpoint
    model: CAModel
    provenance: list[dict]

    @property
    def epochs(self) -> int:
        return len(self.checkpoint.log)


def check_pool(pool: Iterable[str], test_subjects: Iterable[str]) -> None:
    leaked = sorted(set(pool) & set(test_subjects))
    if leaked:
        raise LeakageError(f"test subject(s) {leaked} present in the pre-training pool")


def pretrain(
    pool: dict[str, PreparedSubject],
    cfg: RunConfig,
    test_subjects: Iterable[str] = (),
    provenance_path: str | Path | None = None,
) -> PretrainResult:
    test_subjects = set(test_subjects)
    check_pool(pool, test_subjects)
    if not pool:
        raise DataError("pre-training pool is empty")
    tc = cfg.train_config()
    model = CAModel(cfg.model_config())
    m = model.config.memory_length
    for sid in sorted(pool):
        model.add_subject(sid, pool[sid].n_channels)
    stacks = {sid: region_stacks(s, training_regions(s, cfg.context_s), m) for sid, s in pool.items()}
    weights = cfnn.class_weights(np.concatenate([all_labels(pool[s], stacks[s]) for s in sorted(pool)]))
    sampler = PoolSampler(pool, stacks, tc.batch_size, seeds.rng(cfg.seed, "pretrain-batches"))
    opt = make_optimizer(model, tc)
    log, provenance, history = [], [], []
    while not should_stop(history, tc):
        epoch = len(history) + 1
        preds, labels, losses = [], [], []
        draws = Counter()
        for b in range(tc.batches_per_epoch):
            batch = sampler.draw()
            if batch.subject_id in test_subjects:  # pragma: no cover - guarded by check_pool
                raise LeakageError(f"batch drawn from test subject {batch.subject_id}")
            loss, pred = train_step(model, opt, pool[batch.subject_id], batch, weights)
            losses.append(loss)
            preds.append(pred)
            labels.append(batch.labels > 0.5)
            draws[batch.subject_id] += 1
            provenance.append(
                {"epoch": epoch, "batch": b, "subject_id": batch.subject_id, "segments": [batch.segment_id]}
            )
        f1 = confusion(np.concatenate(preds), np.concatenate(labels)).f1
        history.append(f1)
        log.append({"epoch": epoch, "loss": float(np.mean(losses)), "train_f1": f1, "draws": dict(sorted(draws.items()))})
    check_provenance(provenance, test_subjects)
    if provenance_path is not None:
        write_provenance(provenance, provenance_path)
    meta = {
        "stage": "pretrain",
        "pool": sorted(pool),
        "excluded": sorted(test_subjects),
        "epochs": len(log),
        "class_weights": list(weights),
    }
    return PretrainResult(capture(model, opt, log, meta), model, provenance)


def write_provenance(records: Sequence[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_provenance(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def check_provenance(records: Sequence[dict], test_subjects: Iterable[str]) -> None:
    test_subjects = set(test_subjects)
    for r in records:
        if r["subject_id"] in test_subjects:
            raise LeakageError(f"test subject {r['subject_id']} appears in pre-training batch {r['epoch']}/{r['batch']}")


# --- fine-tuning -------------------------------------------------------------


@dataclass
class SubModel:
    subject_id: str
    index: int
    scheme: str
    train_seizures: list[int]
    heldout_seizures: list[int]
    model: CAModel
    log: list[dict] = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.log)

    def checkpoint(self) -> Checkpoint:
        meta = {
            "stage": "finetune",
            "subject_id": self.subject_id,
            "scheme": self.scheme,
            "submodel": self.index,
            "train_seizures": self.train_seizures,
            "heldout_seizures": self.heldout_seizures,
        }
        return capture(self.model, None, self.log, meta)


def scheme_splits(n_seizures: int, scheme: str) -> list[tuple[list[int], list[int]]]:
    """``(train, held-out)`` seizure indices for each sub-model."""
    if scheme not in ("looc", "laboc"):
        raise SchemeError(f"unknown fine-tuning scheme {scheme!r}")
    if n_seizures < 2:
        raise SchemeError(f"{scheme.upper()} needs at least 2 seizures, subject has {n_seizures}")
    out = []
    for k in range(n_seizures):
        others = [i for i in range(n_seizures) if i != k]
        out.append((others, [k]) if scheme == "looc" else ([k], others))
    return out


def finetune(
    pretrained: Checkpoint | None,
    subject: PreparedSubject,
    cfg: RunConfig,
    scheme: str | None = None,
) -> list[SubModel]:
    """One sub-model per seizure. ``pretrained=None`` fine-tunes from a fresh initialization."""
    tc = cfg.train_config()
    scheme = scheme or tc.finetune_scheme
    regions = seizure_regions(subject, cfg.context_s)
    splits = scheme_splits(len(regions), scheme)
    extra = background_regions(subject)
    out = []
    for k, (train_ids, held_ids) in enumerate(splits):
        train_regions = [regions[i] for i in train_ids] + extra
        check_disjoint(train_regions, [regions[i] for i in held_ids])
        model = restore(pretrained, cfg.dim) if pretrained is not None else CAModel(cfg.model_config())
        model.add_subject(subject.subject_id, subject.n_channels, reset=True)
        stacks = region_stacks(subject, train_regions, model.config.memory_length)
        weights = cfnn.class_weights(all_labels(subject, stacks))
        opt = make_optimizer(model, tc)
        rng = seeds.rng(cfg.seed, f"finetune/{subject.subject_id}/{scheme}/{k}")
        log = []
        for epoch in range(1, tc.finetune_epochs + 1):
            preds, labels, losses = [], [], []
            for batch in epoch_batches(subject, stacks, tc.batch_size, rng):
                loss, pred = train_step(model, opt, subject, batch, weights)
                losses.append(loss)
                preds.append(pred)
                labels.append(batch.labels > 0.5)
            f1 = confusion(np.concatenate(preds), np.concatenate(labels)).f1 if preds else 0.0
            log.append({"epoch": epoch, "loss": float(np.mean(losses)) if losses else 0.0, "train_f1": f1})
        out.append(SubModel(subject.subject_id, k, scheme, train_ids, held_ids, model, log))
    return out


def evaluate(submodels: Sequence[SubModel], subject: PreparedSubject, cfg: RunConfig, variant: str = "full") -> EvalReport:
    """Score every sub-model on its held-out seizures only."""
    regions = seizure_regions(subject, cfg.context_s)
    train_extra = background_regions(subject)
    report = EvalReport(variant=variant)
    for sm in submodels:
        held = [regions[i] for i in sm.heldout_seizures]
        if set(sm.train_seizures) & set(sm.heldout_seizures):
            raise LeakageError(f"sub-model {sm.index} was trained on a seizure it is evaluated on")
        check_disjoint([regions[i] for i in sm.train_seizures] + train_extra, held)
        for i in sm.heldout_seizures:
            conf = evaluate_region(sm.model, subject, regions[i])
            report.units.append(UnitResult(subject.subject_id, i, sm.index, conf))
    return report

