"""Ablations, the subject-scaling sweep and a seeded random search."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .. import seeds
from ..errors import ConfigError, DataError
from .config import RunConfig
from .data import PreparedSubject
from .evaluate import EvalReport
from .train import PretrainResult, SubModel, check_pool, evaluate, finetune, pretrain

VARIANTS = ("full", "no_pretrain", "mean_fusion", "no_memory")


def variant_config(cfg: RunConfig, variant: str) -> RunConfig:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if variant == "mean_fusion":
        return cfg.replace(fusion="mean")
    if variant == "no_memory":
        return cfg.replace(head="mlp")
    return cfg


@dataclass(frozen=True)
class Split:
    test: tuple[str, ...]
    pool: tuple[str, ...]


def split_subjects(subjects: dict[str, PreparedSubject], cfg: RunConfig) -> Split:
    """Held-out test subjects and a disjoint pre-training pool, both seeded."""
    ids = sorted(subjects)
    if cfg.test_subjects:
        test = tuple(cfg.test_subjects)
        unknown = sorted(set(test) - set(ids))
        if unknown:
            raise DataError(f"test subjects not in dataset: {unknown}")
    else:
        eligible = [s for s in ids if subjects[s].n_seizures >= 2]
        if len(eligible) < cfg.n_test_subjects:
            raise DataError(f"need {cfg.n_test_subjects} subjects with >= 2 seizures, found {len(eligible)}")
        rng = seeds.rng(cfg.seed, "test-subjects")
        test = tuple(sorted(rng.choice(eligible, size=cfg.n_test_subjects, replace=False).tolist()))
    rest = [s for s in ids if s not in test]
    if cfg.pool_size:
        if cfg.pool_size > len(rest):
            raise DataError(f"pool_size {cfg.pool_size} exceeds the {len(rest)} non-test subjects")
        rng = seeds.rng(cfg.seed, f"pool/{cfg.pool_size}")
        rest = sorted(rng.choice(rest, size=cfg.pool_size, replace=False).tolist())
    check_pool(rest, test)
    return Split(test=test, pool=tuple(rest))


@dataclass
class RunResult:
    report: EvalReport
    pretrained: PretrainResult | None
    submodels: dict[str, list[SubModel]] = field(default_factory=dict)


def run_protocol(
    subjects: dict[str, PreparedSubject],
    cfg: RunConfig,
    variant: str = "full",
    split: Split | None = None,
    provenance_path: str | Path | None = None,
) -> RunResult:
    """Pre-train once on the pool, then fine-tune and evaluate every test subject."""
    vcfg = variant_config(cfg, variant)
    split = split or split_subjects(subjects, cfg)
    pre = None
    if variant != "no_pretrain":
        pool = {s: subjects[s] for s in split.pool}
        pre = pretrain(pool, vcfg, test_subjects=split.test, provenance_path=provenance_path)
    report = EvalReport(variant=variant)
    submodels = {}
    for sid in split.test:
        sms = finetune(pre.checkpoint if pre else None, subjects[sid], vcfg)
        submodels[sid] = sms
        report.extend(evaluate(sms, subjects[sid], vcfg, variant))
    report.meta = {
        "variant": variant,
        "seed": cfg.seed,
        "test_subjects": list(split.test),
        "pool": list(split.pool) if pre else [],
        "pretrain_epochs": pre.epochs if pre else 0,
        "finetune_epochs": max((sm.epochs for v in submodels.values() for sm in v), default=0),
        "scheme": vcfg.finetune_scheme,
        "fusion": vcfg.fusion,
        "head": vcfg.head,
    }
    return RunResult(report, pre, submodels)


def ablate(variant: str, subjects: dict[str, PreparedSubject], cfg: RunConfig, split: Split | None = None) -> EvalReport:
    return run_protocol(subjects, cfg, variant, split).report


@dataclass
class ScalingRow:
    pool_size: int
    seed: int
    runtime_s: float
    report: EvalReport

    def to_json(self) -> dict:
        return {
            "pool_size": self.pool_size,
            "seed": self.seed,
            "runtime_s": self.runtime_s,
            "median_f1": self.report.median("f1"),
            "report": self.report.to_json(),
        }


def subject_scaling_experiment(
    subjects: dict[str, PreparedSubject],
    cfg: RunConfig,
    pool_sizes: Sequence[int] = (5, 10, 15),
) -> list[ScalingRow]:
    """Pre-train on growing pools (disjoint seeds), same held-out test subjects throughout."""
    test = split_subjects(subjects, cfg).test
    rows = []
    for size in pool_sizes:
        run_seed = seeds.int_seed(cfg.seed, f"scaling/{size}") % (2**31)
        run_cfg = cfg.replace(seed=run_seed, test_subjects=list(test), pool_size=int(size))
        start = time.perf_counter()
        result = run_protocol(subjects, run_cfg, "full", split_subjects(subjects, run_cfg))
        rows.append(ScalingRow(int(size), run_seed, time.perf_counter() - start, result.report))
    return rows


def random_search(
    base: RunConfig,
    space: dict[str, Sequence],
    objective: Callable[[RunConfig], float],
    n_trials: int,
    seed: int = 0,
) -> list[tuple[dict, float]]:
    """Evaluate ``objective`` on ``n_trials`` random points of ``space``; best first."""
    rng = seeds.rng(seed, "random-search")
    trials = []
    for _ in range(n_trials):
        choice = {k: _pick(rng, v) for k, v in sorted(space.items())}
        trials.append((choice, float(objective(base.replace(**choice)))))
    return sorted(trials, key=lambda t: -t[1])


def _pick(rng: np.random.Generator, values: Sequence):
    value = values[int(rng.integers(len(values)))]
    return value.item() if isinstance(value, np.generic) else value
