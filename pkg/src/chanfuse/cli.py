"""Command-line entry point: ``chanfuse <command> [options]``.

Every command reads one config file plus ``--set key=value`` overrides,
writes only under its output directory and echoes the resolved config there.
Relative output paths are placed under ``$CHANFUSE_OUT`` when it is set.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .diagnostics import GRAD_TOLERANCE, gradient_suite
from .errors import ConfigError, DataError, LeakageError, NumericError
from .fusion import group_similarity_summary, key_similarity_matrix, write_similarity_csv
from .pipeline.checkpoint import load_checkpoint, restore, save_checkpoint
from .pipeline.config import RunConfig, load_config
from .pipeline.data import add_curated_regions, load_dataset
from .pipeline.evaluate import EvalReport
from .pipeline.experiments import VARIANTS, run_protocol, split_subjects, subject_scaling_experiment
from .pipeline.train import SubModel, evaluate, finetune, pretrain, write_provenance
from .signal.curation import CuratedDataset, delta_curate
from .signal.io import load_recordings, read_manifest, write_subject
from .signal.synth import SynthSpec, synth_generate

OUT_ENV = "CHANFUSE_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_LEAKAGE, EXIT_NUMERIC = 0, 2, 3, 4, 5


# --- helpers -------------------------------------------------------------------


def _range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    try:
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW:HIGH, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def resolve_config(args) -> RunConfig:
    extra = {"seed": args.seed}
    if getattr(args, "data", None):
        extra["data_dir"] = str(args.data)
    return load_config(args.config, args.set or (), **extra)


def output_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.out_dir or args.command)
    if not out.is_absolute() and os.environ.get(OUT_ENV):
        out = Path(os.environ[OUT_ENV]) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def echo_config(out: Path, cfg: RunConfig) -> None:
    (out / "config.yaml").write_text(cfg.to_yaml())


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _dataset(cfg: RunConfig, args, subjects=None):
    if not cfg.data_dir:
        raise ConfigError("no dataset given (use --data or set data_dir)")
    data = load_dataset(cfg.data_dir, cfg, subjects)
    curated = getattr(args, "curated", None)
    if curated:
        for sid, subject in data.items():
            path = Path(curated) / f"{sid}.curated.json"
            if path.exists():
                add_curated_regions(subject, CuratedDataset.from_json(json.loads(path.read_text())))
    return data


def _subject_list(text: str | None) -> list[str] | None:
    return [s for s in text.split(",") if s] if text else None


# --- commands ------------------------------------------------------------------


def cmd_synth(args, cfg: RunConfig) -> int:
    spec = SynthSpec(
        n_subjects=args.subjects,
        channel_range=args.channels,
        group_size_range=args.groups,
        seizures_per_subject=args.seizures,
        sampling_rate=args.fs,
        shuffle_groups=args.shuffle_groups,
        seed=cfg.seed,
    )
    out = output_dir(args, cfg)
    rows = []
    for layout, recordings in synth_generate(spec):
        path = write_subject(out, recordings)
        manifest = read_manifest(path)
        rows.append((layout.subject_id, layout.n_channels, int(layout.groups.max()) + 1, manifest.seizure_count, len(recordings)))
    # *.json in a data directory is reserved for subject manifests
    spec_dict = {k: list(v) if isinstance(v, tuple) else v for k, v in spec.__dict__.items()}
    (out / "synth_spec.yaml").write_text(yaml.safe_dump(spec_dict, sort_keys=True))
    echo_config(out, cfg)
    print(f"{'subject':<8} {'channels':>8} {'groups':>6} {'seizures':>8} {'recordings':>10}")
    for row in rows:
        print(f"{row[0]:<8} {row[1]:>8} {row[2]:>6} {row[3]:>8} {row[4]:>10}")
    print(f"wrote {len(rows)} subjects to {out}")
    return EXIT_OK


def cmd_curate(args, cfg: RunConfig) -> int:
    manifest = read_manifest(args.manifest)
    curated = delta_curate(
        load_recordings(manifest),
        bin_count=args.bins,
        minutes_per_bin=args.minutes,
        window_s=args.window,
        seed=cfg.seed,
    )
    out = output_dir(args, cfg)
    curated.save(out / f"{manifest.subject_id}.curated.json")
    echo_config(out, cfg)
    for b in range(curated.bin_count):
        print(f"bin {b}: {curated.minutes_in_bin(b):.2f} min")
    print(f"{len(curated.ictal_events)} ictal events kept")
    return EXIT_OK


def cmd_pretrain(args, cfg: RunConfig) -> int:
    if args.test_subjects:
        cfg = cfg.replace(test_subjects=_subject_list(args.test_subjects))
    data = _dataset(cfg, args)
    split = split_subjects(data, cfg)
    out = output_dir(args, cfg)
    echo_config(out, cfg)
    result = pretrain({s: data[s] for s in split.pool}, cfg, test_subjects=split.test)
    save_checkpoint(result.checkpoint, out / "pretrain.ckpt")
    write_provenance(result.provenance, out / "provenance.jsonl")
    write_json(out / "log.json", result.checkpoint.log)
    write_json(out / "split.json", {"test": list(split.test), "pool": list(split.pool)})
    print(f"pre-trained on {len(split.pool)} subjects for {result.epochs} epochs; held out {', '.join(split.test)}")
    return EXIT_OK


def cmd_finetune(args, cfg: RunConfig) -> int:
    if args.scheme:
        cfg = cfg.replace(finetune_scheme=args.scheme)
    if args.checkpoint is None and not args.from_scratch:
        raise ConfigError("finetune needs --checkpoint (or --from-scratch)")
    data = _dataset(cfg, args, [args.subject])
    subject = data[args.subject]
    ckpt = load_checkpoint(args.checkpoint) if args.checkpoint else None
    if ckpt is not None and args.subject in ckpt.meta.get("pool", []):
        raise LeakageError(f"subject {args.subject} was in this checkpoint's pre-training pool")
    out = output_dir(args, cfg)
    echo_config(out, cfg)
    submodels = finetune(ckpt, subject, cfg)
    for sm in submodels:
        save_checkpoint(sm.checkpoint(), out / f"{args.subject}_sub{sm.index:02d}.ckpt")
    print(f"{len(submodels)} sub-models ({cfg.finetune_scheme}) for {args.subject} in {out}")
    return EXIT_OK


def _load_submodels(paths: list[Path]) -> list[SubModel]:
    out = []
    for path in paths:
        ckpt = load_checkpoint(path)
        meta = ckpt.meta
        if meta.get("stage") != "finetune":
            raise DataError(f"{path} is not a fine-tuned sub-model checkpoint")
        out.append(
            SubModel(
                meta["subject_id"], meta["submodel"], meta["scheme"],
                list(meta["train_seizures"]), list(meta["heldout_seizures"]), restore(ckpt), list(ckpt.log),
            )
        )
    return out


def cmd_eval(args, cfg: RunConfig) -> int:
    if not args.checkpoint:
        raise ConfigError("eval needs --checkpoint (sub-model files or a fine-tuning output directory)")
    paths = []
    for item in args.checkpoint:
        p = Path(item)
        paths += sorted(p.glob("*.ckpt")) if p.is_dir() else [p]
    submodels = _load_submodels(paths)
    subjects = sorted({sm.subject_id for sm in submodels})
    data = _dataset(cfg, args, subjects)
    report = EvalReport(variant=args.variant)
    for sid in subjects:
        report.extend(evaluate([sm for sm in submodels if sm.subject_id == sid], data[sid], cfg, args.variant))
    report.meta = {"variant": args.variant, "seed": cfg.seed, "checkpoints": [str(p) for p in paths]}
    out = output_dir(args, cfg)
    echo_config(out, cfg)
    report.save(out / "report.json")
    report.save_csv(out / "report.csv")
    print(f"median F1 {report.median('f1'):.3f} over {len(report.units)} held-out seizures")
    return EXIT_OK


def cmd_ablate(args, cfg: RunConfig) -> int:
    data = _dataset(cfg, args)
    out = output_dir(args, cfg)
    echo_config(out, cfg)
    for variant in args.variant:
        start = time.perf_counter()
        result = run_protocol(data, cfg, variant, provenance_path=out / f"{variant}.provenance.jsonl" if variant != "no_pretrain" else None)
        result.report.save(out / f"{variant}.json")
        result.report.save_csv(out / f"{variant}.csv")
        print(f"{variant:<12} median F1 {result.report.median('f1'):.3f}  ({time.perf_counter() - start:.0f} s)")
    return EXIT_OK


def cmd_scaling(args, cfg: RunConfig) -> int:
    data = _dataset(cfg, args)
    out = output_dir(args, cfg)
    echo_config(out, cfg)
    rows = subject_scaling_experiment(data, cfg, args.pool_sizes)
    write_json(out / "scaling.json", [r.to_json() for r in rows])
    with open(out / "scaling.csv", "w") as fh:
        fh.write("pool_size,seed,runtime_s,median_f1\n")
        for r in rows:
            fh.write(f"{r.pool_size},{r.seed},{r.runtime_s:.3f},{r.report.median('f1'):.6f}\n")
    for r in rows:
        print(f"pool {r.pool_size:>3}: median F1 {r.report.median('f1'):.3f}  ({r.runtime_s:.0f} s)")
    return EXIT_OK


def cmd_inspect_keys(args, cfg: RunConfig) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if args.subject not in ckpt.key_maps:
        raise DataError(f"checkpoint has no key map for {args.subject!r}; it holds {sorted(ckpt.key_maps)}")
    model = restore(ckpt)
    matrix = key_similarity_matrix(model.key_map(args.subject), model.basis)
    labels = [f"ch{i:03d}" for i in range(matrix.shape[0])]
    groups = None
    if args.manifest:
        manifest = read_manifest(args.manifest)
        if manifest.n_channels != matrix.shape[0]:
            raise DataError(f"manifest lists {manifest.n_channels} channels, key map has {matrix.shape[0]}")
        labels = manifest.channel_labels or labels
        groups = manifest.channel_groups
    out = output_dir(args, cfg)
    echo_config(out, cfg)
    write_similarity_csv(matrix, labels, out / f"{args.subject}_keys.csv")
    summary = {"subject_id": args.subject, "channels": int(matrix.shape[0])}
    angles = model.key_map(args.subject).angles().detach().double().numpy()
    summary["angles"] = [float(a) for a in angles]
    if groups is not None:
        summary.update(group_similarity_summary(matrix, groups))
    write_json(out / f"{args.subject}_keys.json", summary)
    off = matrix[~np.eye(len(matrix), dtype=bool)]
    print(f"{args.subject}: {matrix.shape[0]} channels, mean off-diagonal similarity {off.mean() if off.size else 1.0:.3f}")
    if groups is not None:
        print(f"within-group {summary['within_mean']:.3f}  between-group {summary['between_mean']:.3f}")
    return EXIT_OK


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    report = gradient_suite(args.step)
    out = output_dir(args, cfg)
    echo_config(out, cfg)
    write_json(out / "gradcheck.json", report)
    width = max(len(k) for k in report)
    for name, err in report.items():
        print(f"{name:<{width}}  {err:.2e}")
    worst = max(report.values())
    if not np.isfinite(worst) or worst >= GRAD_TOLERANCE:
        raise NumericError(f"max relative gradient error {worst:.3e} >= {GRAD_TOLERANCE}")
    print(f"max relative error {worst:.2e} < {GRAD_TOLERANCE}")
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="root seed (overrides the config)")
    common.add_argument("--out", help=f"output directory (relative paths go under ${OUT_ENV})")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override, repeatable")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="directory of subject manifests")
    data.add_argument("--curated", help="directory of <subject>.curated.json files to add as training data")

    parser = argparse.ArgumentParser(prog="chanfuse", description="Channel-adaptive holographic fusion classifier.")
    parser.add_argument("--version", action="version", version=f"chanfuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic grouped-channel dataset")
    p.add_argument("--subjects", type=int, default=16)
    p.add_argument("--channels", type=_range, default=(32, 128), metavar="LOW:HIGH")
    p.add_argument("--groups", type=_range, default=(4, 10), metavar="LOW:HIGH", help="electrode group sizes")
    p.add_argument("--seizures", type=int, default=3, help="seizures per subject")
    p.add_argument("--fs", type=float, default=128.0, help="sampling rate in Hz")
    p.add_argument("--shuffle-groups", action="store_true", help="scatter group members across the channel axis")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("curate", parents=[common], help="delta-power stratified selection of non-ictal data")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--minutes", type=float, default=20.0, help="minutes per bin")
    p.add_argument("--window", type=float, default=4.0, help="window length in seconds")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("pretrain", parents=[common, data], help="pre-train on the subject pool")
    p.add_argument("--test-subjects", help="comma-separated subjects to hold out")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", parents=[common, data], help="fine-tune one sub-model per seizure")
    p.add_argument("--checkpoint", help="pre-trained checkpoint")
    p.add_argument("--from-scratch", action="store_true", help="skip pre-training (fresh initialization)")
    p.add_argument("--subject", required=True)
    p.add_argument("--scheme", choices=("looc", "laboc"))
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", parents=[common, data], help="evaluate sub-models on their held-out seizures")
    p.add_argument("--checkpoint", nargs="+", help="sub-model checkpoints or directories of them")
    p.add_argument("--variant", default="full", help="label stored in the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common, data], help="run the full protocol for one or more variants")
    p.add_argument("--variant", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("scaling", parents=[common, data], help="pre-training pool size sweep")
    p.add_argument("--pool-sizes", type=_int_list, default=[5, 10, 15])
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("inspect-keys", parents=[common], help="export a subject's key similarity matrix")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--manifest", help="subject manifest, for channel labels and planted groups")
    p.set_defaults(func=cmd_inspect_keys)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of every analytic gradient")
    p.add_argument("--step", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (ConfigError, LeakageError, DataError, NumericError) as exc:
        code, kind = _exit_code(exc)
        print(f"chanfuse: {kind} error: {exc}", file=sys.stderr)
        return code


def _exit_code(exc: Exception) -> tuple[int, str]:
    # order matters: some config errors are also ValueErrors, like data errors
    for kind, code, family in (
        ("config", EXIT_CONFIG, ConfigError),
        ("leakage", EXIT_LEAKAGE, LeakageError),
        ("data", EXIT_DATA, DataError),
        ("numeric", EXIT_NUMERIC, NumericError),
    ):
        if isinstance(exc, family):
            return code, kind
    raise exc  # pragma: no cover

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
