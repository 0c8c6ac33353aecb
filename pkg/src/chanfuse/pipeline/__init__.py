from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, TrainConfig, benchmark_config, load_config
from .data import PreparedSubject, load_dataset, prepare_subject
from .evaluate import Confusion, EvalReport
from .experiments import VARIANTS, run_protocol, split_subjects, subject_scaling_experiment
from .train import finetune, pretrain

__all__ = [
    "Checkpoint",
    "Confusion",
    "EvalReport",
    "PreparedSubject",
    "RunConfig",
    "TrainConfig",
    "VARIANTS",
    "benchmark_config",
    "finetune",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "prepare_subject",
    "pretrain",
    "run_protocol",
    "save_checkpoint",
    "split_subjects",
    "subject_scaling_experiment",
]
