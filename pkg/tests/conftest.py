import pytest

from chanfuse.pipeline.config import from_mapping
from chanfuse.pipeline.data import prepare_subject
from chanfuse.signal.synth import SynthSpec, synth_generate

TINY_SPEC = SynthSpec(
    n_subjects=5,
    channel_range=(6, 9),
    group_size_range=(2, 3),
    seizures_per_subject=2,
    seizure_duration_s=(20, 30),
    pre_context_s=40,
    post_context_s=40,
    sampling_rate=32.0,
    short_bursts_per_recording=1,
)

TINY_RUN = {
    "target_rate_hz": 16.0,
    "band_high_hz": 6.0,
    "enc_levels": 2,
    "enc_widths": [2, 4],
    "dim": 16,
    "tcn_hidden": 8,
    "mlp_hidden": 8,
    "batch_size": 16,
    "batches_per_epoch": 2,
    "pretrain_min_epochs": 5,
    "pretrain_max_epochs": 6,
    "finetune_epochs": 1,
    "n_test_subjects": 2,
    "dtype": "float32",
}


@pytest.fixture(scope="session")
def tiny_cfg():
    return from_mapping(TINY_RUN)


@pytest.fixture(scope="session")
def tiny_raw():
    return synth_generate(TINY_SPEC)


@pytest.fixture(scope="session")
def tiny_subjects(tiny_raw, tiny_cfg):
    return {layout.subject_id: prepare_subject(recs, tiny_cfg) for layout, recs in tiny_raw}


_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.failed:
        _criteria[name] = report


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        report = _criteria[name]
        number = int(name.split("_")[2])
        label = name.split("_", 3)[3].replace("_", " ")
        info = dict(report.user_properties).get("detail", "")
        status = "PASS" if report.passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {label}: {info}")
