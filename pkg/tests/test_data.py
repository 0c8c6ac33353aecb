from collections import Counter

import numpy as np
import pytest
import torch
from scipy import stats

from chanfuse.errors import DataError, InsufficientDataError, LeakageError
from chanfuse.pipeline import data as D
from chanfuse.signal import Recording
from chanfuse.signal.curation import CuratedDataset, Segment
from chanfuse.signal.io import write_subject


def test_prepared_subject_shape(tiny_subjects, tiny_raw, tiny_cfg):
    layout, recs = tiny_raw[0]
    subj = tiny_subjects[layout.subject_id]
    assert subj.n_channels == layout.n_channels
    assert subj.n_seizures == 2 and len(subj.recordings) == 2
    rec = subj.recordings[0]
    assert rec.data.dtype == np.float32
    assert rec.grid.width == tiny_cfg.patch_length
    assert rec.annotations == recs[0].annotations


def test_mad_scaling_gives_unit_spread(tiny_raw, tiny_cfg):
    _, recs = tiny_raw[0]
    scaled = D.prepare_recording(recs[0], tiny_cfg, "x").data
    mad = np.median(np.abs(scaled - np.median(scaled)))
    assert mad * D.MAD_TO_SIGMA == pytest.approx(1.0, rel=1e-4)
    raw = D.prepare_recording(recs[0], tiny_cfg.replace(input_scaling="none"), "x").data
    assert np.abs(raw).max() > 5 * np.abs(scaled).max()
    assert D.robust_scale(np.zeros(10)) == 1.0


def test_timestamps_are_final_patch_ends(tiny_subjects):
    rec = next(iter(tiny_subjects.values())).recordings[0]
    t = rec.timestamps()
    assert t[0] == pytest.approx(7.5) and np.allclose(np.diff(t), 1.0)


def test_seizure_regions_split_neighbours():
    grid = type("G", (), {"sampling_rate": 1.0})()
    rec = D.PreparedRecording("r", np.zeros((1, 1000)), grid, [(100.0, 150.0), (300.0, 320.0), (900.0, 910.0)])
    subj = D.PreparedSubject("s", [rec], ["a"])
    regions = D.seizure_regions(subj, 180.0)
    assert [(r.start_s, r.end_s) for r in regions] == [(0.0, 225.0), (225.0, 500.0), (720.0, 1000.0)]
    assert [r.seizure for r in regions] == [0, 1, 2]
    for a, b in zip(regions, regions[1:]):
        assert not a.overlaps(b)


def test_background_regions(tiny_subjects):
    subj = next(iter(tiny_subjects.values()))
    assert D.background_regions(subj) == []
    extra = D.Region(0, 0.0, 10.0)
    with_extra = D.PreparedSubject(subj.subject_id, subj.recordings, subj.channel_labels, extra_regions=[extra])
    assert D.background_regions(with_extra) == [extra]


def test_stack_ends_are_inside_region_and_full(tiny_subjects):
    subj = next(iter(tiny_subjects.values()))
    rec = subj.recordings[0]
    region = D.Region(0, 0.0, 30.0)
    ends = D.stack_ends(rec, region, 14)
    assert ends[0] == 13
    assert np.all(rec.timestamps()[ends] <= 30.0)
    assert rec.timestamps()[ends[-1] + 1] > 30.0


def test_check_disjoint():
    a, b = D.Region(0, 0.0, 10.0), D.Region(0, 10.0, 20.0)
    D.check_disjoint([a], [b])
    D.check_disjoint([a], [D.Region(1, 0.0, 10.0)])
    with pytest.raises(LeakageError):
        D.check_disjoint([a], [D.Region(0, 9.0, 12.0)])


def test_chunk_respects_gaps_and_size():
    ends = np.array([1, 2, 3, 4, 5, 9, 10, 11])
    assert [c.tolist() for c in D.chunk(ends, 3)] == [[1, 2, 3], [4, 5], [9, 10, 11]]
    assert D.chunk(np.array([], dtype=int), 3) == []


def test_epoch_visits_every_stack_once(tiny_subjects):
    subj = next(iter(tiny_subjects.values()))
    stacks = D.region_stacks(subj, D.seizure_regions(subj, 180.0), 14)
    seen = []
    for batch in D.epoch_batches(subj, stacks, 16, np.random.default_rng(0)):
        assert len(batch.ends) <= 16 and np.all(np.diff(batch.ends) == 1)
        seen += [(batch.recording, int(e)) for e in batch.ends]
    expected = [(r.recording, int(e)) for r in stacks for e in r.ends]
    assert sorted(seen) == sorted(expected)


def test_batch_inputs_line_up_with_patches(tiny_subjects):
    subj = next(iter(tiny_subjects.values()))
    batch = D.make_batch(subj, 1, np.arange(20, 25))
    patches, rel = D.batch_inputs(subj, batch, 14)
    assert isinstance(patches, torch.Tensor)
    assert patches.shape == (subj.n_channels, 5 + 13, subj.recordings[1].grid.width)
    assert rel.tolist() == list(range(13, 18))
    rec = subj.recordings[1]
    start = 24 * rec.grid.stride
    np.testing.assert_array_equal(patches[:, rel[-1]].numpy(), rec.data[:, start : start + rec.grid.width])
    assert batch.labels.tolist() == rec.grid.labels[20:25].astype(float).tolist()
    assert batch.segment_id == "rec01:20-24"


def test_pool_sampler(tiny_subjects):
    pool = dict(list(tiny_subjects.items())[:3])
    stacks = {s: D.region_stacks(p, D.training_regions(p, 180.0), 14) for s, p in pool.items()}
    sampler = D.PoolSampler(pool, stacks, 8, np.random.default_rng(1))
    drawn = {sampler.draw().subject_id for _ in range(60)}
    assert drawn == set(pool)
    b = sampler.draw()
    assert len(b.ends) == 8 and np.all(np.diff(b.ends) == 1)
    with pytest.raises(InsufficientDataError):
        D.PoolSampler(pool, {s: [] for s in pool}, 8, np.random.default_rng(0))


def test_pool_sampler_draws_subjects_uniformly(tiny_subjects):
    stacks = {s: D.region_stacks(p, D.training_regions(p, 180.0), 14) for s, p in tiny_subjects.items()}
    sampler = D.PoolSampler(tiny_subjects, stacks, 8, np.random.default_rng(3))
    n, k = 50 * 100, len(tiny_subjects)
    counts = Counter(sampler.draw().subject_id for _ in range(n))
    expected = n / k
    sigma = np.sqrt(n * (1 / k) * (1 - 1 / k))
    assert all(abs(counts[s] - expected) < 3 * sigma for s in tiny_subjects)
    chi2 = sum((counts[s] - expected) ** 2 / expected for s in tiny_subjects)
    assert chi2 < stats.chi2.ppf(0.999, k - 1)


def test_all_labels(tiny_subjects):
    subj = next(iter(tiny_subjects.values()))
    stacks = D.region_stacks(subj, D.seizure_regions(subj, 180.0), 14)
    labels = D.all_labels(subj, stacks)
    assert labels.sum() > 0 and len(labels) == sum(len(r) for r in stacks)
    assert len(D.all_labels(subj, [])) == 0


def test_load_dataset(tmp_path, tiny_raw, tiny_cfg):
    for _, recs in tiny_raw[:2]:
        write_subject(tmp_path, recs)
    (tmp_path / "sub00.curated.json").write_text("{}")
    subjects = D.load_dataset(tmp_path, tiny_cfg)
    assert sorted(subjects) == ["sub00", "sub01"]
    assert list(D.load_dataset(tmp_path, tiny_cfg, ["sub01"])) == ["sub01"]
    with pytest.raises(DataError):
        D.load_dataset(tmp_path, tiny_cfg, ["sub07"])
    with pytest.raises(DataError):
        D.load_dataset(tmp_path / "none", tiny_cfg)
    with pytest.raises(DataError):
        D.load_dataset(tmp_path / "sub00_rec00.f32", tiny_cfg)


def test_curated_regions(tiny_subjects):
    subj = next(iter(tiny_subjects.values()))
    source = subj.recordings[1].source
    cur = CuratedDataset("s", 4.0, 5, 1.0, segments=[Segment(source, 0.0, 4.0, 0), Segment(source, 4.0, 8.0, 1)])
    copy = D.PreparedSubject(subj.subject_id, subj.recordings, subj.channel_labels)
    D.add_curated_regions(copy, cur)
    assert copy.extra_regions == [D.Region(1, 0.0, 8.0)]
    with pytest.raises(DataError):
        D.add_curated_regions(copy, CuratedDataset("s", 4.0, 5, 1.0, segments=[Segment("zzz", 0.0, 4.0, 0)]))


def test_mixed_channel_counts_rejected(tiny_cfg):
    a = Recording("s", np.zeros((3, 512)), 32.0)
    b = Recording("s", np.zeros((4, 512)), 32.0)
    with pytest.raises(DataError):
        D.prepare_subject([a, b], tiny_cfg)
    with pytest.raises(DataError):
        D.prepare_subject([], tiny_cfg)
