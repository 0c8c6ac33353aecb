import json

import numpy as np
import pytest

from chanfuse.errors import CurationError
from chanfuse.signal import Recording
from chanfuse.signal.curation import CuratedDataset, delta_curate, merge_segments, window_delta_power

FS = 16.0


def tiered(minutes_per_tier=40, tiers=5, seed=0, channels=2):
    """Tiers of rising 2 Hz power laid out back to back; tier k occupies [k, k+1) * tier length."""
    rng = np.random.default_rng(seed)
    n = int(minutes_per_tier * 60 * FS)
    t = np.arange(n) / FS
    blocks = [3.0 * (k + 1) * np.sin(2 * np.pi * 2.0 * t) + 0.1 * rng.standard_normal((channels, n)) for k in range(tiers)]
    return Recording("s", np.concatenate(blocks, axis=1), FS, path="planted")


def test_planted_tiers_fill_their_own_bins():
    rec = tiered()
    tier_s = 40 * 60
    cur = delta_curate([rec], seed=1)
    for b in range(5):
        assert abs(cur.minutes_in_bin(b) - 20.0) <= 4.0 / 60.0
    for s in cur.segments:
        assert int(s.start_s // tier_s) == s.bin


def test_exactly_enough_takes_everything():
    rec = tiered(minutes_per_tier=20)
    cur = delta_curate([rec])
    starts = sorted(s.start_s for s in cur.segments)
    assert starts == [4.0 * k for k in range(1500)]
    assert merge_segments(cur.segments) == [("planted", 0.0, 6000.0)]


def test_all_ictal_is_an_error():
    rec = tiered(minutes_per_tier=1)
    rec.annotations = [(0.0, rec.duration_s)]
    with pytest.raises(CurationError, match="short by"):
        delta_curate([rec], minutes_per_bin=0.5)
    with pytest.raises(CurationError):
        delta_curate([])


def test_seeded_sampling():
    rec = tiered(minutes_per_tier=4)
    a = delta_curate([rec], minutes_per_bin=1, seed=3)
    b = delta_curate([rec], minutes_per_bin=1, seed=3)
    c = delta_curate([rec], minutes_per_bin=1, seed=4)
    assert a.segments == b.segments
    assert a.segments != c.segments


def test_randomized_layouts_never_touch_seizures():
    base = tiered(minutes_per_tier=3, channels=1)
    for trial in range(100):
        rng = np.random.default_rng(trial)
        cuts = np.sort(rng.uniform(0, base.duration_s - 60, size=int(rng.integers(1, 5))))
        annotations, last = [], -1.0
        for c in cuts:
            if c > last:
                end = c + rng.uniform(5, 50)
                annotations.append((float(c), float(end)))
                last = end + 1.0
        rec = Recording("s", base.data, FS, annotations=annotations, path="r")
        cur = delta_curate([rec], minutes_per_bin=1.0, seed=trial)
        for s in cur.segments:
            for a, b in annotations:
                assert s.end_s <= a or s.start_s >= b
        assert len(cur.ictal_events) == len(annotations)
        assert len({(s.source, s.start_s) for s in cur.segments}) == len(cur.segments)


def test_ictal_context_is_clipped():
    rec = tiered(minutes_per_tier=4, channels=1)
    rec.annotations = [(10.0, 30.0)]
    ev = delta_curate([rec], minutes_per_bin=1.0, ictal_context_s=60).ictal_events[0]
    assert (ev.start_s, ev.end_s) == (0.0, 90.0)


def test_delta_power_matches_parseval():
    # a 2 Hz tone of amplitude A carries A^2 / 2 of power, all inside the delta band
    t = np.arange(64 * 10) / FS
    x = np.stack([2.0 * np.sin(2 * np.pi * 2.0 * t)])
    power = window_delta_power(x, FS, 64)
    np.testing.assert_allclose(power, 2.0, rtol=0.02)
    quiet = window_delta_power(np.stack([np.sin(2 * np.pi * 7.0 * t)]), FS, 64)
    assert np.all(quiet < 1e-3)


def test_json_round_trip(tmp_path):
    cur = delta_curate([tiered(minutes_per_tier=2)], minutes_per_bin=1.0)
    cur.save(tmp_path / "c.json")
    back = CuratedDataset.from_json(json.loads((tmp_path / "c.json").read_text()))
    assert back.segments == cur.segments and back.bin_edges == cur.bin_edges
