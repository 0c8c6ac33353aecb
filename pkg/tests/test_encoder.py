import numpy as np
import pytest
import torch

from chanfuse import nn as cfnn
from chanfuse.encoder import ConvEncoder, EncoderConfig, Patch, build_encoder, encode, encode_all
from chanfuse.errors import ConfigError, DataError, ShapeError


def make(config=EncoderConfig(), seed=0):
    g = torch.Generator()
    g.manual_seed(seed)
    return build_encoder(config, g)


SMALL = EncoderConfig(levels=3, widths=(4, 4, 8), output_dim=16, patch_length=64)


def test_default_output_length():
    enc = make()
    out = encode(Patch(0, 0, np.random.default_rng(0).standard_normal(3840)), enc)
    assert out.values.shape == (128,)


def test_channel_index_does_not_matter():
    enc = make(SMALL)
    x = np.random.default_rng(1).standard_normal(64)
    a = encode(Patch(0, 5, x), enc)
    b = encode(Patch(7, 5, x), enc)
    assert a.values.tobytes() == b.values.tobytes()
    assert (a.channel_index, b.channel_index) == (0, 7)


def test_zero_patch_without_bias_gives_zero():
    enc = make(EncoderConfig(levels=2, widths=(4, 8), output_dim=8, patch_length=32, bias=False))
    assert np.all(encode(Patch(0, 0, np.zeros(32)), enc).values == 0.0)


def test_wrong_length_is_a_shape_error():
    enc = make(SMALL)
    with pytest.raises(ShapeError):
        encode(Patch(0, 0, np.zeros(63)), enc)
    with pytest.raises(ShapeError):
        enc(torch.zeros(2, 65, dtype=torch.float64))


def test_encode_all_matches_per_call():
    enc = make(SMALL)
    rng = np.random.default_rng(2)
    patches = [Patch(i, 3, rng.standard_normal(64)) for i in range(12)]
    batch = encode_all(patches, enc)
    for p, f in zip(patches, batch):
        assert f.values.tobytes() == encode(p, enc).values.tobytes()


def test_encode_all_single_channel_and_permutation():
    enc = make(SMALL)
    rng = np.random.default_rng(3)
    patches = [Patch(i, 0, rng.standard_normal(64)) for i in range(4)]
    assert len(encode_all(patches[:1], enc)) == 1
    perm = [2, 0, 3, 1]
    out = encode_all([patches[i] for i in perm], enc)
    ref = encode_all(patches, enc)
    for k, i in enumerate(perm):
        np.testing.assert_array_equal(out[k].values, ref[i].values)


def test_encode_all_rejects_mixed_windows():
    enc = make(SMALL)
    with pytest.raises(DataError):
        encode_all([Patch(0, 0, np.zeros(64)), Patch(1, 1, np.zeros(64))], enc)


def test_batched_forward_equals_per_patch():
    enc = make(SMALL)
    x = torch.randn(5, 64, dtype=torch.float64)
    batched = enc(x)
    for i in range(5):
        torch.testing.assert_close(batched[i : i + 1], enc(x[i : i + 1]), rtol=0, atol=1e-12)


def test_output_dim_independent_of_window():
    for length in (32, 480, 3840):
        enc = make(EncoderConfig(output_dim=24, patch_length=length))
        assert enc(torch.zeros(1, length, dtype=torch.float64)).shape == (1, 24)


def test_config_validation():
    with pytest.raises(ConfigError):
        EncoderConfig(levels=0, widths=())
    with pytest.raises(ConfigError):
        EncoderConfig(output_dim=1)
    with pytest.raises(ConfigError):
        EncoderConfig(levels=2, widths=(4,))
    with pytest.raises(ConfigError):
        build_encoder(EncoderConfig(kind="eegnet"), torch.Generator())


def test_encoder_gradcheck():
    enc = make(EncoderConfig(levels=2, widths=(3, 4), output_dim=5, patch_length=24), seed=4)
    x = torch.randn(3, 24, dtype=torch.float64)
    report = cfnn.gradient_check(lambda: torch.tanh(enc(x)).sum(), dict(enc.named_parameters()))
    assert max(report.values()) < 1e-4
