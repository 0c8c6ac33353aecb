import struct

import numpy as np
import pytest
import torch

from chanfuse import nn as cfnn
from chanfuse.errors import DimensionMismatchError, FormatError
from chanfuse.model import CAModel
from chanfuse.pipeline.checkpoint import (
    MAGIC,
    capture,
    from_bytes,
    load_checkpoint,
    restore,
    save_checkpoint,
    to_bytes,
)


@pytest.fixture
def trained(tiny_cfg):
    model = CAModel(tiny_cfg.model_config())
    model.add_subject("a", 3)
    model.add_subject("b", 5)
    opt = cfnn.Adam(model.named_parameters(), 1e-3)
    x = torch.randn(3, 16, tiny_cfg.patch_length, generator=torch.Generator().manual_seed(0))
    loss = model(x, "a", [13, 14, 15]).sum()
    cfnn.backward(loss)
    opt.step()
    return model, opt


def test_save_load_save_is_bitwise(tmp_path, trained):
    model, opt = trained
    ckpt = capture(model, opt, log=[{"epoch": 1, "loss": 0.5}], meta={"stage": "pretrain"})
    path = save_checkpoint(ckpt, tmp_path / "m.ckpt")
    again = save_checkpoint(load_checkpoint(path), tmp_path / "n.ckpt")
    assert path.read_bytes() == again.read_bytes()


def test_restore_reproduces_outputs(trained):
    model, opt = trained
    back = restore(from_bytes(to_bytes(capture(model, opt))))
    x = torch.randn(5, 20, model.config.encoder.patch_length, generator=torch.Generator().manual_seed(1))
    assert torch.equal(model(x, "b", [13, 19]), back(x, "b", [13, 19]))
    assert back.subjects == ["a", "b"]
    assert back.config == model.config


def test_optimizer_state_restores(trained):
    model, opt = trained
    ckpt = from_bytes(to_bytes(capture(model, opt)))
    fresh = cfnn.Adam(model.named_parameters(), 1e-3)
    fresh.load_state_dict({k: torch.from_numpy(v) for k, v in ckpt.optimizer.items()})
    for k, v in opt.state_dict().items():
        assert torch.equal(torch.as_tensor(v), fresh.state_dict()[k])


def test_header_fields(trained):
    model, _ = trained
    ckpt = from_bytes(to_bytes(capture(model, meta={"x": 1})))
    assert ckpt.dim == model.config.dim and ckpt.basis_seed == 0
    assert ckpt.key_maps == {"a": 3, "b": 5}
    assert ckpt.meta == {"x": 1} and ckpt.optimizer == {}


def test_dimension_mismatch(trained):
    model, _ = trained
    ckpt = capture(model)
    with pytest.raises(DimensionMismatchError):
        restore(ckpt, dim=model.config.dim * 2)


def test_corruption_is_detected(trained):
    raw = to_bytes(capture(trained[0]))
    with pytest.raises(FormatError, match="magic"):
        from_bytes(b"NOTACKPT" + raw[8:])
    with pytest.raises(FormatError, match="version"):
        from_bytes(MAGIC + struct.pack("<I", 99) + raw[12:])
    with pytest.raises(FormatError):
        from_bytes(raw[:-4])
    with pytest.raises(FormatError):
        from_bytes(raw + b"\0")
    with pytest.raises(FormatError):
        from_bytes(raw[:10])
    head_len = struct.unpack_from("<Q", raw, 12)[0]
    with pytest.raises(FormatError):
        from_bytes(raw[: 20 + head_len // 2])
    bad_header = raw[:20] + b"\xff" + raw[21:]
    with pytest.raises(FormatError):
        from_bytes(bad_header)


def test_missing_file(tmp_path):
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "none.ckpt")


def test_float32_tensors_stay_float32(trained):
    ckpt = from_bytes(to_bytes(capture(trained[0])))
    assert all(v.dtype == np.float32 for v in ckpt.tensors.values())
