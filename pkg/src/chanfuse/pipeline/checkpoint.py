"""Versioned binary checkpoint container.

Layout::

    magic (8 bytes) | version u32 | header length u64 | header JSON | blobs

The header holds the configuration snapshot, metadata, training log and an
index ``name -> {offset, shape, dtype}`` into the blob section. Everything is
written in a fixed order, so saving the same checkpoint twice gives the same
bytes.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import FormatError
from ..model import CAModel, ModelConfig, check_dimension

MAGIC = b"CHANFUSE"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_DTYPES = {"float32": "<f4", "float64": "<f8", "int64": "<i8"}


@dataclass
class Checkpoint:
    model_config: dict
    tensors: dict[str, np.ndarray]
    key_maps: dict[str, int]  # subject id -> channel count
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)
    log: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.model_config["encoder"]["output_dim"])

    @property
    def basis_seed(self) -> int:
        return int(self.model_config["basis_seed"])


def _array(t) -> np.ndarray:
    if isinstance(t, torch.Tensor):
        t = t.detach().cpu().numpy()
    arr = np.asarray(t)
    name = arr.dtype.name
    if name not in _DTYPES:
        raise FormatError(f"unsupported tensor dtype {name}")
    return np.ascontiguousarray(arr).copy()


def capture(model: CAModel, optimizer=None, log=None, meta=None) -> Checkpoint:
    state = model.state_dict()
    return Checkpoint(
        model_config=model.config.to_dict(),
        tensors={k: _array(v) for k, v in state.items()},
        key_maps={km.subject_id: km.n_channels for km in model.keys.values()},
        optimizer={k: _array(v) for k, v in (optimizer.state_dict() if optimizer else {}).items()},
        log=list(log or []),
        meta=dict(meta or {}),
    )


def restore(ckpt: Checkpoint, dim: int | None = None) -> CAModel:
    """Rebuild the model; ``dim`` is the representation size the caller expects."""
    model = CAModel(ModelConfig.from_dict(ckpt.model_config))
    if dim is not None:
        check_dimension(model, dim)
    for sid, n_ch in ckpt.key_maps.items():
        model.add_subject(sid, n_ch)
    state = {k: torch.from_numpy(v.copy()) for k, v in ckpt.tensors.items()}
    model.load_state_dict(state)
    return model


def to_bytes(ckpt: Checkpoint) -> bytes:
    index = {}
    blobs = []
    offset = 0
    for group, tensors in (("model", ckpt.tensors), ("optimizer", ckpt.optimizer)):
        for name in sorted(tensors):
            arr = tensors[name]
            raw = arr.astype(_DTYPES[arr.dtype.name], copy=False).tobytes()
            index[f"{group}/{name}"] = {"offset": offset, "shape": list(arr.shape), "dtype": arr.dtype.name}
            blobs.append(raw)
            offset += len(raw)
    header = {
        "model_config": ckpt.model_config,
        "key_maps": ckpt.key_maps,
        "log": ckpt.log,
        "meta": ckpt.meta,
        "index": index,
        "blob_bytes": offset,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(head)) + head + b"".join(blobs)


def from_bytes(raw: bytes) -> Checkpoint:
    if len(raw) < _PREFIX.size:
        raise FormatError("checkpoint truncated before the header")
    magic, version, head_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError("not a checkpoint file (bad magic bytes)")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version} (this build reads {VERSION})")
    body = _PREFIX.size + head_len
    if len(raw) < body:
        raise FormatError("checkpoint truncated inside the header")
    try:
        header = json.loads(raw[_PREFIX.size : body].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from None
    if len(raw) != body + header["blob_bytes"]:
        raise FormatError(f"checkpoint holds {len(raw) - body} blob bytes, header declares {header['blob_bytes']}")
    groups: dict[str, dict[str, np.ndarray]] = {"model": {}, "optimizer": {}}
    for key, info in header["index"].items():
        group, name = key.split("/", 1)
        dtype = np.dtype(_DTYPES[info["dtype"]])
        count = int(np.prod(info["shape"], dtype=np.int64))
        start = body + info["offset"]
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=start).reshape(info["shape"])
        groups[group][name] = arr.astype(dtype.newbyteorder("="), copy=True)
    return Checkpoint(
        model_config=header["model_config"],
        tensors=groups["model"],
        key_maps={k: int(v) for k, v in header["key_maps"].items()},
        optimizer=groups["optimizer"],
        log=header["log"],
        meta=header["meta"],
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(ckpt))
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise FormatError(f"checkpoint {path} not found") from None
    return from_bytes(raw)
