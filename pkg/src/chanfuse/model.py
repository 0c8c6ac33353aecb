"""Channel-adaptive classifier: encoder -> holographic fusion -> memory head."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import Tensor, nn

from . import nn as cfnn
from . import seeds, vsa
from .encoder import EncoderConfig, build_encoder
from .errors import ConfigError, DataError, DimensionMismatchError
from .fusion import ChannelKeyMap, holographic_fuse, init_key_map, mean_fuse
from .memory import DEFAULT_MEMORY, MLPHead, TCN, TcnConfig

FUSION_MODES = ("hrr", "mean")
HEADS = ("tcn", "mlp")
BUNDLE_SCALES = ("sum", "channels")


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    tcn: TcnConfig = field(default_factory=TcnConfig)
    memory_length: int = DEFAULT_MEMORY
    basis_seed: int = 0
    fusion: str = "hrr"
    head: str = "tcn"
    mlp_hidden: int = 64
    init_seed: int = 0
    dtype: str = "float64"
    bundle_scale: str = "sum"

    def __post_init__(self):
        if self.fusion not in FUSION_MODES:
            raise ConfigError(f"fusion must be one of {FUSION_MODES}")
        if self.bundle_scale not in BUNDLE_SCALES:
            raise ConfigError(f"bundle_scale must be one of {BUNDLE_SCALES}")
        if self.head not in HEADS:
            raise ConfigError(f"head must be one of {HEADS}")
        if self.memory_length < 1:
            raise ConfigError("memory_length must be >= 1")
        if self.head == "tcn" and self.tcn.receptive_field < self.memory_length:
            raise ConfigError(
                f"TCN receptive field {self.tcn.receptive_field} is shorter than memory {self.memory_length}"
            )

    @property
    def dim(self) -> int:
        return self.encoder.output_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        enc = dict(data.pop("encoder"))
        enc["widths"] = tuple(enc["widths"])
        tcn = dict(data.pop("tcn"))
        tcn["dilations"] = tuple(tcn["dilations"])
        return cls(encoder=EncoderConfig(**enc), tcn=TcnConfig(**tcn), **data)


class CAModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.dtype = cfnn.resolve_dtype(config.dtype)
        gen = seeds.torch_generator(config.init_seed, "model-init")
        self.basis = vsa.sample_unitary_basis(config.dim, config.basis_seed)
        self.register_buffer("phases", torch.tensor(self.basis.phases, dtype=self.dtype), persistent=False)
        self.encoder = build_encoder(config.encoder, gen, self.dtype)
        if config.head == "tcn":
            self.head = TCN(config.dim, config.tcn, gen, self.dtype)
        else:
            self.head = MLPHead(config.dim, config.mlp_hidden, gen, self.dtype)
        self.keys = nn.ModuleDict()

    # subject key maps -------------------------------------------------------

    def add_subject(self, subject_id: str, n_channels: int, reset: bool = False) -> ChannelKeyMap:
        key = _key_name(subject_id)
        if key in self.keys and not reset:
            if self.keys[key].n_channels != n_channels:
                raise DataError(
                    f"subject {subject_id} registered with {self.keys[key].n_channels} channels, got {n_channels}"
                )
            return self.keys[key]
        self.keys[key] = init_key_map(subject_id, n_channels, self.dtype)
        return self.keys[key]

    def key_map(self, subject_id: str) -> ChannelKeyMap:
        try:
            return self.keys[_key_name(subject_id)]
        except KeyError:
            raise DataError(f"no key map for subject {subject_id!r}") from None

    @property
    def subjects(self) -> list[str]:
        return [km.subject_id for km in self.keys.values()]

    # forward ----------------------------------------------------------------

    def fuse_patches(self, patches: Tensor, subject_id: str) -> Tensor:
        """``patches`` (C, P, W) for one subject -> fused vectors (P, d)."""
        n_ch, n_patches, width = patches.shape
        feats = self.encoder(patches.reshape(n_ch * n_patches, width).to(self.dtype))
        feats = feats.reshape(n_ch, n_patches, -1).transpose(0, 1)  # (P, C, d)
        if self.config.fusion == "mean":
            return mean_fuse(feats)
        keys = self.key_map(subject_id)
        fused = holographic_fuse(feats, keys.angles(), self.phases)
        if self.config.bundle_scale == "channels":
            # same input scale for the memory whatever the channel count
            fused = fused / n_ch
        return fused

    def forward(self, patches: Tensor, subject_id: str, ends: Tensor | np.ndarray) -> Tensor:
        """Logits for stacks ending at patch offsets ``ends`` (relative to ``patches``)."""
        fused = self.fuse_patches(patches, subject_id)
        m = self.config.memory_length
        ends = torch.as_tensor(ends, dtype=torch.long)
        if int(ends.min()) < m - 1 or int(ends.max()) >= fused.shape[0]:
            raise DataError("stack ends fall outside the supplied patches")
        idx = ends[:, None] - torch.arange(m - 1, -1, -1)[None, :]
        stacks = fused[idx].transpose(1, 2)  # (B, d, M)
        return self.head(stacks)

    def trainable(self, freeze_all_but_fusion: bool = False) -> dict[str, Tensor]:
        params = dict(self.named_parameters())
        if freeze_all_but_fusion:
            params = {n: p for n, p in params.items() if n.startswith("keys.")}
        return params

    def n_parameters(self, include_keys: bool = False) -> int:
        return sum(p.numel() for n, p in self.named_parameters() if include_keys or not n.startswith("keys."))


def _key_name(subject_id: str) -> str:
    # ModuleDict keys may not contain dots
    return "s_" + str(subject_id).replace(".", "_")


def check_dimension(model: CAModel, dim: int) -> None:
    if model.config.dim != dim:
        raise DimensionMismatchError(f"checkpoint dimension {dim} != model dimension {model.config.dim}")
