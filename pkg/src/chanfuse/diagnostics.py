"""Finite-difference gradient suite on a toy two-subject model."""
from __future__ import annotations

import numpy as np
import torch

from . import nn as cfnn
from . import seeds, vsa
from .encoder import EncoderConfig, FeatureVector
from .fusion import ChannelKeyMap, fuse, fuse_gradients
from .memory import TcnConfig
from .model import CAModel, ModelConfig

GRAD_TOLERANCE = 1e-4

TOY_MODEL = ModelConfig(
    encoder=EncoderConfig(levels=2, widths=(3, 4), output_dim=32, patch_length=16),
    tcn=TcnConfig(kernel_size=2, dilations=(1, 2), hidden=4),
    memory_length=4,
    init_seed=1,
)
TOY_CHANNELS = {"a": 3, "b": 5}


def model_gradients(h: float = 1e-5, config: ModelConfig = TOY_MODEL, data_seed: int = 11) -> dict[str, float]:
    """Max relative error per parameter of the full model loss (double precision)."""
    model = CAModel(config)
    gen = torch.Generator()
    gen.manual_seed(data_seed)
    inputs = {}
    for sid, n_ch in TOY_CHANNELS.items():
        model.add_subject(sid, n_ch)
        inputs[sid] = torch.randn(n_ch, 6, config.encoder.patch_length, generator=gen, dtype=torch.float64)
    m = config.memory_length
    ends = list(range(m - 1, 6))
    targets = torch.tensor([1.0, 0.0, 1.0], dtype=torch.float64)

    def loss():
        total = 0.0
        for k, sid in enumerate(TOY_CHANNELS):
            t = targets if k % 2 == 0 else 1.0 - targets
            total = total + cfnn.weighted_bce_with_logits(model(inputs[sid], sid, ends), t, (1.0, 2.0))
        return total

    return cfnn.gradient_check(loss, dict(model.named_parameters()), h=h, generator=seeds.torch_generator(0, "gradcheck"))


def fusion_gradients(h: float = 1e-5, dim: int = 32, channels: int = 4, seed: int = 0) -> dict[str, float]:
    """Hand-written fusion backward against central differences of the forward pass."""
    rng = seeds.rng(seed, "gradcheck/fusion")
    basis = vsa.sample_unitary_basis(dim, seed)
    p = rng.standard_normal((channels, dim))
    u = rng.standard_normal(channels)
    g = rng.standard_normal(dim)

    def objective(p_, u_):
        feats = [FeatureVector(v, i, 0) for i, v in enumerate(p_)]
        return float(fuse(feats, ChannelKeyMap("s", torch.tensor(u_)), basis).values @ g)

    feats = [FeatureVector(v, i, 0) for i, v in enumerate(p)]
    g_p, g_u = fuse_gradients(feats, ChannelKeyMap("s", torch.tensor(u)), basis, g)
    num_u = np.empty(channels)
    for i in range(channels):
        e = np.zeros(channels)
        e[i] = h
        num_u[i] = (objective(p, u + e) - objective(p, u - e)) / (2 * h)
    num_p = np.empty((channels, dim))
    for i in range(channels):
        for k in range(dim):
            e = np.zeros((channels, dim))
            e[i, k] = h
            num_p[i, k] = (objective(p + e, u) - objective(p - e, u)) / (2 * h)

    def rel(a, b):
        floor = max(1e-12, 1e-6 * float(np.abs(a).max()))
        return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))

    return {"features": rel(g_p, num_p), "keys": rel(g_u, num_u)}


def gradient_suite(h: float = 1e-5) -> dict[str, float]:
    report = {f"model/{k}": v for k, v in model_gradients(h).items()}
    report.update({f"fusion/{k}": v for k, v in fusion_gradients(h).items()})
    return report
