"""Named random streams derived from a single root seed.

Each component asks for its own stream by name, so adding a consumer never
shifts the draws seen by another one.
"""
from __future__ import annotations

import hashlib

import numpy as np
import torch


def _name_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def seed_sequence(root_seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(root_seed) & 0xFFFFFFFFFFFFFFFF, _name_key(name)])


def rng(root_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(root_seed, name))


def int_seed(root_seed: int, name: str) -> int:
    return int(seed_sequence(root_seed, name).generate_state(1, dtype=np.uint64)[0] >> 1)


def torch_generator(root_seed: int, name: str) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(int_seed(root_seed, name))
    return gen
