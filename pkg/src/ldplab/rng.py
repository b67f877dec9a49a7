"""Deterministic stream derivation for reproducible experiments.

Every random draw in the pipeline comes from a stream keyed by
(master_seed, *tags), where tags identify the trial, the purpose
(perturbation, attack crafting, dataset sampling, ...) and optionally a
user index. Same key, same stream; distinct keys, independent streams.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = ["RngPolicy", "tag_to_int"]


def tag_to_int(tag: str | int) -> int:
    """Map a purpose tag to a stable 64-bit integer.

    String tags are hashed with blake2s so the derivation does not depend
    on the interpreter's randomized ``hash()``.
    """
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngPolicy:
    """Counter-based stream factory rooted at a single master seed.

    ``stream(purpose, trial, user)`` and friends always return a fresh
    generator positioned at the start of the keyed stream, so repeated
    calls with the same key replay identical draws.
    """

    master_seed: int

    def stream(self, *tags: str | int) -> np.random.Generator:
        key = (self.master_seed & 0xFFFFFFFFFFFFFFFF,) + tuple(
            tag_to_int(t) for t in tags
        )
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))

    def child(self, *tags: str | int) -> "RngPolicy":
        """Derive a nested policy (e.g. one per trial)."""
        mixed = hashlib.blake2s(digest_size=8)
        mixed.update(self.master_seed.to_bytes(8, "little", signed=False))
        for t in tags:
            mixed.update(tag_to_int(t).to_bytes(8, "little"))
        return RngPolicy(int.from_bytes(mixed.digest(), "little"))
