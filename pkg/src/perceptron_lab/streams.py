"""Reproducible random streams.

Every experiment derives child streams by integer paths (replicate index, row
index, ...) from a single master seed. Derivation is counter-based via
``numpy.random.SeedSequence`` spawn keys, so a stream's output depends only on
``(seed, path)`` and never on execution order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SeededStream"]


@dataclass(frozen=True)
class SeededStream:
    """A value-like handle for one deterministic random stream."""

    seed: int
    path: tuple[int, ...] = ()

    def child(self, *indices: int) -> "SeededStream":
        """Derive the sub-stream addressed by `indices` below this one."""
        return SeededStream(self.seed, self.path + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=self.path))
