"""Counter-based splittable random streams.

Every uniform variate produced here is a pure function of
``(root seed, child path, replicate index, retry count)``.  Streams are
immutable values: splitting never touches shared state, so any assignment
of replicates to worker threads reproduces the same numbers byte for byte.

Replicate streams are Philox counter-based generators whose 128-bit keys
are ``base_key + replicate``; Philox guarantees independent streams for
distinct keys, which makes the per-replicate substreams cheap to derive.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError

_KEY_SPACE = 1 << 128
_U64 = (1 << 64) - 1


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _U64
    if isinstance(tag, str):
        return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")
    raise TypeError(f"stream tags must be str or int, got {type(tag).__name__}")


@dataclass(frozen=True)
class RandomStream:
    """Immutable handle on a family of reproducible substreams."""

    seed: int
    path: tuple[int, ...] = ()

    @classmethod
    def from_seed(cls, seed: int) -> "RandomStream":
        seed = int(seed)
        if not 0 <= seed < 1 << 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        return cls(seed)

    def child(self, *tags) -> "RandomStream":
        """Split off an independent stream addressed by ``tags``."""
        return RandomStream(self.seed, self.path + tuple(_tag_to_int(t) for t in tags))

    @cached_property
    def base_key(self) -> int:
        state = np.random.SeedSequence((self.seed, *self.path)).generate_state(2, np.uint64)
        return int(state[0]) | (int(state[1]) << 64)

    def generator(self, replicate: int = 0) -> np.random.Generator:
        """Generator for one replicate; key = base_key + replicate."""
        if replicate < 0:
            raise DomainError("replicate index must be nonnegative")
        key = (self.base_key + replicate) % _KEY_SPACE
        return np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, replicate: int, n: int) -> np.ndarray:
        """``n`` uniforms on [0, 1) for the given replicate."""
        return self.generator(replicate).random(n)
