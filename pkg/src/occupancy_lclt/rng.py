"""Reproducible random streams keyed by (master seed, replication id, purpose tag)."""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def tag_of(*parts):
    """Stable 64-bit tag from arbitrary printable parts (``hash()`` is salted per process)."""
    text = "\x1f".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def _seed_sequence(master_seed, replication_id, purpose_tag):
    words = [int(master_seed) & _MASK64, int(replication_id) & _MASK64, int(purpose_tag) & _MASK64]
    return np.random.SeedSequence(words)


def derive_stream(master_seed, replication_id, purpose_tag):
    """Counter-based generator for one (replication, purpose) pair.

    The three inputs are mixed by ``SeedSequence`` and key a Philox generator,
    so identical triples replay identically and distinct triples are
    statistically independent.
    """
    return np.random.Generator(np.random.Philox(_seed_sequence(master_seed, replication_id, purpose_tag)))


def block_seed(master_seed, block_id, purpose_tag):
    """32-bit seed for a compiled kernel that owns one fixed-size block of work."""
    state = _seed_sequence(master_seed, block_id, purpose_tag).generate_state(1, np.uint32)
    return int(state[0])


def kernel_seed(rng):
    """32-bit kernel seed drawn from a caller-owned generator."""
    return int(rng.integers(0, 2**32 - 1, dtype=np.uint64))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
