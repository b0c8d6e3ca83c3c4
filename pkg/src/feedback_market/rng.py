"""Splittable counter-based random stream.

Every uniform consumed anywhere in the simulator is a pure function of
``(seed, replica, step, lane, draw)``: the key is hashed with splitmix64-style
finalizers and the draw index advances a Weyl sequence under the same
finalizer.  This makes every replica/tick/type stream independent and bitwise
reproducible regardless of execution order or parallelism degree.

The scalar functions here are the reference implementation; the numpy
versions apply the identical uint64 operations elementwise and therefore
produce identical bits.  The compiled kernel mirrors the same arithmetic.
"""

from __future__ import annotations

import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_C_SEED = 0xA0761D6478BD642F
_C_STEP = 0xC2B2AE3D27D4EB4F
_C_LANE = 0x165667B19E3779F9

_INV53 = 1.0 / 9007199254740992.0  # 2**-53

# Reserved step index for draws made before tick 0 (initial-law sampling).
INIT_STEP = MASK


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit word."""
    z &= MASK
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def stream_key(seed: int, replica: int, step: int, lane: int) -> int:
    """Derive the 64-bit stream key for one (replica, step, lane) cell."""
    h = mix64((seed & MASK) ^ _C_SEED)
    h = mix64((h + (replica & MASK) * GOLDEN) & MASK)
    h = mix64((h + (step & MASK) * _C_STEP) & MASK)
    h = mix64((h + (lane & MASK) * _C_LANE) & MASK)
    return h


def uniform(key: int, draw: int) -> float:
    """draw-th uniform in [0, 1) of the stream identified by key."""
    x = mix64((key + ((draw + 1) & MASK) * GOLDEN) & MASK)
    return (x >> 11) * _INV53


def mix64_vec(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_key_vec(seed: int, replicas: np.ndarray, step: int, lane: int) -> np.ndarray:
    """Vectorized stream_key over an array of replica indices."""
    replicas = replicas.astype(np.uint64, copy=False)
    h0 = np.uint64(mix64((seed & MASK) ^ _C_SEED))
    h = mix64_vec(h0 + replicas * np.uint64(GOLDEN))
    h = mix64_vec(h + np.uint64((step & MASK) * _C_STEP & MASK))
    h = mix64_vec(h + np.uint64((lane & MASK) * _C_LANE & MASK))
    return h


def uniform_vec(keys: np.ndarray, draw: int) -> np.ndarray:
    x = mix64_vec(keys + np.uint64(((draw + 1) & MASK) * GOLDEN & MASK))
    return (x >> np.uint64(11)).astype(np.float64) * _INV53
