"""Counter-based deterministic random streams.

Every random draw in the planner is a pure function of a 64-bit key built
from (seed, iteration, slot, extension, phase) plus a draw counter. Streams
with identical keys are identical regardless of thread count or scheduling,
which is what makes the parallel passes reproducible. The same mixing
function is implemented three times (scalar Python, vectorized NumPy, and C
inside the compiled kernel) and cross-checked bit-for-bit by the tests.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53

# Phase tags keep the draw streams of the planner passes disjoint.
PHASE_SAMPLE = 1   # control + duration sampling during propagation
PHASE_ACCEPT = 2   # acceptance gate for staged candidates
PHASE_DEMOTE = 3   # expansion-set retention draws
PHASE_PROMOTE = 4  # open-set reactivation draws
PHASE_GENERIC = 5  # free-standing streams (tests, baseline planner)
PHASE_ENVGEN = 6   # environment generation


def mix64(z: int) -> int:
    """SplitMix64 finalizer; full-avalanche 64-bit hash."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, iteration: int, slot: int, extension: int, phase: int) -> int:
    """Derive the stream key for one (iteration, slot, extension, phase) cell."""
    h = mix64(seed & _MASK64)
    h = mix64(h ^ (iteration & _MASK64))
    h = mix64(h ^ (slot & _MASK64))
    h = mix64(h ^ (extension & _MASK64))
    return mix64(h ^ (phase & _MASK64))


def draw_u64(key: int, index: int) -> int:
    """index-th raw 64-bit draw of the stream identified by key."""
    return mix64(key ^ (((index + 1) * _GOLDEN) & _MASK64))


def u64_to_unit(x: int) -> float:
    """Map a raw draw to a double in [0, 1) using the top 53 bits."""
    return (x >> 11) * _INV_2_53


class RngStream:
    """Sequential view over one keyed stream.

    The stream is stateless apart from a draw counter, so any draw can be
    reproduced from (key, index) alone.
    """

    __slots__ = ("key", "index")

    def __init__(self, seed: int, iteration: int = 0, slot: int = 0,
                 extension: int = 0, phase: int = PHASE_GENERIC):
        self.key = stream_key(seed, iteration, slot, extension, phase)
        self.index = 0

    def next_u64(self) -> int:
        x = draw_u64(self.key, self.index)
        self.index += 1
        return x

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return u64_to_unit(self.next_u64())

    def uniform_in(self, lo: float, hi: float) -> float:
        """Uniform double in [lo, hi)."""
        return lo + self.uniform() * (hi - lo)

    def duration(self, t_prop: float) -> float:
        """Uniform duration in (0, t_prop]; never exactly zero."""
        return (1.0 - self.uniform()) * t_prop


# ---------------------------------------------------------------------------
# Vectorized variants (bit-identical to the scalar ones).
# ---------------------------------------------------------------------------

_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _U_GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _U_MIX1
        z = (z ^ (z >> np.uint64(27))) * _U_MIX2
        return z ^ (z >> np.uint64(31))


def stream_keys_np(seed: int, iteration: int, slots: np.ndarray,
                   extensions, phase: int) -> np.ndarray:
    """Vectorized stream_key over slot (and optionally extension) arrays."""
    slots = np.asarray(slots, dtype=np.uint64)
    ext = np.asarray(extensions, dtype=np.uint64)
    h0 = mix64(mix64(seed & _MASK64) ^ (iteration & _MASK64))
    h = mix64_np(np.uint64(h0) ^ slots)
    h = mix64_np(h ^ ext)
    return mix64_np(h ^ np.uint64(phase & _MASK64))


def uniforms_np(keys: np.ndarray, index: int) -> np.ndarray:
    """index-th uniform [0,1) draw for every key in the array."""
    with np.errstate(over="ignore"):
        c = np.uint64(((index + 1) * _GOLDEN) & _MASK64)
        raw = mix64_np(np.asarray(keys, dtype=np.uint64) ^ c)
    return (raw >> np.uint64(11)).astype(np.float64) * _INV_2_53
