"""Deterministic counter-based random number generator.

The generator hashes (seed, counter) with the splitmix64 finalizer, so the
i-th output depends only on the seed and i.  That makes streams reproducible
across platforms and immune to numpy version changes, and lets independent
consumers derive non-overlapping child streams by re-seeding.

Normal variates use Box-Muller on pairs of uniforms (no ziggurat, no
rejection) so the draw count per call is fixed and platform independent.
"""

from __future__ import annotations

import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# uniforms are built from the top 53 bits of the mixed state
_U53 = 1.0 / float(1 << 53)


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, vectorized over uint64 arrays (wraparound intended)."""
    with np.errstate(over="ignore"):
        z = x
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


class Rng:
    """Seeded counter-based generator.

    Identical seed + identical call sequence gives identical outputs on every
    platform.  The counter advances by the number of 64-bit words consumed,
    so bulk draws and loops of scalar draws agree.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        with np.errstate(over="ignore"):
            self._base = _mix64(np.uint64(self.seed) + _GOLDEN)
        self.counter = 0

    def _words(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix64(self._base + (idx + np.uint64(1)) * _GOLDEN)

    def next_u64(self) -> int:
        return int(self._words(1)[0])

    def uniform(self, shape=None) -> np.ndarray | float:
        """Uniform floats in [0, 1) with 53-bit resolution."""
        if shape is None:
            return float(self._words(1)[0] >> np.uint64(11)) * _U53
        n = int(np.prod(shape))
        w = self._words(n) >> np.uint64(11)
        return (w.astype(np.float64) * _U53).reshape(shape)

    def integers(self, low: int, high: int, shape=None):
        """Integers in [low, high) by scaled 53-bit uniforms (span << 2^53)."""
        if high <= low:
            raise ValueError("integers() needs high > low")
        u = self.uniform(shape)
        return (np.floor(u * (high - low)) + low).astype(np.int64) if shape is not None else int(u * (high - low)) + low

    def normal(self, shape=None) -> np.ndarray | float:
        """Standard normals via Box-Muller; consumes 2 words per variate pair."""
        scalar = shape is None
        n = 1 if scalar else int(np.prod(shape))
        m = (n + 1) // 2
        u1 = np.maximum(self._words(m).astype(np.float64) * (1.0 / 2.0**64), 1e-300)
        u2 = self._words(m).astype(np.float64) * (1.0 / 2.0**64)
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:n]
        if scalar:
            return float(out[0])
        return out.reshape(shape)

    def split(self, key: int) -> "Rng":
        """Derive an independent child stream; children with distinct keys do not overlap."""
        with np.errstate(over="ignore"):
            mixed_key = _mix64(np.uint64(key & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
        return Rng(int(_mix64(np.uint64(self.seed) ^ mixed_key)))

    def state(self) -> dict:
        return {"seed": self.seed, "counter": self.counter}

    @staticmethod
    def from_state(state: dict) -> "Rng":
        r = Rng(state["seed"])
        r.counter = int(state["counter"])
        return r
