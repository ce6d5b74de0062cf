"""Counter-based random streams for order-independent parallel reproducibility.

Every consumer of randomness derives its own stream from
``(master_seed, path_index, salt)`` through two rounds of the splitmix64
avalanche finalizer.  Draw ``k`` of a stream is a pure function of the stream
base and ``k``, so any draw can be produced at any time, in any order, on any
worker, and the results are bit-identical.

The full sampler is pinned here, not just the seed:

  * 64-bit state for draw k:   ``base + GOLDEN64 * (k + 1)  (mod 2^64)``
  * output word:               one avalanche round of that state
  * uniform in (0, 1):         ``((word >> 11) + 0.5) * 2**-53``
  * standard normal:           inverse normal CDF (``scipy.special.ndtri``)
    applied to the uniform

Salts keep independent purposes on disjoint streams: 0 for path simulation
(draw 0 is reserved for the initial-state draw, increments use draws 1..n),
1 for window sampling in verification sweeps, 2+ for increment refinement
levels.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15  # splitmix64 increment
_SALT_MULT = 0xD1342543DE82EF95

SALT_PATH = 0
SALT_WINDOWS = 1
SALT_REFINE = 2  # refinement level L uses salt SALT_REFINE + (L - 1)

_U64 = np.uint64
_C1 = _U64(0xBF58476D1CE4E5B9)
_C2 = _U64(0x94D049BB133111EB)


def _avalanche(z: np.ndarray) -> np.ndarray:
    """One splitmix64 finalizer round on uint64 values (wrapping arithmetic)."""
    z = z ^ (z >> _U64(30))
    z = z * _C1
    z = z ^ (z >> _U64(27))
    z = z * _C2
    return z ^ (z >> _U64(31))


def stream_base(master_seed: int, path_index: int, salt: int = SALT_PATH) -> int:
    """Derive a stream's 64-bit base by two avalanche rounds over the inputs."""
    z = (int(master_seed) + GOLDEN64 * (int(path_index) + 1) + _SALT_MULT * int(salt)) & _MASK64
    with np.errstate(over="ignore"):
        out = _avalanche(_avalanche(np.array(z, dtype=np.uint64)))
    return int(out)


def raw_words(base: int, start: int, count: int) -> np.ndarray:
    """Output words for draws start .. start+count-1 of a stream."""
    ks = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _avalanche(_U64(base) + _U64(GOLDEN64) * ks)


def uniforms(base: int, start: int, count: int) -> np.ndarray:
    """Uniform draws in the open interval (0, 1)."""
    words = raw_words(base, start, count)
    return ((words >> _U64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def normals(base: int, start: int, count: int) -> np.ndarray:
    """Standard normal draws via the inverse-CDF map of the uniforms."""
    return ndtri(uniforms(base, start, count))
