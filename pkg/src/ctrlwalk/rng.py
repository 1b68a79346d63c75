"""Counter-based random numbers for reproducible, splittable Monte Carlo.

Every uniform is a pure function of (master seed, trial index, step), so
batches can be sharded or replayed in any order with bitwise-identical
results. The mixer is the 64-bit finalizer used by splitmix-style
generators; trial and step counters are spaced by fixed odd constants.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_SALT = np.uint64(0xD1B54A32D192ED03)
_STEP = np.uint64(0xC2B2AE3D27D4EB4F)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = float(2.0**-53)


def mix64(z) -> np.ndarray:
    """Bijective 64-bit finalizer, elementwise over uint64 input."""
    with np.errstate(over="ignore"):
        z = np.asarray(z, dtype=np.uint64)
        z = z ^ (z >> np.uint64(30))
        z = z * _M1
        z = z ^ (z >> np.uint64(27))
        z = z * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def trial_keys(seed: int, trials: int, base: int = 0) -> np.ndarray:
    """Independent per-trial stream keys for trial indices base..base+trials-1."""
    s = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    idx = np.arange(base, base + trials, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64((s ^ _SALT) + idx * _GOLDEN)


def step_uniforms(keys: np.ndarray, step: int) -> np.ndarray:
    """One uniform in [0, 1) per key for the given step counter."""
    with np.errstate(over="ignore"):
        bits = mix64(keys + np.uint64(step + 1) * _STEP)
    return (bits >> np.uint64(11)).astype(np.float64) * _INV53
