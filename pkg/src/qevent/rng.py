"""Counter-based random streams keyed by ``(seed, shot, counter)``.

Each Monte-Carlo shot owns an independent stream derived from the run seed and
its shot index, and each draw within a shot is addressed by an explicit
counter.  Uniforms are produced by hashing the key with the SplitMix64
finaliser, so any shot can be regenerated in isolation and results do not
depend on how shots are split across workers or vectorised batches.

Counters are laid out as ``round * LANES + lane``; see the ``LANE_*``
constants for the lanes used by the samplers.
"""

from __future__ import annotations

import numba as nb
import numpy as np

__all__ = [
    "LANES",
    "LANE_PICK",
    "LANE_BORN",
    "LANE_COPY",
    "splitmix64",
    "uniforms",
    "uniform_scalar",
    "derive_seed",
]

LANES = 4
LANE_PICK = 0
LANE_BORN = 1
LANE_COPY = 2

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0
_MASK64 = (1 << 64) - 1


def splitmix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 output function applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _seed64(seed: int) -> np.uint64:
    return np.uint64(int(seed) & _MASK64)


def uniforms(seed: int, shots, counter) -> np.ndarray:
    """Uniform doubles in ``[0, 1)`` for the given shot indices and counter(s).

    ``shots`` and ``counter`` broadcast against each other.
    """
    shots = np.asarray(shots, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = splitmix64(_seed64(seed) + _GOLDEN * (shots + _ONE))
        x = splitmix64(key + _GOLDEN * (counter + _ONE))
    return (x >> _S11).astype(np.float64) * _INV53


@nb.njit(cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def shot_key(seed, shot):
    g = np.uint64(0x9E3779B97F4A7C15)
    return _mix(np.uint64(seed) + g * (np.uint64(shot) + np.uint64(1)))


@nb.njit(cache=True)
def uniform_from_key(key, counter):
    g = np.uint64(0x9E3779B97F4A7C15)
    # explicit casts: numba promotes int64 + uint64 to float64
    x = _mix(np.uint64(key) + g * (np.uint64(counter) + np.uint64(1)))
    return np.float64(x >> np.uint64(11)) * (1.0 / 9007199254740992.0)


def uniform_scalar(seed: int, shot: int, counter: int) -> float:
    return float(uniforms(seed, shot, counter))


def derive_seed(seed: int, *labels: int) -> int:
    """Child seed for a labelled sub-experiment (e.g. instance index)."""
    z = _seed64(seed)
    with np.errstate(over="ignore"):
        for lab in labels:
            z = splitmix64(np.uint64(z) + _GOLDEN * np.uint64(int(lab) & _MASK64))
    return int(z)
