"""Counter-based random numbers with named substreams.

Every stream of randomness in this package is addressed by a 64-bit key
(derived from a seed and a substream name) plus a draw counter.  Draw
``k`` of a stream is a pure function of ``(key, k)``, so states are
cheap values: they can be serialized as two integers, forked per
replica, and replayed exactly.  The generator is SplitMix64, which is
more than adequate for the Monte Carlo tolerances used here.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    # SplitMix64 finalizer; uint64 arithmetic wraps mod 2**64.
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


@dataclass(frozen=True)
class RngState:
    """Immutable position in a substream: 64-bit key plus draw counter."""

    key: int
    counter: int = 0


def substream(seed: int | str, name: str) -> RngState:
    """Derive the named substream of ``seed``, starting at draw 0."""
    digest = hashlib.blake2b(f"{seed}/{name}".encode(), digest_size=8).digest()
    return RngState(key=int.from_bytes(digest, "little"), counter=0)


def uniforms(state: RngState, size: int) -> tuple[np.ndarray, RngState]:
    """Draw ``size`` uniforms in the open interval (0, 1)."""
    idx = np.arange(state.counter + 1, state.counter + size + 1, dtype=np.uint64)
    bits = _mix64(np.uint64(state.key) + idx * _GOLDEN)
    # 53 mantissa bits, offset by 2**-54 to keep draws strictly inside (0, 1).
    u = (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54
    return u, RngState(state.key, state.counter + size)


def uniform(state: RngState) -> tuple[float, RngState]:
    u, state = uniforms(state, 1)
    return float(u[0]), state


def normals(state: RngState, size: int) -> tuple[np.ndarray, RngState]:
    """Draw ``size`` standard normals (inverse-CDF of the uniform stream)."""
    u, state = uniforms(state, size)
    return ndtri(u), state


def permutation(state: RngState, n: int) -> tuple[np.ndarray, RngState]:
    """Deterministic random permutation of ``range(n)``."""
    u, state = uniforms(state, n)
    return np.argsort(u, kind="stable"), state
