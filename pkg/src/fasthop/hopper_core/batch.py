"""Array forms of the hop function for bulk traffic.

Semantics are identical to :func:`fasthop.hopper_core.hop.hop_index`;
the simulator relies on these for per-tick batches.
"""

from __future__ import annotations

import numpy as np

from .siphash import siphash24_words
from .types import ConfigurationError, SessionUid


def hop_indices(uid: SessionUid, tsvals: np.ndarray, pool_size: int) -> np.ndarray:
    """Vectorized ``hop_index`` over an array of tsvals (int64 result)."""
    if pool_size < 1:
        raise ConfigurationError(f"pool_size must be >= 1, got {pool_size}")
    ts = np.asarray(tsvals)
    if ts.size and (ts.min() < 0 or ts.max() > 2**32 - 1):
        raise ConfigurationError("tsval out of 32-bit range")
    h = siphash24_words(uid.value, ts.astype(np.uint64))
    if pool_size >= 2**63:
        raise ConfigurationError("batch hop_indices supports pool_size < 2**63")
    return (h % np.uint64(pool_size)).astype(np.int64)


def matches(uid: SessionUid, pool_size: int, positions: np.ndarray,
            tsvals: np.ndarray) -> np.ndarray:
    """Boolean mask: does pool position ``positions[i]`` equal the hop index
    for ``tsvals[i]``? Negative positions (not in pool) never match."""
    pos = np.asarray(positions)
    return (pos >= 0) & (hop_indices(uid, tsvals, pool_size) == pos)
