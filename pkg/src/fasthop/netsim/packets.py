"""Struct-of-arrays packet batches moved through the simulator.

Addresses are ids into the simulation's address book; ``at`` is the node
index currently holding the packet. ``sess`` is ground truth for
measurement only (the session a packet belongs to or targets) and is
never consulted by protocol logic. ``match`` is the session a switcher
matched, carried on the response so the same switcher can rewrite it.
"""

import numpy as np

PACKET_DTYPE = np.dtype([
    ("src", np.int32),
    ("dst", np.int32),
    ("tsval", np.uint32),
    ("has_ts", np.bool_),
    ("size", np.int32),
    ("cls", np.int8),
    ("dir", np.int8),
    ("sess", np.int32),
    ("match", np.int32),
    ("via", np.int32),
    ("at", np.int32),
    ("born", np.int64),
])

LEGIT, ATTACK = 0, 1
REQUEST, RESPONSE = 0, 1
CLASSES = ("legit", "attack")
DIRECTIONS = ("request", "response")


def empty(n: int = 0) -> np.ndarray:
    b = np.zeros(n, dtype=PACKET_DTYPE)
    b["sess"] = -1
    b["match"] = -1
    b["via"] = -1
    return b


def concat(batches) -> np.ndarray:
    batches = [b for b in batches if len(b)]
    if not batches:
        return empty()
    if len(batches) == 1:
        return batches[0]
    return np.concatenate(batches)
