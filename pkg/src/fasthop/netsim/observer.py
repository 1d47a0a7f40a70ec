"""What a passive tap on the data path can learn.

The peer of a packet is its server-side endpoint: the destination of a
request, the source of a response. Near the client that is a virtual
address; near the server it is the real one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from . import packets as P


class ObserverError(LookupError):
    pass


@dataclass
class SessionStats:
    histogram: list[int]
    chi2: Optional[float]
    p_value: Optional[float]


@dataclass
class ObserverReport:
    vantage: str
    packets: int
    distinct_peers: int
    peer_counts: dict[str, int]
    sessions: dict[str, SessionStats]
    services: dict[str, list[int]]

    def to_dict(self) -> dict:
        return {
            "vantage": self.vantage, "packets": self.packets,
            "distinct_peers": self.distinct_peers, "peer_counts": self.peer_counts,
            "sessions": {k: vars(v) for k, v in self.sessions.items()},
            "services": self.services,
        }


def uniformity(counts) -> tuple[Optional[float], Optional[float]]:
    """Chi-square goodness of fit against the uniform distribution."""
    counts = np.asarray(counts)
    if counts.sum() == 0 or len(counts) < 2:
        return None, None
    res = stats.chisquare(counts)
    return float(res.statistic), float(res.pvalue)


def homogeneity(a, b) -> float:
    """p-value that two histograms over the same bins share a distribution.

    Bins empty in both are dropped; they carry no information and make
    the contingency test undefined.
    """
    table = np.vstack([np.asarray(a), np.asarray(b)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table, correction=False).pvalue)


def observer_report(sim, vantage: str) -> ObserverReport:
    taps = [t for t in sim.taps if t.vantage == vantage]
    if not taps:
        raise ObserverError(f"no observer instrumented at vantage {vantage!r}")
    chunks = [c for t in taps for c in t.chunks]
    if chunks:
        src, dst, dirs, sess, _ = (np.concatenate(x) for x in zip(*chunks))
    else:
        src = dst = sess = np.zeros(0, np.int32)
        dirs = np.zeros(0, np.int8)
    peer = np.where(dirs == P.REQUEST, dst, src)
    ids, counts = np.unique(peer, return_counts=True)
    addrs = sim.book.addresses
    peer_counts = {str(addrs[i]): int(c)
                   for i, c in sorted(zip(ids, counts), key=lambda x: addrs[x[0]])}

    req = dirs == P.REQUEST
    sessions: dict[str, SessionStats] = {}
    services: dict[str, np.ndarray] = {}
    for i, label in enumerate(sim.labels):
        if i not in sim.grants:
            continue
        n = int(sim.npool[i])
        mine = peer[req & (sess == i)]
        p = sim.pos[i, mine]
        hist = np.bincount(p[p >= 0], minlength=n)
        chi2, pv = uniformity(hist)
        sessions[label] = SessionStats(hist.tolist(), chi2, pv)
        svc = sim.scenario.sessions[i].service
        # sessions of one service share bins only when they share a pool
        if svc not in services:
            services[svc] = hist.copy()
        elif len(services[svc]) == n and np.array_equal(sim.pool_ids[i, :n],
                                                         sim.pool_ids[_first(sim, svc), :n]):
            services[svc] += hist
    return ObserverReport(vantage, len(peer), len(ids), peer_counts, sessions,
                          {k: v.tolist() for k, v in services.items()})


def _first(sim, service: str) -> int:
    return next(i for i in sorted(sim.grants) if sim.scenario.sessions[i].service == service)
