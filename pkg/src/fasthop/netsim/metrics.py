"""Run counters and their plain-dict form."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

REASONS = (
    "HashMismatch",
    "MissingTimestamp",
    "UnknownDestination",
    "NoSession",
    "SourceMismatch",
    "IngressFiltered",
    "NoRoute",
)
REASON_CODE = {r: i for i, r in enumerate(REASONS)}


@dataclass
class RunMetrics:
    """Counters emitted by a run.

    Request accounting is per traffic class: every injected request is
    delivered to the server (``forwarded_*``), dropped by policy
    (``dropped_by_reason``), dropped by a full link (``congestion_drops``)
    or still travelling at the horizon (``in_flight``). ``responses``
    holds the same breakdown for the server's answers, keyed by the class
    of the request that triggered them.

    ``dst_histogram`` counts legitimate requests per pool position;
    ``hop_draws`` counts each distinct client timestamp once, which is
    the sample to test for uniformity when a session sends several
    packets per millisecond.
    """

    horizon: int
    injected: dict[str, int]
    forwarded_legit: int
    forwarded_attack: int
    dropped_by_reason: dict[str, dict[str, int]]
    congestion_drops: dict[str, int]
    in_flight: dict[str, int]
    per_switcher_ingress: dict[str, int]
    switcher_forwarded: dict[str, int]
    server_ingress: int
    responses: dict[str, dict]
    dst_histogram: dict[str, list[int]]
    hop_draws: dict[str, list[int]]
    hop_change_rate: dict[str, Optional[float]]
    session_collisions: int
    sessions: list[dict] = field(default_factory=list)

    @property
    def forwarded(self) -> dict[str, int]:
        return {"legit": self.forwarded_legit, "attack": self.forwarded_attack}

    def conservation(self) -> dict[str, bool]:
        out = {}
        for cls in ("legit", "attack"):
            req = (self.forwarded[cls] + sum(self.dropped_by_reason[cls].values())
                   + self.congestion_drops[cls] + self.in_flight[cls])
            out[f"request.{cls}"] = req == self.injected[cls]
            r = self.responses[cls]
            resp = r["delivered"] + sum(r["dropped"].values()) + r["congestion"] + r["in_flight"]
            out[f"response.{cls}"] = resp == r["injected"]
        return out

    def resolved(self, cls: str) -> int:
        return self.injected[cls] - self.in_flight[cls]

    def attack_pass_rate(self) -> Optional[float]:
        """Share of resolved attack requests that reached the server."""
        n = self.resolved("attack")
        return self.forwarded_attack / n if n else None

    def legit_drops(self) -> int:
        return sum(self.dropped_by_reason["legit"].values()) + self.congestion_drops["legit"]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunMetrics":
        return cls(**data)
