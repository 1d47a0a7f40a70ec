"""Programmatic builder for the usual defended-service topology.

::

    clients -- access -- core -- sw0..swK-1 -- server
                          |
                        bots

The manager and authorization server sit off the data path (their
channels are ideal). Optional observers tap the access uplink
(near_client) or every switcher-to-server link (near_server).
"""

from __future__ import annotations

from typing import Optional, Sequence

from ..hopper_core import IpAddress
from ..scenario import Scenario, from_dict

CLIENT_BASE = IpAddress.parse("10.1.0.1")
BOT_BASE = IpAddress.parse("10.9.0.1")
INVENTORY_BASE = IpAddress.parse("172.16.0.0")
REAL_BASE = IpAddress.parse("192.0.2.10")
INITIAL_BASE = IpAddress.parse("100.64.0.1")


def standard_scenario(
    *,
    clients: int = 1,
    switchers: int = 4,
    inventory: int = 64,
    pool_size: int = 256,
    services: int = 1,
    sessions: Optional[Sequence[dict]] = None,
    rate: float = 1.0,
    count: Optional[int] = None,
    duration: Optional[int] = None,
    bots: int = 0,
    attackers: Sequence[dict] = (),
    horizon: int = 1000,
    seed: int = 0,
    capacity: int = 1_000_000,
    server_capacity: Optional[int] = None,
    observers: Sequence[str] = (),
    undefended: bool = False,
    name: str = "standard",
    build: bool = True,
    **extra,
):
    """Return a validated :class:`Scenario` (or the raw dict with
    ``build=False``). By default one session per client, services
    assigned round-robin."""
    nodes: list[dict] = [
        {"id": "auth", "kind": "auth_server", "address": "198.51.100.53"},
        {"id": "mgr", "kind": "manager", "address": "198.51.100.80"},
        {"id": "access", "kind": "router"},
        {"id": "core", "kind": "router"},
        {"id": "srv", "kind": "server"},
    ]
    links: list[dict] = [{"a": "access", "b": "core", "capacity": capacity}]
    for i in range(clients):
        nodes.append({"id": f"c{i}", "kind": "client", "address": str(CLIENT_BASE.offset(i))})
        links.append({"a": f"c{i}", "b": "access", "capacity": capacity})
    for i in range(bots):
        nodes.append({"id": f"bot{i}", "kind": "bot", "address": str(BOT_BASE.offset(i))})
        links.append({"a": f"bot{i}", "b": "core", "capacity": capacity})
    for k in range(switchers):
        nodes.append({"id": f"sw{k}", "kind": "switcher",
                      "inventory_start": str(INVENTORY_BASE.offset(k * 65536)),
                      "inventory_size": inventory})
        links.append({"a": "core", "b": f"sw{k}", "capacity": capacity})
        links.append({"a": f"sw{k}", "b": "srv", "capacity": server_capacity or capacity})
    if "near_client" in observers:
        nodes.append({"id": "obs-client", "kind": "observer", "vantage": "near_client",
                      "tap": [["access", "core"]]})
    if "near_server" in observers:
        nodes.append({"id": "obs-server", "kind": "observer", "vantage": "near_server",
                      "tap": [[f"sw{k}", "srv"] for k in range(switchers)]})

    svc = [{"name": f"svc-{chr(97 + j)}", "server": "srv",
            "real_ip": str(REAL_BASE.offset(j)), "initial_ip": str(INITIAL_BASE.offset(j))}
           for j in range(services)]
    if sessions is None:
        sessions = []
        for i in range(clients):
            s = {"client": f"c{i}", "service": svc[i % services]["name"],
                 "credentials": f"user{i}:pw", "rate": rate}
            if count is not None:
                s["count"] = count
            if duration is not None:
                s["duration"] = duration
            sessions.append(s)
    creds = [{"secret": f"user{i}:pw"} for i in range(clients)]

    data = {
        "name": name, "seed": seed, "horizon": horizon, "pool_size": pool_size,
        "undefended": undefended, "nodes": nodes, "links": links, "services": svc,
        "credentials": creds, "sessions": list(sessions), "attackers": list(attackers),
        **extra,
    }
    return from_dict(data) if build else data


def flood_scenario(kind: str = "random_pool_flood", *, pool_size: int = 256,
                   attack_rate: float = 1000.0, attack_duration: int = 1000,
                   legit_rate: float = 1.0, start: int = 20, **kw) -> Scenario:
    """One legitimate client plus one bot attacking its session."""
    per_switcher = max(64, -(-pool_size // kw.get("switchers", 4)))
    attacker = {"node": "bot0", "kind": kind, "rate": attack_rate, "target": 0,
                "start": start, "duration": attack_duration}
    attacker.update(kw.pop("attacker", {}))
    kw.setdefault("horizon", start + attack_duration + 20)
    kw.setdefault("duration", start + attack_duration - 10)
    return standard_scenario(inventory=kw.pop("inventory", per_switcher), pool_size=pool_size,
                             bots=1, attackers=[attacker], rate=legit_rate, **kw)
