"""IP hopper manager: issues session grants and provisions edge switchers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from ..hopper_core import IpAddress, IpPool, SessionUid, SwitcherSession, SwitcherState
from ..hopper_core.types import ConfigurationError
from .messages import (
    ExpireMessage,
    Handoff,
    ProvisionAck,
    ProvisionMessage,
    ServiceRecord,
    SessionGrant,
)

DEFAULT_LIFETIME_MS = 3_600_000


class ManagerError(RuntimeError):
    pass


@dataclass
class PendingSession:
    grant: SessionGrant
    service: ServiceRecord
    client_ip: IpAddress
    provisions: list[tuple[str, ProvisionMessage]]
    waiting: set[str] = field(default_factory=set)


@dataclass
class ActiveSession:
    grant: SessionGrant
    service: ServiceRecord
    client_ip: IpAddress
    switchers: tuple[str, ...]


class HopperManager:
    """Single logical actor; callers feed it one control message at a time.

    Session establishment is two-phase so the grant is only released once
    every owning switcher has acknowledged its provision record.
    """

    def __init__(self, services: Iterable[ServiceRecord], seed: Optional[int] = None,
                 lifetime: int = DEFAULT_LIFETIME_MS, require_handoff: bool = True):
        if lifetime < 1:
            raise ConfigurationError("session lifetime must be >= 1 ms")
        self.services = {s.service_name: s for s in services}
        self.lifetime = lifetime
        self.require_handoff = require_handoff
        self._rng = np.random.default_rng(seed)
        self._inventory: dict[str, tuple[IpAddress, ...]] = {}
        self._authorized: set[tuple[IpAddress, str]] = set()
        self._uids: set[bytes] = set()
        self.pending: dict[bytes, PendingSession] = {}
        self.active: dict[bytes, ActiveSession] = {}

    # -- setup -------------------------------------------------------------

    def register_switcher(self, switcher_id: str, inventory: Sequence[IpAddress]) -> None:
        if switcher_id in self._inventory:
            raise ConfigurationError(f"switcher {switcher_id} registered twice")
        addrs = tuple(IpAddress.parse(a) for a in inventory)
        taken = {a for inv in self._inventory.values() for a in inv}
        for a in addrs:
            if a in taken:
                raise ConfigurationError(f"{a} is already owned by another switcher")
            for s in self.services.values():
                if a in (s.real_ip, s.initial_ip):
                    raise ConfigurationError(
                        f"switcher {switcher_id} inventory contains {a}, "
                        f"an address of service {s.service_name}")
        self._inventory[switcher_id] = addrs

    def inventory_size(self) -> int:
        return sum(len(v) for v in self._inventory.values())

    def accept_handoff(self, handoff: Handoff) -> None:
        self._authorized.add((handoff.client_ip, handoff.service_name))

    # -- pool & uid ----------------------------------------------------------

    def select_pool(self, pool_size: int) -> IpPool:
        """Round-robin over switchers in registration order, each switcher's
        inventory consumed front to back. Exhausted switchers are skipped."""
        if pool_size < 1:
            raise ConfigurationError("pool size must be >= 1")
        if pool_size > self.inventory_size():
            raise ManagerError(
                f"pool of {pool_size} exceeds switcher inventory of {self.inventory_size()}")
        cursors = {sid: 0 for sid in self._inventory}
        pairs: list[tuple[IpAddress, str]] = []
        while len(pairs) < pool_size:
            for sid, inv in self._inventory.items():
                if cursors[sid] < len(inv) and len(pairs) < pool_size:
                    pairs.append((inv[cursors[sid]], sid))
                    cursors[sid] += 1
        return IpPool.build(pairs)

    def _fresh_uid(self) -> SessionUid:
        uid = SessionUid.random(self._rng)
        assert uid.value not in self._uids, "128-bit UID collision"
        self._uids.add(uid.value)
        return uid

    # -- lifecycle -----------------------------------------------------------

    def _service(self, service: Union[str, ServiceRecord]) -> ServiceRecord:
        name = service if isinstance(service, str) else service.service_name
        record = self.services.get(name)
        if record is None:
            raise ManagerError(f"unknown service {name!r}")
        if not record.subscribed:
            raise ManagerError(f"service {name!r} is not subscribed")
        return record

    def begin_session(self, client_ip: IpAddress, service: Union[str, ServiceRecord],
                      pool_size: int, now: int = 0) -> PendingSession:
        record = self._service(service)
        if self.require_handoff and (client_ip, record.service_name) not in self._authorized:
            raise ManagerError(f"{client_ip} is not authorized for {record.service_name}")
        pool = self.select_pool(pool_size)
        uid = self._fresh_uid()
        expiry = now + self.lifetime
        grant = SessionGrant(uid, pool, record.initial_ip, expiry, issued=now)
        msg = ProvisionMessage(uid, pool, record.real_ip, client_ip, expiry)
        owners = pool.switchers()
        pending = PendingSession(grant, record, client_ip,
                                 [(sid, msg) for sid in owners], set(owners))
        self.pending[uid.value] = pending
        return pending

    def acknowledge(self, ack: ProvisionAck) -> Optional[SessionGrant]:
        """Record a switcher acknowledgement; returns the grant once the
        last outstanding switcher has acknowledged."""
        pending = self.pending.get(ack.uid.value)
        if pending is None:
            return None
        pending.waiting.discard(ack.switcher_id)
        if pending.waiting:
            return None
        del self.pending[ack.uid.value]
        self.active[ack.uid.value] = ActiveSession(
            pending.grant, pending.service, pending.client_ip,
            tuple(sid for sid, _ in pending.provisions))
        return pending.grant

    def establish_session(self, client_ip: IpAddress, service: Union[str, ServiceRecord],
                          pool_spec: int,
                          deliver: Callable[[str, ProvisionMessage], ProvisionAck],
                          now: int = 0) -> SessionGrant:
        """Synchronous form: provision each owner via ``deliver`` and return
        the grant after the final acknowledgement."""
        pending = self.begin_session(client_ip, service, pool_spec, now)
        grant = None
        for sid, msg in pending.provisions:
            grant = self.acknowledge(deliver(sid, msg))
        if grant is None:
            self.pending.pop(pending.grant.uid.value, None)
            raise ManagerError("not every switcher acknowledged the provision")
        return grant

    def expire_session(self, uid: SessionUid) -> list[tuple[str, ExpireMessage]]:
        """Invalidate a grant; returns removal orders for its switchers.
        Unknown or already expired UIDs yield no orders."""
        self.pending.pop(uid.value, None)
        active = self.active.pop(uid.value, None)
        if active is None:
            return []
        return [(sid, ExpireMessage(uid)) for sid in active.switchers]


# -- edge switcher side -------------------------------------------------------

def apply_provision(state: SwitcherState, msg: ProvisionMessage) -> ProvisionAck:
    state.provision(SwitcherSession(msg.uid, msg.pool, msg.real_ip, msg.client_ip, msg.expiry))
    return ProvisionAck(msg.uid, state.switcher_id)


def apply_expire(state: SwitcherState, msg: ExpireMessage) -> None:
    state.remove(msg.uid)


@dataclass(frozen=True)
class ClientSession:
    """The client terminal's view of a grant; it never learns the real IP."""

    uid: SessionUid
    pool: IpPool
    initial_ip: IpAddress
    client_ip: IpAddress
    expiry: int

    @classmethod
    def from_grant(cls, grant: SessionGrant, client_ip: IpAddress) -> "ClientSession":
        return cls(grant.uid, grant.pool, grant.initial_ip, client_ip, grant.expiry)
