"""Hop function and the per-packet rewrite/verify steps."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterator, Optional, Protocol

from .siphash import siphash24_word, split_key
from .types import (
    ConfigurationError,
    Drop,
    DropReason,
    Forward,
    IpAddress,
    IpPool,
    MissingTimestamp,
    Packet,
    SessionConfig,
    SessionUid,
    SourceMismatch,
    VerifyOutcome,
    check_pool_exclusion,
)

TSVAL_MAX = 2**32 - 1


@lru_cache(maxsize=4096)
def _key_halves(uid: bytes) -> tuple[int, int]:
    return split_key(uid)


def hop_index(uid: SessionUid, tsval: int, pool_size: int) -> int:
    """Index into the pool for ``tsval``: SipHash-2-4 keyed by the UID over
    tsval as a zero-extended little-endian u64, reduced mod ``pool_size``."""
    if pool_size < 1:
        raise ConfigurationError(f"pool_size must be >= 1, got {pool_size}")
    if not 0 <= tsval <= TSVAL_MAX:
        raise ConfigurationError(f"tsval out of 32-bit range: {tsval}")
    k0, k1 = _key_halves(uid.value)
    return siphash24_word(k0, k1, tsval) % pool_size


class HopKeyed(Protocol):
    uid: SessionUid
    pool: IpPool


def virtual_address(session: HopKeyed, tsval: int) -> IpAddress:
    pool = session.pool
    return pool.addresses[hop_index(session.uid, tsval, len(pool))]


def client_rewrite_outbound(session: SessionConfig, packet: Packet) -> Packet:
    """Swap the initial IP in ``dst`` for the session's current virtual IP.

    Packets addressed elsewhere pass through untouched.
    """
    if packet.dst != session.initial_ip:
        return packet
    if packet.tsval is None:
        raise MissingTimestamp(f"outbound packet to {packet.dst} has no tsval")
    return replace(packet, dst=virtual_address(session, packet.tsval))


def client_rewrite_inbound(session: SessionConfig, packet: Packet) -> Packet:
    if packet.tsval is None:
        raise MissingTimestamp(f"inbound packet from {packet.src} has no tsval")
    expected = virtual_address(session, packet.tsval)
    if packet.src != expected:
        raise SourceMismatch(
            f"source {packet.src} is not the session address for tsval {packet.tsval}")
    return replace(packet, src=session.initial_ip)


def switcher_rewrite_response(session: HopKeyed, packet: Packet) -> Packet:
    """Server-to-client path: replace the real source by the virtual IP."""
    if packet.tsval is None:
        raise MissingTimestamp(f"response from {packet.src} has no tsval")
    return replace(packet, src=virtual_address(session, packet.tsval))


@dataclass(frozen=True)
class SwitcherSession:
    """What an edge switcher holds for one provisioned session."""

    uid: SessionUid
    pool: IpPool
    real_ip: IpAddress
    client_ip: IpAddress
    expiry: Optional[int] = None

    def __post_init__(self) -> None:
        check_pool_exclusion(self.pool, self.real_ip, None)

    @classmethod
    def from_config(cls, cfg: SessionConfig, expiry: Optional[int] = None) -> "SwitcherSession":
        return cls(cfg.uid, cfg.pool, cfg.real_ip, cfg.client_ip, expiry)


@dataclass
class SwitcherState:
    """Provisioned sessions of one edge switcher.

    Single writer: callers serialize :meth:`provision`/:meth:`remove`
    against :meth:`verify`.
    """

    switcher_id: str = ""
    sessions: dict[bytes, SwitcherSession] = field(default_factory=dict)
    collisions: int = 0
    _by_client: dict[IpAddress, list[bytes]] = field(default_factory=dict, repr=False)
    _known: set[IpAddress] = field(default_factory=set, repr=False)

    def provision(self, session: SwitcherSession) -> None:
        key = session.uid.value
        if key in self.sessions:
            self.remove(session.uid)
        self.sessions[key] = session
        self._by_client.setdefault(session.client_ip, []).append(key)
        self._known.update(session.pool.addresses)

    def remove(self, uid: SessionUid) -> bool:
        """Forget a session. Unknown UIDs are a no-op; returns whether one was removed."""
        session = self.sessions.pop(uid.value, None)
        if session is None:
            return False
        keys = self._by_client[session.client_ip]
        keys.remove(uid.value)
        if not keys:
            del self._by_client[session.client_ip]
        return True

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self) -> Iterator[SwitcherSession]:
        return iter(self.sessions.values())

    def get(self, uid: SessionUid) -> Optional[SwitcherSession]:
        return self.sessions.get(uid.value)

    def sessions_for(self, client_ip: IpAddress) -> list[SwitcherSession]:
        """Live sessions bound to ``client_ip`` in provisioning order."""
        return [self.sessions[k] for k in self._by_client.get(client_ip, ())]

    def known_addresses(self) -> frozenset[IpAddress]:
        return frozenset(self._known)

    def knows(self, addr: IpAddress) -> bool:
        """Whether ``addr`` was ever part of a pool provisioned here."""
        return addr in self._known

    def candidates(self, packet: Packet) -> list[SwitcherSession]:
        return [s for s in self.sessions_for(packet.src) if packet.dst in s.pool]

    def verify(self, packet: Packet) -> VerifyOutcome:
        return switcher_verify(self, packet)


def switcher_verify(state: SwitcherState, packet: Packet) -> VerifyOutcome:
    """Pre-routing check of a packet arriving on a pool address.

    Candidates are the live sessions bound to the packet's source whose
    pool lists its destination, tried in provisioning order. Drop reasons,
    in precedence order: MissingTimestamp; UnknownDestination when no pool
    ever provisioned here lists ``dst``; NoSession when no live session has
    this (source, destination); HashMismatch when candidates exist but none
    maps tsval to ``dst``.
    """
    if packet.tsval is None:
        return Drop(DropReason.MISSING_TIMESTAMP)
    if not state.knows(packet.dst):
        return Drop(DropReason.UNKNOWN_DESTINATION)
    cands = state.candidates(packet)
    if not cands:
        return Drop(DropReason.NO_SESSION)
    matched = [s for s in cands if virtual_address(s, packet.tsval) == packet.dst]
    if not matched:
        return Drop(DropReason.HASH_MISMATCH)
    if len(matched) > 1:
        state.collisions += 1
    return Forward(matched[0].real_ip, matched[0].uid)
