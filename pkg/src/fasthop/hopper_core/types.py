"""Value types shared by clients, switchers and the control plane."""

from __future__ import annotations

import enum
import ipaddress
import secrets
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union


class HopError(Exception):
    """Base class for IP hopping errors."""


class ConfigurationError(HopError, ValueError):
    """A session, pool or hop parameter violates its contract."""


class MissingTimestamp(HopError):
    """A protected packet carries no TCP timestamps value."""


class SourceMismatch(HopError):
    """An inbound packet's source is not the session's address for its tsval."""


@dataclass(frozen=True, order=True)
class IpAddress:
    """IPv4 or IPv6 address ordered by family, then octets."""

    family: int
    octets: bytes

    def __post_init__(self) -> None:
        expected = {4: 4, 6: 16}.get(self.family)
        if expected is None or len(self.octets) != expected:
            raise ConfigurationError(
                f"bad address: family={self.family} octets={self.octets!r}")

    @classmethod
    def parse(cls, text: Union[str, "IpAddress"]) -> "IpAddress":
        if isinstance(text, IpAddress):
            return text
        try:
            addr = ipaddress.ip_address(text)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        return cls(addr.version, addr.packed)

    def offset(self, k: int) -> "IpAddress":
        """The address ``k`` positions after this one."""
        addr = ipaddress.ip_address(self.octets) + k
        return IpAddress(addr.version, addr.packed)

    def __str__(self) -> str:
        return str(ipaddress.ip_address(self.octets))

    def __repr__(self) -> str:
        return f"IpAddress('{self}')"


@dataclass(frozen=True)
class SessionUid:
    """128-bit secret keying the hop function of one session."""

    value: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.value) != 16:
            raise ConfigurationError("session UID must be 16 bytes")

    @classmethod
    def random(cls, rng=None) -> "SessionUid":
        """Fresh UID from ``rng`` (anything with ``bytes(n)``) or the OS."""
        if rng is None:
            return cls(secrets.token_bytes(16))
        return cls(bytes(rng.bytes(16)))

    @classmethod
    def fromhex(cls, text: str) -> "SessionUid":
        return cls(bytes.fromhex(text))

    def hex(self) -> str:
        return self.value.hex()

    def __repr__(self) -> str:
        # only a short tag; the full value is key material
        return f"SessionUid(..{self.value[-2:].hex()})"


@dataclass(frozen=True)
class IpPool:
    """Ordered virtual addresses of a session with the switcher owning each.

    The order is the one transmitted by the manager and is authoritative
    for hop indexing on every side; it is never re-sorted.
    """

    addresses: tuple[IpAddress, ...]
    owners: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.addresses:
            raise ConfigurationError("IP pool must not be empty")
        if len(self.owners) != len(self.addresses):
            raise ConfigurationError("every pool address needs exactly one owner")
        if len(set(self.addresses)) != len(self.addresses):
            raise ConfigurationError("IP pool contains duplicate addresses")

    @classmethod
    def build(cls, pairs: Sequence[tuple[IpAddress, str]]) -> "IpPool":
        return cls(tuple(IpAddress.parse(a) for a, _ in pairs),
                   tuple(o for _, o in pairs))

    def __len__(self) -> int:
        return len(self.addresses)

    def __getitem__(self, i: int) -> IpAddress:
        return self.addresses[i]

    def __contains__(self, addr: object) -> bool:
        return addr in self._positions

    @property
    def _positions(self) -> dict[IpAddress, int]:
        cache = self.__dict__.get("_pos")
        if cache is None:
            cache = {a: i for i, a in enumerate(self.addresses)}
            object.__setattr__(self, "_pos", cache)
        return cache

    def position(self, addr: IpAddress) -> Optional[int]:
        return self._positions.get(addr)

    def owner_of(self, addr: IpAddress) -> str:
        return self.owners[self._positions[addr]]

    def switchers(self) -> tuple[str, ...]:
        """Owning switcher ids in first-appearance order."""
        return tuple(dict.fromkeys(self.owners))


@dataclass(frozen=True)
class SessionConfig:
    """One enhanced secured session as known to the client."""

    uid: SessionUid
    pool: IpPool
    initial_ip: IpAddress
    real_ip: IpAddress
    client_ip: IpAddress

    def __post_init__(self) -> None:
        check_pool_exclusion(self.pool, self.real_ip, self.initial_ip)


def check_pool_exclusion(pool: IpPool, real_ip: IpAddress,
                         initial_ip: Optional[IpAddress]) -> None:
    if initial_ip is not None and initial_ip == real_ip:
        raise ConfigurationError("initial_ip must differ from real_ip")
    if real_ip in pool:
        raise ConfigurationError(f"pool contains the real server address {real_ip}")
    if initial_ip is not None and initial_ip in pool:
        raise ConfigurationError(f"pool contains the initial address {initial_ip}")


@dataclass(frozen=True)
class Packet:
    src: IpAddress
    dst: IpAddress
    tsval: Optional[int] = None
    size_bytes: int = 64
    payload_tag: str = ""

    def __post_init__(self) -> None:
        if self.tsval is not None and not 0 <= self.tsval < 2**32:
            raise ConfigurationError(f"tsval out of 32-bit range: {self.tsval}")
        if self.size_bytes <= 0:
            raise ConfigurationError("size_bytes must be positive")


class DropReason(str, enum.Enum):
    HASH_MISMATCH = "HashMismatch"
    MISSING_TIMESTAMP = "MissingTimestamp"
    UNKNOWN_DESTINATION = "UnknownDestination"
    NO_SESSION = "NoSession"


@dataclass(frozen=True)
class Forward:
    real_ip: IpAddress
    # matched session, for response-path bookkeeping
    uid: Optional[SessionUid] = field(default=None, compare=False)


@dataclass(frozen=True)
class Drop:
    reason: DropReason


VerifyOutcome = Union[Forward, Drop]
