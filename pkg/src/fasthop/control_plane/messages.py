"""Control-plane records and their wire encoding.

Every message is one record::

    <decimal byte length>:<canonical JSON body>\\n

The body is a JSON object with sorted keys and no insignificant
whitespace. It always carries ``"type"`` (the message class name) and
``"v"`` (schema version, currently 1). Field encodings:

* addresses are their usual text form (``"203.0.113.7"``, ``"2001:db8::1"``)
* a session UID is 32 lowercase hex digits
* a pool is a list of ``[address, owning switcher id]`` pairs in the
  authoritative order
* credentials are hex-encoded bytes
* times are integer simulated milliseconds

:func:`encode` with ``redact=True`` replaces the UID with ``"sha256:"``
plus 12 hex digits of its digest; that form is used for event logs and
cannot be decoded back.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from typing import ClassVar, Iterator, Optional, Union

from ..hopper_core import IpAddress, IpPool, SessionUid
from ..hopper_core.types import ConfigurationError, check_pool_exclusion

WIRE_VERSION = 1


class WireError(ValueError):
    """Malformed or unknown control record."""


@dataclass(frozen=True)
class AuthRequest:
    client_ip: IpAddress
    credentials: bytes
    service_name: str


@dataclass(frozen=True)
class AuthResult:
    client_ip: IpAddress
    service_name: str
    accepted: bool
    reason: str = ""
    manager_ip: Optional[IpAddress] = None


@dataclass(frozen=True)
class Handoff:
    """Authorization server telling the manager a client may open a session."""

    client_ip: IpAddress
    service_name: str


@dataclass(frozen=True)
class SessionRequest:
    client_ip: IpAddress
    service_name: str
    pool_size: int


@dataclass(frozen=True)
class SessionGrant:
    uid: SessionUid
    pool: IpPool
    initial_ip: IpAddress
    expiry: int
    issued: int = 0

    def __post_init__(self) -> None:
        if self.expiry <= self.issued:
            raise ConfigurationError("grant expiry must be after its issue time")


@dataclass(frozen=True)
class SessionRefused:
    client_ip: IpAddress
    service_name: str
    reason: str


@dataclass(frozen=True)
class ProvisionMessage:
    uid: SessionUid
    pool: IpPool
    real_ip: IpAddress
    client_ip: IpAddress
    expiry: int

    def __post_init__(self) -> None:
        check_pool_exclusion(self.pool, self.real_ip, None)


@dataclass(frozen=True)
class ProvisionAck:
    uid: SessionUid
    switcher_id: str


@dataclass(frozen=True)
class ExpireMessage:
    uid: SessionUid


@dataclass(frozen=True)
class ServiceRecord:
    service_name: str
    real_ip: IpAddress
    initial_ip: IpAddress
    subscribed: bool = True

    def __post_init__(self) -> None:
        if self.real_ip == self.initial_ip:
            raise ConfigurationError(f"{self.service_name}: initial_ip equals real_ip")


Message = Union[AuthRequest, AuthResult, Handoff, SessionRequest, SessionGrant,
                SessionRefused, ProvisionMessage, ProvisionAck, ExpireMessage]

MESSAGE_TYPES: dict[str, type] = {
    cls.__name__: cls
    for cls in (AuthRequest, AuthResult, Handoff, SessionRequest, SessionGrant,
                SessionRefused, ProvisionMessage, ProvisionAck, ExpireMessage)
}


def uid_tag(uid: SessionUid) -> str:
    return "sha256:" + hashlib.sha256(uid.value).hexdigest()[:12]


def _to_json(value, redact: bool):
    if isinstance(value, IpAddress):
        return str(value)
    if isinstance(value, SessionUid):
        return uid_tag(value) if redact else value.hex()
    if isinstance(value, IpPool):
        return [[str(a), o] for a, o in zip(value.addresses, value.owners)]
    if isinstance(value, bytes):
        return value.hex()
    return value


def to_record(msg: Message, redact: bool = False) -> dict:
    body = {f.name: _to_json(getattr(msg, f.name), redact) for f in fields(msg)}
    body["type"] = type(msg).__name__
    body["v"] = WIRE_VERSION
    return body


def _from_json(annotation: str, value):
    if value is None:
        return None
    if "IpAddress" in annotation:
        return IpAddress.parse(value)
    if "SessionUid" in annotation:
        if value.startswith("sha256:"):
            raise WireError("redacted UID cannot be decoded")
        return SessionUid.fromhex(value)
    if "IpPool" in annotation:
        return IpPool.build([(a, o) for a, o in value])
    if annotation == "bytes":
        return bytes.fromhex(value)
    return value


def from_record(body: dict) -> Message:
    body = dict(body)
    if body.pop("v", None) != WIRE_VERSION:
        raise WireError("unsupported control record version")
    cls = MESSAGE_TYPES.get(body.pop("type", None))
    if cls is None:
        raise WireError("unknown control record type")
    names = {f.name: f for f in fields(cls)}
    if set(body) - set(names):
        raise WireError(f"unexpected fields for {cls.__name__}: {sorted(set(body) - set(names))}")
    try:
        return cls(**{k: _from_json(str(names[k].type), v) for k, v in body.items()})
    except (TypeError, ValueError) as exc:
        raise WireError(f"bad {cls.__name__} record: {exc}") from None


def canonical_json(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def encode(msg: Message, redact: bool = False) -> bytes:
    payload = canonical_json(to_record(msg, redact)).encode()
    return b"%d:%s\n" % (len(payload), payload)


def decode_stream(data: bytes) -> Iterator[Message]:
    """Decode consecutive records from ``data``."""
    pos = 0
    while pos < len(data):
        colon = data.find(b":", pos)
        if colon < 0 or not data[pos:colon].isdigit():
            raise WireError(f"missing length prefix at byte {pos}")
        n = int(data[pos:colon])
        end = colon + 1 + n
        if end >= len(data) + 1 or data[end:end + 1] != b"\n":
            raise WireError(f"truncated or unterminated record at byte {pos}")
        try:
            body = json.loads(data[colon + 1:end])
        except json.JSONDecodeError as exc:
            raise WireError(f"record at byte {pos} is not JSON: {exc}") from None
        yield from_record(body)
        pos = end + 1


def decode(data: bytes) -> Message:
    msgs = list(decode_stream(data))
    if len(msgs) != 1:
        raise WireError(f"expected one record, found {len(msgs)}")
    return msgs[0]
