"""Builders shared across test modules."""

from fasthop.hopper_core import IpAddress, IpPool, SessionConfig, SessionUid


def make_pool(n: int, base: str = "203.0.113.0", switchers: int = 1) -> IpPool:
    start = IpAddress.parse(base)
    return IpPool.build([(start.offset(i), f"sw{i % switchers}") for i in range(n)])


def make_session(n: int = 8, uid: bytes = bytes(range(16)), **kw) -> SessionConfig:
    return SessionConfig(
        uid=SessionUid(uid),
        pool=kw.pop("pool", None) or make_pool(n),
        initial_ip=IpAddress.parse(kw.pop("initial_ip", "100.64.0.1")),
        real_ip=IpAddress.parse(kw.pop("real_ip", "192.0.2.10")),
        client_ip=IpAddress.parse(kw.pop("client_ip", "10.1.0.1")),
    )
