import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from helpers import make_pool, make_session
from fasthop.hopper_core import (
    ConfigurationError,
    IpAddress,
    IpPool,
    MissingTimestamp,
    Packet,
    SessionConfig,
    SessionUid,
    SourceMismatch,
    client_rewrite_inbound,
    client_rewrite_outbound,
    hop_index,
    hop_indices,
    switcher_rewrite_response,
    virtual_address,
)

UID = SessionUid(bytes.fromhex("8f14e45fceea167a5a36dedd4bea2543"))


def within_sigmas(successes, trials, p, k):
    sigma = math.sqrt(trials * p * (1 - p))
    return abs(successes - trials * p) <= k * sigma


# -- hop_index ---------------------------------------------------------------

@given(st.binary(min_size=16, max_size=16), st.integers(0, 2**32 - 1))
def test_pool_of_one_always_zero(uid, tsval):
    assert hop_index(SessionUid(uid), tsval, 1) == 0


@pytest.mark.parametrize("bad", [0, -3])
def test_pool_size_must_be_positive(bad):
    with pytest.raises(ConfigurationError):
        hop_index(UID, 5, bad)


def test_tsval_range_checked():
    with pytest.raises(ConfigurationError):
        hop_index(UID, 2**32, 4)
    with pytest.raises(ConfigurationError):
        hop_index(UID, -1, 4)


@given(st.binary(min_size=16, max_size=16), st.integers(0, 2**32 - 1), st.integers(1, 10**6))
def test_deterministic_and_in_range(uid, tsval, n):
    u = SessionUid(uid)
    first = hop_index(u, tsval, n)
    assert 0 <= first < n
    assert hop_index(SessionUid(bytes(uid)), tsval, n) == first


def test_uniform_over_exhaustive_sweep():
    idx = hop_indices(UID, np.arange(65536), 256)
    counts = np.bincount(idx, minlength=256)
    assert stats.chisquare(counts).pvalue > 0.001


@pytest.mark.parametrize("n", [2, 7, 100, 1000, 4096])
def test_uniform_small_pools(n):
    idx = hop_indices(UID, np.arange(64 * n), n)
    assert stats.chisquare(np.bincount(idx, minlength=n)).pvalue > 0.001


@pytest.mark.parametrize("n", [2, 16, 256])
def test_key_sensitivity_single_bit_flip(n):
    rng = np.random.default_rng(7)
    trials, changed = 10_000, 0
    for _ in range(trials):
        key = bytearray(rng.bytes(16))
        tsval = int(rng.integers(0, 2**32))
        before = hop_index(SessionUid(bytes(key)), tsval, n)
        bit = int(rng.integers(0, 128))
        key[bit // 8] ^= 1 << (bit % 8)
        changed += hop_index(SessionUid(bytes(key)), tsval, n) != before
    assert within_sigmas(changed, trials, 1 - 1 / n, 4)


# -- virtual_address ----------------------------------------------------------

def test_single_address_pool():
    s = make_session(1)
    assert {virtual_address(s, t) for t in range(100)} == {s.pool[0]}


def test_two_address_pool_stable(session8):
    s = make_session(2)
    first = virtual_address(s, 12345)
    assert first in s.pool
    assert all(virtual_address(s, 12345) == first for _ in range(10))


def test_consecutive_tsval_changes_address():
    s = make_session(256, uid=UID.value)
    idx = hop_indices(UID, np.arange(65536), 256)
    changes = int(np.count_nonzero(idx[1:] != idx[:-1]))
    assert within_sigmas(changes, 65535, 1 - 1 / 256, 4)
    # scalar path spot check
    assert all(virtual_address(s, t) == s.pool[int(idx[t])] for t in range(0, 65536, 4099))


def test_pool_rejects_real_or_initial():
    pool = make_pool(4)
    with pytest.raises(ConfigurationError, match="real"):
        make_session(pool=pool, real_ip=str(pool[2]))
    with pytest.raises(ConfigurationError, match="initial"):
        make_session(pool=pool, initial_ip=str(pool[0]))
    with pytest.raises(ConfigurationError):
        make_session(pool=pool, initial_ip="192.0.2.10", real_ip="192.0.2.10")


def test_pool_invariants():
    a = IpAddress.parse("203.0.113.1")
    with pytest.raises(ConfigurationError):
        IpPool((), ())
    with pytest.raises(ConfigurationError):
        IpPool((a, a), ("sw0", "sw1"))
    with pytest.raises(ConfigurationError):
        IpPool((a,), ())


def test_address_total_order():
    v4 = [IpAddress.parse(x) for x in ("10.0.0.2", "10.0.0.1", "9.255.255.255")]
    v6 = IpAddress.parse("::1")
    ordered = sorted(v4 + [v6])
    assert [str(a) for a in ordered] == ["9.255.255.255", "10.0.0.1", "10.0.0.2", "::1"]


def test_ipv6_pool_hops():
    pool = IpPool.build([(IpAddress.parse("2001:db8::100").offset(i), "sw0") for i in range(1000)])
    s = SessionConfig(UID, pool, IpAddress.parse("2001:db8:ffff::1"),
                      IpAddress.parse("2001:db8:1::1"), IpAddress.parse("2001:db8:2::1"))
    assert virtual_address(s, 99) == pool[hop_index(UID, 99, 1000)]


def test_uid_repr_does_not_leak():
    assert UID.hex() not in repr(UID)
    assert UID.hex() not in repr(make_session(4, uid=UID.value))


# -- client rewrites ----------------------------------------------------------

def pkt(src, dst, tsval=None):
    return Packet(IpAddress.parse(str(src)), IpAddress.parse(str(dst)), tsval)


def test_outbound_rewrites_destination(session8):
    p = pkt(session8.client_ip, session8.initial_ip, 777)
    out = client_rewrite_outbound(session8, p)
    assert out.dst == session8.pool[hop_index(session8.uid, 777, 8)]
    assert (out.src, out.tsval, out.size_bytes) == (p.src, p.tsval, p.size_bytes)


def test_outbound_pass_through(session8):
    p = pkt(session8.client_ip, "198.51.100.7", 1)
    assert client_rewrite_outbound(session8, p) is p
    assert client_rewrite_outbound(session8, pkt(session8.client_ip, "198.51.100.7")) is not None


def test_outbound_needs_timestamp(session8):
    with pytest.raises(MissingTimestamp):
        client_rewrite_outbound(session8, pkt(session8.client_ip, session8.initial_ip))


def test_inbound_restores_initial(session8):
    src = session8.pool[hop_index(session8.uid, 42, 8)]
    out = client_rewrite_inbound(session8, pkt(src, session8.client_ip, 42))
    assert out.src == session8.initial_ip


def test_inbound_wrong_pool_address(session8):
    right = hop_index(session8.uid, 42, 8)
    wrong = session8.pool[(right + 1) % 8]
    with pytest.raises(SourceMismatch):
        client_rewrite_inbound(session8, pkt(wrong, session8.client_ip, 42))


def test_inbound_real_ip_leak(session8):
    with pytest.raises(SourceMismatch):
        client_rewrite_inbound(session8, pkt(session8.real_ip, session8.client_ip, 42))
    with pytest.raises(MissingTimestamp):
        client_rewrite_inbound(session8, pkt(session8.pool[0], session8.client_ip))


def test_response_rewrite(session8):
    resp = pkt(session8.real_ip, session8.client_ip, 9001)
    out = switcher_rewrite_response(session8, resp)
    assert out.src == session8.pool[hop_index(session8.uid, 9001, 8)]
    assert out.dst == resp.dst
    assert client_rewrite_inbound(session8, out).src == session8.initial_ip
    with pytest.raises(MissingTimestamp):
        switcher_rewrite_response(session8, pkt(session8.real_ip, session8.client_ip))


def test_response_sources_vary():
    s = make_session(256, uid=UID.value)
    rng = np.random.default_rng(3)
    trials = 20_000
    t1 = rng.integers(0, 2**32, trials)
    t2 = (t1 + rng.integers(1, 2**31, trials)) % 2**32
    diff = int(np.count_nonzero(hop_indices(UID, t1, 256) != hop_indices(UID, t2, 256)))
    assert within_sigmas(diff, trials, 255 / 256, 4)
    q = [switcher_rewrite_response(s, pkt(s.real_ip, s.client_ip, int(t))).src for t in t1[:50]]
    assert len(set(q)) > 40


@settings(max_examples=200)
@given(st.binary(min_size=16, max_size=16), st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_response_inbound_round_trip(uid, n, tsval):
    s = make_session(n, uid=uid)
    resp = pkt(s.real_ip, s.client_ip, tsval)
    assert client_rewrite_inbound(s, switcher_rewrite_response(s, resp)).src == s.initial_ip
