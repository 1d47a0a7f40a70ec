"""Deterministic network simulation of a hopping-protected service.

Time advances in integer milliseconds. Control messages (authorization,
grants, provisioning) travel over ideal channels with the scenario's
``control_latency``; data packets move hop by hop over links, one
millisecond tick at a time, in numpy batches.

The per-packet protocol steps are the vectorized equivalents of the
scalar functions in :mod:`fasthop.hopper_core`. Switcher state itself is
a real :class:`~fasthop.hopper_core.SwitcherState` fed by the control
plane; the lookup tables used on the data path are rebuilt from it on
every provision or expiry.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import networkx as nx
import numpy as np

from ..control_plane import (
    AuthRequest,
    AuthResult,
    AuthServer,
    ClientSession,
    Credential,
    Directory,
    ExpireMessage,
    Handoff,
    HopperManager,
    ManagerError,
    ProvisionAck,
    ProvisionMessage,
    ResolutionError,
    ServiceRecord,
    SessionGrant,
    SessionRefused,
    SessionRequest,
    apply_expire,
    apply_provision,
    uid_tag,
)
from ..control_plane.messages import to_record
from ..hopper_core import IpAddress, SwitcherState, hop_index
from ..hopper_core.siphash import siphash24_word, siphash24_words_keyed, split_key
from ..scenario import Scenario, ScenarioError, validate
from . import packets as P
from .engine import DATA, EventLog, Scheduler
from .metrics import REASON_CODE, REASONS, RunMetrics

SPOOF_BASE = IpAddress.parse("198.18.0.0")
U32 = 0xFFFFFFFF
# below this many packets the scalar hash beats numpy's per-call overhead
SCALAR_BATCH = 12

KIND_CODES = {k: i for i, k in enumerate(
    ("client", "bot", "router", "switcher", "server", "manager", "auth_server", "observer"))}
CLIENT, BOT, ROUTER, SWITCHER, SERVER = (KIND_CODES[k] for k in
                                         ("client", "bot", "router", "switcher", "server"))

MT = REASON_CODE["MissingTimestamp"]
UD = REASON_CODE["UnknownDestination"]
NS = REASON_CODE["NoSession"]
HM = REASON_CODE["HashMismatch"]
SM = REASON_CODE["SourceMismatch"]
IF = REASON_CODE["IngressFiltered"]
NR = REASON_CODE["NoRoute"]


def node_rng(seed: int, node_id: str) -> np.random.Generator:
    """Independent stream per node so adding a node leaves the others alone."""
    return np.random.default_rng([seed, zlib.crc32(node_id.encode())])


class AddressBook:
    """Dense ids for every address the simulation can put in a header."""

    def __init__(self) -> None:
        self.addresses: list[IpAddress] = []
        self.owners: list[int] = []
        self.ids: dict[IpAddress, int] = {}

    def add(self, addr: IpAddress, owner: int) -> int:
        if addr in self.ids:
            return self.ids[addr]
        self.ids[addr] = len(self.addresses)
        self.addresses.append(addr)
        self.owners.append(owner)
        return self.ids[addr]

    def __len__(self) -> int:
        return len(self.addresses)


@dataclass
class _Tables:
    """Data-path view of one switcher's provisioned state."""

    known: np.ndarray
    by_client: np.ndarray   # [address id, rank] -> session index, -1 padded
    live: np.ndarray        # [session index] -> provisioned here
    alias: np.ndarray       # undefended pass-through: [pool address] -> real id
    alias_sess: np.ndarray


@dataclass
class _Tap:
    node: str
    vantage: str
    keys: np.ndarray
    chunks: list = field(default_factory=list)


@dataclass
class _Generator:
    kind: str                 # "legit" or an attacker kind
    node: int
    session: int
    start: int
    stop: Optional[int]       # exclusive
    remaining: Optional[int]
    rate: float
    spec: object
    credit: float = 0.0
    cursor: int = 0

    def alive(self, t: int) -> bool:
        if self.remaining is not None and self.remaining <= 0:
            return False
        return self.stop is None or t < self.stop


class _Capture:
    """Append-only record of a session's legitimate requests, for replay."""

    def __init__(self) -> None:
        self.t = np.zeros(256, np.int64)
        self.dst = np.zeros(256, np.int32)
        self.tsval = np.zeros(256, np.uint32)
        self.has_ts = np.zeros(256, np.bool_)
        self.replayed = np.zeros(256, np.int64)
        self.n = 0

    def append(self, t: int, b: np.ndarray) -> None:
        k = len(b)
        if self.n + k > len(self.t):
            size = max(2 * len(self.t), self.n + k)
            for name in ("t", "dst", "tsval", "has_ts", "replayed"):
                old = getattr(self, name)
                new = np.zeros(size, old.dtype)
                new[: self.n] = old[: self.n]
                setattr(self, name, new)
        sl = slice(self.n, self.n + k)
        self.t[sl] = t
        self.dst[sl] = b["dst"]
        self.tsval[sl] = b["tsval"]
        self.has_ts[sl] = b["has_ts"]
        self.n += k

    def available(self, t: int) -> int:
        return int(np.searchsorted(self.t[: self.n], t, side="left"))


def _ranks(keys: np.ndarray) -> np.ndarray:
    """Position of each element among equal keys, in original order."""
    order = np.argsort(keys, kind="stable")
    ks = keys[order]
    r = np.empty(len(keys), np.int64)
    r[order] = np.arange(len(keys)) - np.searchsorted(ks, ks, side="left")
    return r


class Simulation:
    """Built from a validated :class:`Scenario`; drive it with :meth:`run`."""

    def __init__(self, scenario: Scenario):
        sc = validate(scenario)
        self.scenario = sc
        self.seed = sc.seed
        self.undefended = sc.undefended
        self.horizon = 0
        self.log = EventLog()
        self.sched = Scheduler()
        self._build_nodes()
        self._build_addresses()
        self._build_links()
        self._build_control()
        self._build_sessions()
        self._build_counters()
        for i, s in enumerate(sc.sessions):
            self.sched.at(s.start, self._client_start, i)
            if s.expire_at is not None:
                self.sched.at(s.expire_at, self._admin_expire, i)
        self.log.add(0, "sim", "build", fingerprint=sc.fingerprint(), seed=sc.seed)

    # -- construction ----------------------------------------------------------

    def _build_nodes(self) -> None:
        sc = self.scenario
        self.names = [n.id for n in sc.nodes]
        self.index = {n: i for i, n in enumerate(self.names)}
        self.kind = np.array([KIND_CODES[n.kind] for n in sc.nodes], np.int8)
        self.rngs = {n.id: node_rng(sc.seed, n.id) for n in sc.nodes}
        self.shuffle_rng = node_rng(sc.seed, "#links")
        # client-local ms counters start at a random offset; servers too
        self.clock_offset = np.zeros(len(self.names), np.int64)
        for n in sc.nodes:
            if n.kind in ("client", "server"):
                self.clock_offset[self.index[n.id]] = int(self.rngs[n.id].integers(0, 2**32))

    def _build_addresses(self) -> None:
        sc = self.scenario
        book = self.book = AddressBook()
        self.node_addr = np.full(len(self.names), -1, np.int32)
        for i, n in enumerate(sc.nodes):
            if n.address is not None:
                self.node_addr[i] = book.add(IpAddress.parse(n.address), i)
        for i, n in enumerate(sc.nodes):
            if n.kind == "switcher":
                for a in sc.inventory_of(n):
                    book.add(a, i)
        for s in sc.services:
            book.add(IpAddress.parse(s.real_ip), self.index[s.server])
            book.add(IpAddress.parse(s.initial_ip), -1)
        self.spoof_base: dict[int, int] = {}
        bots = [i for i, n in enumerate(sc.nodes) if n.kind == "bot"]
        for j, a in enumerate(sc.attackers):
            if a.kind != "spoofed_source_flood":
                continue
            b = self.index[a.node]
            if b in self.spoof_base:
                continue
            base = SPOOF_BASE.offset(bots.index(b) * 65536)
            first = len(book)
            for k in range(a.spoof_pool):
                addr = base.offset(k)
                if addr in book.ids:
                    raise ScenarioError(f"attackers[{j}].spoof_pool",
                                        f"spoofed address {addr} collides with the scenario")
                book.add(addr, -1)
            self.spoof_base[b] = first
        self.owner = np.array(book.owners, np.int32)

    def _build_links(self) -> None:
        sc = self.scenario
        V = len(self.names)
        g = nx.Graph()
        g.add_nodes_from(range(V))
        self.link_ends = []
        self.linkkey = np.full((V, V), -1, np.int64)
        cap, lat = [], []
        for li, link in enumerate(sc.links):
            a, b = self.index[link.a], self.index[link.b]
            g.add_edge(a, b, latency=link.latency)
            self.link_ends.append((link.a, link.b))
            self.linkkey[a, b] = 2 * li
            self.linkkey[b, a] = 2 * li + 1
            cap += [link.capacity, link.capacity]
            lat += [link.latency, link.latency]
        self.capacity = np.array(cap, np.int64)
        self.latency = np.array(lat, np.int64)
        self.used = np.zeros(len(cap), np.int64)
        self.nexthop = np.full((V, V), -1, np.int32)
        for target in range(V):
            paths = nx.single_source_dijkstra_path(g, target, weight="latency")
            for u, path in paths.items():
                if u != target:
                    self.nexthop[u, target] = path[-2]
        self.taps = []
        for n in sc.nodes:
            if n.kind != "observer":
                continue
            keys = np.zeros(len(cap), np.bool_)
            for a, b in n.tap:
                k = self.linkkey[self.index[a], self.index[b]]
                keys[k] = keys[k ^ 1] = True
            self.taps.append(_Tap(n.id, n.vantage, keys))

    def _build_control(self) -> None:
        sc = self.scenario
        self.auth_node = next(n.id for n in sc.nodes if n.kind == "auth_server")
        self.mgr_node = next(n.id for n in sc.nodes if n.kind == "manager")
        auth_ip = IpAddress.parse(sc.node(self.auth_node).address)
        mgr_ip = IpAddress.parse(sc.node(self.mgr_node).address)
        records = [ServiceRecord(s.name, IpAddress.parse(s.real_ip),
                                 IpAddress.parse(s.initial_ip), s.subscribed)
                   for s in sc.services]
        self.directory = Directory(auth_ip, records)
        creds = [Credential(c.secret.encode(), None if c.services is None else frozenset(c.services))
                 for c in sc.credentials]
        self.auth = AuthServer({r.service_name: r for r in records}, creds, mgr_ip)
        self.manager = HopperManager(records, seed=int(self.rngs[self.mgr_node].integers(0, 2**63)),
                                     lifetime=sc.session_lifetime)
        self.states: dict[int, SwitcherState] = {}
        for i, n in enumerate(sc.nodes):
            if n.kind == "switcher":
                self.manager.register_switcher(n.id, sc.inventory_of(n))
                self.states[i] = SwitcherState(n.id)

    def _build_sessions(self) -> None:
        sc = self.scenario
        S, A = len(sc.sessions), len(self.book)
        width = max([sc.session_pool_size(i) for i in range(S)], default=1)
        self.k0 = np.zeros(S, np.uint64)
        self.k1 = np.zeros(S, np.uint64)
        self.npool = np.ones(S, np.uint64)
        self.pos = np.full((S, A), -1, np.int32)
        self.pool_ids = np.full((S, width), -1, np.int32)
        self.real = np.full(S, -1, np.int32)
        self.uid_to_session: dict[bytes, int] = {}
        self.grants: dict[int, SessionGrant] = {}
        self.client_sessions: dict[int, ClientSession] = {}
        self.granted_at: dict[int, int] = {}
        self.refused: dict[int, str] = {}
        self.expired_at: dict[int, int] = {}
        self.labels = [f"{i}:{s.client}->{s.service}" for i, s in enumerate(sc.sessions)]
        self.client_table = np.full((A, 0), -1, np.int32)
        self.tables = {w: self._empty_tables() for w in self.states}
        self.generators: list[_Generator] = []
        self.captures: dict[int, _Capture] = {}
        for a in sc.attackers:
            if a.kind in ("exact_replay", "timestamp_shift_replay"):
                self.captures.setdefault(a.target, _Capture())
        self.hist = [np.zeros(sc.session_pool_size(i), np.int64) for i in range(S)]
        self.draws = [np.zeros(sc.session_pool_size(i), np.int64) for i in range(S)]
        self.last_hop = [None] * S
        self.hop_pairs = np.zeros(S, np.int64)
        self.hop_changes = np.zeros(S, np.int64)

    def _build_counters(self) -> None:
        R, V = len(REASONS), len(self.names)
        self.injected = np.zeros(2, np.int64)
        self.req_fwd = np.zeros(2, np.int64)
        self.req_drop = np.zeros((2, R), np.int64)
        self.req_cong = np.zeros(2, np.int64)
        self.resp_inj = np.zeros(2, np.int64)
        self.resp_deliv = np.zeros(2, np.int64)
        self.resp_drop = np.zeros((2, R), np.int64)
        self.resp_cong = np.zeros(2, np.int64)
        self.sw_ingress = np.zeros(V, np.int64)
        self.sw_fwd = np.zeros(V, np.int64)
        self.server_ingress = 0
        self.pending: dict[int, list[np.ndarray]] = {}
        self.ticks: set[int] = set()
        self.tick_stats: dict[str, int] = {}

    def _empty_tables(self) -> _Tables:
        A, S = len(self.book), len(self.scenario.sessions)
        return _Tables(np.zeros(A, np.bool_), np.full((A, 0), -1, np.int32),
                       np.zeros(S, np.bool_), np.full(A, -1, np.int32), np.full(A, -1, np.int32))

    # -- control plane -----------------------------------------------------------

    def _send(self, src: str, dst: str, msg, handler) -> None:
        t = self.sched.now
        self.log.add(t, src, "send", to=dst, msg=to_record(msg, redact=True))
        self.sched.at(t + self.scenario.control_latency, self._recv, src, dst, msg, handler)

    def _recv(self, src: str, dst: str, msg, handler) -> None:
        self.log.add(self.sched.now, dst, "recv", frm=src, msg=to_record(msg, redact=True))
        handler(msg)

    def _client_start(self, i: int) -> None:
        s = self.scenario.sessions[i]
        client_ip = self.book.addresses[self.node_addr[self.index[s.client]]]
        try:
            self.directory.resolve(s.service)
        except ResolutionError as exc:
            self._refuse(i, str(exc))
            return
        req = AuthRequest(client_ip, s.credentials.encode(), s.service)
        self._send(s.client, self.auth_node, req, partial(self._auth_request, i))

    def _auth_request(self, i: int, req: AuthRequest) -> None:
        result, handoff = self.auth.authorize(req)
        client = self.scenario.sessions[i].client
        if handoff is not None:
            self._send(self.auth_node, self.mgr_node, handoff, self.manager.accept_handoff)
        self._send(self.auth_node, client, result, partial(self._auth_result, i))

    def _auth_result(self, i: int, result: AuthResult) -> None:
        s = self.scenario.sessions[i]
        if not result.accepted:
            self._refuse(i, result.reason)
            return
        req = SessionRequest(result.client_ip, s.service, self.scenario.session_pool_size(i))
        self._send(s.client, self.mgr_node, req, partial(self._session_request, i))

    def _session_request(self, i: int, req: SessionRequest) -> None:
        try:
            pending = self.manager.begin_session(req.client_ip, req.service_name,
                                                 req.pool_size, now=self.sched.now)
        except ManagerError as exc:
            refusal = SessionRefused(req.client_ip, req.service_name, str(exc))
            self._send(self.mgr_node, self.scenario.sessions[i].client, refusal,
                       partial(lambda i, m: self._refuse(i, m.reason), i))
            return
        self.uid_to_session[pending.grant.uid.value] = i
        for sid, msg in pending.provisions:
            self._send(self.mgr_node, sid, msg, partial(self._provision, sid))

    def _provision(self, sid: str, msg: ProvisionMessage) -> None:
        w = self.index[sid]
        s = self.uid_to_session[msg.uid.value]
        self._load_session_keys(s, msg.uid.value, msg.pool, msg.real_ip)
        ack = apply_provision(self.states[w], msg)
        self._rebuild(w)
        self.log.add(self.sched.now, sid, "provisioned", uid=uid_tag(msg.uid))
        self._send(sid, self.mgr_node, ack, self._ack)

    def _ack(self, ack: ProvisionAck) -> None:
        grant = self.manager.acknowledge(ack)
        if grant is None:
            return
        i = self.uid_to_session[grant.uid.value]
        self._send(self.mgr_node, self.scenario.sessions[i].client, grant,
                   partial(self._grant, i))
        self.sched.at(grant.expiry, self._expire, i, "lifetime")

    def _grant(self, i: int, grant: SessionGrant) -> None:
        t = self.sched.now
        s = self.scenario.sessions[i]
        v = self.index[s.client]
        client_ip = self.book.addresses[self.node_addr[v]]
        self.grants[i] = grant
        self.client_sessions[i] = ClientSession.from_grant(grant, client_ip)
        self.granted_at[i] = t
        self._rebuild_client_table()
        start = t + 1
        stop = start + s.duration if s.duration is not None else None
        self._add_generator(_Generator("legit", v, i, start, stop, s.count, s.rate, s))
        for a in self.scenario.attackers:
            if a.target != i:
                continue
            a_start = max(a.start, start)
            a_stop = a_start + a.duration if a.duration is not None else None
            self._add_generator(_Generator(a.kind, self.index[a.node], i, a_start, a_stop,
                                           a.count, a.rate, a))

    def _admin_expire(self, i: int) -> None:
        self._expire(i, "expire_at")

    def _expire(self, i: int, why: str) -> None:
        grant = self.grants.get(i)
        if grant is None:
            self.log.add(self.sched.now, self.mgr_node, "expire_skipped", session=i, why=why)
            return
        orders = self.manager.expire_session(grant.uid)
        if orders:
            self.expired_at[i] = self.sched.now
            self.log.add(self.sched.now, self.mgr_node, "expire", uid=uid_tag(grant.uid), why=why)
        for sid, msg in orders:
            self._send(self.mgr_node, sid, msg, partial(self._apply_expire, sid))

    def _apply_expire(self, sid: str, msg: ExpireMessage) -> None:
        w = self.index[sid]
        apply_expire(self.states[w], msg)
        self._rebuild(w)
        self.log.add(self.sched.now, sid, "expired", uid=uid_tag(msg.uid))

    def _refuse(self, i: int, reason: str) -> None:
        self.refused[i] = reason
        self.log.add(self.sched.now, self.scenario.sessions[i].client, "refused",
                     session=i, reason=reason)

    # -- tables --------------------------------------------------------------------

    def _load_session_keys(self, s: int, uid: bytes, pool, real_ip: IpAddress) -> None:
        if self.real[s] >= 0:
            return
        k0, k1 = split_key(uid)
        self.k0[s], self.k1[s] = k0, k1
        self.npool[s] = len(pool)
        ids = np.array([self.book.ids[a] for a in pool.addresses], np.int32)
        self.pool_ids[s, : len(ids)] = ids
        self.pos[s, ids] = np.arange(len(ids), dtype=np.int32)
        self.real[s] = self.book.ids[real_ip]

    def _rebuild(self, w: int) -> None:
        state = self.states[w]
        tab = self._empty_tables()
        known = [self.book.ids[a] for a in state.known_addresses()]
        tab.known[known] = True
        rows: dict[int, list[int]] = {}
        for sess in state:
            c = self.book.ids[sess.client_ip]
            if c not in rows:
                rows[c] = [self.uid_to_session[x.uid.value] for x in state.sessions_for(sess.client_ip)]
            s = self.uid_to_session[sess.uid.value]
            tab.live[s] = True
            ids = self.pool_ids[s, : int(self.npool[s])]
            free = tab.alias[ids] < 0
            tab.alias[ids[free]] = self.real[s]
            tab.alias_sess[ids[free]] = s
        depth = max((len(r) for r in rows.values()), default=0)
        tab.by_client = np.full((len(self.book), depth), -1, np.int32)
        for c, r in rows.items():
            tab.by_client[c, : len(r)] = r
        self.tables[w] = tab

    def _rebuild_client_table(self) -> None:
        rows: dict[int, list[int]] = {}
        for i in sorted(self.client_sessions, key=lambda j: (self.granted_at[j], j)):
            v = self.index[self.scenario.sessions[i].client]
            rows.setdefault(int(self.node_addr[v]), []).append(i)
        depth = max(len(r) for r in rows.values())
        self.client_table = np.full((len(self.book), depth), -1, np.int32)
        for c, r in rows.items():
            self.client_table[c, : len(r)] = r

    def _hop(self, s: np.ndarray, tsval: np.ndarray) -> np.ndarray:
        if len(s) <= SCALAR_BATCH:
            return np.array([siphash24_word(int(self.k0[j]), int(self.k1[j]), int(m)) % int(self.npool[j])
                             for j, m in zip(s, tsval)], np.int64)
        h = siphash24_words_keyed(self.k0[s], self.k1[s], tsval.astype(np.uint64))
        return (h % self.npool[s]).astype(np.int64)

    # -- data plane ----------------------------------------------------------------

    def _add_generator(self, g: _Generator) -> None:
        self.generators.append(g)
        self._schedule_tick(max(g.start, self.sched.now))

    def _schedule_tick(self, t: int) -> None:
        if t not in self.ticks:
            self.ticks.add(t)
            self.sched.at(t, self._tick, t, priority=DATA)

    def _count(self, counter: np.ndarray, b: np.ndarray, reason: Optional[int] = None) -> None:
        n = np.bincount(b["cls"], minlength=2)
        if reason is None:
            counter += n
        else:
            counter[:, reason] += n

    def _drop(self, t: int, node: int, b: np.ndarray, reason: int) -> None:
        if not len(b):
            return
        req = b["dir"] == P.REQUEST
        self._count(self.req_drop, b[req], reason)
        self._count(self.resp_drop, b[~req], reason)
        self.tick_stats["dropped"] = self.tick_stats.get("dropped", 0) + len(b)
        if self.scenario.log_packets:
            self._log_packets(t, node, "drop", b, reason=REASONS[reason])

    def _log_packets(self, t: int, node: int, action: str, b: np.ndarray, **extra) -> None:
        addrs = self.book.addresses
        for p in b:
            self.log.add(t, self.names[node], action, src=str(addrs[p["src"]]),
                         dst=str(addrs[p["dst"]]),
                         tsval=int(p["tsval"]) if p["has_ts"] else None,
                         cls=P.CLASSES[p["cls"]], dir=P.DIRECTIONS[p["dir"]], **extra)

    def _tick(self, t: int) -> None:
        self.ticks.discard(t)
        self.used[:] = 0
        self.tick_stats = {}
        arriving = P.concat(self.pending.pop(t, []))
        if len(arriving):
            self.tick_stats["arrived"] = len(arriving)
            self._arrive(t, arriving)
        fresh = []
        for g in self.generators:
            if t >= g.start and g.alive(t):
                b = self._emit(t, g)
                if b is not None and len(b):
                    fresh.append(b)
        if fresh:
            b = P.concat(fresh)
            if len(fresh) > 1:
                b = b[self.shuffle_rng.permutation(len(b))]
            self._route(t, b)
        if any(g.alive(t + 1) for g in self.generators):
            self._schedule_tick(t + 1)
        self.log.add(t, "net", "tick", **self.tick_stats)

    def _arrive(self, t: int, b: np.ndarray) -> None:
        at_switch = self.kind[b["at"]] == SWITCHER
        if at_switch.any():
            parts = [b[~at_switch]]
            sb = b[at_switch]
            for w in np.unique(sb["at"]):
                parts.append(self._switch(t, int(w), sb[sb["at"] == w]))
            b = P.concat(parts)
        self._route(t, b)

    def _route(self, t: int, b: np.ndarray) -> None:
        if not len(b):
            return
        at = b["at"]
        is_resp = b["dir"] == P.RESPONSE
        target = np.where(is_resp & (b["via"] >= 0), b["via"], self.owner[b["dst"]])
        local = target == at
        if local.any():
            self._deliver(t, b[local])
            b, at, target = b[~local], at[~local], target[~local]
        nh = np.where(target >= 0, self.nexthop[at, np.maximum(target, 0)], -1)
        lost = nh < 0
        if lost.any():
            for node in np.unique(at[lost]):
                self._drop(t, int(node), b[lost & (at == node)], NR)
            b, at, nh = b[~lost], at[~lost], nh[~lost]
        if not len(b):
            return
        key = self.linkkey[at, nh]
        ok = self.used[key] + _ranks(key) < self.capacity[key]
        if not ok.all():
            over = b[~ok]
            req = over["dir"] == P.REQUEST
            self._count(self.req_cong, over[req])
            self._count(self.resp_cong, over[~req])
            self.tick_stats["congested"] = self.tick_stats.get("congested", 0) + len(over)
            b, key, nh = b[ok], key[ok], nh[ok]
        self.used += np.bincount(key, minlength=len(self.used))
        for tap in self.taps:
            seen = tap.keys[key]
            if seen.any():
                s = b[seen]
                tap.chunks.append((s["src"].copy(), s["dst"].copy(), s["dir"].copy(),
                                   s["sess"].copy(), s["cls"].copy()))
        b = b.copy()
        b["at"] = nh
        arrive = t + self.latency[key]
        for when in np.unique(arrive):
            when = int(when)
            self.pending.setdefault(when, []).append(b[arrive == when])
            self._schedule_tick(when)

    def _deliver(self, t: int, b: np.ndarray) -> None:
        kinds = self.kind[b["at"]]
        is_req = b["dir"] == P.REQUEST
        serve = is_req & (kinds == SERVER)
        inbound = ~is_req & (kinds == CLIENT)
        other = ~serve & ~inbound
        if serve.any():
            self._serve(t, b[serve])
        if inbound.any():
            self._client_inbound(t, b[inbound])
        if other.any():
            for node in np.unique(b["at"][other]):
                self._drop(t, int(node), b[other & (b["at"] == node)], NR)

    # -- switcher hooks ------------------------------------------------------------

    def _switch(self, t: int, w: int, b: np.ndarray) -> np.ndarray:
        req = b["dir"] == P.REQUEST
        self.sw_ingress[w] += int(req.sum())
        pre = req & (b["via"] < 0)
        post = ~req & (b["via"] == w)
        parts = [b[~pre & ~post]]
        if pre.any():
            parts.append(self._pre_routing(t, w, b[pre]))
        if post.any():
            parts.append(self._post_routing(t, w, b[post]))
        return P.concat(parts)

    def verify_batch(self, w: int, b: np.ndarray):
        """Vectorized switcher verify for requests at switcher ``w``.

        Returns ``(code, match, nmatch)``: ``code`` is -1 for forward or a
        :data:`REASONS` index, ``match`` the first matching session and
        ``nmatch`` how many live candidates matched.
        """
        tab = self.tables[w]
        n = len(b)
        code = np.full(n, -1, np.int8)
        match = np.full(n, -1, np.int32)
        nmatch = np.zeros(n, np.int32)
        code[~b["has_ts"]] = MT
        code[(code < 0) & ~tab.known[b["dst"]]] = UD
        idx = np.flatnonzero(code < 0)
        if not len(idx):
            return code, match, nmatch
        src, dst = b["src"][idx], b["dst"][idx]
        ts = b["tsval"][idx]
        has_cand = np.zeros(len(idx), np.bool_)
        first = np.full(len(idx), -1, np.int32)
        count = np.zeros(len(idx), np.int32)
        for r in range(tab.by_client.shape[1]):
            s = tab.by_client[src, r]
            p = np.where(s >= 0, self.pos[np.maximum(s, 0), dst], -1)
            c = np.flatnonzero(p >= 0)
            if not len(c):
                continue
            has_cand[c] = True
            hit = c[self._hop(s[c], ts[c]) == p[c]]
            count[hit] += 1
            new = hit[first[hit] < 0]
            first[new] = s[new]
        code[idx[~has_cand]] = NS
        code[idx[has_cand & (first < 0)]] = HM
        match[idx] = first
        nmatch[idx] = count
        return code, match, nmatch

    def _pre_routing(self, t: int, w: int, b: np.ndarray) -> np.ndarray:
        if self.undefended:
            tab = self.tables[w]
            real = tab.alias[b["dst"]]
            hit = real >= 0
            b["match"] = np.where(hit, tab.alias_sess[b["dst"]], -1)
            b["dst"] = np.where(hit, real, b["dst"])
            b["via"] = w
            self.sw_fwd[w] += len(b)
            return b
        code, match, nmatch = self.verify_batch(w, b)
        self.states[w].collisions += int((nmatch > 1).sum())
        for reason in np.unique(code[code >= 0]):
            self._drop(t, w, b[code == reason], int(reason))
        ok = code < 0
        out = b[ok]
        out["match"] = match[ok]
        out["dst"] = self.real[match[ok]]
        out["via"] = w
        self.sw_fwd[w] += len(out)
        return out

    def _post_routing(self, t: int, w: int, b: np.ndarray) -> np.ndarray:
        b["via"] = -1
        if self.undefended:
            return b
        s = b["match"]
        live = (s >= 0) & self.tables[w].live[np.maximum(s, 0)]
        self._drop(t, w, b[~live], NS)
        b = b[live]
        no_ts = ~b["has_ts"]
        self._drop(t, w, b[no_ts], MT)
        b = b[~no_ts]
        s = b["match"]
        b["src"] = self.pool_ids[s, self._hop(s, b["tsval"])]
        return b

    # -- endpoints -----------------------------------------------------------------

    def _serve(self, t: int, b: np.ndarray) -> None:
        self._count(self.req_fwd, b)
        self.server_ingress += len(b)
        r = P.empty(len(b))
        r["src"], r["dst"] = b["dst"], b["src"]
        r["tsval"] = ((self.clock_offset[b["at"]] + t) & U32).astype(np.uint32)
        r["has_ts"] = True
        r["size"] = self.scenario.response_size_bytes
        for f in ("cls", "sess", "match", "via", "at"):
            r[f] = b[f]
        r["dir"] = P.RESPONSE
        r["born"] = t
        self._count(self.resp_inj, r)
        self.tick_stats["served"] = self.tick_stats.get("served", 0) + len(b)
        if self.scenario.log_packets:
            self._log_packets(t, int(b["at"][0]), "serve", b)
        self._route(t, r)

    def _client_inbound(self, t: int, b: np.ndarray) -> None:
        if self.undefended:
            self._count(self.resp_deliv, b)
            return
        no_ts = ~b["has_ts"]
        for node in np.unique(b["at"][no_ts]):
            self._drop(t, int(node), b[no_ts & (b["at"] == node)], MT)
        b = b[~no_ts]
        ok = np.zeros(len(b), np.bool_)
        for r in range(self.client_table.shape[1]):
            s = self.client_table[b["dst"], r]
            p = np.where(s >= 0, self.pos[np.maximum(s, 0), b["src"]], -1)
            c = np.flatnonzero((p >= 0) & ~ok)
            if len(c):
                ok[c[self._hop(s[c], b["tsval"][c]) == p[c]]] = True
        self._count(self.resp_deliv, b[ok])
        bad = b[~ok]
        for node in np.unique(bad["at"]):
            self._drop(t, int(node), bad[bad["at"] == node], SM)

    # -- traffic generators --------------------------------------------------------

    def _quota(self, g: _Generator) -> int:
        g.credit += g.rate
        n = int(g.credit)
        g.credit -= n
        if g.remaining is not None:
            n = min(n, g.remaining)
        return n

    def _emit(self, t: int, g: _Generator) -> Optional[np.ndarray]:
        if g.kind == "legit":
            return self._emit_legit(t, g)
        return self._emit_attack(t, g)

    def _emit_legit(self, t: int, g: _Generator) -> Optional[np.ndarray]:
        n = self._quota(g)
        if n <= 0:
            return None
        g.remaining = None if g.remaining is None else g.remaining - n
        s, spec = g.session, g.spec
        b = P.empty(n)
        b["src"] = self.node_addr[g.node]
        b["size"] = spec.size_bytes
        b["sess"] = s
        b["at"] = g.node
        b["born"] = t
        self.injected[P.LEGIT] += n
        self.tick_stats["legit"] = self.tick_stats.get("legit", 0) + n
        if not spec.timestamps:
            # outbound rewrite fails closed without a timestamp
            self._drop(t, g.node, b, MT)
            return None
        tsval = (int(self.clock_offset[g.node]) + t) & U32
        b["tsval"] = tsval
        b["has_ts"] = True
        if self.undefended:
            b["dst"] = self.real[s]
        else:
            cs = self.client_sessions[s]
            k = hop_index(cs.uid, tsval, len(cs.pool))
            b["dst"] = self.pool_ids[s, k]
            self.hist[s][k] += n
            self.draws[s][k] += 1
            last = self.last_hop[s]
            if last is not None and last[0] != tsval:
                self.hop_pairs[s] += 1
                self.hop_changes[s] += last[1] != k
            self.last_hop[s] = (tsval, k)
        if s in self.captures:
            self.captures[s].append(t, b)
        if self.scenario.log_packets:
            self._log_packets(t, g.node, "emit", b)
        return b

    def _emit_attack(self, t: int, g: _Generator) -> Optional[np.ndarray]:
        a, s = g.spec, g.session
        rng = self.rngs[self.names[g.node]]
        n = self._quota(g)
        if g.kind in ("exact_replay", "timestamp_shift_replay"):
            cap = self.captures[s]
            avail = cap.available(t)
            if avail == 0:
                return None
        if n <= 0:
            return None
        N = int(self.npool[s])
        b = P.empty(n)
        b["src"] = self.node_addr[self.index[self.scenario.sessions[s].client]]
        b["has_ts"] = True
        if g.kind == "random_pool_flood":
            b["dst"] = self.pool_ids[s, rng.integers(0, N, n)]
            b["tsval"] = rng.integers(0, 2**32, n, dtype=np.uint32)
        elif g.kind == "full_pool_flood":
            b["dst"] = self.pool_ids[s, (g.cursor + np.arange(n)) % N]
            b["tsval"] = rng.integers(0, 2**32, n, dtype=np.uint32)
            g.cursor = (g.cursor + n) % N
        elif g.kind == "spoofed_source_flood":
            b["src"] = self.spoof_base[g.node] + rng.integers(0, a.spoof_pool, n)
            b["dst"] = self.pool_ids[s, rng.integers(0, N, n)]
            b["tsval"] = rng.integers(0, 2**32, n, dtype=np.uint32)
        else:
            i = (g.cursor + np.arange(n)) % avail
            g.cursor = int((g.cursor + n) % avail)
            b["dst"] = cap.dst[i]
            b["has_ts"] = cap.has_ts[i]
            if g.kind == "exact_replay":
                b["tsval"] = cap.tsval[i]
            else:
                # each (capture, shift) pair is sent at most once
                k = cap.replayed[i] + _ranks(i) + 1
                np.add.at(cap.replayed, i, 1)
                b["tsval"] = ((cap.tsval[i].astype(np.int64) + a.tsval_shift * k) & U32)
        b["size"] = a.size_bytes
        b["cls"] = P.ATTACK
        b["sess"] = s
        b["at"] = g.node
        b["born"] = t
        if g.remaining is not None:
            g.remaining -= n
        self.injected[P.ATTACK] += n
        self.tick_stats["attack"] = self.tick_stats.get("attack", 0) + n
        forged = b["src"] != self.node_addr[g.node]
        if not a.spoofing_allowed and forged.any():
            self._drop(t, g.node, b[forged], IF)
            b = b[~forged]
        if self.scenario.log_packets:
            self._log_packets(t, g.node, "emit", b)
        return b

    # -- results -------------------------------------------------------------------

    def run(self, until: int) -> RunMetrics:
        """Advance to ``until`` (exclusive) and return the metrics so far."""
        self.sched.run(until)
        self.horizon = max(self.horizon, until)
        return self.metrics()

    def in_flight(self) -> np.ndarray:
        """[direction, class] counts of packets still on links."""
        out = np.zeros((2, 2), np.int64)
        for chunks in self.pending.values():
            for b in chunks:
                np.add.at(out, (b["dir"], b["cls"]), 1)
        return out

    def metrics(self) -> RunMetrics:
        fl = self.in_flight()
        cls = P.CLASSES

        def by_reason(row):
            return {r: int(row[k]) for k, r in enumerate(REASONS)}

        responses = {c: {"injected": int(self.resp_inj[k]), "delivered": int(self.resp_deliv[k]),
                         "dropped": by_reason(self.resp_drop[k]), "congestion": int(self.resp_cong[k]),
                         "in_flight": int(fl[P.RESPONSE, k])}
                     for k, c in enumerate(cls)}
        switchers = sorted(self.states)
        sessions = []
        for i, s in enumerate(self.scenario.sessions):
            grant = self.grants.get(i)
            sessions.append({
                "label": self.labels[i], "client": s.client, "service": s.service,
                "pool_size": self.scenario.session_pool_size(i),
                "granted_at": self.granted_at.get(i), "refused": self.refused.get(i),
                "expired_at": self.expired_at.get(i),
                "uid_tag": uid_tag(grant.uid) if grant else None,
            })
        return RunMetrics(
            horizon=self.horizon,
            injected={c: int(self.injected[k]) for k, c in enumerate(cls)},
            forwarded_legit=int(self.req_fwd[P.LEGIT]),
            forwarded_attack=int(self.req_fwd[P.ATTACK]),
            dropped_by_reason={c: by_reason(self.req_drop[k]) for k, c in enumerate(cls)},
            congestion_drops={c: int(self.req_cong[k]) for k, c in enumerate(cls)},
            in_flight={c: int(fl[P.REQUEST, k]) for k, c in enumerate(cls)},
            per_switcher_ingress={self.names[w]: int(self.sw_ingress[w]) for w in switchers},
            switcher_forwarded={self.names[w]: int(self.sw_fwd[w]) for w in switchers},
            server_ingress=int(self.server_ingress),
            responses=responses,
            dst_histogram={self.labels[i]: h.tolist() for i, h in enumerate(self.hist)},
            hop_draws={self.labels[i]: h.tolist() for i, h in enumerate(self.draws)},
            hop_change_rate={self.labels[i]: (float(self.hop_changes[i] / self.hop_pairs[i])
                                              if self.hop_pairs[i] else None)
                             for i in range(len(self.hist))},
            session_collisions=sum(st.collisions for st in self.states.values()),
            sessions=sessions,
        )


def build(scenario: Scenario) -> Simulation:
    return Simulation(scenario)


def run(sim: Simulation, until: Optional[int] = None) -> RunMetrics:
    """Run to ``until``, defaulting to the scenario horizon."""
    return sim.run(sim.scenario.horizon if until is None else until)
