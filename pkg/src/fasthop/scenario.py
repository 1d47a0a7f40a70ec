"""Scenario schema, loading and validation.

Scenarios are YAML documents. Unknown keys are errors. See
``docs/scenario_schema.md`` for the field reference; the bundled files
under ``fasthop/scenarios/`` are working examples.
"""

from __future__ import annotations

import copy
import hashlib
import json
from collections import Counter
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .hopper_core import IpAddress
from .hopper_core.types import ConfigurationError

NodeKind = Literal["client", "bot", "router", "switcher", "server",
                   "manager", "auth_server", "observer"]
AttackKind = Literal["random_pool_flood", "full_pool_flood", "exact_replay",
                     "timestamp_shift_replay", "spoofed_source_flood"]
Vantage = Literal["near_client", "near_server"]


class ScenarioError(ValueError):
    """Invalid scenario; ``path`` points at the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NodeSpec(_Model):
    id: str
    kind: NodeKind
    address: Optional[str] = None
    # switchers: virtual address inventory, explicit or as a contiguous range
    inventory: list[str] = []
    inventory_start: Optional[str] = None
    inventory_size: int = Field(0, ge=0)
    # observers: tapped links and vantage label
    tap: list[tuple[str, str]] = []
    vantage: Optional[Vantage] = None


class LinkSpec(_Model):
    a: str
    b: str
    capacity: int = Field(1_000_000, ge=1)  # packets per ms, each direction
    latency: int = Field(1, ge=1)           # ms


class ServiceSpec(_Model):
    name: str
    server: str
    real_ip: str
    initial_ip: str
    subscribed: bool = True


class CredentialSpec(_Model):
    secret: str
    services: Optional[list[str]] = None


class SessionSpec(_Model):
    client: str
    service: str
    credentials: str
    pool_size: Optional[int] = Field(None, ge=1)
    start: int = Field(0, ge=0)           # handshake begins
    rate: float = Field(1.0, ge=0)        # packets per ms once granted
    count: Optional[int] = Field(None, ge=0)
    duration: Optional[int] = Field(None, ge=0)
    size_bytes: int = Field(512, ge=1)
    timestamps: bool = True
    expire_at: Optional[int] = Field(None, ge=0)


class AttackerSpec(_Model):
    node: str
    kind: AttackKind
    rate: float = Field(..., ge=0)
    target: int = Field(0, ge=0)          # index into sessions
    start: int = Field(0, ge=0)
    duration: Optional[int] = Field(None, ge=0)
    count: Optional[int] = Field(None, ge=0)
    spoofing_allowed: bool = True
    size_bytes: int = Field(64, ge=1)
    tsval_shift: int = Field(1, ge=1)
    spoof_pool: int = Field(256, ge=1)


class CheckSpec(_Model):
    metric: str
    min: Optional[float] = None
    max: Optional[float] = None


class Scenario(_Model):
    name: str = "scenario"
    seed: int = 0
    horizon: int = Field(..., ge=1)
    pool_size: int = Field(256, ge=1)
    undefended: bool = False
    control_latency: int = Field(1, ge=1)
    session_lifetime: int = Field(3_600_000, ge=1)
    response_size_bytes: int = Field(1024, ge=1)
    log_packets: bool = False
    nodes: list[NodeSpec]
    links: list[LinkSpec] = []
    services: list[ServiceSpec] = []
    credentials: list[CredentialSpec] = []
    sessions: list[SessionSpec] = []
    attackers: list[AttackerSpec] = []
    checks: list[CheckSpec] = []

    # -- derived helpers ------------------------------------------------------

    def node(self, node_id: str) -> NodeSpec:
        return next(n for n in self.nodes if n.id == node_id)

    def inventory_of(self, node: NodeSpec) -> list[IpAddress]:
        addrs = [IpAddress.parse(a) for a in node.inventory]
        if node.inventory_start is not None:
            start = IpAddress.parse(node.inventory_start)
            addrs += [start.offset(i) for i in range(node.inventory_size)]
        return addrs

    def session_pool_size(self, i: int) -> int:
        return self.sessions[i].pool_size or self.pool_size

    def to_json(self) -> dict:
        return self.model_dump(mode="json")

    def fingerprint(self) -> str:
        return _digest(self.to_json())

    def topology_fingerprint(self) -> str:
        data = self.to_json()
        return _digest({k: data[k] for k in ("nodes", "links", "services")})


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# -- validation ------------------------------------------------------------------

def _addr(path: str, text: Optional[str]) -> IpAddress:
    try:
        return IpAddress.parse(text)
    except ConfigurationError as exc:
        raise ScenarioError(path, f"invalid address {text!r} ({exc})") from None


def validate(sc: Scenario) -> Scenario:
    """Cross-field checks pydantic cannot express. Raises ScenarioError."""
    ids: dict[str, int] = {}
    for i, n in enumerate(sc.nodes):
        if n.id in ids:
            raise ScenarioError(f"nodes[{i}].id", f"duplicate node id {n.id!r}")
        ids[n.id] = i
    kinds = Counter(n.kind for n in sc.nodes)
    for k in ("manager", "auth_server"):
        if kinds[k] != 1:
            raise ScenarioError("nodes", f"exactly one {k} node required, found {kinds[k]}")

    owned: dict[IpAddress, str] = {}

    def claim(path: str, addr: IpAddress) -> None:
        if addr in owned:
            raise ScenarioError(path, f"address {addr} already used at {owned[addr]}")
        owned[addr] = path

    for i, n in enumerate(sc.nodes):
        p = f"nodes[{i}]"
        if n.kind in ("client", "bot", "manager", "auth_server") and n.address is None:
            raise ScenarioError(f"{p}.address", f"{n.kind} node {n.id!r} needs an address")
        if n.address is not None:
            claim(f"{p}.address", _addr(f"{p}.address", n.address))
        if n.kind == "switcher":
            for j, a in enumerate(n.inventory):
                _addr(f"{p}.inventory[{j}]", a)
            if n.inventory_start is not None:
                _addr(f"{p}.inventory_start", n.inventory_start)
            if not sc.inventory_of(n):
                raise ScenarioError(f"{p}.inventory", f"switcher {n.id!r} has no virtual addresses")
        elif n.inventory or n.inventory_start is not None or n.inventory_size:
            raise ScenarioError(f"{p}.inventory", "only switchers carry an inventory")
        if n.kind == "observer":
            if not n.tap:
                raise ScenarioError(f"{p}.tap", "observer must tap at least one link")
            if n.vantage is None:
                raise ScenarioError(f"{p}.vantage", "observer needs a vantage")
        elif n.tap or n.vantage is not None:
            raise ScenarioError(f"{p}.tap", "only observers tap links")

    passive = {"observer", "manager", "auth_server"}
    seen_links: set[frozenset] = set()
    for i, link in enumerate(sc.links):
        for end in ("a", "b"):
            nid = getattr(link, end)
            if nid not in ids:
                raise ScenarioError(f"links[{i}].{end}", f"unknown node {nid!r}")
            if sc.nodes[ids[nid]].kind in passive:
                raise ScenarioError(f"links[{i}].{end}",
                                    f"{sc.nodes[ids[nid]].kind} nodes are not on the data path")
        if link.a == link.b:
            raise ScenarioError(f"links[{i}]", "self loop")
        key = frozenset((link.a, link.b))
        if key in seen_links:
            raise ScenarioError(f"links[{i}]", f"duplicate link {link.a}-{link.b}")
        seen_links.add(key)
    for i, n in enumerate(sc.nodes):
        for j, (a, b) in enumerate(n.tap):
            if frozenset((a, b)) not in seen_links:
                raise ScenarioError(f"nodes[{i}].tap[{j}]", f"no link {a}-{b}")

    names: set[str] = set()
    service_addrs: dict[IpAddress, str] = {}
    for i, s in enumerate(sc.services):
        p = f"services[{i}]"
        if s.name in names:
            raise ScenarioError(f"{p}.name", f"duplicate service {s.name!r}")
        names.add(s.name)
        if s.server not in ids or sc.nodes[ids[s.server]].kind != "server":
            raise ScenarioError(f"{p}.server", f"{s.server!r} is not a server node")
        real = _addr(f"{p}.real_ip", s.real_ip)
        initial = _addr(f"{p}.initial_ip", s.initial_ip)
        if real == initial:
            raise ScenarioError(f"{p}.initial_ip", "initial_ip must differ from real_ip")
        server_addr = sc.nodes[ids[s.server]].address
        if server_addr is None or _addr("", server_addr) != real:
            claim(f"{p}.real_ip", real)
        claim(f"{p}.initial_ip", initial)
        service_addrs[real] = f"real_ip of service {s.name!r}"
        service_addrs[initial] = f"initial_ip of service {s.name!r}"

    total_inventory = 0
    for i, n in enumerate(sc.nodes):
        if n.kind != "switcher":
            continue
        inv = sc.inventory_of(n)
        total_inventory += len(inv)
        for j, a in enumerate(inv):
            field = f"nodes[{i}].inventory"
            if a in service_addrs:
                raise ScenarioError(field, f"pool address {a} is the {service_addrs[a]}")
            claim(f"{field}[{j}]", a)

    for i, c in enumerate(sc.credentials):
        for j, name in enumerate(c.services or ()):
            if name not in names:
                raise ScenarioError(f"credentials[{i}].services[{j}]", f"unknown service {name!r}")

    for i, s in enumerate(sc.sessions):
        p = f"sessions[{i}]"
        if s.client not in ids or sc.nodes[ids[s.client]].kind != "client":
            raise ScenarioError(f"{p}.client", f"{s.client!r} is not a client node")
        if s.service not in names:
            raise ScenarioError(f"{p}.service", f"unknown service {s.service!r}")
        if sc.session_pool_size(i) > total_inventory:
            raise ScenarioError(f"{p}.pool_size" if s.pool_size else "pool_size",
                                f"pool of {sc.session_pool_size(i)} exceeds inventory {total_inventory}")

    for i, a in enumerate(sc.attackers):
        p = f"attackers[{i}]"
        if a.node not in ids or sc.nodes[ids[a.node]].kind != "bot":
            raise ScenarioError(f"{p}.node", f"{a.node!r} is not a bot node")
        if a.target >= len(sc.sessions):
            raise ScenarioError(f"{p}.target", f"no session #{a.target}")
        if a.kind == "spoofed_source_flood" and not a.spoofing_allowed:
            raise ScenarioError(f"{p}.spoofing_allowed",
                                "spoofed_source_flood requires spoofing_allowed: true")
    return sc


def _wrap(exc: ValidationError) -> ScenarioError:
    err = exc.errors()[0]
    path = ""
    for part in err["loc"]:
        path += f"[{part}]" if isinstance(part, int) else (f".{part}" if path else str(part))
    return ScenarioError(path, err["msg"])


def from_dict(data: dict) -> Scenario:
    try:
        sc = Scenario.model_validate(data)
    except ValidationError as exc:
        raise _wrap(exc) from None
    return validate(sc)


# -- overrides --------------------------------------------------------------------

def apply_override(data: dict, assignment: str) -> None:
    """Apply ``a.b.0.c=value`` to a fully defaulted scenario dict in place.
    The value is parsed as YAML; the path must already exist."""
    if "=" not in assignment:
        raise ScenarioError(assignment, "override must look like key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node: Any = data
    for depth, part in enumerate(parts):
        here = ".".join(parts[:depth + 1])
        last = depth == len(parts) - 1
        if isinstance(node, list):
            if not part.isdigit() or int(part) >= len(node):
                raise ScenarioError(here, "no such list element")
            idx: Union[int, str] = int(part)
        elif isinstance(node, dict):
            if part not in node:
                raise ScenarioError(here, "no such field")
            idx = part
        else:
            raise ScenarioError(here, "cannot descend into a scalar")
        if last:
            node[idx] = yaml.safe_load(raw)
        else:
            node = node[idx]


def with_overrides(sc: Scenario, overrides: Iterable[str]) -> Scenario:
    overrides = list(overrides)
    if not overrides:
        return sc
    data = copy.deepcopy(sc.to_json())
    for o in overrides:
        apply_override(data, o)
    return from_dict(data)


# -- defaults echo ----------------------------------------------------------------

def defaults_applied(sc: BaseModel, prefix: str = "") -> list[str]:
    """Dotted paths of every field that took its default value."""
    out = []
    for name in type(sc).model_fields:
        path = f"{prefix}{name}"
        value = getattr(sc, name)
        if name not in sc.model_fields_set:
            out.append(path)
        elif isinstance(value, BaseModel):
            out += defaults_applied(value, path + ".")
        elif isinstance(value, list):
            for i, item in enumerate(value):
                if isinstance(item, BaseModel):
                    out += defaults_applied(item, f"{path}.{i}.")
    return out


# -- loading ----------------------------------------------------------------------

def bundled_scenarios() -> list[str]:
    root = resources.files("fasthop") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _read(path: Union[str, Path]) -> tuple[str, str]:
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    name = str(path)
    if name in bundled_scenarios():
        res = resources.files("fasthop") / "scenarios" / f"{name}.yaml"
        return res.read_text(), f"<bundled:{name}>"
    raise ScenarioError("", f"scenario file not found: {path}")


def load_text(text: str, source: str = "<string>") -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ScenarioError(source, f"parse error at {where}: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ScenarioError(source, "scenario must be a mapping")
    return from_dict(data)


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load a scenario file, or a bundled scenario by name."""
    text, source = _read(path)
    return load_text(text, source)
