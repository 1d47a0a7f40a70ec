import copy

import pytest
import yaml

from fasthop.scenario import (
    ScenarioError,
    apply_override,
    bundled_scenarios,
    defaults_applied,
    from_dict,
    load_scenario,
    load_text,
    with_overrides,
)

MINIMAL = """
horizon: 100
nodes:
  - {id: auth, kind: auth_server, address: 198.51.100.53}
  - {id: mgr, kind: manager, address: 198.51.100.80}
  - {id: c, kind: client, address: 10.0.0.1}
  - {id: sw, kind: switcher, inventory_start: 203.0.113.0, inventory_size: 8}
  - {id: srv, kind: server}
links:
  - {a: c, b: sw}
  - {a: sw, b: srv}
services:
  - {name: web, server: srv, real_ip: 192.0.2.1, initial_ip: 100.64.0.1}
credentials:
  - {secret: pw}
sessions:
  - {client: c, service: web, credentials: pw, pool_size: 8}
"""


def data():
    return yaml.safe_load(MINIMAL)


def test_every_bundled_scenario_loads():
    names = bundled_scenarios()
    assert "baseline_attack" in names and len(names) >= 8
    for name in names:
        load_scenario(name)


def test_bundled_fingerprint_stable():
    a, b = load_scenario("baseline_attack"), load_scenario("baseline_attack")
    assert a.fingerprint() == b.fingerprint()
    assert len(a.fingerprint()) == 64
    assert a.topology_fingerprint() == load_scenario("undefended_flood").topology_fingerprint()
    assert a.fingerprint() != load_scenario("undefended_flood").fingerprint()


def test_load_from_path(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(MINIMAL)
    assert load_scenario(p).horizon == 100
    with pytest.raises(ScenarioError, match="not found"):
        load_scenario(tmp_path / "missing.yaml")


def test_missing_seed_defaults_to_zero_and_is_recorded():
    sc = load_text(MINIMAL)
    assert sc.seed == 0
    applied = defaults_applied(sc)
    assert "seed" in applied
    assert "links.0.capacity" in applied
    assert "sessions.0.rate" in applied
    assert "horizon" not in applied
    assert "sessions.0.pool_size" not in applied


def test_initial_ip_in_pool_names_field():
    d = data()
    d["nodes"][3] = {"id": "sw", "kind": "switcher", "inventory": ["203.0.113.1", "100.64.0.1"]}
    with pytest.raises(ScenarioError) as exc:
        from_dict(d)
    assert exc.value.path == "nodes[3].inventory"
    assert "initial_ip" in str(exc.value)


def test_unknown_key_is_error():
    d = data()
    d["sessions"][0]["rtae"] = 2
    with pytest.raises(ScenarioError) as exc:
        from_dict(d)
    assert exc.value.path == "sessions[0].rtae"


def test_parse_error_reports_line():
    with pytest.raises(ScenarioError, match="line 3, column 3"):
        load_text("horizon: 1\nnodes: [\n  - x: : y\n")


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d["nodes"].append({"id": "c", "kind": "client", "address": "10.0.0.9"}), "nodes[5].id"),
    (lambda d: d["links"].append({"a": "c", "b": "ghost"}), "links[2].b"),
    (lambda d: d["links"].append({"a": "c", "b": "mgr"}), "links[2].b"),
    (lambda d: d["links"].append({"a": "sw", "b": "c"}), "links[2]"),
    (lambda d: d["sessions"][0].update(pool_size=9), "sessions[0].pool_size"),
    (lambda d: d["sessions"][0].update(service="ftp"), "sessions[0].service"),
    (lambda d: d["nodes"][2].pop("address"), "nodes[2].address"),
    (lambda d: d["nodes"][1].update(kind="client"), "nodes"),
    (lambda d: d["services"][0].update(initial_ip="192.0.2.1"), "services[0].initial_ip"),
    (lambda d: d["nodes"][2].update(address="203.0.113.2"), "nodes[3].inventory[2]"),
    (lambda d: d.update(attackers=[{"node": "c", "kind": "random_pool_flood", "rate": 1}]),
     "attackers[0].node"),
    (lambda d: d.update(horizon=0), "horizon"),
    (lambda d: d["links"][0].update(capacity=0), "links[0].capacity"),
])
def test_validation_paths(mutate, path):
    d = data()
    mutate(d)
    with pytest.raises(ScenarioError) as exc:
        from_dict(d)
    assert exc.value.path == path


def test_override_sets_existing_field():
    sc = load_text(MINIMAL)
    out = with_overrides(sc, ["sessions.0.rate=0.5", "seed=9", "links.1.latency=3"])
    assert out.sessions[0].rate == 0.5 and out.seed == 9 and out.links[1].latency == 3
    assert sc.seed == 0


@pytest.mark.parametrize("bad", ["nope=1", "sessions.5.rate=1", "sessions.x.rate=1",
                                 "horizon.deep=1", "horizon"])
def test_override_rejects_bad_paths(bad):
    with pytest.raises(ScenarioError):
        with_overrides(load_text(MINIMAL), [bad])


def test_override_revalidates():
    with pytest.raises(ScenarioError) as exc:
        with_overrides(load_text(MINIMAL), ["sessions.0.pool_size=99"])
    assert exc.value.path == "sessions[0].pool_size"


def test_apply_override_parses_yaml_values():
    d = copy.deepcopy(load_text(MINIMAL).to_json())
    apply_override(d, "sessions.0.timestamps=false")
    apply_override(d, "services.0.name=shop")
    assert d["sessions"][0]["timestamps"] is False and d["services"][0]["name"] == "shop"
