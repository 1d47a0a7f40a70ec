"""Regenerate the bundled scenario files from the topology builder.

    python3 tools/make_scenarios.py

``minimal.yaml`` is hand-written and left alone.
"""

from pathlib import Path

import yaml

from fasthop.netsim.topology import standard_scenario

OUT = Path(__file__).resolve().parents[1] / "src" / "fasthop" / "scenarios"


def flood(kind, name, *, rate=200, duration=1000, start=20, attacker=None, **kw):
    a = {"node": "bot0", "kind": kind, "rate": rate, "target": 0, "start": start,
         "duration": duration}
    a.update(attacker or {})
    kw.setdefault("horizon", start + duration + 20)
    kw.setdefault("duration", start + duration - 10)
    return standard_scenario(name=name, bots=1, attackers=[a], build=False, **kw)


SCENARIOS = {
    "baseline_attack": (
        "Random-pool flood against one client's session, hopping on.",
        flood("random_pool_flood", "baseline_attack", rate=1000, checks=[
            {"metric": "derived.attack_pass_rate", "min": 0.0033, "max": 0.0045},
            {"metric": "derived.legit_drops", "max": 0},
        ])),
    "undefended_flood": (
        "The baseline flood with hopping off; compare against baseline_attack.",
        flood("random_pool_flood", "undefended_flood", rate=1000, undefended=True)),
    "zero_false_drops": (
        "100 legitimate sessions, 1000 packets each, no attackers.",
        standard_scenario(name="zero_false_drops", clients=100, count=1000, rate=1.0,
                          horizon=1030, build=False, checks=[
                              {"metric": "metrics.forwarded_legit", "min": 100000},
                              {"metric": "derived.legit_drops", "max": 0},
                          ])),
    "load_split": (
        "Full-pool flood over four switchers with equal address shares.",
        flood("full_pool_flood", "load_split", rate=400, duration=500, count=0, checks=[
            {"metric": "derived.switcher_max_min_ratio", "max": 1.2},
        ])),
    "unlinkability": (
        "Two services whose sessions share one pool, watched near the clients.",
        standard_scenario(name="unlinkability", clients=200, services=2, count=1000,
                          rate=1.0, horizon=1030, observers=["near_client"], build=False)),
    "exact_replay": (
        "Verbatim replay of captured packets; passes while the session lives.",
        flood("exact_replay", "exact_replay", rate=100)),
    "timestamp_shift_replay": (
        "Captured destinations replayed with shifted timestamps.",
        flood("timestamp_shift_replay", "timestamp_shift_replay", rate=100)),
    "spoofed_flood": (
        "Random spoofed sources; nothing matches a provisioned client.",
        flood("spoofed_source_flood", "spoofed_flood", rate=100)),
    "pool_sweep": (
        "Random-pool flood with 1024 inventory addresses, for pool_size sweeps.",
        flood("random_pool_flood", "pool_sweep", rate=200, inventory=256)),
}


def main() -> None:
    for name, (blurb, data) in SCENARIOS.items():
        text = yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)
        header = f"# {blurb}\n# Generated by tools/make_scenarios.py.\n"
        (OUT / f"{name}.yaml").write_text(header + text)
        print(f"wrote {name}.yaml")


if __name__ == "__main__":
    main()
