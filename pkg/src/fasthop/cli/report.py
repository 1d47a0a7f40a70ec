"""Run reports: assembly, flat metric tables, comparison and checks."""

from __future__ import annotations

import json
import math
import time
from typing import Any, Iterable, Optional, Union

from ..netsim import RunMetrics, build, observer_report, uniformity
from ..scenario import Scenario, ScenarioError, defaults_applied, with_overrides

FORMAT = "fasthop-report/1"
# excluded from determinism comparisons
VOLATILE = ("run_wallclock",)


def derived(m: RunMetrics) -> dict[str, Any]:
    """Ratios recomputable from the raw counters in ``m``."""
    total_ingress = sum(m.per_switcher_ingress.values())
    ingress = list(m.per_switcher_ingress.values())
    resolved_attack = m.resolved("attack")
    legit = m.injected["legit"]
    p_values = {}
    for label, hist in m.hop_draws.items():
        p_values[label] = uniformity(hist)[1]
    return {
        "attack_pass_rate": m.attack_pass_rate(),
        "server_ingress_per_attack": m.server_ingress / resolved_attack if resolved_attack else None,
        "legit_delivery_rate": m.forwarded_legit / legit if legit else None,
        "legit_goodput": m.responses["legit"]["delivered"],
        "per_switcher_share": {k: (v / total_ingress if total_ingress else None)
                               for k, v in m.per_switcher_ingress.items()},
        "switcher_max_min_ratio": (max(ingress) / min(ingress)
                                   if ingress and min(ingress) > 0 else None),
        "uniformity_p_value": p_values,
        "conservation": all(m.conservation().values()),
        "legit_drops": m.legit_drops(),
        "total_congestion_drops": sum(m.congestion_drops.values()),
    }


def make_report(scenario: Scenario, overrides: Iterable[str] = (),
                source: Optional[str] = None, event_log: Optional[str] = None) -> dict:
    """Build, run and summarize ``scenario`` with ``overrides`` applied.

    The defaults list is taken before overrides (a re-validated model has
    every field explicitly set).
    """
    overrides = list(overrides)
    defaults = defaults_applied(scenario)
    effective = with_overrides(scenario, overrides)
    started = time.perf_counter()
    sim = build(effective)
    metrics = sim.run(effective.horizon)
    wallclock = time.perf_counter() - started
    if event_log:
        sim.log.write(event_log)
    observers = {}
    for vantage in sorted({t.vantage for t in sim.taps}):
        observers[vantage] = observer_report(sim, vantage).to_dict()
    report = {
        "format": FORMAT,
        "source": source,
        "scenario": effective.to_json(),
        "defaults_applied": defaults,
        "overrides": overrides,
        "seed": effective.seed,
        "fingerprint": effective.fingerprint(),
        "topology_fingerprint": effective.topology_fingerprint(),
        "metrics": metrics.to_dict(),
        "derived": derived(metrics),
        "observers": observers,
        "run_wallclock": round(wallclock, 6),
    }
    report["checks"] = evaluate_checks(report, effective.checks)
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def stable(report: dict) -> dict:
    """``report`` without the fields allowed to differ between equal runs."""
    return {k: v for k, v in report.items() if k not in VOLATILE}


# -- metric paths -------------------------------------------------------------------

def lookup(report: dict, path: str) -> Any:
    node: Any = report
    for part in path.split("."):
        if isinstance(node, dict) and part in node:
            node = node[part]
        elif isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        else:
            raise ScenarioError(path, "no such metric in report")
    return node


def evaluate_checks(report: dict, checks) -> list[dict]:
    out = []
    for c in checks:
        value = lookup(report, c.metric)
        if value is not None and not isinstance(value, (int, float)):
            raise ScenarioError(c.metric, "check target is not a number")
        ok = value is not None
        if ok and c.min is not None:
            ok = value >= c.min
        if ok and c.max is not None:
            ok = value <= c.max
        out.append({"metric": c.metric, "min": c.min, "max": c.max, "value": value, "ok": ok})
    return out


# -- flat table -----------------------------------------------------------------------

TABLE_SECTIONS = ("metrics", "derived", "observers")


def flatten(report: dict) -> dict[str, Union[int, float]]:
    """Every numeric leaf under the measurement sections, by dotted path.

    Booleans become 0/1 and missing values (``None``) are left out.
    """
    rows: dict[str, Union[int, float]] = {}

    def walk(prefix: str, node: Any) -> None:
        if isinstance(node, dict):
            for k in sorted(node):
                walk(f"{prefix}.{k}", node[k])
        elif isinstance(node, list):
            for i, v in enumerate(node):
                walk(f"{prefix}.{i}", v)
        elif isinstance(node, bool):
            rows[prefix] = int(node)
        elif isinstance(node, (int, float)):
            rows[prefix] = node

    for section in TABLE_SECTIONS:
        walk(section, report.get(section, {}))
    return rows


def format_table(report: dict) -> str:
    lines = ["metric\tvalue"]
    for k, v in flatten(report).items():
        lines.append(f"{k}\t{v!r}")
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> dict[str, Union[int, float]]:
    rows = {}
    body = text.splitlines()
    if not body or body[0] != "metric\tvalue":
        raise ValueError("not a metrics table")
    for line in body[1:]:
        if not line:
            continue
        key, raw = line.split("\t")
        rows[key] = float(raw) if any(ch in raw for ch in ".einf") else int(raw)
    return rows


# -- comparison -------------------------------------------------------------------------

COMPARED = (
    ("server_ingress", "metrics.server_ingress"),
    ("forwarded_legit", "metrics.forwarded_legit"),
    ("forwarded_attack", "metrics.forwarded_attack"),
    ("legit_goodput", "derived.legit_goodput"),
    ("congestion_drops", "derived.total_congestion_drops"),
    ("legit_drops", "derived.legit_drops"),
    ("attack_pass_rate", "derived.attack_pass_rate"),
)


class IncompatibleReports(ValueError):
    pass


def compare_reports(a: dict, b: dict) -> dict:
    """Side-by-side deltas of ``b`` relative to ``a``.

    Both must come from the same topology; ``ratio`` is a/b, so comparing
    an undefended run (a) with a defended one (b) shows the defense gain.
    """
    if a.get("topology_fingerprint") != b.get("topology_fingerprint"):
        raise IncompatibleReports(
            f"topology fingerprints differ: {a.get('topology_fingerprint')} "
            f"vs {b.get('topology_fingerprint')}")
    rows = {}
    for name, path in COMPARED:
        va, vb = lookup(a, path), lookup(b, path)
        delta = None if va is None or vb is None else vb - va
        ratio = None
        if va is not None and vb:
            ratio = va / vb
        rows[name] = {"a": va, "b": vb, "delta": delta, "ratio": ratio}
    return {
        "a": {"fingerprint": a["fingerprint"], "undefended": a["scenario"]["undefended"]},
        "b": {"fingerprint": b["fingerprint"], "undefended": b["scenario"]["undefended"]},
        "topology_fingerprint": a["topology_fingerprint"],
        "rows": rows,
    }


def format_comparison(cmp: dict) -> str:
    def cell(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.6g}" if math.isfinite(v) else str(v)
        return str(v)

    label = {True: "undefended", False: "defended"}
    head = (f"{'metric':<20} {'a (' + label[cmp['a']['undefended']] + ')':>16} "
            f"{'b (' + label[cmp['b']['undefended']] + ')':>16} {'delta':>12} {'a/b':>10}")
    lines = [head]
    for name, r in cmp["rows"].items():
        lines.append(f"{name:<20} {cell(r['a']):>16} {cell(r['b']):>16} "
                     f"{cell(r['delta']):>12} {cell(r['ratio']):>10}")
    return "\n".join(lines) + "\n"
