"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``python3 -m pytest tests/test_acceptance.py -v``; the
collected lines are repeated in the terminal summary.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from fasthop.cli.report import dumps, make_report, stable
from fasthop.hopper_core import SessionUid, hop_index
from fasthop.netsim import build, flood_scenario, homogeneity, observer_report, run, uniformity
from fasthop.scenario import bundled_scenarios, load_scenario

DATA = Path(__file__).parent / "data"
RESULTS: list[str] = []


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title} | {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


def test_criterion_1_prf_vectors():
    start = time.perf_counter()
    rows = [line.split("\t") for line in (DATA / "hop_vectors.tsv").read_text().splitlines()
            if line and not line.startswith("#")]
    bad = [r for r in rows
           if hop_index(SessionUid.fromhex(r[0]), int(r[1]), int(r[2])) != int(r[3])]
    elapsed = time.perf_counter() - start
    verdict(1, "hop_index matches SipHash-2-4 reference vectors",
            len(rows) >= 8 and not bad and elapsed < 1.0,
            f"{len(rows) - len(bad)}/{len(rows)} vectors match in {elapsed * 1000:.1f} ms")


def test_criterion_2_zero_false_drops():
    sc = load_scenario("zero_false_drops")
    assert len(sc.sessions) == 100
    m = run(build(sc))
    drops = (sum(sum(v.values()) for v in m.dropped_by_reason.values())
             + sum(m.congestion_drops.values())
             + sum(sum(r["dropped"].values()) + r["congestion"] for r in m.responses.values()))
    verdict(2, "no legitimate packet dropped",
            m.forwarded_legit == 100_000 and drops == 0 and m.injected["attack"] == 0,
            f"sessions=100 forwarded_legit={m.forwarded_legit} drops={drops}")


def _flood_rate(N: int, packets: int = 1_000_000, rate: int = 1000):
    sc = flood_scenario("random_pool_flood", pool_size=N, attack_rate=rate,
                        attack_duration=packets // rate, count=0, inventory=max(64, N // 4))
    m = run(build(sc))
    assert m.resolved("attack") == packets
    return m.forwarded_attack / packets, m


def test_criterion_3_one_over_n_law():
    start = time.perf_counter()
    rates, ok, parts = [], True, []
    for N in (16, 256, 1024):
        r, _ = _flood_rate(N)
        within = abs(r - 1 / N) <= 3 * sigma(1 / N, 1_000_000)
        ok &= within
        rates.append(r)
        parts.append(f"N={N} rate={r:.6f} expect={1 / N:.6f}±{3 * sigma(1 / N, 1_000_000):.6f}")
    decreasing = all(a > b for a, b in zip(rates, rates[1:]))
    elapsed = time.perf_counter() - start
    verdict(3, "random-pool flood passes at 1/N", ok and decreasing and elapsed < 60,
            "; ".join(parts) + f"; decreasing={decreasing}; {elapsed:.1f}s")


def test_criterion_4_load_splitting():
    start = time.perf_counter()
    N, rate, duration = 256, 400, 500
    sc = flood_scenario("full_pool_flood", pool_size=N, attack_rate=rate,
                        attack_duration=duration, count=0)
    m = run(build(sc))
    ingress = m.per_switcher_ingress
    spread = max(ingress.values()) / min(ingress.values())
    injected = m.injected["attack"]
    share = m.server_ingress / injected
    tol = 3 * sigma(1 / N, injected)
    elapsed = time.perf_counter() - start
    verdict(4, "full-pool flood splits over K=4 switchers",
            len(ingress) == 4 and spread <= 1.2 and abs(share - 1 / N) <= tol
            and injected >= 100_000 and elapsed < 60,
            f"ingress={ingress} max/min={spread:.4f} server_ingress/attack={share:.6f} "
            f"expect={1 / N:.6f}±{tol:.6f}")


def test_criterion_5_hop_cadence():
    from fasthop.netsim import standard_scenario
    sc = standard_scenario(count=10_000, rate=1.0, horizon=10_050)
    m = run(build(sc))
    rate = m.hop_change_rate["0:c0->svc-a"]
    verdict(5, "destination changes with each new timestamp",
            m.forwarded_legit == 10_000 and rate >= 1 - 2 / 256,
            f"change frequency={rate:.5f} threshold={1 - 2 / 256:.5f}")


def test_criterion_6_unlinkability():
    sc = load_scenario("unlinkability")
    sim = build(sc)
    run(sim)
    pools = {sim.scenario.sessions[i].service: tuple(sim.grants[i].pool.addresses)
             for i in sorted(sim.grants)}
    shared = len(set(pools.values())) == 1 and len(pools) == 2
    rep = observer_report(sim, "near_client")
    a, b = (np.array(rep.services[s]) for s in ("svc-a", "svc-b"))
    p_pair = homogeneity(a, b)
    p_a, p_b = uniformity(a)[1], uniformity(b)[1]
    verdict(6, "two services on one pool look alike near the client",
            shared and len(a) == 256 and a.sum() == b.sum() == 100_000
            and min(p_pair, p_a, p_b) > 0.001,
            f"shared_pool={shared} packets={a.sum()}/{b.sum()} pairwise p={p_pair:.4f} "
            f"uniform p={p_a:.4f}/{p_b:.4f}")


def test_criterion_7_replay_characterization():
    exact = run(build(load_scenario("exact_replay")))
    shifted = run(build(load_scenario("timestamp_shift_replay")))
    N = 256
    n = shifted.resolved("attack")
    r_exact = exact.attack_pass_rate()
    r_shift = shifted.attack_pass_rate()
    tol = 3 * sigma(1 / N, n)
    verdict(7, "exact replay passes, shifted replay is filtered",
            exact.resolved("attack") > 0 and r_exact == 1.0 and abs(r_shift - 1 / N) <= tol,
            f"exact={r_exact:.4f} ({exact.forwarded_attack}/{exact.resolved('attack')}) "
            f"shifted={r_shift:.6f} expect={1 / N:.6f}±{tol:.6f}")


def test_criterion_8_determinism():
    names = bundled_scenarios()
    differing = []
    for name in names:
        sc = load_scenario(name)
        if dumps(stable(make_report(sc))) != dumps(stable(make_report(sc))):
            differing.append(name)
    verdict(8, "equal seeds give byte-identical reports", not differing,
            f"{len(names) - len(differing)}/{len(names)} bundled scenarios identical"
            + (f"; differing: {differing}" if differing else ""))


def test_criterion_9_defended_vs_undefended():
    undefended = run(build(load_scenario("undefended_flood")))
    defended = run(build(load_scenario("baseline_attack")))
    N = 256
    bound = undefended.server_ingress / (N / 2)
    verdict(9, "hopping cuts server ingress under flood",
            defended.server_ingress <= bound,
            f"undefended={undefended.server_ingress} defended={defended.server_ingress} "
            f"bound={bound:.1f} factor={undefended.server_ingress / defended.server_ingress:.1f}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
