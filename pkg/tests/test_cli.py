import json

import pytest

from fasthop.cli import main, run_command
from fasthop.cli.report import compare_reports, flatten, format_table, parse_table, stable

FAST = ["attackers.0.duration=300", "horizon=340", "sessions.0.duration=300"]


def read(path):
    return json.loads(path.read_text())


def test_override_zeroes_attack(tmp_path):
    r = run_command("baseline_attack", ["attackers.0.rate=0"] + FAST)
    m = r["metrics"]
    assert m["injected"]["attack"] == m["forwarded_attack"] == 0
    assert sum(m["dropped_by_reason"]["attack"].values()) == 0
    assert r["derived"]["attack_pass_rate"] is None


def test_run_writes_report_and_table(tmp_path):
    assert main(["run", "minimal", "--out", str(tmp_path), "--event-log",
                 str(tmp_path / "events.jsonl")]) == 0
    report = read(tmp_path / "minimal.report.json")
    table = parse_table((tmp_path / "minimal.metrics.tsv").read_text())
    assert table == flatten(report)
    assert table["metrics.forwarded_legit"] == report["metrics"]["forwarded_legit"] == 100
    assert "seed" in report["defaults_applied"]
    assert report["seed"] == 0
    assert (tmp_path / "events.jsonl").read_text().count("\n") > 10


def test_reports_are_reproducible(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "baseline_attack", "--out", str(tmp_path / d)]
                    + [x for o in FAST for x in ("--override", o)]) == 0
    a, b = (read(tmp_path / d / "baseline_attack.report.json") for d in ("a", "b"))
    assert json.dumps(stable(a), sort_keys=True) == json.dumps(stable(b), sort_keys=True)
    assert ((tmp_path / "a" / "baseline_attack.metrics.tsv").read_bytes()
            == (tmp_path / "b" / "baseline_attack.metrics.tsv").read_bytes())


def test_table_round_trips_floats_exactly():
    r = run_command("timestamp_shift_replay", FAST)
    back = parse_table(format_table(r))
    assert back == flatten(r)
    assert back["derived.attack_pass_rate"] == r["derived"]["attack_pass_rate"]
    assert isinstance(back["metrics.server_ingress"], int)


def test_seed_flag_changes_fingerprint(tmp_path, capsys):
    assert main(["run", "minimal", "--seed", "5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["seed"] == 5
    assert report["fingerprint"] != run_command("minimal")["fingerprint"]


def test_sweep_pool_size_decreasing(tmp_path, capsys):
    args = ["sweep", "pool_sweep", "--param", "pool_size", "--values", "16,64,256,1024",
            "--out", str(tmp_path), "--override", "attackers.0.duration=500"]
    assert main(args) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5
    rates = [float(line.split("\t")[1]) for line in lines[1:]]
    assert all(a > b for a, b in zip(rates, rates[1:]))
    assert len(list(tmp_path.glob("pool_sweep.pool_size=*.report.json"))) == 4
    assert (tmp_path / "pool_sweep.sweep.tsv").exists()


def test_sweep_jobs_matches_serial(tmp_path, capsys):
    base = ["sweep", "minimal", "--param", "seed", "--values", "1,2"]
    assert main(base + ["--out", str(tmp_path / "serial")]) == 0
    assert main(base + ["--out", str(tmp_path / "parallel"), "--jobs", "2"]) == 0
    for v in (1, 2):
        name = f"minimal.seed={v}.report.json"
        assert (stable(read(tmp_path / "serial" / name))
                == stable(read(tmp_path / "parallel" / name)))


def test_compare_self_is_zero(tmp_path, capsys):
    main(["run", "minimal", "--out", str(tmp_path)])
    p = str(tmp_path / "minimal.report.json")
    assert main(["compare", p, p, "--json"]) == 0
    cmp = json.loads(capsys.readouterr().out)
    assert all(r["delta"] in (0, None) for r in cmp["rows"].values())


def test_compare_different_topologies_fails(tmp_path):
    main(["run", "minimal", "--out", str(tmp_path / "a")])
    main(["run", "baseline_attack", "--out", str(tmp_path / "b")]
         + [x for o in FAST for x in ("--override", o)])
    code = main(["compare", str(tmp_path / "a" / "minimal.report.json"),
                 str(tmp_path / "b" / "baseline_attack.report.json")])
    assert code == 1


def test_defended_vs_undefended_gap():
    und = run_command("undefended_flood", FAST)
    dfd = run_command("baseline_attack", FAST)
    cmp = compare_reports(und, dfd)
    ratio = cmp["rows"]["forwarded_attack"]["ratio"]
    assert 256 / 1.5 < ratio < 256 * 1.5
    assert cmp["rows"]["forwarded_legit"]["delta"] == 0


@pytest.mark.parametrize("argv", [
    [], ["bogus"], ["run"], ["sweep", "minimal"], ["run", "minimal", "--seed", "x"],
    ["run", "no-such-scenario"], ["run", "minimal", "--override", "nope=1"],
    ["run", "minimal", "--override", "horizon=-4"],
    ["sweep", "minimal", "--param", "pool_size", "--values", "4,99"],
])
def test_usage_and_config_errors_exit_1(argv, capsys):
    assert main(argv) == 1


def test_check_violation_exits_2(capsys):
    assert main(["run", "minimal", "--check", "--override", "checks.0.min=1000"]) == 2
    assert main(["run", "minimal", "--override", "checks.0.min=1000"]) == 0
    assert main(["run", "minimal", "--check"]) == 0


def test_bad_report_file(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{}")
    assert main(["compare", str(p), str(p)]) == 1


def test_list(capsys):
    assert main(["list"]) == 0
    assert "baseline_attack" in capsys.readouterr().out.split()
