"""``fasthop`` command line.

Exit status: 0 on success, 1 on usage or configuration errors, 2 when
``--check`` finds a violated threshold.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from ..scenario import Scenario, ScenarioError, bundled_scenarios, load_scenario, with_overrides
from . import report as R

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fasthop", description="Simulate IP fast hopping scenarios.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one scenario and write its report")
    r.add_argument("scenario", help="YAML file or bundled scenario name")
    r.add_argument("--seed", type=int)
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--out", type=Path, help="directory for report and metrics table")
    r.add_argument("--check", action="store_true", help="exit 2 if a scenario check fails")
    r.add_argument("--event-log", type=Path)

    s = sub.add_parser("sweep", help="run a scenario once per parameter value")
    s.add_argument("scenario")
    s.add_argument("--param", required=True, metavar="KEY")
    s.add_argument("--values", required=True, metavar="V1,V2,...")
    s.add_argument("--seed", type=int)
    s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--out", type=Path)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--check", action="store_true")

    c = sub.add_parser("compare", help="contrast two reports from the same topology")
    c.add_argument("a", type=Path)
    c.add_argument("b", type=Path)
    c.add_argument("--json", action="store_true", help="print the comparison as JSON")

    sub.add_parser("list", help="list bundled scenarios")
    return p


def _overrides(args) -> list[str]:
    out = list(args.override)
    if args.seed is not None:
        out.append(f"seed={args.seed}")
    return out


def _stem(scenario: Scenario) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in scenario.name)


def _write(out: Path, stem: str, report: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.report.json").write_text(R.dumps(report))
    (out / f"{stem}.metrics.tsv").write_text(R.format_table(report))


def _summary(report: dict) -> str:
    m, d = report["metrics"], report["derived"]
    rate = d["attack_pass_rate"]
    return (f"{report['scenario']['name']}: injected legit={m['injected']['legit']} "
            f"attack={m['injected']['attack']} forwarded legit={m['forwarded_legit']} "
            f"attack={m['forwarded_attack']} server_ingress={m['server_ingress']} "
            f"attack_pass_rate={'-' if rate is None else f'{rate:.6g}'}")


def _failed(report: dict) -> list[dict]:
    return [c for c in report["checks"] if not c["ok"]]


def run_command(scenario, overrides: Sequence[str] = (), out: Optional[Path] = None,
                event_log: Optional[Path] = None) -> dict:
    """Load (if given a path or name), run with overrides and return the report."""
    source = None
    if not isinstance(scenario, Scenario):
        source = str(scenario)
        scenario = load_scenario(scenario)
    report = R.make_report(scenario, overrides, source=source,
                           event_log=str(event_log) if event_log else None)
    if out is not None:
        _write(out, _stem(scenario), report)
    return report


def _cmd_run(args) -> int:
    report = run_command(args.scenario, _overrides(args), args.out, args.event_log)
    if args.out is None:
        sys.stdout.write(R.dumps(report))
    print(_summary(report), file=sys.stderr)
    failed = _failed(report)
    for c in failed:
        print(f"check failed: {c['metric']} = {c['value']} (min={c['min']}, max={c['max']})",
              file=sys.stderr)
    return EXIT_CHECK if args.check and failed else EXIT_OK


def _sweep_member(job: tuple) -> dict:
    scenario, overrides, source = job
    return R.make_report(scenario, overrides, source=source)


def _cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    values = [v for v in args.values.split(",") if v]
    if not values:
        raise UsageError("--values needs at least one value")
    base = _overrides(args)
    jobs = [(scenario, base + [f"{args.param}={v}"], args.scenario) for v in values]
    # validate every member up front so a bad value fails before any run
    for _, ov, _ in jobs:
        with_overrides(scenario, ov)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_sweep_member, jobs))
    else:
        reports = [_sweep_member(j) for j in jobs]

    header = [args.param, "attack_pass_rate", "server_ingress", "forwarded_legit",
              "forwarded_attack", "legit_drops"]
    lines = ["\t".join(header)]
    for v, rep in zip(values, reports):
        d, m = rep["derived"], rep["metrics"]
        row = [v, d["attack_pass_rate"], m["server_ingress"], m["forwarded_legit"],
               m["forwarded_attack"], d["legit_drops"]]
        lines.append("\t".join("" if x is None else repr(x) if isinstance(x, float) else str(x)
                               for x in row))
    table = "\n".join(lines) + "\n"
    if args.out is not None:
        stem = _stem(scenario)
        for v, rep in zip(values, reports):
            _write(args.out, f"{stem}.{args.param}={v}", rep)
        (args.out / f"{stem}.sweep.tsv").write_text(table)
    sys.stdout.write(table)
    failed = [c for rep in reports for c in _failed(rep)]
    return EXIT_CHECK if args.check and failed else EXIT_OK


def _load_report(path: Path) -> dict:
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(str(path), f"cannot read report ({exc})") from None
    if not isinstance(data, dict) or data.get("format") != R.FORMAT:
        raise ScenarioError(str(path), "not a fasthop report")
    return data


def _cmd_compare(args) -> int:
    cmp = R.compare_reports(_load_report(args.a), _load_report(args.b))
    if args.json:
        sys.stdout.write(json.dumps(cmp, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(R.format_comparison(cmp))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _parser().parse_args(argv)
        if args.command == "list":
            for name in bundled_scenarios():
                print(name)
            return EXIT_OK
        handler = {"run": _cmd_run, "sweep": _cmd_sweep, "compare": _cmd_compare}[args.command]
        return handler(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, R.IncompatibleReports) as exc:
        print(f"fasthop: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
