"""Command-line runner: ``bosefock run | sweep | list-checks``.

Exit codes: 0 when every check passes, 1 when any check fails, 2 for
configuration or usage errors.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, axis_kind, load_config, parse_axis_values, with_value
from .reports import ANCHORS, CheckReport, write_report, write_series
from .suites import run_suites

OUTPUT_ENV = "BOSEFOCK_OUTPUT_DIR"


def output_dir(cfg: RunConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or cfg.output.directory)


def _meta(cfg: RunConfig, **extra) -> dict:
    return {"config": cfg.to_dict(), **extra}


def _emit(cfg: RunConfig, reports: list[CheckReport], out: Path) -> None:
    if "json" in cfg.output.formats:
        write_report(out / "report.json", reports, _meta(cfg))
    if "csv" in cfg.output.formats:
        for r in reports:
            if r.series:
                write_series(out / "series" / f"{_slug(r.name)}.csv", r.series_header, r.series)


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "._=-" else "_" for c in name).strip("_")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    reports = run_suites(cfg)
    for r in reports:
        print(r.line())
    _emit(cfg, reports, output_dir(cfg))
    return 0 if all(r.passed for r in reports) else 1


def monotone_verdict(values: list[float]) -> str:
    pairs = list(zip(values, values[1:]))
    if not pairs:
        return "single"
    if all(b < a for a, b in pairs):
        return "decreasing"
    if all(b > a for a, b in pairs):
        return "increasing"
    if all(b == a for a, b in pairs):
        return "constant"
    return "non-monotone"


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    kind = axis_kind(cfg, args.axis)
    values = parse_axis_values(args.values, kind)
    names: list[str] = []
    rows, all_pass, flat = [], True, []
    for v in values:
        reports = run_suites(with_value(cfg, args.axis, v))
        by_name = {}
        for r in reports:
            if r.name not in names:
                names.append(r.name)
            by_name[r.name] = r.value
            r.params = {**r.params, "sweep": {args.axis: v}}
            all_pass = all_pass and bool(r.passed)
            print(f"{args.axis}={v} {r.line()}")
        flat.extend(reports)
        rows.append((v, by_name))
    header = [args.axis] + names
    table = [[v] + [vals.get(n, "") for n in names] for v, vals in rows]
    verdicts = [monotone_verdict([vals[n] for _, vals in rows if n in vals]) for n in names]
    table.append(["verdict"] + verdicts)
    for n, verdict in zip(names, verdicts):
        print(f"verdict {n}: {verdict}")
    out = output_dir(cfg)
    write_series(out / "series" / f"sweep_{_slug(args.axis)}.csv", header, table)
    if "json" in cfg.output.formats:
        write_report(out / "report.json", flat,
                     _meta(cfg, sweep={"axis": args.axis, "values": values,
                                       "verdicts": dict(zip(names, verdicts))}))
    return 0 if all_pass else 1


def cmd_list_checks(args) -> int:
    for name, anchor in ANCHORS.items():
        print(f"{name} → {anchor}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bosefock", description="Truncated Fock-space check runner.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the suites listed in a config")
    run.add_argument("config")
    run.set_defaults(func=cmd_run)
    sw = sub.add_parser("sweep", help="rerun a config over values of one numeric key")
    sw.add_argument("config")
    sw.add_argument("--axis", required=True, help="dotted key, e.g. trap.L")
    sw.add_argument("--values", required=True, help="comma-separated list, e.g. 2,4,8,16")
    sw.set_defaults(func=cmd_sweep)
    ls = sub.add_parser("list-checks", help="print the suite registry")
    ls.set_defaults(func=cmd_list_checks)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors already exit with 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
