"""
qes-engine command line.

Subcommands:
  solve    solve a problem document or preset and write a solutions report
  verify   re-check a solutions report with the independent oracle
  sweep    solve a preset over a range of one parameter and write CSV rows
  catalog  list presets, print one as a problem document or its goldens
  config   write a YAML run file from a tolerance preset

Exit codes: 0 success, 1 verification failure, 2 input error, 3 no solution.
`solve` and `verify` both exit 1 as soon as any single record fails the oracle.
`solve --bounded-only` drops unbounded records before they are verified.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from core.assembler import AssemblyError
from core.catalog import CatalogError, Preset, describe, golden_values, preset, preset_names
from core.coeffseq import CoeffSeqError, Scalar, parse_scalar, scalar_to_json
from core.config import (
    ConfigError,
    get_preset_config,
    get_preset_names,
    load_config,
    render_preset_yaml,
    to_solver_settings,
)
from core.model import ProblemParseError, ProblemSpec, has_errors, load_problem, problem_to_json, validate
from core.observability import RunContext, configure_logging, log_run_event
from core.oracle import Grid, OracleError, VerificationReport, residual_check, write_profile_csv
from core.report import (
    ReportError,
    SweepRow,
    read_solutions,
    solutions_document,
    verification_document,
    write_solutions,
    write_sweep_csv,
    write_verification,
)
from core.solver import SolutionRecord, run_solver

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT = 2
EXIT_NO_SOLUTION = 3

DEFAULT_SWEEP_STEPS = 5

SWEEP_HELP = (
    "CSV columns: param, value, record (index within the sample), lambda, energy, "
    "window (lo:hi), fitted (name=value;...), residual_rel, bounded, passed."
)


class InputError(Exception):
    """Bad command-line input that is not caught by argparse."""


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _parse_params(items: list[str] | None) -> dict[str, str]:
    params: dict[str, str] = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name.strip() or not value.strip():
            raise InputError(f"--param expects NAME=VALUE, got {item!r}")
        params[name.strip()] = value.strip()
    return params


def _add_input_args(parser: argparse.ArgumentParser, allow_problem: bool = True) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    if allow_problem:
        source.add_argument("--problem", type=str, help="Path to a JSON problem document")
    source.add_argument("--preset", type=str, help="Catalog preset name")
    parser.add_argument("--param", action="append", metavar="NAME=VALUE", help="Preset parameter (repeatable)")
    parser.add_argument("--N", dest="order", type=int, default=None, help="Expansion order N")
    parser.add_argument("--mode", choices=("simple", "general"), default=None, help="Override the problem mode")


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="YAML run file")
    parser.add_argument("--tolerances", choices=get_preset_names(), default=None, help="Tolerance preset")
    parser.add_argument("--seed", type=int, default=None, help="Seed for Newton multi-start")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (QES_THREADS)")
    parser.add_argument("--grid-points", type=int, default=None, help="Oracle grid points")
    parser.add_argument("--pass-threshold", type=float, default=None, help="Oracle residual threshold")
    parser.add_argument("--log-level", default="WARNING", help="Logging level (default WARNING)")


def _resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    config = load_config(Path(args.config) if args.config else None)
    if args.tolerances:
        config.update(get_preset_config(args.tolerances))
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "grid_points": args.grid_points,
        "pass_threshold": args.pass_threshold,
        "mode": getattr(args, "mode", None),
    }
    if getattr(args, "bounded_only", False):
        overrides["bounded_only"] = True
    config.update({k: v for k, v in overrides.items() if v is not None})
    return config


def _load_input(args: argparse.Namespace, config: dict[str, Any]) -> tuple[ProblemSpec, Preset | None]:
    entry: Preset | None = None
    if getattr(args, "problem", None):
        if args.param:
            raise InputError("--param only applies to --preset")
        p = load_problem(Path(args.problem))
        if args.order is not None:
            p = p.with_order(args.order)
    else:
        entry = preset(args.preset, _parse_params(args.param), order=args.order)
        p = entry.spec
    if config.get("mode"):
        p = p.with_mode(config["mode"])
    return p, entry


def _check_problem(p: ProblemSpec) -> bool:
    diags = validate(p)
    for d in diags:
        if d.severity != "info":
            print(f"{d.severity}: [{d.code}] {d.message}", file=sys.stderr)
    return not has_errors(diags)


def _verify_record(
    p: ProblemSpec,
    record: SolutionRecord,
    config: dict[str, Any],
    with_spectrum: bool = False,
) -> VerificationReport:
    grid = Grid.for_problem(p, n_pts=int(config["grid_points"]))
    try:
        report = residual_check(
            p,
            record,
            grid,
            pass_threshold=float(config["pass_threshold"]),
            with_spectrum=with_spectrum,
            n_states=int(config["fd_states"]),
            fd_method=str(config["fd_method"]),
        )
    except OracleError as e:
        report = VerificationReport(
            residual_rel=math.inf,
            residual_rel_coarse=math.inf,
            residual_rel_fine=math.inf,
            node_count=0,
            bounded=None,
            passed=False,
            grid=grid.to_json(),
            notes=[f"oracle error: {e}"],
        )
    log_run_event(
        "verification_result",
        "pass" if report.passed else "fail",
        metadata={"E": record.energy, "residual_rel": report.residual_rel, "nodes": report.node_count},
    )
    return report


def _report_settings(config: dict[str, Any]) -> dict[str, Any]:
    keys = ("seed", "tol_abs", "dedupe_tol", "newton_starts", "newton_max_iter", "window_cap",
            "path", "grid_points", "pass_threshold", "bounded_only")
    return {k: config[k] for k in keys}


def _preset_info(entry: Preset | None) -> dict[str, Any] | None:
    if entry is None:
        return None
    return {
        "name": entry.name,
        "params": {k: None if v is None else scalar_to_json(v) for k, v in sorted(entry.params.items())},
        "provenance": entry.provenance,
    }


def _input_errors(run: Any) -> int:
    """Run a handler body, mapping input-side exceptions to exit code 2."""
    try:
        return run()
    except (ProblemParseError, ConfigError, ReportError) as e:
        print(f"error: {e.__class__.__name__}: {'; '.join(e.errors)}", file=sys.stderr)
    except (CatalogError, InputError, CoeffSeqError, AssemblyError) as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_INPUT


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _handle_solve(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="qes solve", description="Solve a quasi-exactly solvable problem and write a solutions report"
    )
    _add_input_args(parser)
    _add_run_args(parser)
    parser.add_argument("--output", type=str, default="solutions.json", help="Report path")
    parser.add_argument("--bounded-only", action="store_true", help="Drop records judged unbounded")
    parser.add_argument("--allow-empty", action="store_true", help="Exit 0 when no record is found")
    parser.add_argument("--no-verify", action="store_true", help="Skip the oracle")
    parser.add_argument("--spectrum", action="store_true", help="Cross-check energies with the FD spectrum")
    parser.add_argument("--csv-dir", type=str, default=None, help="Dump x, psi, residual per record")
    args = parser.parse_args(argv)
    configure_logging(getattr(logging, str(args.log_level).upper(), logging.WARNING))

    def run() -> int:
        config = _resolve_config(args)
        p, entry = _load_input(args, config)
        if not _check_problem(p):
            return EXIT_INPUT
        with RunContext():
            outcome = run_solver(p, to_solver_settings(config))
            if config["bounded_only"]:
                outcome.records = [r for r in outcome.records if r.bounded is not False]
            checks: list[VerificationReport] | None = None
            if not args.no_verify:
                checks = [_verify_record(p, r, config, with_spectrum=args.spectrum) for r in outcome.records]
            doc = solutions_document(p, outcome, _report_settings(config), checks, _preset_info(entry))
            write_solutions(Path(args.output), doc)
            if args.csv_dir:
                out_dir = Path(args.csv_dir)
                out_dir.mkdir(parents=True, exist_ok=True)
                grid = Grid.for_problem(p, n_pts=int(config["grid_points"]))
                for idx, record in enumerate(outcome.records):
                    write_profile_csv(out_dir / f"record_{idx:03d}.csv", p, record, grid)

        print(f"{len(outcome.records)} record(s), {len(outcome.failures)} rejected branch(es) -> {args.output}")
        for idx, record in enumerate(outcome.records):
            status = "" if checks is None else (" PASS" if checks[idx].passed else " FAIL")
            print(f"  [{idx}] E={scalar_to_json(record.energy)} lambda={scalar_to_json(record.lam)} "
                  f"window={list(record.window)}{status}")
        if not outcome.records:
            return EXIT_OK if args.allow_empty else EXIT_NO_SOLUTION
        if checks is not None and not all(c.passed for c in checks):
            return EXIT_VERIFY_FAILED
        return EXIT_OK

    return _input_errors(run)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _handle_verify(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="qes verify", description="Verify every record of a solutions report with the oracle"
    )
    parser.add_argument("report", type=str, help="Solutions report written by `solve`")
    _add_run_args(parser)
    parser.add_argument("--output", type=str, default="verification.json", help="Verification report path")
    parser.add_argument("--spectrum", action="store_true", help="Cross-check energies with the FD spectrum")
    parser.add_argument("--allow-empty", action="store_true", help="Exit 0 for a report without records")
    args = parser.parse_args(argv)
    configure_logging(getattr(logging, str(args.log_level).upper(), logging.WARNING))

    def run() -> int:
        config = _resolve_config(args)
        p, records = read_solutions(Path(args.report))
        with RunContext():
            reports = [_verify_record(p, r, config, with_spectrum=args.spectrum) for r in records]
            write_verification(Path(args.output), verification_document(p, records, reports, args.report))
        failed = [idx for idx, rep in enumerate(reports) if not rep.passed]
        print(f"{len(records) - len(failed)}/{len(records)} record(s) pass -> {args.output}")
        for idx in failed:
            print(f"  [{idx}] FAIL residual_rel={reports[idx].residual_rel:.3e} {'; '.join(reports[idx].notes)}")
        if not records:
            return EXIT_OK if args.allow_empty else EXIT_NO_SOLUTION
        return EXIT_VERIFY_FAILED if failed else EXIT_OK

    return _input_errors(run)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def sweep_values(spec: str) -> tuple[str, list[Scalar]]:
    """Parse NAME=START:STOP[:STEPS] into evenly spaced values (exact when possible)."""
    name, sep, rng = spec.partition("=")
    parts = rng.split(":")
    if not sep or not name.strip() or len(parts) not in (2, 3):
        raise InputError(f"--sweep expects NAME=START:STOP[:STEPS], got {spec!r}")
    start, stop = parse_scalar(parts[0].strip()), parse_scalar(parts[1].strip())
    try:
        steps = int(parts[2]) if len(parts) == 3 else DEFAULT_SWEEP_STEPS
    except ValueError as e:
        raise InputError(f"--sweep steps must be an integer, got {parts[2]!r}") from e
    if steps <= 1 or start == stop:
        return name.strip(), [start]
    span = stop - start
    if isinstance(span, Fraction):
        return name.strip(), [start + span * Fraction(i, steps - 1) for i in range(steps)]
    return name.strip(), [float(start) + float(span) * i / (steps - 1) for i in range(steps)]


def _handle_sweep(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="qes sweep",
        description="Solve a preset over one parameter range. " + SWEEP_HELP,
    )
    _add_input_args(parser, allow_problem=False)
    _add_run_args(parser)
    parser.add_argument("--sweep", required=True, metavar="NAME=START:STOP[:STEPS]", help="Swept parameter")
    parser.add_argument("--output", type=str, default="sweep.csv", help="CSV path")
    parser.add_argument("--bounded-only", action="store_true", help="Drop records judged unbounded")
    args = parser.parse_args(argv)
    configure_logging(getattr(logging, str(args.log_level).upper(), logging.WARNING))

    def run() -> int:
        config = _resolve_config(args)
        name, values = sweep_values(args.sweep)
        base = _parse_params(args.param)
        settings = to_solver_settings(config)
        rows: list[SweepRow] = []
        with RunContext():
            for value in values:
                entry = preset(args.preset, {**base, name: value}, order=args.order)
                p = entry.spec.with_mode(config["mode"]) if config.get("mode") else entry.spec
                if not _check_problem(p):
                    return EXIT_INPUT
                records = run_solver(p, settings).records
                if config["bounded_only"]:
                    records = [r for r in records if r.bounded is not False]
                for idx, record in enumerate(records):
                    check = _verify_record(p, record, config)
                    rows.append(SweepRow(
                        param=name,
                        value=value,
                        record=idx,
                        lam=record.lam,
                        energy=record.energy,
                        window=record.window,
                        fitted=dict(record.fitted_potential),
                        residual_rel=check.residual_rel,
                        bounded=record.bounded,
                        passed=check.passed,
                    ))
                log_run_event("sweep_sample", "ok", metadata={"param": name, "value": value, "records": len(records)})
        count = write_sweep_csv(Path(args.output), rows)
        print(f"{len(values)} sample(s), {count} row(s) -> {args.output}")
        return EXIT_OK if count else EXIT_NO_SOLUTION

    return _input_errors(run)


# ---------------------------------------------------------------------------
# catalog / config
# ---------------------------------------------------------------------------

def _handle_catalog(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(prog="qes catalog", description="List or show catalog presets")
    parser.add_argument("--show", type=str, default=None, help="Print the preset as a problem document")
    parser.add_argument("--goldens", type=str, default=None, help="Print the preset's golden values")
    parser.add_argument("--param", action="append", metavar="NAME=VALUE", help="Preset parameter (repeatable)")
    parser.add_argument("--N", dest="order", type=int, default=None, help="Expansion order N")
    args = parser.parse_args(argv)

    def run() -> int:
        if args.show:
            entry = preset(args.show, _parse_params(args.param), order=args.order)
            print(json.dumps(problem_to_json(entry.spec), indent=2, sort_keys=True))
            return EXIT_OK
        if args.goldens:
            entry = preset(args.goldens, _parse_params(args.param), order=args.order)
            out = [
                {"tag": g.tag, "order": g.order, "citation": g.citation, "derived": g.derived,
                 "values": golden_values(entry, g)}
                for g in entry.goldens
            ]
            print(json.dumps(out, indent=2, sort_keys=True))
            return EXIT_OK
        for row in describe():
            params = ", ".join(
                f"{p['name']}={p['default']}" if p["default"] is not None else p["name"] for p in row["params"]
            )
            print(f"{row['name']:<26} {row['provenance']}")
            print(f"{'':<26} params: {params or '-'}; goldens: {row['goldens']}")
        return EXIT_OK

    return _input_errors(run)


def _handle_config_init(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="qes config init", description="Write a YAML run file from a tolerance preset"
    )
    parser.add_argument("--preset", type=str, choices=get_preset_names(), default="default",
                        help="Tolerance preset (strict, default, loose)")
    parser.add_argument("--output", type=str, default="run.yml", help="Run file path")
    parser.add_argument("--force", action="store_true", help="Overwrite an existing run file")
    args = parser.parse_args(argv)

    out = Path(args.output)
    if out.exists() and not args.force:
        print(f"Run file already exists: {out}")
        print("Use --force to overwrite.")
        return EXIT_INPUT
    out.write_text(render_preset_yaml(args.preset), encoding="utf-8")
    print(f"Wrote {out} using preset '{args.preset}'.")
    return EXIT_OK


_USAGE = (
    "Usage: qes {solve|verify|sweep|catalog|config init} [options]\n"
    f"Presets: {', '.join(preset_names())}"
)


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(_USAGE)
        return EXIT_OK if argv else EXIT_INPUT

    command, rest = argv[0], argv[1:]
    if command == "config":
        if rest and rest[0] == "init":
            return _handle_config_init(rest[1:])
        print("Usage: qes config init [--preset strict|default|loose] [--output PATH] [--force]")
        return EXIT_INPUT
    handlers = {
        "solve": _handle_solve,
        "verify": _handle_verify,
        "sweep": _handle_sweep,
        "catalog": _handle_catalog,
    }
    handler = handlers.get(command)
    if handler is None:
        print(f"Unknown command: {command}\n{_USAGE}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return handler(rest)
    except SystemExit as e:
        # argparse errors exit with 2 already; --help exits with 0
        return int(e.code) if isinstance(e.code, int) else EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
