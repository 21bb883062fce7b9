"""
Report files.

Solution and verification reports are versioned JSON documents written with
sorted keys and no timestamps, so identical inputs and seed give identical
bytes. Each report embeds the resolved problem document and can be fed back
into ``verify`` on its own.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from core.coeffseq import scalar_to_json
from core.model import ProblemParseError, ProblemSpec, parse_problem, problem_to_json
from core.oracle import VerificationReport
from core.solver import SolutionRecord, SolveOutcome

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
KIND_SOLUTIONS = "solutions"
KIND_VERIFICATION = "verification"

SWEEP_COLUMNS = (
    "param",
    "value",
    "record",
    "lambda",
    "energy",
    "window",
    "fitted",
    "residual_rel",
    "bounded",
    "passed",
)


class ReportError(Exception):
    """Raised for unreadable or malformed report files."""

    def __init__(self, path: Path | str, errors: list[str]) -> None:
        self.path = path
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass
class SweepRow:
    param: str
    value: Any
    record: int
    lam: Any
    energy: Any
    window: tuple[int, int]
    fitted: dict[str, Any] = field(default_factory=dict)
    residual_rel: float | None = None
    bounded: bool | None = None
    passed: bool | None = None

    def as_csv(self) -> dict[str, str]:
        fitted = ";".join(f"{k}={scalar_to_json(v)}" for k, v in sorted(self.fitted.items()))
        return {
            "param": self.param,
            "value": str(scalar_to_json(self.value)),
            "record": str(self.record),
            "lambda": str(scalar_to_json(self.lam)),
            "energy": str(scalar_to_json(self.energy)),
            "window": f"{self.window[0]}:{self.window[1]}",
            "fitted": fitted,
            "residual_rel": "" if self.residual_rel is None else f"{self.residual_rel:.6e}",
            "bounded": "" if self.bounded is None else str(self.bounded).lower(),
            "passed": "" if self.passed is None else str(self.passed).lower(),
        }


def _dump(path: Path, doc: Mapping[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def solutions_document(
    p: ProblemSpec,
    outcome: SolveOutcome,
    settings: Mapping[str, Any],
    verification: Iterable[VerificationReport | None] | None = None,
    preset: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    checks = list(verification) if verification is not None else [None] * len(outcome.records)
    records = []
    for record, check in zip(outcome.records, checks):
        entry = record.to_json()
        entry["verification"] = None if check is None else check.to_json()
        records.append(entry)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": KIND_SOLUTIONS,
        "seed": outcome.seed,
        "settings": dict(settings),
        "preset": None if preset is None else dict(preset),
        "problem": problem_to_json(p),
        "windows": [list(w) for w in outcome.windows],
        "records": records,
        "failures": [f.to_json() for f in outcome.failures],
    }


def write_solutions(path: Path, doc: Mapping[str, Any]) -> None:
    _dump(path, doc)
    logger.info("Wrote %d record(s) to %s", len(doc.get("records", [])), path)


def verification_document(
    p: ProblemSpec,
    records: list[SolutionRecord],
    reports: list[VerificationReport],
    source: str,
) -> dict[str, Any]:
    results = [
        {
            "record": idx,
            "lambda": scalar_to_json(record.lam),
            "energy": scalar_to_json(record.energy),
            "verification": report.to_json(),
        }
        for idx, (record, report) in enumerate(zip(records, reports))
    ]
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": KIND_VERIFICATION,
        "source": source,
        "problem": problem_to_json(p),
        "results": results,
        "passed": all(r.passed for r in reports),
    }


def write_verification(path: Path, doc: Mapping[str, Any]) -> None:
    _dump(path, doc)
    logger.info("Wrote verification of %d record(s) to %s", len(doc.get("results", [])), path)


def read_solutions(path: Path) -> tuple[ProblemSpec, list[SolutionRecord]]:
    """
    Load a solutions report for re-verification.

    Raises:
        ReportError: for unreadable files, unknown schema versions or bad records.
    """
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ReportError(path, [f"cannot read file: {e}"]) from e
    except json.JSONDecodeError as e:
        raise ReportError(path, [f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"]) from e
    if not isinstance(doc, dict):
        raise ReportError(path, ["report must be a JSON object"])
    if doc.get("kind") != KIND_SOLUTIONS:
        raise ReportError(path, [f"expected a {KIND_SOLUTIONS} report, got kind={doc.get('kind')!r}"])
    if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ReportError(path, [f"unsupported schema_version {doc.get('schema_version')!r}"])
    try:
        p = parse_problem(doc.get("problem"), source=f"{path}:problem")
    except ProblemParseError as e:
        raise ReportError(path, e.errors) from e
    records: list[SolutionRecord] = []
    errors: list[str] = []
    for idx, entry in enumerate(doc.get("records") or []):
        try:
            records.append(SolutionRecord.from_json(entry))
        except (KeyError, TypeError, ValueError) as e:
            errors.append(f"records[{idx}]: {e}")
    if errors:
        raise ReportError(path, errors)
    return p, records


def write_sweep_csv(path: Path, rows: Iterable[SweepRow]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(SWEEP_COLUMNS), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_csv())
            count += 1
    logger.info("Wrote %d sweep row(s) to %s", count, path)
    return count
