"""
Structured logging and run ids.

Every CLI command runs inside a RunContext; log lines carry its id and run
events are emitted as single JSON lines. Event metadata is limited to counts,
names, tolerances and numeric outcomes. Nothing here writes to report files.
"""
from __future__ import annotations

import json
import logging
import uuid
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Optional

import numpy as np

LOG_FORMAT = "%(asctime)s [%(levelname)s] [%(run_id)s] %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

_run_id: Optional[str] = None

logger = logging.getLogger(__name__)


class RunIDFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        record.run_id = _run_id or "no-run"
        return True


def configure_logging(level: int = logging.INFO) -> None:
    """Install the run-id format on the root handlers (idempotent)."""
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt=LOG_DATEFMT)
    root = logging.getLogger()
    root.setLevel(level)
    for handler in root.handlers:
        if not any(isinstance(f, RunIDFilter) for f in handler.filters):
            handler.addFilter(RunIDFilter())


class RunContext:
    """Context manager scoping one run id."""

    def __init__(self, run_id: Optional[str] = None):
        self.run_id = run_id or str(uuid.uuid4())
        self.old_id: Optional[str] = None

    def __enter__(self) -> RunContext:
        global _run_id
        self.old_id = _run_id
        _run_id = self.run_id
        return self

    def __exit__(self, *args: Any) -> None:
        global _run_id
        _run_id = self.old_id


def current_run_id() -> Optional[str]:
    return _run_id


def _json_safe(obj: Any) -> Any:
    """Exact scalars become "p/q" strings, numpy values plain Python."""
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def log_run_event(
    action: str,
    result: str,
    *,
    run_id: Optional[str] = None,
    metadata: Optional[dict[str, Any]] = None,
    level: int = logging.INFO,
) -> None:
    """
    Emit one structured run event as a JSON line.

    Actions used by the engine: solve_started, branch_rejected,
    record_emitted, verification_result, sweep_sample.
    """
    rid = run_id or _run_id or "no-run"
    event = {
        "type": "run",
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "run_id": rid,
        "action": str(action),
        "result": str(result),
        "metadata": _json_safe(metadata or {}),
    }
    logger.log(level, json.dumps(event, ensure_ascii=False, sort_keys=True))
