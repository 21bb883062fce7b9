"""
Run configuration for the solver and the oracle.

Settings come from, in increasing precedence: the defaults below, an optional
YAML run file (``--config run.yml``), QES_* environment variables and finally
CLI flags. The run file is optional; everything works with zero configuration.
"""
from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any

import yaml  # type: ignore[import-untyped]
from yaml.nodes import MappingNode, SequenceNode  # type: ignore[import-untyped]

from core import oracle, solver
from core.assembler import PATH_AUTO, PATH_CHOICES
from core.model import VALID_MODES
from core.solver import SolverSettings

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Raised when a run file fails schema validation."""

    def __init__(self, path: Path, errors: list[str]) -> None:
        self.path = path
        self.errors = errors
        super().__init__("; ".join(errors))


# Solver defaults
DEFAULT_SEED = solver.DEFAULT_SEED
DEFAULT_TOL_ABS = solver.DEFAULT_TOL_ABS
DEFAULT_DEDUPE_TOL = solver.DEFAULT_DEDUPE_TOL
DEFAULT_NEWTON_STARTS = solver.DEFAULT_NEWTON_STARTS
DEFAULT_NEWTON_MAX_ITER = solver.DEFAULT_NEWTON_MAX_ITER
DEFAULT_WINDOW_CAP = 512
DEFAULT_THREADS = 1
DEFAULT_PATH = PATH_AUTO

# Oracle defaults
DEFAULT_GRID_POINTS = oracle.DEFAULT_GRID_POINTS
DEFAULT_PASS_THRESHOLD = oracle.DEFAULT_PASS_THRESHOLD
DEFAULT_FD_STATES = oracle.DEFAULT_N_STATES
DEFAULT_FD_METHOD = oracle.METHOD_THREE_POINT

DEFAULT_MODE: str | None = None
DEFAULT_BOUNDED_ONLY = False

_VALID_FD_METHODS = {oracle.METHOD_THREE_POINT, oracle.METHOD_NUMEROV}

# Tolerance presets (selected with `preset:` in a run file or --tolerances)
TOLERANCE_PRESETS: dict[str, dict[str, Any]] = {
    "strict": {
        "tol_abs": 1e-12,
        "dedupe_tol": 1e-11,
        "newton_starts": 128,
        "newton_max_iter": 200,
        "grid_points": 1601,
        "pass_threshold": 1e-9,
    },
    "default": {
        "tol_abs": DEFAULT_TOL_ABS,
        "dedupe_tol": DEFAULT_DEDUPE_TOL,
        "newton_starts": DEFAULT_NEWTON_STARTS,
        "newton_max_iter": DEFAULT_NEWTON_MAX_ITER,
        "grid_points": DEFAULT_GRID_POINTS,
        "pass_threshold": DEFAULT_PASS_THRESHOLD,
    },
    "loose": {
        "tol_abs": 1e-8,
        "dedupe_tol": 1e-7,
        "newton_starts": 16,
        "newton_max_iter": 60,
        "grid_points": 401,
        "pass_threshold": 1e-5,
    },
}


def get_preset_names() -> list[str]:
    return sorted(TOLERANCE_PRESETS.keys())


def get_preset_config(preset: str) -> dict[str, Any]:
    key = str(preset or "").strip().lower()
    if key not in TOLERANCE_PRESETS:
        raise ValueError(f"Unknown tolerance preset: {preset}")
    return dict(TOLERANCE_PRESETS[key])


def render_preset_yaml(preset: str) -> str:
    key = str(preset or "").strip().lower()
    if key not in TOLERANCE_PRESETS:
        raise ValueError(f"Unknown tolerance preset: {preset}")
    header = f"# qes-engine run file, tolerance preset: {key}\n\n"
    return header + yaml.safe_dump({"preset": key, **TOLERANCE_PRESETS[key]}, sort_keys=False)


def default_config() -> dict[str, Any]:
    return {
        "seed": DEFAULT_SEED,
        "tol_abs": DEFAULT_TOL_ABS,
        "dedupe_tol": DEFAULT_DEDUPE_TOL,
        "newton_starts": DEFAULT_NEWTON_STARTS,
        "newton_max_iter": DEFAULT_NEWTON_MAX_ITER,
        "window_cap": DEFAULT_WINDOW_CAP,
        "threads": DEFAULT_THREADS,
        "path": DEFAULT_PATH,
        "grid_points": DEFAULT_GRID_POINTS,
        "pass_threshold": DEFAULT_PASS_THRESHOLD,
        "fd_states": DEFAULT_FD_STATES,
        "fd_method": DEFAULT_FD_METHOD,
        "mode": DEFAULT_MODE,
        "bounded_only": DEFAULT_BOUNDED_ONLY,
    }


_POSITIVE_FLOATS = ("tol_abs", "dedupe_tol", "pass_threshold")
_POSITIVE_INTS = ("newton_starts", "newton_max_iter", "window_cap", "threads", "grid_points", "fd_states")
_ALLOWED_TOP_LEVEL_KEYS = set(default_config()) | {"preset"}


def _collect_line_map(node, prefix: str, line_map: dict[str, int]) -> None:
    if isinstance(node, MappingNode):
        for key_node, value_node in node.value:
            key = str(key_node.value)
            path = f"{prefix}.{key}" if prefix else key
            line_map[path] = int(key_node.start_mark.line) + 1
            _collect_line_map(value_node, path, line_map)
    elif isinstance(node, SequenceNode):
        for idx, item in enumerate(node.value):
            path = f"{prefix}[{idx}]" if prefix else f"[{idx}]"
            line_map[path] = int(item.start_mark.line) + 1
            _collect_line_map(item, path, line_map)


def _get_line(line_map: dict[str, int], path: str) -> str:
    line = line_map.get(path)
    return f"line {line}" if line else "line ?"


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _add_error(errors: list[str], line_map: dict[str, int], path: str, message: str) -> None:
    errors.append(f"{_get_line(line_map, path)} ({path}): {message}")


def _validate_config_data(data: Any, line_map: dict[str, int]) -> list[str]:
    errors: list[str] = []
    if data is None:
        return errors
    if not isinstance(data, dict):
        errors.append("line ? (root): Run file must be a mapping (key/value pairs).")
        return errors

    for key in data.keys():
        if key not in _ALLOWED_TOP_LEVEL_KEYS:
            _add_error(
                errors,
                line_map,
                str(key),
                "Unknown field. Allowed: " + ", ".join(sorted(_ALLOWED_TOP_LEVEL_KEYS)),
            )

    if "preset" in data and str(data["preset"]).lower() not in TOLERANCE_PRESETS:
        _add_error(errors, line_map, "preset", "Expected one of " + ", ".join(get_preset_names()) + ".")

    for key in _POSITIVE_FLOATS:
        if key not in data:
            continue
        if not _is_number(data[key]):
            _add_error(errors, line_map, key, "Expected a positive number.")
        elif data[key] <= 0:
            _add_error(errors, line_map, key, "Must be > 0.")

    for key in _POSITIVE_INTS:
        if key not in data:
            continue
        if not isinstance(data[key], int) or isinstance(data[key], bool):
            _add_error(errors, line_map, key, "Expected a positive integer.")
        elif data[key] <= 0:
            _add_error(errors, line_map, key, "Must be > 0.")

    if "seed" in data and (not isinstance(data["seed"], int) or isinstance(data["seed"], bool) or data["seed"] < 0):
        _add_error(errors, line_map, "seed", "Expected a non-negative integer.")
    if "path" in data and data["path"] not in PATH_CHOICES:
        _add_error(errors, line_map, "path", "Expected one of " + ", ".join(PATH_CHOICES) + ".")
    if "mode" in data and data["mode"] is not None and data["mode"] not in VALID_MODES:
        _add_error(errors, line_map, "mode", "Expected one of " + ", ".join(VALID_MODES) + ".")
    if "fd_method" in data and data["fd_method"] not in _VALID_FD_METHODS:
        _add_error(errors, line_map, "fd_method", "Expected one of " + ", ".join(sorted(_VALID_FD_METHODS)) + ".")
    if "bounded_only" in data and not isinstance(data["bounded_only"], bool):
        _add_error(errors, line_map, "bounded_only", "Expected true/false.")
    return errors


def _load_yaml_with_lines(raw: str) -> tuple[dict[str, Any], dict[str, int]]:
    line_map: dict[str, int] = {}
    if not raw.strip():
        return {}, line_map
    node = yaml.compose(raw)
    if node is not None:
        _collect_line_map(node, "", line_map)
    data = yaml.safe_load(raw) or {}
    return data, line_map


def _read_run_file(config_path: Path) -> dict[str, Any]:
    try:
        raw = config_path.read_text(encoding="utf-8", errors="replace")
        data, line_map = _load_yaml_with_lines(raw)
    except yaml.YAMLError as e:
        problem = getattr(e, "problem", "Invalid YAML")
        mark = getattr(e, "problem_mark", None)
        if mark is not None:
            msg = f"{problem} at line {mark.line + 1}, column {mark.column + 1}."
        else:
            msg = str(problem)
        raise ConfigError(config_path, [msg]) from e
    except OSError as e:
        raise ConfigError(config_path, [f"Failed to read run file: {e}"]) from e
    errors = _validate_config_data(data, line_map)
    if errors:
        raise ConfigError(config_path, errors)
    return data


def _env_override(config: dict[str, Any], name: str, key: str, cast: type) -> None:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return
    try:
        value = cast(raw.strip())
    except ValueError:
        logger.warning("Ignoring %s=%r: not a valid %s", name, raw, cast.__name__)
        return
    if value <= 0 and key != "seed":
        logger.warning("Ignoring %s=%r: must be > 0", name, raw)
        return
    config[key] = value


def load_config(config_path: Path | None = None) -> dict[str, Any]:
    """
    Resolve run settings.

    Environment variables override run-file values:
    - QES_THREADS
    - QES_SEED
    - QES_TOL_ABS
    - QES_GRID_POINTS
    - QES_WINDOW_CAP

    Args:
        config_path: Optional YAML run file

    Returns:
        Config dict with every key of default_config()

    Raises:
        ConfigError: if the run file is unreadable or fails validation.
    """
    config = default_config()
    if config_path is not None:
        data = _read_run_file(config_path)
        if "preset" in data:
            config.update(get_preset_config(str(data["preset"])))
        config.update({k: v for k, v in data.items() if k != "preset"})
        logger.debug("Loaded run file %s (%d keys)", config_path, len(data))

    _env_override(config, "QES_THREADS", "threads", int)
    _env_override(config, "QES_SEED", "seed", int)
    _env_override(config, "QES_TOL_ABS", "tol_abs", float)
    _env_override(config, "QES_GRID_POINTS", "grid_points", int)
    _env_override(config, "QES_WINDOW_CAP", "window_cap", int)
    return config


def to_solver_settings(config: dict[str, Any]) -> SolverSettings:
    return SolverSettings(
        tol_abs=float(config["tol_abs"]),
        dedupe_tol=float(config["dedupe_tol"]),
        newton_starts=int(config["newton_starts"]),
        newton_max_iter=int(config["newton_max_iter"]),
        seed=int(config["seed"]),
        threads=int(config["threads"]),
        window_cap=int(config["window_cap"]),
        path=str(config["path"]),
    )
