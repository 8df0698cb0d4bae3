"""Run configuration: defaults < YAML file < environment < command-line flags."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Mapping

import yaml

ENV_PREFIX = "LOSTATSEA_"

DEFAULTS: dict = {
    "provider": "stub",
    "model": "stub",
    "endpoint": "",
    "api_key_env": "LLM_API_KEY",
    "temperature": 1.0,
    "max_tokens": 1024,
    "timeout": 60.0,
    "parallelism": 1,
    "max_attempts": 3,
    "backoff": 1.0,
    "reask_limit": 3,
    "alignment_baseline": 0.25,
    "significance": 0.01,
    "max_items": 6,
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _coerce(name: str, value, source: str):
    default = DEFAULTS[name]
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(
            f"{source}: field {name!r}: expected {type(default).__name__}, got {value!r}"
        ) from None


def _read_file(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: parse error at {where}: {getattr(exc, 'problem', exc)}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected key-value pairs at the top level")
    return doc


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    flags: Mapping | None = None,
) -> dict:
    env = os.environ if env is None else env
    merged = dict(DEFAULTS)
    if path is not None:
        for k, v in _read_file(path).items():
            if k not in DEFAULTS:
                raise ConfigError(f"{path}: field {k!r}: unknown setting")
            merged[k] = _coerce(k, v, str(path))
    for k in DEFAULTS:
        var = ENV_PREFIX + k.upper()
        if var in env:
            merged[k] = _coerce(k, env[var], f"environment {var}")
    for k, v in (flags or {}).items():
        if v is None:
            continue
        if k not in DEFAULTS:
            raise ConfigError(f"flag {k!r}: unknown setting")
        merged[k] = _coerce(k, v, "command line")
    if not 0 < merged["temperature"] <= 2:
        raise ConfigError(f"field 'temperature': must lie in (0, 2], got {merged['temperature']}")
    if merged["parallelism"] < 1:
        raise ConfigError("field 'parallelism': must be at least 1")
    if not 0 < merged["alignment_baseline"] < 1:
        raise ConfigError("field 'alignment_baseline': must lie in (0, 1)")
    return merged


def config_digest(config: Mapping, inputs: Mapping[str, str] = ()) -> str:
    payload = json.dumps({"config": dict(config), "inputs": dict(inputs)}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
