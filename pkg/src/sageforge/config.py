"""Run configuration: TOML/JSON loading, schema validation, flag overrides.

Python 3.11+ parses TOML with the stdlib tomllib; on 3.10 a minimal reader
covers the subset these configs use (``[section]`` tables and scalar
``key = value`` lines with strings, ints, floats, and booleans).

Precedence: command-line flags > config file > defaults. Unknown sections or
keys are errors so typos fail loudly instead of silently using a default.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    tomllib = None


class ConfigError(ValueError):
    pass


_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.-]+)\]$")
_KEY_RE = re.compile(r"^([A-Za-z0-9_-]+)\s*=\s*(.+)$")


def _parse_scalar(raw: str):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw.startswith("'") and raw.endswith("'") and len(raw) >= 2:
        return raw[1:-1]
    if raw == "true":
        return True
    if raw == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse TOML value {raw!r}")


def _parse_toml_subset(text: str) -> dict:
    out: dict = {}
    section = out
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("#"):
            continue
        if "#" in stripped and '"' not in stripped and "'" not in stripped:
            stripped = stripped.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = _SECTION_RE.match(stripped)
        if m:
            section = out.setdefault(m.group(1), {})
            continue
        m = _KEY_RE.match(stripped)
        if not m:
            raise ConfigError(f"cannot parse TOML line {lineno}: {line!r}")
        section[m.group(1)] = _parse_scalar(m.group(2))
    return out


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return json.loads(text)
    if tomllib is not None:
        return tomllib.loads(text)
    return _parse_toml_subset(text)


TRAIN_SCHEMA: dict[str, set[str]] = {
    "data": {"input", "pairs", "lang", "holdout"},
    "tokenizer": {"path", "vocab_size", "placeholders"},
    "model": {"preset", "max_len", "dropout"},
    "train": {
        "steps", "warmup_steps", "batch_size", "base_lr", "weight_decay",
        "grad_clip", "eval_every", "checkpoint_every", "temperature",
        "init_checkpoint",
    },
    "mask": {"scheme", "rate", "dobf_mix"},
    "seq": {"max_len"},
}


def validate_schema(config: dict, schema: dict[str, set[str]]) -> None:
    for section, values in config.items():
        if section not in schema:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"section {section!r} must be a table")
        for key in values:
            if key not in schema[section]:
                raise ConfigError(f"unknown key {section}.{key!r}")


def merge_overrides(config: dict, overrides: dict[str, dict]) -> dict:
    """Apply flag overrides (already grouped by section) on top of the file."""
    merged = {k: dict(v) for k, v in config.items()}
    for section, values in overrides.items():
        target = merged.setdefault(section, {})
        for key, value in values.items():
            if value is not None:
                target[key] = value
    return merged
