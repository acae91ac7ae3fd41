"""Flat key/value configuration with flag > environment > file precedence."""

from __future__ import annotations

import os
from pathlib import Path

ENV_PREFIX = "MATHCORPUS_"


class ConfigError(ValueError):
    pass


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse "key = value" lines; blanks and "#" comments are skipped.

    Values are plain strings; relative paths in them are the caller's
    business (the CLI resolves them against the config file's directory).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    values: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{line_no}: expected key = value")
        values[key.strip()] = value.strip()
    return values


def env_key(name: str) -> str:
    return ENV_PREFIX + name.upper().replace(".", "_").replace("-", "_")


def resolve_setting(
    name: str,
    flag_value: str | None = None,
    config: dict[str, str] | None = None,
    default: str | None = None,
    environ: dict[str, str] | None = None,
) -> str | None:
    """Pick one setting: explicit flag, then environment, then config file."""
    if flag_value is not None:
        return flag_value
    env = os.environ if environ is None else environ
    if env_key(name) in env:
        return env[env_key(name)]
    if config and name in config:
        return config[name]
    return default
