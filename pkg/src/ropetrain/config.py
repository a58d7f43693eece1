"""Config file handling. Precedence everywhere: flags > environment > file.

The config file is a flat rope.toml-style key-value text:

    bundles = "/path/to/bundles"
    backend = "mock"
    model = "gpt-4o"
    base_url = "https://api.example.com/v1"
    cassette = "run.cassette.jsonl"
    storage = "sessions"
    port = 8000
"""
from __future__ import annotations

import os
from pathlib import Path

DEFAULT_CONFIG_NAME = "rope.toml"


def load_config(path: str | Path | None = None) -> dict[str, str]:
    """Parse the flat key = value config file; missing file means empty."""
    if path is None:
        candidate = Path(DEFAULT_CONFIG_NAME)
        if not candidate.is_file():
            return {}
        path = candidate
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("["):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            continue
        values[key.strip()] = value.strip().strip("\"'")
    return values


def resolve(
    flag_value: str | None,
    env_name: str | None,
    config: dict[str, str],
    key: str,
    default: str | None = None,
) -> str | None:
    if flag_value is not None:
        return flag_value
    if env_name and os.environ.get(env_name):
        return os.environ[env_name]
    if key in config:
        return config[key]
    return default
