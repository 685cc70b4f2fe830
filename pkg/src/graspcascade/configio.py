"""YAML config loading with format versioning and content hashing.

Chain, scene and reward files share one convention: a top-level
``format_version`` integer that must match what the code understands.
Training artifacts record the sha256 of the exact file bytes so runs are
reproducible from their output directory.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import yaml

from .errors import ConfigError


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_versioned_yaml(path: str | Path, expected_version: int, kind: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{kind} file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{kind} file {path} is not valid YAML: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{kind} file {path} must be a mapping")
    version = doc.get("format_version")
    if version != expected_version:
        raise ConfigError(
            f"{kind} file {path}: format_version {version!r}, expected {expected_version}")
    return doc


def dump_yaml(path: str | Path, doc: dict) -> None:
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def preset_path(name: str) -> Path:
    """Path of a packaged preset YAML (chain/scene/reward defaults)."""
    p = Path(__file__).parent / "presets" / name
    if not p.exists():
        raise ConfigError(f"unknown preset: {name}")
    return p
