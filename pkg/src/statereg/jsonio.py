"""Shared helpers for the versioned JSON artifacts the pipeline exchanges."""

from __future__ import annotations

import json
from pathlib import Path


class SchemaError(Exception):
    """Artifact file is missing, malformed, or has the wrong schema version."""


def check_schema(doc, expected: str) -> None:
    if not isinstance(doc, dict):
        raise SchemaError(f"expected a JSON object with schema {expected!r}")
    found = doc.get("schema")
    if found != expected:
        raise SchemaError(f"schema mismatch: expected {expected!r}, found {found!r}")


def write_json(path, doc: dict) -> None:
    """Write an artifact with stable bytes (fixed indentation, one trailing
    newline) so identical runs produce identical files."""
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
