"""Schema-checked JSON documents and deterministic serialization helpers.

Every on-disk document is JSON with an explicit ``schema`` tag; loaders
reject unknown fields so format drift fails loudly. Serialization is
canonical (sorted keys, fixed separators) so repeated runs produce
byte-identical artifacts.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ParseError


def take(obj, required: set, optional: set = frozenset(), context: str = "document") -> dict:
    """Validate that ``obj`` is a mapping with exactly the expected keys."""
    if not isinstance(obj, dict):
        raise ParseError(f"{context}: expected an object, got {type(obj).__name__}")
    keys = set(obj)
    missing = sorted(required - keys)
    unknown = sorted(keys - required - set(optional))
    if missing:
        raise ParseError(f"{context}: missing required fields {missing}")
    if unknown:
        raise ParseError(f"{context}: unknown fields {unknown}")
    return obj


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ": "), indent=2) + "\n"


def write_json(doc, path) -> None:
    Path(path).write_text(canonical_json(doc), encoding="utf-8")


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from exc
