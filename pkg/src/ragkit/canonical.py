"""Canonical JSON serialization and SHA-256 content fingerprints.

Canonical form sorts object keys and uses compact separators, so two
configs that differ only in key order hash to the same digest. Numbers
keep Python's shortest round-trip text (``1e-4`` -> ``0.0001``); NaN and
infinity are rejected because they are not JSON.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from .errors import ConfigError


def canonical_json(value: Any) -> str:
    try:
        return json.dumps(
            value,
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
            allow_nan=False,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"value is not canonically serializable: {exc}") from exc


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def fingerprint_of(value: Any) -> str:
    """Digest of the canonical JSON form of ``value``."""
    return sha256_hex(canonical_json(value).encode("utf-8"))


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
