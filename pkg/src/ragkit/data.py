"""Datasets: ordered lists of JSON-object records, shared by name across steps.

Records are plain dicts. Field insertion order is preserved through
serialization so that cached and freshly computed artifacts are
byte-identical. A dataset's fingerprint is the SHA-256 of its serialized
JSONL bytes unless a loader pins it to the source file's digest.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .canonical import sha256_hex
from .errors import ConfigError, UnknownDatasetError

logger = logging.getLogger(__name__)

Record = dict[str, Any]


def record_to_line(record: Record) -> str:
    return json.dumps(record, ensure_ascii=False)


def serialize_records(records: Iterable[Record]) -> bytes:
    return "".join(record_to_line(r) + "\n" for r in records).encode("utf-8")


def parse_jsonl(data: bytes, origin: str) -> list[Record]:
    """Parse JSONL bytes into records, reporting 1-based line numbers."""
    records: list[Record] = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{origin}: line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"{origin}: line {lineno}: expected a JSON object")
        if any(not isinstance(k, str) or not k for k in obj):
            raise ConfigError(f"{origin}: line {lineno}: field names must be non-empty strings")
        records.append(obj)
    return records


def read_jsonl(path: str | Path) -> list[Record]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_jsonl(data, str(path))


def write_jsonl(path: str | Path, records: Iterable[Record]) -> int:
    path = Path(path)
    data = serialize_records(records)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    return data.count(b"\n")


@dataclass
class Dataset:
    name: str
    records: list[Record]
    _fingerprint: str | None = field(default=None, repr=False)

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            self._fingerprint = sha256_hex(serialize_records(self.records))
        return self._fingerprint

    def __len__(self) -> int:
        return len(self.records)

    def copy(self) -> "Dataset":
        """Deep copy; steps receive copies so registry entries stay immutable."""
        return Dataset(self.name, copy.deepcopy(self.records), self._fingerprint)


class DatasetRegistry:
    """Named datasets shared across pipeline steps."""

    def __init__(self) -> None:
        self._entries: dict[str, Dataset] = {}

    def put(self, dataset: Dataset, *, expected: bool = True) -> None:
        if dataset.name in self._entries and not expected:
            logger.warning("dataset %r replaced by a step that did not read it", dataset.name)
        self._entries[dataset.name] = dataset

    def get(self, name: str) -> Dataset | None:
        return self._entries.get(name)

    def require(self, name: str) -> Dataset:
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownDatasetError(f"unknown dataset: {name}") from None

    def names(self) -> list[str]:
        return list(self._entries)

    def __contains__(self, name: str) -> bool:
        return name in self._entries
