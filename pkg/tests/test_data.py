import pytest

from ragkit.data import (
    Dataset,
    DatasetRegistry,
    read_jsonl,
    record_to_line,
    serialize_records,
    write_jsonl,
)
from ragkit.errors import ConfigError, UnknownDatasetError


def test_record_serialization_preserves_field_order():
    rec = {"b": 1, "a": 2}
    assert record_to_line(rec) == '{"b": 1, "a": 2}'


def test_round_trip_bytes(tmp_path):
    records = [{"q": "x", "n": 1.5, "flags": [True, None]}, {"q": "ü"}]
    path = tmp_path / "d.jsonl"
    write_jsonl(path, records)
    assert read_jsonl(path) == records
    # writing what was read reproduces the same bytes
    again = tmp_path / "d2.jsonl"
    write_jsonl(again, read_jsonl(path))
    assert again.read_bytes() == path.read_bytes()


def test_fingerprint_tracks_content():
    a = Dataset("main", [{"x": 1}, {"x": 2}])
    b = Dataset("other", [{"x": 1}, {"x": 2}])
    c = Dataset("main", [{"x": 1}, {"x": 3}])
    assert a.fingerprint == b.fingerprint  # names do not enter the hash
    assert a.fingerprint != c.fingerprint
    assert len(a.fingerprint) == 64


def test_invalid_json_line_reports_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"ok": 1}\nnot json\n{"ok": 2}\n')
    with pytest.raises(ConfigError, match="line 2: invalid JSON"):
        read_jsonl(path)


def test_non_object_line_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('[1, 2]\n')
    with pytest.raises(ConfigError, match="line 1: expected a JSON object"):
        read_jsonl(path)


def test_empty_field_name_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"": 1}\n')
    with pytest.raises(ConfigError, match="non-empty"):
        read_jsonl(path)


def test_dataset_copy_is_isolated():
    ds = Dataset("main", [{"x": [1, 2]}])
    clone = ds.copy()
    clone.records[0]["x"].append(3)
    clone.records[0]["y"] = "new"
    assert ds.records == [{"x": [1, 2]}]


def test_registry_require():
    registry = DatasetRegistry()
    with pytest.raises(UnknownDatasetError, match="unknown dataset: main"):
        registry.require("main")
    ds = Dataset("main", [])
    registry.put(ds)
    assert registry.require("main") is ds
    assert "main" in registry


def test_registry_replacement_warns_when_unexpected(caplog):
    registry = DatasetRegistry()
    registry.put(Dataset("main", [{"x": 1}]))
    with caplog.at_level("WARNING"):
        registry.put(Dataset("main", [{"x": 2}]), expected=False)
    assert any("replaced" in r.message for r in caplog.records)


def test_serialize_records_deterministic():
    records = [{"a": 1}, {"b": "two"}]
    assert serialize_records(records) == serialize_records([dict(r) for r in records])
