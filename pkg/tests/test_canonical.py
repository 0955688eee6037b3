import hashlib
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ragkit.canonical import canonical_json, fingerprint_of, sha256_file, sha256_hex
from ragkit.errors import ConfigError


def test_key_order_does_not_matter():
    a = {"b": 1, "a": [1, 2, {"y": 0, "x": 0}]}
    b = {"a": [1, 2, {"x": 0, "y": 0}], "b": 1}
    assert canonical_json(a) == canonical_json(b)
    assert fingerprint_of(a) == fingerprint_of(b)


def test_digest_matches_plain_sha256():
    value = {"k": "v"}
    expected = hashlib.sha256(b'{"k":"v"}').hexdigest()
    assert fingerprint_of(value) == expected
    assert len(expected) == 64


def test_float_text_is_lossless():
    assert canonical_json(1e-4) == "0.0001"
    assert canonical_json(0.1) == "0.1"
    assert canonical_json([1, 2.5, True, None]) == "[1,2.5,true,null]"


def test_non_serializable_value_rejected():
    with pytest.raises(ConfigError):
        canonical_json({"x": object()})
    with pytest.raises(ConfigError):
        canonical_json(math.nan)


def test_sha256_file_matches_bytes(tmp_path):
    path = tmp_path / "blob.bin"
    path.write_bytes(b"hello world\n")
    assert sha256_file(path) == sha256_hex(b"hello world\n")


json_values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(min_size=1, max_size=8), children, max_size=4),
    max_leaves=20,
)


@given(json_values)
def test_canonical_round_trips(value):
    import json

    assert json.loads(canonical_json(value)) == value
