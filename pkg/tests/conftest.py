from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import pytest

import ragkit  # noqa: F401  - registers the built-in steps
from ragkit.data import Dataset
from ragkit.http import HttpResponse
from ragkit.pipeline import GlobalStep, LocalStep, StepOutcome, register_step

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture
def workspace(tmp_path, monkeypatch) -> Path:
    """Temp working directory with the bundled data, prompts, and configs."""
    for name in ("data", "prompts", "configs"):
        shutil.copytree(REPO_ROOT / name, tmp_path / name)
    monkeypatch.chdir(tmp_path)
    return tmp_path


def json_response(status: int, payload) -> HttpResponse:
    return HttpResponse(status, json.dumps(payload).encode("utf-8"))


class StubTransport:
    """Scripted transport: a list of HttpResponse objects or exceptions."""

    def __init__(self, responses=None, handler=None):
        self.calls: list[dict] = []
        self.responses = list(responses or [])
        self.handler = handler

    def request(self, method, url, *, headers=None, json_body=None, timeout=30.0):
        self.calls.append(
            {"method": method, "url": url, "headers": headers, "json": json_body}
        )
        if self.handler is not None:
            return self.handler(method, url, headers, json_body)
        if not self.responses:
            raise AssertionError("stub transport ran out of scripted responses")
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


@pytest.fixture
def make_dataset():
    def build(records, name="main"):
        return Dataset(name, [dict(r) for r in records])

    return build


# ---------------------------------------------------------------------------
# Test-only steps registered alongside the built-ins


@register_step
class UpperStep(LocalStep):
    target = "testing.upper"

    @dataclass
    class Params:
        field: str
        on_error: str = "fail"

    def transform(self, record, index):
        record[self.params.field] = str(record[self.params.field]).upper()
        return record


@register_step
class FailOnStep(LocalStep):
    target = "testing.fail_on"

    @dataclass
    class Params:
        at: int
        on_error: str = "fail"

    def transform(self, record, index):
        if index == self.params.at:
            raise ValueError(f"synthetic failure at {index}")
        return record


@register_step
class MutatorStep(GlobalStep):
    """Evil step that mutates its input in place and emits a copy elsewhere."""

    target = "testing.mutator"

    @dataclass
    class Params:
        name: str

    def output_name(self):
        return self.params.name

    def execute(self, datasets, env):
        for record in datasets[0].records:
            record["tampered"] = True
        ds = Dataset(self.params.name, [dict(r) for r in datasets[0].records])
        return StepOutcome(dataset=ds, rows=len(ds))
