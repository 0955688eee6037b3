"""Pipeline engine: config parsing, step registry, execution, and step caching.

A pipeline is an ordered list of steps over a shared dataset registry.
Each step's output is cached under a content fingerprint computed from
(format version, target, params, input fingerprints), so reruns replay
from the cache and editing step k only invalidates steps k..n.

Cache layout under the cache directory:
    <digest>.jsonl       step's output records
    <digest>.meta.json   target, params material, input digests, row count
    <digest>.a<i>        byte copies of files the step wrote (writer steps)
Meta creation time is recorded for inspection but never hashed.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import shutil
import time
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, ClassVar

import yaml

from .canonical import fingerprint_of, sha256_file
from .data import Dataset, DatasetRegistry, Record, read_jsonl, serialize_records
from .errors import ConfigError, StepError, UnknownDatasetError
from .http import HttpTransport, default_transport

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1"


# ---------------------------------------------------------------------------
# Configuration types


@dataclass
class StepConfig:
    target: str
    inputs: list[str]
    params: dict[str, Any]


@dataclass
class PipelineConfig:
    name: str
    cache: bool
    steps: list[StepConfig]


@dataclass
class ExecutionContext:
    """Runtime knobs shared by all steps in one run."""

    workers: int = 4
    transport: HttpTransport | None = None
    http_retries: int = 3
    http_backoff: float = 0.25
    timeout: float = 30.0
    use_cache: bool | None = None  # None: defer to the config's `cache` flag
    download_dir: Path | None = None

    def get_transport(self) -> HttpTransport:
        if self.transport is None:
            self.transport = default_transport()
        return self.transport


@dataclass
class StepOutcome:
    """What one step produced: a dataset, written files, or both."""

    dataset: Dataset | None = None
    pinned_fingerprint: bool = False  # loaders pin the source file's digest
    artifacts: list[str] = field(default_factory=list)
    rows: int = 0
    dropped: int = 0


@dataclass
class StepReport:
    index: int
    target: str
    input_fingerprints: list[str]
    output_fingerprint: str | None
    cache_hit: bool
    duration_ms: int
    rows_out: int
    rows_dropped: int = 0


@dataclass
class RunReport:
    pipeline: str
    steps: list[StepReport]

    @property
    def totals(self) -> dict[str, int]:
        return {
            "steps": len(self.steps),
            "cache_hits": sum(1 for s in self.steps if s.cache_hit),
            "duration_ms": sum(s.duration_ms for s in self.steps),
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "pipeline": self.pipeline,
            "steps": [dataclasses.asdict(s) for s in self.steps],
            "totals": self.totals,
        }


# ---------------------------------------------------------------------------
# Step params validation

_NoneType = type(None)


def _type_ok(value: Any, hint: Any) -> bool:
    if hint is Any:
        return True
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        return any(_type_ok(value, a) for a in typing.get_args(hint))
    if hint is _NoneType:
        return value is None
    if hint is bool:
        return isinstance(value, bool)
    if hint is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if hint is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if hint is str:
        return isinstance(value, str)
    if origin in (list, tuple):
        if not isinstance(value, list):
            return False
        args = typing.get_args(hint)
        return all(_type_ok(v, args[0]) for v in value) if args else True
    if origin is dict:
        return isinstance(value, dict)
    if isinstance(hint, type):
        return isinstance(value, hint)
    return True


def build_params(params_cls: type, raw: dict[str, Any], *, target: str):
    """Instantiate a step's params dataclass from config keys, strictly."""
    hints = typing.get_type_hints(params_cls)
    fields = {f.name: f for f in dataclasses.fields(params_cls)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError(f"{target}: unknown parameter(s): {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for name, f in fields.items():
        if name in raw:
            value = raw[name]
            hint = hints.get(name, Any)
            if not _type_ok(value, hint):
                raise ConfigError(
                    f"{target}: parameter '{name}' has wrong type "
                    f"(got {type(value).__name__})"
                )
            if hint is float and isinstance(value, int):
                value = float(value)
            kwargs[name] = value
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(f"{target}: missing required parameter '{name}'")
    return params_cls(**kwargs)


# ---------------------------------------------------------------------------
# Step base classes and registry

STEP_REGISTRY: dict[str, type["Step"]] = {}


def register_step(cls: type["Step"]) -> type["Step"]:
    if cls.target in STEP_REGISTRY:
        raise ValueError(f"step target {cls.target!r} registered twice")
    STEP_REGISTRY[cls.target] = cls
    return cls


class Step:
    """Base for all pipeline steps.

    Subclasses declare a ``target`` identifier, a ``Params`` dataclass,
    and (by convention) build a fresh Dataset object in ``execute`` so no
    stale fingerprints leak out.
    """

    target: ClassVar[str] = ""
    Params: ClassVar[type | None] = None
    file_params: ClassVar[tuple[str, ...]] = ()

    def __init__(self, config: StepConfig):
        self.config = config
        self.inputs = list(config.inputs)
        self.params = (
            build_params(self.Params, config.params, target=self.target) if self.Params else None
        )

    def dataset_dependencies(self) -> list[str]:
        """Names of registry datasets whose content feeds this step."""
        return list(self.inputs)

    def output_name(self) -> str | None:
        return self.inputs[0] if self.inputs else None

    def cache_material(self, env: ExecutionContext) -> dict[str, Any]:
        """Params as hashed into the cache key.

        Parameters named in ``file_params`` refer to input files; their
        path text is replaced by the file content's digest so the cache
        key tracks what the file says, not where it lives.
        """
        material = dataclasses.asdict(self.params) if self.params else {}
        for name in self.file_params:
            path = material.get(name)
            if path is not None:
                material[name] = {"sha256": sha256_file(path)}
        return material

    def execute(self, datasets: list[Dataset], env: ExecutionContext) -> StepOutcome:
        raise NotImplementedError


class GlobalStep(Step):
    """Acts on whole datasets: aggregate, filter, join, persist."""


class LocalStep(Step):
    """Transforms records one at a time; must be pure per-record."""

    def prepare(self, datasets: list[Dataset], env: ExecutionContext) -> None:
        """Build read-only state (indexes, templates) before the record loop."""

    def transform(self, record: Record, index: int) -> Record:
        raise NotImplementedError

    def on_error_policy(self) -> str:
        return getattr(self.params, "on_error", "fail")

    def execute(self, datasets: list[Dataset], env: ExecutionContext) -> StepOutcome:
        out, dropped = apply_local_step(self, datasets[0], env=env, _extra=datasets)
        return StepOutcome(dataset=out, rows=len(out), dropped=dropped)


def apply_local_step(
    step: LocalStep,
    dataset: Dataset,
    *,
    env: ExecutionContext | None = None,
    workers: int | None = None,
    _extra: list[Dataset] | None = None,
) -> tuple[Dataset, int]:
    """Run a local step over every record with a bounded worker pool.

    Records are processed independently and reassembled in input order,
    so the result is identical to sequential application. The failure
    policy comes from the step's ``on_error`` param: ``fail`` aborts on
    the lowest failing record index, ``drop`` removes failed records.
    """
    env = env or ExecutionContext()
    pool_size = max(1, workers if workers is not None else env.workers)
    policy = step.on_error_policy()
    if policy not in ("fail", "drop"):
        raise ConfigError(f"{step.target}: on_error must be 'fail' or 'drop', got {policy!r}")

    work = dataset.copy()
    step.prepare(_extra if _extra is not None else [work], env)

    def guarded(pair: tuple[int, Record]):
        i, record = pair
        try:
            return i, step.transform(record, i), None
        except Exception as exc:  # noqa: BLE001 - policy decides
            return i, None, exc

    items = list(enumerate(work.records))
    if pool_size == 1:
        results = [guarded(p) for p in items]
    else:
        with ThreadPoolExecutor(max_workers=pool_size) as pool:
            results = list(pool.map(guarded, items))

    failures = [(i, exc) for i, _, exc in results if exc is not None]
    if failures and policy == "fail":
        i, exc = min(failures, key=lambda f: f[0])
        raise StepError(f"record {i}: {exc}", target=step.target) from exc
    if failures:
        logger.warning("%s: dropped %d record(s) that failed", step.target, len(failures))
    records = [rec for _, rec, exc in results if exc is None]
    return Dataset(dataset.name, records), len(failures)


def apply_global_step(
    step: GlobalStep, registry: DatasetRegistry, *, env: ExecutionContext | None = None
) -> DatasetRegistry:
    """Run a global step against the registry and apply its effect."""
    env = env or ExecutionContext()
    datasets = [registry.require(n).copy() for n in step.dataset_dependencies()]
    outcome = step.execute(datasets, env)
    if outcome.dataset is not None:
        registry.put(outcome.dataset, expected=outcome.dataset.name in step.dataset_dependencies())
    return registry


# ---------------------------------------------------------------------------
# Fingerprinting


def fingerprint_step(
    step: StepConfig, input_fps: list[str], format_version: str = FORMAT_VERSION
) -> str:
    """Content fingerprint of one step application.

    Digest over the canonical serialization of (format_version, target,
    params, input fingerprints in order). Dataset names, wall-clock time
    and filesystem locations never enter the hash.
    """
    return fingerprint_of([format_version, step.target, step.params, list(input_fps)])


# ---------------------------------------------------------------------------
# Step cache


class StepCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _meta_path(self, digest: str) -> Path:
        return self.root / f"{digest}.meta.json"

    def load_meta(self, digest: str) -> dict[str, Any] | None:
        path = self._meta_path(digest)
        if not path.exists():
            return None
        try:
            meta = json.loads(path.read_text("utf-8"))
        except (OSError, json.JSONDecodeError):
            logger.warning("unreadable cache meta %s; treating as miss", path)
            return None
        if meta.get("dataset") and not (self.root / f"{digest}.jsonl").exists():
            return None
        for i in range(len(meta.get("artifacts", []))):
            if not (self.root / f"{digest}.a{i}").exists():
                return None
        return meta

    def store(
        self,
        digest: str,
        outcome: StepOutcome,
        *,
        target: str,
        material: dict[str, Any],
        input_fps: list[str],
    ) -> None:
        meta: dict[str, Any] = {
            "target": target,
            "params": material,
            "input_fingerprints": list(input_fps),
            "rows": outcome.rows,
            "dropped": outcome.dropped,
            "dataset": None,
            "artifacts": [],
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        if outcome.dataset is not None:
            data_path = self.root / f"{digest}.jsonl"
            tmp = data_path.with_suffix(".jsonl.tmp")
            tmp.write_bytes(serialize_records(outcome.dataset.records))
            tmp.replace(data_path)
            meta["dataset"] = {
                "name": outcome.dataset.name,
                "fingerprint": outcome.dataset.fingerprint,
            }
        for i, artifact in enumerate(outcome.artifacts):
            src = Path(artifact)
            shutil.copyfile(src, self.root / f"{digest}.a{i}")
            meta["artifacts"].append({"path": artifact, "sha256": sha256_file(src)})
        meta_tmp = self._meta_path(digest).with_suffix(".tmp")
        meta_tmp.write_text(json.dumps(meta, ensure_ascii=False, indent=1), "utf-8")
        meta_tmp.replace(self._meta_path(digest))

    def restore(self, digest: str, meta: dict[str, Any], output_name: str | None) -> StepOutcome:
        outcome = StepOutcome(rows=meta.get("rows", 0), dropped=meta.get("dropped", 0))
        if meta.get("dataset"):
            records = read_jsonl(self.root / f"{digest}.jsonl")
            name = output_name or meta["dataset"]["name"]
            outcome.dataset = Dataset(name, records, meta["dataset"]["fingerprint"])
            outcome.pinned_fingerprint = True
        for i, art in enumerate(meta.get("artifacts", [])):
            dest = Path(art["path"])
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(self.root / f"{digest}.a{i}", dest)
            outcome.artifacts.append(art["path"])
        return outcome

    def stats(self) -> dict[str, int]:
        entries = list(self.root.glob("*.meta.json"))
        data_files = [p for p in self.root.iterdir() if p.is_file()]
        return {
            "entries": len(entries),
            "files": len(data_files),
            "bytes": sum(p.stat().st_size for p in data_files),
        }

    def clear(self) -> int:
        removed = 0
        for p in self.root.glob("*.meta.json"):
            digest = p.name[: -len(".meta.json")]
            for q in [p, self.root / f"{digest}.jsonl"] + list(self.root.glob(f"{digest}.a*")):
                if q.exists():
                    q.unlink()
                    removed += 1
        downloads = self.root / "downloads"
        if downloads.is_dir():
            for q in downloads.iterdir():
                q.unlink()
                removed += 1
        return removed


# ---------------------------------------------------------------------------
# Config parsing


def parse_pipeline_document(doc: Any, registry: dict[str, type[Step]] | None = None) -> PipelineConfig:
    registry = registry if registry is not None else STEP_REGISTRY
    if not isinstance(doc, dict):
        raise ConfigError("pipeline config must be a mapping")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError("pipeline has no name")
    cache = doc.get("cache", True)
    if not isinstance(cache, bool):
        raise ConfigError("'cache' must be a boolean")
    steps_raw = doc.get("steps")
    if not steps_raw:
        raise ConfigError("pipeline has no steps")
    if not isinstance(steps_raw, list):
        raise ConfigError("'steps' must be a list")

    steps: list[StepConfig] = []
    for i, raw in enumerate(steps_raw):
        if not isinstance(raw, dict):
            raise ConfigError(f"step {i}: must be a mapping")
        target = raw.get("_target_")
        if not isinstance(target, str) or not target:
            raise ConfigError(f"step {i}: missing _target_")
        if target not in registry:
            raise ConfigError(f"step {i}: unknown step target: {target}")
        inputs = raw.get("inputs")
        if inputs is None:
            raise ConfigError(f"step {i} ({target}): missing 'inputs'")
        if isinstance(inputs, str):
            inputs = [inputs]
        if not isinstance(inputs, list) or not all(isinstance(x, str) and x for x in inputs):
            raise ConfigError(f"step {i} ({target}): 'inputs' must be a name or list of names")
        params = {k: v for k, v in raw.items() if k not in ("_target_", "inputs")}
        sc = StepConfig(target=target, inputs=inputs, params=params)
        try:
            registry[target](sc)  # validates params against the step's schema
        except ConfigError as exc:
            raise ConfigError(f"step {i}: {exc}") from exc
        steps.append(sc)
    return PipelineConfig(name=name, cache=cache, steps=steps)


def parse_pipeline_config(text: str, registry: dict[str, type[Step]] | None = None) -> PipelineConfig:
    """Parse and validate a YAML pipeline document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"config syntax error{where}: {exc}") from exc
    return parse_pipeline_document(doc, registry)


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    return parse_pipeline_config(Path(path).read_text("utf-8"))


# ---------------------------------------------------------------------------
# Engine


def run_pipeline(
    config: PipelineConfig,
    cache_dir: str | Path,
    env: ExecutionContext | None = None,
) -> RunReport:
    """Execute steps in listed order over a shared registry, with caching.

    With caching on, each step's output is persisted under its content
    fingerprint and replayed on hit (no step body execution). The run
    report is written as JSON into the cache directory.
    """
    env = env or ExecutionContext()
    cache_dir = Path(cache_dir)
    cache = StepCache(cache_dir)
    if env.download_dir is None:
        env.download_dir = cache_dir / "downloads"
    use_cache = config.cache if env.use_cache is None else (config.cache and env.use_cache)

    registry = DatasetRegistry()
    reports: list[StepReport] = []
    for idx, sc in enumerate(config.steps):
        started = time.perf_counter()
        cls = STEP_REGISTRY.get(sc.target)
        if cls is None:
            raise ConfigError(f"step {idx}: unknown step target: {sc.target}")
        try:
            step = cls(sc)
        except ConfigError as exc:
            raise ConfigError(f"step {idx}: {exc}") from exc

        try:
            deps = [registry.require(n) for n in step.dataset_dependencies()]
        except UnknownDatasetError as exc:
            raise StepError(f"step {idx} ({sc.target}): {exc}", step_index=idx, target=sc.target) from exc

        input_fps = [d.fingerprint for d in deps]
        try:
            material = step.cache_material(env)
        except OSError as exc:
            raise StepError(
                f"step {idx} ({sc.target}): cannot read input file: {exc}",
                step_index=idx,
                target=sc.target,
            ) from exc
        digest = fingerprint_of([FORMAT_VERSION, sc.target, material, input_fps])

        meta = cache.load_meta(digest) if use_cache else None
        if meta is not None:
            outcome = cache.restore(digest, meta, step.output_name())
            hit = True
        else:
            try:
                outcome = step.execute([d.copy() for d in deps], env)
            except StepError as exc:
                raise StepError(
                    f"step {idx} ({sc.target}): {exc}", step_index=idx, target=sc.target
                ) from exc
            except Exception as exc:
                raise StepError(
                    f"step {idx} ({sc.target}) failed: {exc}", step_index=idx, target=sc.target
                ) from exc
            if use_cache:
                cache.store(digest, outcome, target=sc.target, material=material, input_fps=input_fps)
            hit = False

        output_fp: str | None = None
        if outcome.dataset is not None:
            ds = outcome.dataset
            if not outcome.pinned_fingerprint:
                ds = Dataset(ds.name, ds.records)  # drop any stale fingerprint
            registry.put(ds, expected=ds.name in step.dataset_dependencies())
            output_fp = ds.fingerprint
        elif outcome.artifacts:
            output_fp = sha256_file(outcome.artifacts[0])

        duration_ms = int((time.perf_counter() - started) * 1000)
        reports.append(
            StepReport(
                index=idx,
                target=sc.target,
                input_fingerprints=input_fps,
                output_fingerprint=output_fp,
                cache_hit=hit,
                duration_ms=duration_ms,
                rows_out=outcome.rows,
                rows_dropped=outcome.dropped,
            )
        )
        logger.info(
            "step %d %s: %s, %d rows, %d ms",
            idx,
            sc.target,
            "cache hit" if hit else "computed",
            outcome.rows,
            duration_ms,
        )

    report = RunReport(pipeline=config.name, steps=reports)
    report_path = cache_dir / f"{config.name}.report.json"
    report_path.write_text(json.dumps(report.to_dict(), ensure_ascii=False, indent=1), "utf-8")
    return report
