"""Loader, selector, sampler, and field-manipulation steps.

Step targets registered here:
    loaders.jsonl           read a local JSONL file into the registry
    loaders.remote          fetch a JSONL document over HTTPS (download-cached)
    sampling.shuffle_select seeded Fisher-Yates shuffle, optional truncation
    sampling.few_shot       per-record few-shot example sampling
    fields.map              rename / whitelist / default record fields
    filters.rows            keep records matching a field predicate
    merge.join              inner join two datasets on a key field
    output.jsonl            persist a dataset to a JSONL file
"""

from __future__ import annotations

import copy
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .canonical import canonical_json, sha256_hex
from .data import Dataset, Record, parse_jsonl, write_jsonl
from .errors import ConfigError, StepError
from .http import request_with_retries
from .pipeline import ExecutionContext, GlobalStep, LocalStep, StepOutcome, register_step
from .rng import Xoshiro256, derive_seed

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Loaders


def load_jsonl(path: str | Path, name: str) -> Dataset:
    """Load one JSON object per line; fingerprint pins the file's bytes."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    records = parse_jsonl(data, str(path))
    if not records:
        logger.warning("%s is empty; loaded empty dataset %r", path, name)
    return Dataset(name, records, sha256_hex(data))


@register_step
class JsonlLoader(GlobalStep):
    target = "loaders.jsonl"
    file_params = ("path",)

    @dataclass
    class Params:
        path: str

    def execute(self, datasets, env):
        ds = load_jsonl(self.params.path, self.inputs[0])
        return StepOutcome(dataset=ds, pinned_fingerprint=True, rows=len(ds))

    def dataset_dependencies(self):
        return []


def load_remote(
    url: str,
    name: str,
    *,
    checksum: str | None = None,
    env: ExecutionContext | None = None,
) -> Dataset:
    """Fetch a JSONL document over HTTPS, caching the body by URL+checksum."""
    env = env or ExecutionContext()
    body: bytes | None = None
    cached = None
    if env.download_dir is not None:
        env.download_dir.mkdir(parents=True, exist_ok=True)
        cached = env.download_dir / sha256_hex(f"{url}\n{checksum or ''}".encode("utf-8"))
        if cached.exists():
            body = cached.read_bytes()
    if body is None:
        resp = request_with_retries(
            env.get_transport(),
            "GET",
            url,
            timeout=env.timeout,
            retries=env.http_retries,
            backoff=env.http_backoff,
            what="download",
        )
        body = resp.body
        if checksum is not None and sha256_hex(body) != checksum.lower():
            raise ConfigError(
                f"checksum mismatch for {url}: expected {checksum}, got {sha256_hex(body)}"
            )
        if cached is not None:
            tmp = cached.with_suffix(".tmp")
            tmp.write_bytes(body)
            tmp.replace(cached)
    records = parse_jsonl(body, url)
    if not records:
        logger.warning("%s returned no records", url)
    return Dataset(name, records, sha256_hex(body))


@register_step
class RemoteLoader(GlobalStep):
    target = "loaders.remote"

    @dataclass
    class Params:
        url: str
        checksum: str | None = None

    def execute(self, datasets, env):
        ds = load_remote(self.params.url, self.inputs[0], checksum=self.params.checksum, env=env)
        return StepOutcome(dataset=ds, pinned_fingerprint=True, rows=len(ds))

    def dataset_dependencies(self):
        return []


# ---------------------------------------------------------------------------
# Shuffle / select


def shuffle_select(dataset: Dataset, *, seed: int, limit: int | None = None) -> Dataset:
    """Permute records with the seeded portable PRNG, then truncate to limit."""
    order = list(range(len(dataset.records)))
    Xoshiro256(seed).shuffle(order)
    records = [dataset.records[i] for i in order]
    if limit is not None:
        if limit <= 0:
            raise ConfigError(f"limit must be positive, got {limit}")
        if limit > len(records):
            logger.warning(
                "limit %d exceeds dataset size %d; keeping all records", limit, len(records)
            )
        records = records[:limit]
    return Dataset(dataset.name, records)


@register_step
class ShuffleSelect(GlobalStep):
    target = "sampling.shuffle_select"

    @dataclass
    class Params:
        seed: int
        limit: int | None = None

    def execute(self, datasets, env):
        ds = shuffle_select(datasets[0], seed=self.params.seed, limit=self.params.limit)
        return StepOutcome(dataset=ds, rows=len(ds))


# ---------------------------------------------------------------------------
# Few-shot sampling


def few_shot_sample(
    main: Dataset,
    source: Dataset,
    *,
    k: int,
    output_key: str,
    seed: int = 0,
    fields: list[str] | None = None,
    exclude_self: bool = False,
) -> Dataset:
    """Attach k examples sampled without replacement from ``source`` to each record.

    Sampling is seeded per record with (seed, record index), so a record's
    examples do not depend on how the dataset was truncated. When main and
    source are the same dataset the current record is excluded from the
    candidate pool to avoid leaking its own answer.
    """
    pool_size = len(source.records) - (1 if exclude_self else 0)
    if k > pool_size:
        raise StepError(f"few-shot k={k} exceeds available source records ({pool_size})")
    records = []
    for i, record in enumerate(main.records):
        candidates = [j for j in range(len(source.records)) if not (exclude_self and j == i)]
        chosen = Xoshiro256(derive_seed(seed, i)).sample(candidates, k)
        examples = []
        for j in chosen:
            src = source.records[j]
            keys = fields if fields is not None else list(src.keys())
            examples.append({f: copy.deepcopy(src[f]) for f in keys if f in src})
        record = dict(record)
        record[output_key] = examples
        records.append(record)
    return Dataset(main.name, records)


@register_step
class FewShot(GlobalStep):
    target = "sampling.few_shot"

    @dataclass
    class Params:
        input_dataset: str
        k: int
        output_key: str
        seed: int = 0
        fields: list[str] | None = None

    def dataset_dependencies(self):
        deps = list(self.inputs)
        if self.params.input_dataset not in deps:
            deps.append(self.params.input_dataset)
        return deps

    def execute(self, datasets, env):
        main = datasets[0]
        self_sampling = self.params.input_dataset == self.inputs[0]
        source = main if self_sampling else datasets[1]
        ds = few_shot_sample(
            main,
            source,
            k=self.params.k,
            output_key=self.params.output_key,
            seed=self.params.seed,
            fields=self.params.fields,
            exclude_self=self_sampling,
        )
        return StepOutcome(dataset=ds, rows=len(ds))


# ---------------------------------------------------------------------------
# Field mapping


def map_record_fields(
    record: Record,
    *,
    rename: dict[str, str],
    keep: list[str] | None,
    defaults: dict[str, Any],
) -> Record:
    rec = dict(record)
    for name, value in defaults.items():
        rec.setdefault(name, copy.deepcopy(value))
    for old, new in rename.items():
        if old not in rec:
            raise KeyError(f"rename source field '{old}' is missing")
        rec[new] = rec.pop(old)
    if keep is not None:
        rec = {name: rec[name] for name in keep if name in rec}
    return rec


def map_fields(
    dataset: Dataset,
    rename: dict[str, str] | None = None,
    keep: list[str] | None = None,
    defaults: dict[str, Any] | None = None,
) -> Dataset:
    records = [
        map_record_fields(r, rename=rename or {}, keep=keep, defaults=defaults or {})
        for r in dataset.records
    ]
    return Dataset(dataset.name, records)


@register_step
class MapFields(LocalStep):
    target = "fields.map"

    @dataclass
    class Params:
        rename: dict[str, str] = field(default_factory=dict)
        keep: list[str] | None = None
        defaults: dict[str, Any] = field(default_factory=dict)
        on_error: str = "fail"

    def transform(self, record, index):
        return map_record_fields(
            record,
            rename=self.params.rename,
            keep=self.params.keep,
            defaults=self.params.defaults,
        )


# ---------------------------------------------------------------------------
# Row filtering

FILTER_OPS = ("eq", "ne", "contains", "exists", "regex")


def _matches(record: Record, field_name: str, op: str, value: Any, regex) -> bool:
    present = field_name in record
    if op == "exists":
        return present
    if op == "eq":
        return present and record[field_name] == value
    if op == "ne":
        # complement of eq: a missing field also differs from the value
        return not (present and record[field_name] == value)
    if not present:
        return False
    current = record[field_name]
    if op == "contains":
        if isinstance(current, str):
            return isinstance(value, str) and value in current
        if isinstance(current, list):
            return value in current
        return False
    if op == "regex":
        return isinstance(current, str) and regex.search(current) is not None
    raise ConfigError(f"unknown filter op {op!r}")


def filter_rows(dataset: Dataset, *, field_name: str, op: str, value: Any = None) -> Dataset:
    """Keep records matching the predicate; order preserved."""
    if op not in FILTER_OPS:
        raise ConfigError(f"filter op must be one of {FILTER_OPS}, got {op!r}")
    regex = None
    if op == "regex":
        if not isinstance(value, str):
            raise ConfigError("regex filter needs a string pattern")
        try:
            regex = re.compile(value)
        except re.error as exc:
            raise ConfigError(f"invalid regex {value!r}: {exc}") from exc
    kept = [r for r in dataset.records if _matches(r, field_name, op, value, regex)]
    removed = len(dataset.records) - len(kept)
    if kept or not dataset.records:
        logger.info("filter %s on %r removed %d of %d records", op, field_name, removed, len(dataset.records))
    else:
        logger.warning("filter %s on %r matched nothing (%d records removed)", op, field_name, removed)
    return Dataset(dataset.name, kept)


@register_step
class FilterRows(GlobalStep):
    target = "filters.rows"

    @dataclass
    class Params:
        field: str
        op: str
        value: Any = None

    def __init__(self, config):
        super().__init__(config)
        if self.params.op not in FILTER_OPS:
            raise ConfigError(f"{self.target}: op must be one of {FILTER_OPS}")
        if self.params.op == "regex":
            if not isinstance(self.params.value, str):
                raise ConfigError(f"{self.target}: regex filter needs a string pattern")
            try:
                re.compile(self.params.value)
            except re.error as exc:
                raise ConfigError(f"{self.target}: invalid regex: {exc}") from exc

    def execute(self, datasets, env):
        ds = filter_rows(
            datasets[0], field_name=self.params.field, op=self.params.op, value=self.params.value
        )
        return StepOutcome(dataset=ds, rows=len(ds))


# ---------------------------------------------------------------------------
# Join


@register_step
class Join(GlobalStep):
    target = "merge.join"

    @dataclass
    class Params:
        on: str
        name: str

    def output_name(self):
        return self.params.name

    def execute(self, datasets, env):
        if len(datasets) < 2:
            raise ConfigError(f"{self.target}: needs two input datasets")
        left, right = datasets[0], datasets[1]
        by_key: dict[str, list[Record]] = {}
        for r in right.records:
            if self.params.on in r:
                by_key.setdefault(canonical_json(r[self.params.on]), []).append(r)
        merged = []
        for l in left.records:
            if self.params.on not in l:
                continue
            for r in by_key.get(canonical_json(l[self.params.on]), []):
                merged.append({**r, **l})  # left wins on field collisions
        ds = Dataset(self.params.name, merged)
        return StepOutcome(dataset=ds, rows=len(ds))


# ---------------------------------------------------------------------------
# Output writer


@register_step
class JsonlWriter(GlobalStep):
    target = "output.jsonl"

    @dataclass
    class Params:
        file_name: str

    def output_name(self):
        return None

    def execute(self, datasets, env):
        rows = write_jsonl(self.params.file_name, datasets[0].records)
        logger.info("wrote %d rows to %s", rows, self.params.file_name)
        return StepOutcome(artifacts=[self.params.file_name], rows=rows)
