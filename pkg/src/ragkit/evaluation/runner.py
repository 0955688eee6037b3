"""Evaluation runner: joins data and prediction files by line index, applies
the answer processor, computes the configured metrics, and writes the
results file plus per-example annotations.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..canonical import fingerprint_of
from ..data import read_jsonl, write_jsonl
from ..errors import ConfigError
from ..http import HttpTransport
from ..inference import ChatEndpoint, MockEndpoint
from .embedding import HashedBowEmbedder, RemoteEmbedder, semantic_similarity
from .judges import BUILTIN_JUDGES, ChatJudge, faithfulness, relevancy
from .metrics import classification, exact_match, str_em, token_f1
from .processor import AnswerProcessor, AnswerProcessorSpec

logger = logging.getLogger(__name__)

LOCAL_METRICS = ("exact_match", "token_f1", "str_em", "semantic_similarity", "faithfulness", "relevancy")
GLOBAL_METRICS = ("classification",)


@dataclass
class MetricSpec:
    metric_id: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class EvalKeys:
    """Record fields the metrics read their inputs from."""

    answers: str = "answers"
    question: str = "query"
    context: str = "positive_passages"


@dataclass
class EvalConfig:
    processor: AnswerProcessorSpec
    metrics: list[MetricSpec]
    data_file: str
    generated_file: str
    results_file: str
    examples_file: str | None = None
    keys: EvalKeys = field(default_factory=EvalKeys)
    max_concurrency: int = 4
    raw: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, doc: Any) -> "EvalConfig":
        if not isinstance(doc, dict):
            raise ConfigError("evaluation config must be a mapping")
        proc_raw = doc.get("answer_processor") or {}
        processor = AnswerProcessorSpec(
            capture_pattern=proc_raw.get("capture_pattern"),
            stopping_pattern=proc_raw.get("stopping_pattern"),
        )
        metrics_raw = doc.get("metrics")
        if not metrics_raw:
            raise ConfigError("no metrics configured")
        metrics = []
        for i, entry in enumerate(metrics_raw):
            if not isinstance(entry, dict) or "_target_" not in entry:
                raise ConfigError(f"metric {i}: needs a _target_ key")
            metric_id = entry["_target_"]
            if metric_id not in LOCAL_METRICS + GLOBAL_METRICS:
                raise ConfigError(f"metric {i}: unknown metric id: {metric_id}")
            params = {k: v for k, v in entry.items() if k != "_target_"}
            metrics.append(MetricSpec(metric_id=metric_id, params=params))
        for key in ("data_file", "generated_file", "results_file"):
            if not isinstance(doc.get(key), str):
                raise ConfigError(f"evaluation config needs '{key}'")
        keys_raw = doc.get("keys") or {}
        keys = EvalKeys(
            answers=keys_raw.get("answers", "answers"),
            question=keys_raw.get("question", "query"),
            context=keys_raw.get("context", "positive_passages"),
        )
        return cls(
            processor=processor,
            metrics=metrics,
            data_file=doc["data_file"],
            generated_file=doc["generated_file"],
            results_file=doc["results_file"],
            examples_file=doc.get("examples_file"),
            keys=keys,
            max_concurrency=int(doc.get("max_concurrency", 4)),
            raw=doc,
        )

    @classmethod
    def from_yaml(cls, text: str) -> "EvalConfig":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"evaluation config syntax error: {exc}") from exc
        return cls.from_mapping(doc)


@dataclass
class ExampleEval:
    index: int
    answer: str | None
    captured: bool
    metrics: dict[str, float | None]


@dataclass
class EvalReport:
    global_scores: dict[str, Any]
    examples: list[ExampleEval]
    evaluated: int
    skipped: int
    results_file: str
    examples_file: str


def _as_gold_list(value: Any) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    if isinstance(value, list):
        golds: list[str] = []
        for item in value:
            if isinstance(item, list):
                golds.extend(str(x) for x in item)
            else:
                golds.append(str(item))
        return golds
    return [str(value)]


def _as_gold_groups(value: Any) -> list[list[str]]:
    if value is None:
        return []
    if isinstance(value, str):
        return [[value]]
    if isinstance(value, list):
        groups = []
        for item in value:
            if isinstance(item, list):
                groups.append([str(x) for x in item])
            else:
                groups.append([str(item)])
        return groups
    return [[str(value)]]


def _context_text(value: Any) -> str | None:
    if value is None:
        return None
    if isinstance(value, str):
        return value or None
    if isinstance(value, list):
        texts = [
            str(d.get("text", "")) if isinstance(d, dict) else str(d) for d in value
        ]
        joined = "\n\n".join(t for t in texts if t)
        return joined or None
    return str(value)


def _build_endpoint(spec: dict[str, Any]) -> ChatEndpoint | MockEndpoint:
    if "mock" in spec:
        mock = spec["mock"] or {}
        return MockEndpoint(
            mode=mock.get("mode", "echo"),
            text=mock.get("text", ""),
            table=mock.get("table", {}),
            default=mock.get("default"),
        )
    try:
        return ChatEndpoint(
            base_url=spec["base_url"],
            model=spec["model_name"],
            api_key_env=spec.get("api_key_env"),
        )
    except KeyError as exc:
        raise ConfigError(f"bad endpoint spec: missing {exc}") from exc


def _build_judge(params: dict[str, Any], transport: HttpTransport | None):
    spec = params.get("judge")
    if spec is None:
        raise ConfigError("this metric needs a 'judge' (builtin name or endpoint spec)")
    if isinstance(spec, dict) and "builtin" in spec:
        name = spec["builtin"]
        if name not in BUILTIN_JUDGES:
            raise ConfigError(f"unknown builtin judge: {name}")
        return BUILTIN_JUDGES[name]()
    if isinstance(spec, dict):
        return ChatJudge(endpoint=_build_endpoint(spec), transport=transport)
    raise ConfigError("judge spec must be a mapping")


def _build_embedder(params: dict[str, Any], transport: HttpTransport | None):
    spec = params.get("embedder")
    if spec is None or (isinstance(spec, dict) and spec.get("builtin") == "hashed_bow"):
        return HashedBowEmbedder()
    if isinstance(spec, dict):
        try:
            return RemoteEmbedder(
                base_url=spec["base_url"],
                model=spec["model_name"],
                api_key_env=spec.get("api_key_env"),
                transport=transport,
            )
        except KeyError as exc:
            raise ConfigError(f"bad embedder spec: missing {exc}") from exc
    raise ConfigError("embedder spec must be a mapping")


def run_evaluation(config: EvalConfig, *, transport: HttpTransport | None = None) -> EvalReport:
    """Score every (data row, prediction) pair and write the results files.

    Rows are joined strictly by line index; a length mismatch is a hard
    error. Global aggregates for local metrics are arithmetic means over
    the non-null per-example values, so they can be re-derived from the
    annotations file. Examples where every metric is null count as
    skipped.
    """
    data_rows = read_jsonl(config.data_file)
    generated_rows = read_jsonl(config.generated_file)
    if len(data_rows) != len(generated_rows):
        raise ConfigError(
            f"line count mismatch: {config.data_file} has {len(data_rows)} rows "
            f"but {config.generated_file} has {len(generated_rows)}"
        )
    if not config.metrics:
        raise ConfigError("no metrics configured")

    processor = AnswerProcessor(config.processor)
    local_specs = [m for m in config.metrics if m.metric_id in LOCAL_METRICS]
    global_specs = [m for m in config.metrics if m.metric_id in GLOBAL_METRICS]

    judges = {}
    embedders = {}
    for spec in local_specs:
        if spec.metric_id in ("faithfulness", "relevancy"):
            judges[spec.metric_id] = _build_judge(spec.params, transport)
        if spec.metric_id in ("semantic_similarity", "relevancy"):
            embedders[spec.metric_id] = _build_embedder(spec.params, transport)

    def evaluate_example(i: int) -> ExampleEval:
        row, pred = data_rows[i], generated_rows[i]
        raw = pred.get("generated")
        if raw is None:
            return ExampleEval(index=i, answer=None, captured=False,
                               metrics={m.metric_id: None for m in local_specs})
        processed = processor.apply(str(raw))
        golds = _as_gold_list(row.get(config.keys.answers))
        values: dict[str, float | None] = {}
        for spec in local_specs:
            mid = spec.metric_id
            if mid == "exact_match":
                values[mid] = exact_match(processed.text, golds)
            elif mid == "token_f1":
                values[mid] = token_f1(processed.text, golds)
            elif mid == "str_em":
                values[mid] = str_em(processed.text, _as_gold_groups(row.get(config.keys.answers)))
            elif mid == "semantic_similarity":
                values[mid] = semantic_similarity(processed.text, golds, embedders[mid])
            elif mid == "faithfulness":
                context = _context_text(row.get(config.keys.context))
                question = str(row.get(config.keys.question, ""))
                values[mid] = faithfulness(question, processed.text, context, judges[mid])
            elif mid == "relevancy":
                question = str(row.get(config.keys.question, ""))
                values[mid] = relevancy(
                    question,
                    processed.text,
                    judges[mid],
                    embedders[mid],
                    n_questions=int(spec.params.get("n_questions", 3)),
                )
        return ExampleEval(index=i, answer=processed.text, captured=processed.captured, metrics=values)

    # metric functions are pure per example; judge/embedder calls share the
    # bounded pool, and results are reassembled in input order
    workers = max(1, config.max_concurrency)
    if workers == 1 or len(data_rows) <= 1:
        examples = [evaluate_example(i) for i in range(len(data_rows))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            examples = list(pool.map(evaluate_example, range(len(data_rows))))

    global_scores: dict[str, Any] = {}
    for spec in local_specs:
        vals = [e.metrics[spec.metric_id] for e in examples if e.metrics[spec.metric_id] is not None]
        global_scores[spec.metric_id] = sum(vals) / len(vals) if vals else None
    for spec in global_specs:
        labels = spec.params.get("labels")
        if not isinstance(labels, list) or not labels:
            raise ConfigError("classification needs a non-empty 'labels' list")
        preds, golds = [], []
        for e in examples:
            if e.answer is None:
                continue
            row_golds = _as_gold_list(data_rows[e.index].get(config.keys.answers))
            if not row_golds:
                continue
            preds.append(e.answer)
            golds.append(row_golds[0])
        global_scores[spec.metric_id] = classification(preds, golds, [str(l) for l in labels])

    evaluated = sum(1 for e in examples if any(v is not None for v in e.metrics.values()))
    if not local_specs:
        evaluated = sum(1 for e in examples if e.answer is not None)
    skipped = len(examples) - evaluated

    examples_file = config.examples_file or str(
        Path(config.results_file).with_suffix("")
    ) + ".examples.jsonl"
    write_jsonl(
        examples_file,
        [
            {"index": e.index, "answer": e.answer, "captured": e.captured, "metrics": e.metrics}
            for e in examples
        ],
    )

    results = {
        "config_digest": fingerprint_of(config.raw),
        "global": global_scores,
        "evaluated": evaluated,
        "skipped": skipped,
        "examples_file": examples_file,
        "config": config.raw,
    }
    results_path = Path(config.results_file)
    results_path.parent.mkdir(parents=True, exist_ok=True)
    results_path.write_text(
        yaml.safe_dump(results, sort_keys=False, allow_unicode=True), "utf-8"
    )
    logger.info("evaluation written to %s (%d evaluated, %d skipped)", results_path, evaluated, skipped)
    return EvalReport(
        global_scores=global_scores,
        examples=examples,
        evaluated=evaluated,
        skipped=skipped,
        results_file=str(results_path),
        examples_file=examples_file,
    )
