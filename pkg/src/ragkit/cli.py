"""Command-line entry point exposing the four-stage workflow.

Subcommands: process, infer, eval, export-train, cache {stats,clear}.
Exit codes: 0 success, 1 config/validation error, 2 runtime step failure,
3 partial inference failure. Logs go to stderr; artifacts only to the
paths named in configs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

import yaml

from . import prompting, retrieval, steps  # noqa: F401  - registers the step targets
from .errors import ConfigError, RagkitError, StepError
from .evaluation import EvalConfig, run_evaluation
from .inference import InferenceConfig, run_inference
from .pipeline import ExecutionContext, StepCache, parse_pipeline_document, run_pipeline
from .training import TrainExportConfig, export_training_file

logger = logging.getLogger("ragkit")


def set_by_path(doc: Any, dotted: str, value: Any) -> None:
    """Apply one dotted-path override, e.g. steps.2.limit=100."""
    parts = dotted.split(".")
    current = doc
    try:
        for part in parts[:-1]:
            current = current[int(part)] if isinstance(current, list) else current.setdefault(part, {})
        last = parts[-1]
        if isinstance(current, list):
            current[int(last)] = value
        else:
            current[last] = value
    except (KeyError, IndexError, ValueError, TypeError, AttributeError) as exc:
        raise ConfigError(f"override path '{dotted}' does not resolve: {exc}") from exc


def load_document(path: str, overrides: list[str]) -> Any:
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"config syntax error{where}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like dotted.key=value, got {item!r}")
        key, _, raw = item.partition("=")
        set_by_path(doc, key, yaml.safe_load(raw) if raw != "" else None)
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragkit", description=__doc__)
    parser.add_argument("--log-level", default="info", choices=["error", "warn", "info", "debug"])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("-c", "--config", required=True, help="YAML config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="dotted-path config override (repeatable)")

    p_process = sub.add_parser("process", help="run a dataset-processing pipeline")
    add_common(p_process)
    p_process.add_argument("--cache-dir", default=".ragkit_cache")
    p_process.add_argument("--no-cache", action="store_true", help="recompute every step")
    p_process.add_argument("--max-concurrency", type=int, default=4,
                           help="worker pool size for per-record steps")

    p_infer = sub.add_parser("infer", help="generate predictions for a processed dataset")
    add_common(p_infer)
    p_infer.add_argument("--max-concurrency", type=int, default=None,
                         help="override the config's in-flight request cap")

    p_eval = sub.add_parser("eval", help="run metrics over data and prediction files")
    add_common(p_eval)

    p_train = sub.add_parser("export-train", help="export prompt/completion training files")
    add_common(p_train)

    p_cache = sub.add_parser("cache", help="inspect or clear the step cache")
    cache_sub = p_cache.add_subparsers(dest="cache_command", required=True)
    for name in ("stats", "clear"):
        cp = cache_sub.add_parser(name)
        cp.add_argument("--cache-dir", default=".ragkit_cache")
    return parser


def _cmd_process(args) -> int:
    doc = load_document(args.config, args.overrides)
    config = parse_pipeline_document(doc)
    env = ExecutionContext(workers=args.max_concurrency)
    if args.no_cache:
        env.use_cache = False
    report = run_pipeline(config, args.cache_dir, env)
    totals = report.totals
    logger.info(
        "pipeline %s: %d steps, %d cache hits, %d ms",
        report.pipeline, totals["steps"], totals["cache_hits"], totals["duration_ms"],
    )
    return 0


def _cmd_infer(args) -> int:
    doc = load_document(args.config, args.overrides)
    config = InferenceConfig.from_mapping(doc)
    if args.max_concurrency is not None:
        config.max_concurrency = args.max_concurrency
    summary = run_inference(config)
    if summary.failed:
        logger.error("%d of %d rows failed", summary.failed, summary.total)
        return 3
    logger.info("wrote %d predictions to %s", summary.total, summary.generated_file)
    return 0


def _cmd_eval(args) -> int:
    doc = load_document(args.config, args.overrides)
    config = EvalConfig.from_mapping(doc)
    report = run_evaluation(config)
    for metric, value in report.global_scores.items():
        logger.info("%s: %s", metric, value)
    logger.info("results written to %s", report.results_file)
    return 0


def _cmd_export_train(args) -> int:
    doc = load_document(args.config, args.overrides)
    config = TrainExportConfig.from_mapping(doc)
    report = export_training_file(config)
    logger.info(
        "exported %d/%d rows (%d rejected) to %s",
        report.exported, report.total, report.rejected, report.output_file,
    )
    return 0


def _cmd_cache(args) -> int:
    cache = StepCache(args.cache_dir)
    if args.cache_command == "stats":
        stats = cache.stats()
        print(json.dumps(stats))
        return 0
    removed = cache.clear()
    print(json.dumps({"removed": removed}))
    return 0


_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=_LEVELS[args.log_level],
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "process":
            return _cmd_process(args)
        if args.command == "infer":
            return _cmd_infer(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "export-train":
            return _cmd_export_train(args)
        if args.command == "cache":
            return _cmd_cache(args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        logger.error("%s", exc)
        return 1
    except StepError as exc:
        logger.error("%s", exc)
        return 2
    except RagkitError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
