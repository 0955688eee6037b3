"""Prediction generation against a chat-completions endpoint or a mock.

The real client POSTs an OpenAI-compatible chat request (system message =
instruction file, user message = the record's prompt) and keeps only the
newly generated text. The mock is a pure function of the prompt so runs
are reproducible; it reports zero latency to keep output files
byte-identical across runs and concurrency levels.
"""

from __future__ import annotations

import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .canonical import sha256_hex
from .data import read_jsonl, write_jsonl
from .errors import ConfigError, EndpointError
from .http import HttpTransport, default_transport, request_with_retries

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\S+")


@dataclass
class GenerationOptions:
    max_new_tokens: int = 256
    temperature: float = 0.0
    do_sample: bool = False
    stop: list[str] | None = None

    @property
    def effective_temperature(self) -> float:
        return self.temperature if self.do_sample else 0.0


@dataclass
class Generation:
    text: str
    finish_reason: str
    model: str
    latency_ms: int


def truncate_at_stop(text: str, stop: list[str] | None) -> tuple[str, bool]:
    if not stop:
        return text, False
    cut = len(text)
    for marker in stop:
        pos = text.find(marker)
        if pos != -1:
            cut = min(cut, pos)
    return text[:cut], cut < len(text)


def truncate_tokens(text: str, max_tokens: int) -> tuple[str, bool]:
    """Cut after max_tokens whitespace-delimited tokens, keeping original spacing."""
    if max_tokens <= 0:
        return "", bool(text)
    count = 0
    for match in _TOKEN_RE.finditer(text):
        count += 1
        if count == max_tokens:
            return text[: match.end()], match.end() < len(text)
    return text, False


@dataclass
class ChatEndpoint:
    base_url: str
    model: str
    api_key_env: str | None = None

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise ConfigError(f"environment variable {self.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers


@dataclass
class MockEndpoint:
    """Deterministic stand-in endpoint.

    Modes: ``echo`` returns the prompt; ``fixed`` returns a constant;
    ``lookup`` maps sha256(prompt) hex digests to canned strings with an
    optional default.
    """

    mode: str = "echo"
    text: str = ""
    table: dict[str, str] = field(default_factory=dict)
    default: str | None = None
    model: str = "mock"

    def __post_init__(self):
        if self.mode not in ("echo", "fixed", "lookup"):
            raise ConfigError(f"mock mode must be echo, fixed, or lookup, got {self.mode!r}")

    def complete(self, prompt: str) -> str:
        if self.mode == "echo":
            return prompt
        if self.mode == "fixed":
            return self.text
        key = sha256_hex(prompt.encode("utf-8"))
        if key in self.table:
            return self.table[key]
        if self.default is not None:
            return self.default
        raise EndpointError(f"mock lookup table has no entry for prompt hash {key}")


def generate(
    endpoint: ChatEndpoint | MockEndpoint,
    system_instruction: str,
    prompt: str,
    options: GenerationOptions,
    *,
    transport: HttpTransport | None = None,
    timeout: float = 120.0,
    retries: int = 3,
    backoff: float = 0.25,
) -> Generation:
    """Run one two-message chat completion and return only the new text."""
    if isinstance(endpoint, MockEndpoint):
        text = endpoint.complete(prompt)
        text, stopped = truncate_at_stop(text, options.stop)
        text, truncated = truncate_tokens(text, options.max_new_tokens)
        reason = "length" if truncated else "stop"
        return Generation(text=text, finish_reason=reason, model=endpoint.model, latency_ms=0)

    body: dict[str, Any] = {
        "model": endpoint.model,
        "messages": [
            {"role": "system", "content": system_instruction},
            {"role": "user", "content": prompt},
        ],
        "max_tokens": options.max_new_tokens,
        "temperature": options.effective_temperature,
    }
    if options.stop:
        body["stop"] = options.stop
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    started = time.perf_counter()
    resp = request_with_retries(
        transport or default_transport(),
        "POST",
        url,
        headers=endpoint.headers(),
        json_body=body,
        timeout=timeout,
        retries=retries,
        backoff=backoff,
        what="completion",
    )
    latency_ms = int((time.perf_counter() - started) * 1000)
    try:
        payload = resp.json()
        choice = payload["choices"][0]
        text = choice["message"]["content"] or ""
        reason = choice.get("finish_reason") or "stop"
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise EndpointError(f"malformed completion response from {url}: {exc}") from exc
    text, _ = truncate_at_stop(text, options.stop)  # defensive; servers may ignore stop
    return Generation(text=text, finish_reason=reason, model=endpoint.model, latency_ms=latency_ms)


# ---------------------------------------------------------------------------
# Batch inference


@dataclass
class InferenceConfig:
    endpoint: ChatEndpoint | MockEndpoint
    data_file: str
    generated_file: str
    instruction_file: str | None = None
    prompt_field: str = "my_prompt"
    options: GenerationOptions = field(default_factory=GenerationOptions)
    max_concurrency: int = 4
    timeout: float = 120.0
    retries: int = 3
    backoff: float = 0.25

    @classmethod
    def from_mapping(cls, doc: Any) -> "InferenceConfig":
        if not isinstance(doc, dict):
            raise ConfigError("inference config must be a mapping")
        model = doc.get("model")
        if not isinstance(model, dict):
            raise ConfigError("inference config needs a 'model' block")
        if ("endpoint" in model) == ("mock" in model):
            raise ConfigError("model block needs exactly one of 'endpoint' or 'mock'")
        if "endpoint" in model:
            spec = model["endpoint"]
            try:
                endpoint: ChatEndpoint | MockEndpoint = ChatEndpoint(
                    base_url=spec["base_url"],
                    model=spec["model_name"],
                    api_key_env=spec.get("api_key_env"),
                )
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"bad endpoint spec: {exc}") from exc
        else:
            spec = model["mock"] or {}
            endpoint = MockEndpoint(
                mode=spec.get("mode", "echo"),
                text=spec.get("text", ""),
                table=spec.get("table", {}),
                default=spec.get("default"),
            )
        gen = model.get("generation", {}) or {}
        stop = gen.get("stop")
        if isinstance(stop, str):
            stop = [stop]
        options = GenerationOptions(
            max_new_tokens=gen.get("max_new_tokens", 256),
            temperature=float(gen.get("temperature", 0.0)),
            do_sample=gen.get("do_sample", False),
            stop=stop,
        )
        for key in ("data_file", "generated_file"):
            if not isinstance(doc.get(key), str):
                raise ConfigError(f"inference config needs '{key}'")
        return cls(
            endpoint=endpoint,
            data_file=doc["data_file"],
            generated_file=doc["generated_file"],
            instruction_file=model.get("instruction"),
            prompt_field=doc.get("prompt_field", "my_prompt"),
            options=options,
            max_concurrency=int(doc.get("max_concurrency", 4)),
            timeout=float(doc.get("timeout", 120.0)),
            retries=int(doc.get("retries", 3)),
            backoff=float(doc.get("backoff", 0.25)),
        )

    @classmethod
    def from_yaml(cls, text: str) -> "InferenceConfig":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"inference config syntax error: {exc}") from exc
        return cls.from_mapping(doc)


@dataclass
class InferenceSummary:
    total: int
    failed: int
    generated_file: str


def run_inference(config: InferenceConfig, *, transport: HttpTransport | None = None) -> InferenceSummary:
    """Generate one prediction per input row, written in input order.

    Rows are dispatched to a bounded worker pool; results are reassembled
    by index before writing so concurrency never reorders output. Rows
    that still fail after retries are recorded with generated=null and an
    error message; the summary's failed count drives the nonzero exit.
    """
    rows = read_jsonl(config.data_file)
    for i, row in enumerate(rows):
        if config.prompt_field not in row:
            raise ConfigError(f"row {i}: missing prompt field '{config.prompt_field}'")

    instruction = ""
    if config.instruction_file:
        try:
            instruction = Path(config.instruction_file).read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read instruction file: {exc}") from exc

    def run_row(i: int) -> dict[str, Any]:
        prompt = str(rows[i][config.prompt_field])
        base: dict[str, Any] = {"index": i, "prompt": prompt}
        try:
            result = generate(
                config.endpoint,
                instruction,
                prompt,
                config.options,
                transport=transport,
                timeout=config.timeout,
                retries=config.retries,
                backoff=config.backoff,
            )
        except Exception as exc:  # noqa: BLE001 - recorded per row
            logger.error("row %d failed: %s", i, exc)
            base.update({"generated": None, "model": None, "latency_ms": 0,
                         "finish_reason": "error", "error": str(exc)})
            return base
        base.update(
            {
                "generated": result.text,
                "model": result.model,
                "latency_ms": result.latency_ms,
                "finish_reason": result.finish_reason,
            }
        )
        return base

    workers = max(1, config.max_concurrency)
    if workers == 1:
        predictions = [run_row(i) for i in range(len(rows))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            predictions = list(pool.map(run_row, range(len(rows))))

    write_jsonl(config.generated_file, predictions)
    failed = sum(1 for p in predictions if p["generated"] is None)
    if failed:
        logger.error("%d of %d rows failed", failed, len(rows))
    return InferenceSummary(total=len(rows), failed=failed, generated_file=config.generated_file)
