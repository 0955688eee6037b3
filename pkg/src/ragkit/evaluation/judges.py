"""Judge-backed metrics: faithfulness and answer relevancy.

Faithfulness is the fraction of the answer's atomic statements a judge
finds supported by the context alone (two judge calls: decompose, then
verdicts). Relevancy embeds questions the judge regenerates from the
answer and averages their cosine similarity to the original question.

Judges are pluggable: a chat endpoint driven by the fixed prompt files in
``ragkit/judge_prompts`` (auditable, stub-able), or the offline built-ins
``lexical`` (substring-grounding verdicts, sentence-split decomposition)
and ``echo`` (repeats the original question; plumbing checks only).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from importlib import resources
from typing import Protocol

from ..errors import ConfigError, RagkitError
from ..http import HttpTransport
from ..inference import ChatEndpoint, GenerationOptions, MockEndpoint, generate
from .embedding import cosine
from .normalize import normalize_answer

logger = logging.getLogger(__name__)


class Judge(Protocol):
    def decompose_statements(self, answer: str) -> list[str]: ...

    def verdicts(self, context: str, statements: list[str]) -> list[bool]: ...

    def generate_questions(self, question: str, answer: str, n: int) -> list[str]: ...


def _prompt_text(name: str) -> str:
    return resources.files("ragkit").joinpath("judge_prompts", name).read_text("utf-8")


def _nonempty_lines(text: str) -> list[str]:
    return [line.strip() for line in text.splitlines() if line.strip()]


@dataclass
class ChatJudge:
    """Judge backed by a chat endpoint and the shipped prompt files."""

    endpoint: ChatEndpoint | MockEndpoint
    transport: HttpTransport | None = None
    max_new_tokens: int = 512
    timeout: float = 120.0

    def _ask(self, prompt: str) -> str:
        options = GenerationOptions(max_new_tokens=self.max_new_tokens)
        result = generate(
            self.endpoint, "", prompt, options, transport=self.transport, timeout=self.timeout
        )
        return result.text

    def decompose_statements(self, answer: str) -> list[str]:
        prompt = _prompt_text("statements.txt").replace("{answer}", answer)
        return _nonempty_lines(self._ask(prompt))

    def verdicts(self, context: str, statements: list[str]) -> list[bool]:
        prompt = (
            _prompt_text("verdicts.txt")
            .replace("{context}", context)
            .replace("{statements}", "\n".join(statements))
        )
        verdicts = []
        for line in _nonempty_lines(self._ask(prompt)):
            lowered = line.lower()
            if "unsupported" in lowered:
                verdicts.append(False)
            elif "supported" in lowered:
                verdicts.append(True)
            else:
                logger.warning("unparseable verdict line ignored: %r", line)
        return verdicts

    def generate_questions(self, question: str, answer: str, n: int) -> list[str]:
        prompt = _prompt_text("questions.txt").replace("{answer}", answer).replace("{n}", str(n))
        return _nonempty_lines(self._ask(prompt))[:n]


_SENTENCE_RE = re.compile(r"[.?!\n]+")


@dataclass
class LexicalJudge:
    """Offline judge: sentence-split decomposition, substring grounding."""

    def decompose_statements(self, answer: str) -> list[str]:
        return [s.strip() for s in _SENTENCE_RE.split(answer) if s.strip()]

    def verdicts(self, context: str, statements: list[str]) -> list[bool]:
        normalized_context = normalize_answer(context)
        return [
            bool(normalize_answer(s)) and normalize_answer(s) in normalized_context
            for s in statements
        ]

    def generate_questions(self, question: str, answer: str, n: int) -> list[str]:
        return [question] * n


@dataclass
class EchoJudge:
    """Plumbing stub: echoes the original question, supports everything."""

    def decompose_statements(self, answer: str) -> list[str]:
        return _nonempty_lines(answer)

    def verdicts(self, context: str, statements: list[str]) -> list[bool]:
        return [True] * len(statements)

    def generate_questions(self, question: str, answer: str, n: int) -> list[str]:
        return [question] * n


BUILTIN_JUDGES = {"lexical": LexicalJudge, "echo": EchoJudge}


def faithfulness(question: str, answer: str, context: str | None, judge: Judge) -> float | None:
    """Fraction of answer statements the judge finds supported by the context.

    Inapplicable cases return None: empty context, zero extracted
    statements, or a judge failure.
    """
    if not context:
        return None
    try:
        statements = judge.decompose_statements(answer)
        if not statements:
            return None
        verdicts = judge.verdicts(context, statements)
    except RagkitError as exc:
        logger.warning("faithfulness judge failed: %s", exc)
        return None
    if len(verdicts) < len(statements):
        logger.warning(
            "judge returned %d verdicts for %d statements; missing count as unsupported",
            len(verdicts),
            len(statements),
        )
        verdicts = verdicts + [False] * (len(statements) - len(verdicts))
    verdicts = verdicts[: len(statements)]
    return sum(verdicts) / len(statements)


def relevancy(
    question: str,
    answer: str,
    judge: Judge,
    embedder,
    n_questions: int = 3,
) -> float | None:
    """Mean cosine between regenerated-question embeddings and the original."""
    if n_questions < 1:
        raise ConfigError(f"n_questions must be >= 1, got {n_questions}")
    if not question:
        return None
    try:
        generated = judge.generate_questions(question, answer, n_questions)
        if not generated:
            return None
        original_vec = embedder.embed(question)
        sims = [cosine(embedder.embed(g), original_vec) for g in generated]
    except RagkitError as exc:
        logger.warning("relevancy judge/embedder failed: %s", exc)
        return None
    return sum(sims) / len(sims)
