"""Template-based prompt construction.

Templates are plain-text files with ``{placeholder}`` tokens; literal
braces are escaped as ``{{`` / ``}}``. Substituted values are inserted
verbatim in a single pass, so a value containing braces cannot inject
further substitutions.

Field rendering conventions for the prompter step:
  * strings pass through; other scalars render as JSON text
  * a list of objects carrying a "text" field renders as documents
  * any other list of objects renders as few-shot "Question:/Answer:"
    blocks separated by blank lines
  * a list of scalars renders as its first element (gold-answer lists)
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .data import Dataset
from .errors import ConfigError
from .pipeline import LocalStep, register_step

logger = logging.getLogger(__name__)

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class PromptTemplate:
    text: str
    segments: tuple[tuple[str, str], ...]  # ("lit", chunk) | ("ph", name)
    placeholders: frozenset[str]

    @classmethod
    def parse(cls, text: str) -> "PromptTemplate":
        segments: list[tuple[str, str]] = []
        names: set[str] = set()
        buf: list[str] = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch == "{":
                if text.startswith("{{", i):
                    buf.append("{")
                    i += 2
                    continue
                end = text.find("}", i)
                if end == -1:
                    raise ConfigError(f"unterminated placeholder at offset {i}")
                name = text[i + 1 : end]
                if not _NAME_RE.fullmatch(name):
                    raise ConfigError(f"invalid placeholder name {name!r}")
                if buf:
                    segments.append(("lit", "".join(buf)))
                    buf = []
                segments.append(("ph", name))
                names.add(name)
                i = end + 1
            elif ch == "}":
                if text.startswith("}}", i):
                    buf.append("}")
                    i += 2
                    continue
                raise ConfigError(f"unbalanced '}}' at offset {i}")
            else:
                buf.append(ch)
                i += 1
        if buf:
            segments.append(("lit", "".join(buf)))
        return cls(text=text, segments=tuple(segments), placeholders=frozenset(names))

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptTemplate":
        try:
            return cls.parse(Path(path).read_text("utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read prompt template {path}: {exc}") from exc


def render_template(template: PromptTemplate, values: Mapping[str, str]) -> str:
    """Substitute every placeholder exactly once; extra values only warn."""
    missing = sorted(template.placeholders - set(values))
    if missing:
        raise ConfigError(f"missing value for placeholder '{missing[0]}'")
    unknown = sorted(set(values) - template.placeholders)
    if unknown:
        logger.warning("values for unknown placeholder(s) ignored: %s", ", ".join(unknown))
    parts = []
    for kind, payload in template.segments:
        parts.append(payload if kind == "lit" else values[payload])
    return "".join(parts)


def format_docs(docs: list[Any], style: str = "numbered") -> str:
    """Serialize retrieved docs for prompt insertion.

    numbered: one "[i] <title?> <text>" line block per doc, newline-joined.
    plain: raw texts joined by blank lines. Empty input yields "".
    """
    if style not in ("numbered", "plain"):
        raise ConfigError(f"doc style must be 'numbered' or 'plain', got {style!r}")
    texts = []
    titles = []
    for doc in docs:
        if isinstance(doc, dict):
            texts.append(str(doc.get("text", "")))
            titles.append(doc.get("title"))
        else:
            texts.append(str(doc))
            titles.append(None)
    if style == "plain":
        return "\n\n".join(texts)
    lines = []
    for i, (title, text) in enumerate(zip(titles, texts), start=1):
        prefix = f"[{i}] " + (f"{title} " if title else "")
        lines.append(prefix + text)
    return "\n".join(lines)


def _render_scalar(value: Any) -> str:
    return value if isinstance(value, str) else json.dumps(value, ensure_ascii=False)


def render_field_value(
    value: Any,
    *,
    doc_style: str = "numbered",
    fewshot_question_field: str = "query",
    fewshot_answer_field: str = "answers",
) -> str:
    if isinstance(value, list):
        if not value:
            return ""
        if all(isinstance(v, dict) for v in value):
            if "text" in value[0]:
                return format_docs(value, style=doc_style)
            blocks = []
            for item in value:
                if fewshot_question_field not in item or fewshot_answer_field not in item:
                    raise KeyError(
                        f"few-shot item missing field "
                        f"'{fewshot_question_field}' or '{fewshot_answer_field}'"
                    )
                question = _render_scalar(item[fewshot_question_field])
                answer = item[fewshot_answer_field]
                if isinstance(answer, list):
                    answer = answer[0] if answer else ""
                blocks.append(f"Question: {question}\nAnswer: {_render_scalar(answer)}")
            return "\n\n".join(blocks)
        return _render_scalar(value[0])
    return _render_scalar(value)


@register_step
class TextPrompter(LocalStep):
    """Render a template per record and store the result under output_key.

    Mapping keys that the template does not mention are skipped, so one
    mapping can serve both training templates (which render {answer}) and
    inference templates (which omit it).
    """

    target = "prompting.text"
    file_params = ("prompt_file",)

    @dataclass
    class Params:
        prompt_file: str
        mapping: dict[str, str]
        output_key: str = "my_prompt"
        doc_style: str = "numbered"
        fewshot_question_field: str = "query"
        fewshot_answer_field: str = "answers"
        on_error: str = "fail"

    def prepare(self, datasets, env):
        self._template = PromptTemplate.from_file(self.params.prompt_file)
        unmapped = sorted(self._template.placeholders - set(self.params.mapping))
        if unmapped:
            raise ConfigError(f"unmapped placeholder '{unmapped[0]}' in {self.params.prompt_file}")
        skipped = sorted(set(self.params.mapping) - self._template.placeholders)
        if skipped:
            logger.debug("mapping keys absent from template ignored: %s", ", ".join(skipped))

    def transform(self, record, index):
        values = {}
        for placeholder in self._template.placeholders:
            field = self.params.mapping[placeholder]
            if field not in record:
                raise KeyError(f"missing mapped field '{field}'")
            values[placeholder] = render_field_value(
                record[field],
                doc_style=self.params.doc_style,
                fewshot_question_field=self.params.fewshot_question_field,
                fewshot_answer_field=self.params.fewshot_answer_field,
            )
        record[self.params.output_key] = render_template(self._template, values)
        return record


def prompter_step(
    dataset: Dataset,
    *,
    prompt_file: str | Path,
    mapping: dict[str, str],
    output_key: str = "my_prompt",
    doc_style: str = "numbered",
) -> Dataset:
    """Functional form of the prompter for direct use outside a pipeline."""
    from .pipeline import StepConfig, apply_local_step

    step = TextPrompter(
        StepConfig(
            target=TextPrompter.target,
            inputs=[dataset.name],
            params={
                "prompt_file": str(prompt_file),
                "mapping": mapping,
                "output_key": output_key,
                "doc_style": doc_style,
            },
        )
    )
    out, _ = apply_local_step(step, dataset)
    return out
