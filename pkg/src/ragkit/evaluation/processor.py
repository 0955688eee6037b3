"""Answer processor: regex capture and stopping-pattern truncation applied
to raw generations before any metric sees them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ConfigError


@dataclass
class AnswerProcessorSpec:
    capture_pattern: str | None = None
    stopping_pattern: str | None = None


@dataclass
class ProcessedAnswer:
    text: str
    captured: bool


class AnswerProcessor:
    def __init__(self, spec: AnswerProcessorSpec):
        self.spec = spec
        self._capture = None
        self._stop = None
        if spec.capture_pattern:
            try:
                self._capture = re.compile(spec.capture_pattern)
            except re.error as exc:
                raise ConfigError(f"invalid capture_pattern: {exc}") from exc
            if self._capture.groups != 1:
                raise ConfigError(
                    f"capture_pattern must have exactly one capture group, "
                    f"found {self._capture.groups}"
                )
        if spec.stopping_pattern:
            try:
                self._stop = re.compile(spec.stopping_pattern)
            except re.error as exc:
                raise ConfigError(f"invalid stopping_pattern: {exc}") from exc

    def apply(self, raw: str) -> ProcessedAnswer:
        """Capture from the first match, truncate at the first stop, trim."""
        captured = False
        text = raw
        if self._capture is not None:
            match = self._capture.search(raw)
            if match is not None:
                text = match.group(1)
                captured = True
        if self._stop is not None:
            stop_match = self._stop.search(text)
            if stop_match is not None:
                text = text[: stop_match.start()]
        return ProcessedAnswer(text=text.strip(), captured=captured)


def process_answer(raw: str, spec: AnswerProcessorSpec) -> str:
    return AnswerProcessor(spec).apply(raw).text
