"""Training export: turn processed rows into prompt/completion pairs.

Each row's rendered text is split at the first occurrence of the
completion marker; the marker stays at the end of the prompt so a
downstream trainer can mask loss up to and including it. When an
instruction file is configured its text is prepended to the prompt
(separated by a blank line), and the manifest records it either way.
prompt + completion always concatenates back to the exported source text.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .canonical import sha256_file
from .data import read_jsonl, write_jsonl
from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_HYPERPARAMETERS: dict[str, Any] = {
    "lora_r": 16,
    "lora_alpha": 16,
    "lora_dropout": 0.1,
    "learning_rate": 1e-4,
    "lr_scheduler_type": "cosine",
    "warmup_ratio": 0.03,
    "weight_decay": 0.001,
    "batch_size": 1,
    "num_train_epochs": 1,
}


@dataclass
class TrainExportConfig:
    data_file: str
    output_file: str
    completion_start: str
    instruction_file: str | None = None
    prompt_field: str = "my_prompt"
    strict: bool = True
    hyperparameters: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.completion_start:
            raise ConfigError("completion_start must be a non-empty string")

    @classmethod
    def from_mapping(cls, doc: Any) -> "TrainExportConfig":
        if not isinstance(doc, dict):
            raise ConfigError("training export config must be a mapping")
        for key in ("data_file", "output_file", "completion_start"):
            if not isinstance(doc.get(key), str) or not doc[key]:
                raise ConfigError(f"training export config needs '{key}'")
        return cls(
            data_file=doc["data_file"],
            output_file=doc["output_file"],
            completion_start=doc["completion_start"],
            instruction_file=doc.get("instruction"),
            prompt_field=doc.get("prompt_field", "my_prompt"),
            strict=doc.get("strict", True),
            hyperparameters=doc.get("hyperparameters") or {},
        )

    @classmethod
    def from_yaml(cls, text: str) -> "TrainExportConfig":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"training export config syntax error: {exc}") from exc
        return cls.from_mapping(doc)


@dataclass
class TrainExportReport:
    total: int
    exported: int
    rejected: int
    output_file: str
    manifest_file: str


def export_training_file(config: TrainExportConfig) -> TrainExportReport:
    """Write {prompt, completion} JSONL plus a hyperparameter manifest.

    Rows whose text lacks the marker, or whose completion would be empty,
    are rejected: under strict mode the export fails naming the first such
    row, otherwise they are skipped and counted in the manifest.
    """
    rows = read_jsonl(config.data_file)
    instruction: str | None = None
    if config.instruction_file:
        try:
            instruction = Path(config.instruction_file).read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read instruction file: {exc}") from exc

    marker = config.completion_start
    exported: list[dict[str, str]] = []
    rejected: list[int] = []
    for i, row in enumerate(rows):
        if config.prompt_field not in row:
            raise ConfigError(f"row {i}: missing prompt field '{config.prompt_field}'")
        text = str(row[config.prompt_field])
        pos = text.find(marker)
        completion = text[pos + len(marker) :] if pos != -1 else ""
        if pos == -1 or not completion:
            why = "has no completion marker" if pos == -1 else "has an empty completion"
            if config.strict:
                raise ConfigError(f"row {i}: text {why} ({marker!r})")
            rejected.append(i)
            continue
        prompt = text[: pos + len(marker)]
        if instruction is not None:
            prompt = instruction.rstrip("\n") + "\n\n" + prompt
        exported.append({"prompt": prompt, "completion": completion})

    write_jsonl(config.output_file, exported)
    manifest = {
        "instruction": instruction,
        "completion_start": marker,
        "prompt_field": config.prompt_field,
        "rows": {"total": len(rows), "exported": len(exported), "rejected": len(rejected)},
        "rejected_rows": rejected,
        "source_fingerprint": sha256_file(config.data_file),
        "hyperparameters": {**DEFAULT_HYPERPARAMETERS, **config.hyperparameters},
    }
    manifest_file = f"{config.output_file}.manifest.json"
    Path(manifest_file).write_text(json.dumps(manifest, ensure_ascii=False, indent=1), "utf-8")
    if rejected:
        logger.warning("skipped %d row(s) without a usable completion", len(rejected))
    logger.info("exported %d rows to %s", len(exported), config.output_file)
    return TrainExportReport(
        total=len(rows),
        exported=len(exported),
        rejected=len(rejected),
        output_file=config.output_file,
        manifest_file=manifest_file,
    )
