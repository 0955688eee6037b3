"""Local and global answer metrics.

Local metrics score one example and return None when inapplicable (empty
gold list, say); the runner averages the non-null values. Classification
is global: it maps each prediction onto a label by normalized prefix and
reports accuracy plus macro-F1 over the labels present in the golds.
"""

from __future__ import annotations

from collections import Counter

from ..errors import ConfigError
from .normalize import answer_tokens, normalize_answer


def exact_match(pred: str, golds: list[str]) -> float | None:
    if not golds:
        return None
    normalized = normalize_answer(pred)
    return 1.0 if any(normalize_answer(g) == normalized for g in golds) else 0.0


def token_f1(pred: str, golds: list[str]) -> float | None:
    """Max over golds of multiset token overlap F1 = 2o / (|pred| + |gold|)."""
    if not golds:
        return None
    pred_tokens = answer_tokens(pred)
    best = 0.0
    for gold in golds:
        gold_tokens = answer_tokens(gold)
        if not pred_tokens and not gold_tokens:
            best = max(best, 1.0)
            continue
        if not pred_tokens or not gold_tokens:
            continue
        overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
        best = max(best, 2.0 * overlap / (len(pred_tokens) + len(gold_tokens)))
    return best


def _is_contiguous_subsequence(needle: list[str], hay: list[str]) -> bool:
    if not needle:
        return False
    n = len(needle)
    return any(hay[i : i + n] == needle for i in range(len(hay) - n + 1))


def str_em(pred: str, gold_groups: list[list[str]]) -> float | None:
    """Fraction of alias groups matched as contiguous token subsequences."""
    pred_tokens = answer_tokens(pred)
    counted = 0
    matched = 0
    for group in gold_groups:
        if not group:
            continue  # empty groups are skipped from the denominator
        counted += 1
        if any(_is_contiguous_subsequence(answer_tokens(alias), pred_tokens) for alias in group):
            matched += 1
    if counted == 0:
        return None
    return matched / counted


def map_to_label(pred: str, labels: list[str]) -> str | None:
    """First label whose normalized form is a prefix of the normalized pred."""
    normalized = normalize_answer(pred)
    for label in labels:
        if normalized.startswith(normalize_answer(label)):
            return label
    return None


def classification(preds: list[str], golds: list[str], labels: list[str]) -> dict[str, float]:
    if len(preds) != len(golds):
        raise ConfigError(f"classification got {len(preds)} preds but {len(golds)} golds")
    by_norm = {normalize_answer(l): l for l in labels}
    gold_labels = []
    for g in golds:
        mapped = by_norm.get(normalize_answer(g))
        if mapped is None:
            raise ConfigError(f"unknown gold label: {g!r}")
        gold_labels.append(mapped)
    pred_labels = [map_to_label(p, labels) for p in preds]

    correct = sum(1 for p, g in zip(pred_labels, gold_labels) if p == g)
    accuracy = correct / len(golds) if golds else 0.0

    present = [l for l in labels if l in set(gold_labels)]
    f1s = []
    for label in present:
        tp = sum(1 for p, g in zip(pred_labels, gold_labels) if p == label and g == label)
        fp = sum(1 for p, g in zip(pred_labels, gold_labels) if p == label and g != label)
        fn = sum(1 for p, g in zip(pred_labels, gold_labels) if p != label and g == label)
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    macro_f1 = sum(f1s) / len(f1s) if f1s else 0.0
    return {"accuracy": accuracy, "macro_f1": macro_f1}
