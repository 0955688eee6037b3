"""Answer processing and the metric suite over (data, predictions) pairs."""

from .embedding import HashedBowEmbedder, RemoteEmbedder, cosine, semantic_similarity
from .judges import BUILTIN_JUDGES, ChatJudge, EchoJudge, LexicalJudge, faithfulness, relevancy
from .metrics import classification, exact_match, str_em, token_f1
from .normalize import answer_tokens, normalize_answer
from .processor import AnswerProcessor, AnswerProcessorSpec, ProcessedAnswer, process_answer
from .runner import EvalConfig, EvalKeys, EvalReport, MetricSpec, run_evaluation

__all__ = [
    "AnswerProcessor",
    "AnswerProcessorSpec",
    "BUILTIN_JUDGES",
    "ChatJudge",
    "EchoJudge",
    "EvalConfig",
    "EvalKeys",
    "EvalReport",
    "HashedBowEmbedder",
    "LexicalJudge",
    "MetricSpec",
    "ProcessedAnswer",
    "RemoteEmbedder",
    "answer_tokens",
    "classification",
    "cosine",
    "exact_match",
    "faithfulness",
    "normalize_answer",
    "process_answer",
    "relevancy",
    "run_evaluation",
    "semantic_similarity",
    "str_em",
    "token_f1",
]
