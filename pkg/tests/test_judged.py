from ragkit.errors import EndpointError
from ragkit.evaluation import (
    ChatJudge,
    EchoJudge,
    HashedBowEmbedder,
    LexicalJudge,
    faithfulness,
    relevancy,
)
from ragkit.inference import MockEndpoint


class StubJudge:
    """Scripted judge for exact-ratio tests."""

    def __init__(self, statements=None, verdicts=None, questions=None, fail=False):
        self.statements = statements if statements is not None else []
        self._verdicts = verdicts if verdicts is not None else []
        self.questions = questions if questions is not None else []
        self.fail = fail

    def decompose_statements(self, answer):
        if self.fail:
            raise EndpointError("judge down")
        return self.statements

    def verdicts(self, context, statements):
        if self.fail:
            raise EndpointError("judge down")
        return self._verdicts

    def generate_questions(self, question, answer, n):
        if self.fail:
            raise EndpointError("judge down")
        return self.questions


# ---------------------------------------------------------------------------
# faithfulness


def test_faithfulness_two_of_four_supported():
    judge = StubJudge(statements=["s1", "s2", "s3", "s4"], verdicts=[True, False, True, False])
    assert faithfulness("q", "answer", "some context", judge) == 0.5


def test_faithfulness_zero_statements_is_null():
    judge = StubJudge(statements=[])
    assert faithfulness("q", "answer", "ctx", judge) is None


def test_faithfulness_all_supported():
    judge = StubJudge(statements=["s1", "s2"], verdicts=[True, True])
    assert faithfulness("q", "answer", "ctx", judge) == 1.0


def test_faithfulness_missing_context_is_null():
    judge = StubJudge(statements=["s1"], verdicts=[True])
    assert faithfulness("q", "answer", None, judge) is None
    assert faithfulness("q", "answer", "", judge) is None


def test_faithfulness_judge_failure_is_null():
    assert faithfulness("q", "answer", "ctx", StubJudge(fail=True)) is None


def test_faithfulness_short_verdicts_pad_unsupported(caplog):
    judge = StubJudge(statements=["s1", "s2", "s3", "s4"], verdicts=[True])
    with caplog.at_level("WARNING"):
        score = faithfulness("q", "a", "ctx", judge)
    assert score == 0.25


# ---------------------------------------------------------------------------
# relevancy


def test_relevancy_echo_judge_is_exactly_one():
    score = relevancy("where is paris?", "paris is in france", EchoJudge(), HashedBowEmbedder())
    assert score == 1.0


def test_relevancy_disjoint_questions_zero():
    embedder = HashedBowEmbedder()
    judge = StubJudge(questions=["gamma delta", "gamma delta"])
    buckets_q = {embedder._bucket(t) for t in ("alpha", "beta")}
    buckets_g = {embedder._bucket(t) for t in ("gamma", "delta")}
    assert not (buckets_q & buckets_g)
    assert relevancy("alpha beta", "answer", judge, embedder, n_questions=2) == 0.0


def test_relevancy_single_question_equals_cosine():
    from ragkit.evaluation import cosine

    embedder = HashedBowEmbedder()
    judge = StubJudge(questions=["where is the tower"])
    score = relevancy("where is paris", "ans", judge, embedder, n_questions=1)
    expected = cosine(embedder.embed("where is the tower"), embedder.embed("where is paris"))
    assert score == expected


def test_relevancy_failure_is_null():
    assert relevancy("q", "a", StubJudge(fail=True), HashedBowEmbedder()) is None


def test_relevancy_no_questions_is_null():
    assert relevancy("q", "a", StubJudge(questions=[]), HashedBowEmbedder()) is None


# ---------------------------------------------------------------------------
# built-in judges


def test_lexical_judge_decomposition_and_grounding():
    judge = LexicalJudge()
    statements = judge.decompose_statements("Paris is in France. The tower is tall!")
    assert statements == ["Paris is in France", "The tower is tall"]
    verdicts = judge.verdicts("paris is in france, a republic", statements)
    assert verdicts == [True, False]


def test_lexical_judge_faithfulness_end_to_end():
    score = faithfulness(
        "where", "Paris is in France. The tower is tall.", "Paris is in France.", LexicalJudge()
    )
    assert score == 0.5


# ---------------------------------------------------------------------------
# chat judge over a scripted endpoint


def lookup_mock(mapping):
    import hashlib

    table = {hashlib.sha256(k.encode()).hexdigest(): v for k, v in mapping.items()}
    return MockEndpoint(mode="lookup", table=table, default="")


def test_chat_judge_parses_statement_lines():
    mock = MockEndpoint(mode="fixed", text="first fact\n\nsecond fact\n")
    judge = ChatJudge(endpoint=mock)
    assert judge.decompose_statements("whatever") == ["first fact", "second fact"]


def test_chat_judge_parses_verdict_lines():
    mock = MockEndpoint(mode="fixed", text="1. supported\n2. UNSUPPORTED\nnoise line\nsupported")
    judge = ChatJudge(endpoint=mock)
    assert judge.verdicts("ctx", ["a", "b", "c"]) == [True, False, True]


def test_chat_judge_questions_capped_at_n():
    mock = MockEndpoint(mode="fixed", text="q1?\nq2?\nq3?\nq4?")
    judge = ChatJudge(endpoint=mock)
    assert judge.generate_questions("orig", "ans", 2) == ["q1?", "q2?"]


def test_chat_judge_with_faithfulness_ratio():
    mock = MockEndpoint(mode="fixed", text="supported\nunsupported")

    class TwoStatementJudge(ChatJudge):
        def decompose_statements(self, answer):
            return ["s1", "s2"]

    judge = TwoStatementJudge(endpoint=mock)
    assert faithfulness("q", "a", "ctx", judge) == 0.5
