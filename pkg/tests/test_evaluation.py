import json
import random
import string

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from ragkit.data import write_jsonl
from ragkit.errors import ConfigError
from ragkit.evaluation import (
    AnswerProcessor,
    AnswerProcessorSpec,
    EvalConfig,
    HashedBowEmbedder,
    classification,
    cosine,
    exact_match,
    normalize_answer,
    process_answer,
    run_evaluation,
    semantic_similarity,
    str_em,
    token_f1,
)


# ---------------------------------------------------------------------------
# normalize_answer: the four stated rules applied by hand


def test_normalize_worked_example():
    assert normalize_answer("The Eiffel Tower!") == "eiffel tower"


def test_normalize_empty():
    assert normalize_answer("") == ""


def test_normalize_all_articles():
    assert normalize_answer("a  an the") == ""


def test_normalize_punctuation_and_whitespace():
    assert normalize_answer("  Don't   stop, now.  ") == "dont stop now"
    assert normalize_answer("AN apple A day") == "apple day"


# ---------------------------------------------------------------------------
# answer processor


def test_capture_first_match():
    spec = AnswerProcessorSpec(capture_pattern="Answer: (.*)")
    assert process_answer("Let me think. Answer: Paris is it.", spec) == "Paris is it."


def test_capture_cot_marker():
    spec = AnswerProcessorSpec(capture_pattern="<ANSWER>: (.*)")
    assert process_answer("step 1... <ANSWER>: 42", spec) == "42"


def test_no_match_passthrough_flag():
    processor = AnswerProcessor(AnswerProcessorSpec(capture_pattern="Answer: (.*)"))
    result = processor.apply("no marker here")
    assert result.text == "no marker here"
    assert result.captured is False


def test_first_of_multiple_matches_wins():
    spec = AnswerProcessorSpec(capture_pattern="Answer: (.*)")
    out = process_answer("Answer: first\nAnswer: second", spec)
    assert out == "first"


def test_stopping_pattern_truncates():
    spec = AnswerProcessorSpec(capture_pattern="Answer: (.*)", stopping_pattern=r"\.")
    assert process_answer("Answer: Paris. More words", spec) == "Paris"


def test_stopping_pattern_without_capture():
    spec = AnswerProcessorSpec(stopping_pattern="STOP")
    assert process_answer("keep this STOP drop this", spec) == "keep this"


def test_processor_validates_patterns():
    with pytest.raises(ConfigError, match="exactly one capture group"):
        AnswerProcessor(AnswerProcessorSpec(capture_pattern="Answer: (.*) (.*)"))
    with pytest.raises(ConfigError, match="invalid capture_pattern"):
        AnswerProcessor(AnswerProcessorSpec(capture_pattern="[unclosed"))
    with pytest.raises(ConfigError, match="invalid stopping_pattern"):
        AnswerProcessor(AnswerProcessorSpec(stopping_pattern="[unclosed"))


@given(st.text(max_size=40))
def test_processor_idempotent_without_capture(text):
    spec = AnswerProcessorSpec(stopping_pattern="XX")
    once = process_answer(text, spec)
    assert process_answer(once, spec) == once


# ---------------------------------------------------------------------------
# EM / token F1: 20 hand-computed cases. F1 values are written as the
# multiset-overlap fractions 2*o/(|pred|+|gold|) worked out by hand.

EM_F1_CASES = [
    ("The Eiffel Tower", ["eiffel tower"], 1.0, 1.0),
    ("the cat sat", ["cat sat down"], 0.0, 2 * 2 / (2 + 3)),
    ("Paris", ["London"], 0.0, 0.0),
    ("Paris", ["Paris"], 1.0, 1.0),
    ("Paris, France", ["paris france"], 1.0, 1.0),
    ("a an the", ["something"], 0.0, 0.0),
    ("", [""], 1.0, 1.0),
    ("yes", ["yes", "no"], 1.0, 1.0),
    ("no", ["yes", "no"], 1.0, 1.0),
    ("blue red green", ["red green blue"], 0.0, 1.0),
    ("big big cat", ["big cat"], 0.0, 2 * 2 / (3 + 2)),
    ("The quick brown fox", ["quick brown fox!"], 1.0, 1.0),
    ("an apple", ["apple"], 1.0, 1.0),
    ("apple pie", ["apple"], 0.0, 2 * 1 / (2 + 1)),
    ("one two three four", ["one two", "three four five"], 0.0, 2 * 2 / (4 + 2)),
    ("42", ["42"], 1.0, 1.0),
    ("answer is 42", ["42 is answer"], 0.0, 1.0),
    ("Don't stop", ["dont stop"], 1.0, 1.0),
    ("  spaced   out  ", ["spaced out"], 1.0, 1.0),
    ("alpha beta", ["beta gamma", "alpha delta"], 0.0, 2 * 1 / (2 + 2)),
]


@pytest.mark.parametrize("pred,golds,em,f1", EM_F1_CASES)
def test_em_f1_oracle_suite(pred, golds, em, f1):
    assert exact_match(pred, golds) == em
    assert token_f1(pred, golds) == pytest.approx(f1, abs=1e-9)


def test_worked_f1_is_exact():
    assert token_f1("the cat sat", ["cat sat down"]) == 0.8


def test_empty_golds_skip():
    assert exact_match("x", []) is None
    assert token_f1("x", []) is None


def test_f1_symmetry():
    for pred, golds, _, _ in EM_F1_CASES:
        for gold in golds:
            assert token_f1(pred, [gold]) == pytest.approx(token_f1(gold, [pred]), abs=1e-12)


WORDS = ["paris", "tower", "cat", "dog", "blue", "sky", "answer", "42"]
DECOR = ["", "the ", "a ", "an ", ", ", "! "]


def decorate(base: str, rng: random.Random) -> str:
    # case flips, punctuation, and article inserts all normalize away, but
    # token boundaries must survive, so every token ends with a space
    out = []
    for token in base.split():
        out.append(rng.choice(DECOR))
        out.append((token.upper() if rng.random() < 0.5 else token) + " ")
    out.append(rng.choice(["", ".", "!"]))
    return "".join(out)


def test_em_implies_f1_on_fuzzed_pairs():
    rng = random.Random(20240)
    checked = 0
    for _ in range(1000):
        base = " ".join(rng.choices(WORDS, k=rng.randint(1, 5)))
        pred, gold = decorate(base, rng), decorate(base, rng)
        if rng.random() < 0.3:
            gold = gold + " extra"
        em = exact_match(pred, [gold])
        if em == 1.0:
            checked += 1
            assert token_f1(pred, [gold]) == 1.0
    assert checked > 300  # the fuzzer actually produced EM=1 pairs


@settings(max_examples=200)
@given(st.text(alphabet=string.ascii_lowercase + " .,!", max_size=30),
       st.text(alphabet=string.ascii_lowercase + " .,!", max_size=30))
def test_metric_ranges(pred, gold):
    em = exact_match(pred, [gold])
    f1 = token_f1(pred, [gold])
    assert em in (0.0, 1.0)
    assert 0.0 <= f1 <= 1.0
    if em == 1.0:
        assert f1 == 1.0


# ---------------------------------------------------------------------------
# STR-EM


def test_str_em_both_groups_matched():
    assert str_em("both Paris and Lyon", [["Paris"], ["Lyon"]]) == 1.0


def test_str_em_half_matched():
    assert str_em("both Paris and Lyon", [["Paris"], ["Rome"]]) == 0.5


def test_str_em_empty_pred():
    assert str_em("", [["Paris"], ["Rome"]]) == 0.0


def test_str_em_contiguity_matters():
    # alias tokens must appear contiguously, not merely all be present
    assert str_em("paris is lyon", [["paris lyon"]]) == 0.0
    assert str_em("in paris lyon today", [["paris lyon"]]) == 1.0


def test_str_em_alias_within_group():
    assert str_em("the big apple", [["new york", "big apple"]]) == 1.0


def test_str_em_empty_groups_skipped():
    assert str_em("paris", [[], ["paris"]]) == 1.0
    assert str_em("paris", [[], []]) is None


# ---------------------------------------------------------------------------
# classification


def test_classification_perfect():
    result = classification(["yes", "no"], ["yes", "no"], ["yes", "no", "maybe"])
    assert result == {"accuracy": 1.0, "macro_f1": 1.0}


def test_classification_prefix_rule():
    result = classification(["Yes, because of the trial."], ["yes"], ["yes", "no"])
    assert result["accuracy"] == 1.0


def test_classification_gibberish_is_wrong():
    result = classification(["unmatched-gibberish"] * 3, ["yes", "no", "yes"], ["yes", "no"])
    assert result["accuracy"] == 0.0


def test_classification_unknown_gold():
    with pytest.raises(ConfigError, match="unknown gold label"):
        classification(["yes"], ["sometimes"], ["yes", "no"])


def test_classification_macro_f1_hand_computed():
    # preds: yes yes no ; golds: yes no no
    # yes: tp=1 fp=1 fn=0 -> f1 = 2/(2+1+0) = 2/3 ; no: tp=1 fp=0 fn=1 -> 2/3
    result = classification(["yes", "yes", "no"], ["yes", "no", "no"], ["yes", "no"])
    assert result["accuracy"] == pytest.approx(2 / 3, abs=1e-12)
    assert result["macro_f1"] == pytest.approx(2 / 3, abs=1e-12)


# ---------------------------------------------------------------------------
# semantic similarity


def test_semantic_similarity_identical_is_exactly_one():
    embedder = HashedBowEmbedder()
    assert semantic_similarity("same words here", ["same words here"], embedder) == 1.0


def test_semantic_similarity_disjoint_is_zero():
    embedder = HashedBowEmbedder()
    # chosen so the hashed buckets do not collide (verified below)
    a, b = "alpha beta", "gamma delta"
    buckets_a = {embedder._bucket(t) for t in ("alpha", "beta")}
    buckets_b = {embedder._bucket(t) for t in ("gamma", "delta")}
    assert not (buckets_a & buckets_b)
    assert semantic_similarity(a, [b], embedder) == 0.0


def test_semantic_similarity_max_over_golds():
    embedder = HashedBowEmbedder()
    score = semantic_similarity("paris", ["london", "paris"], embedder)
    assert score == 1.0


def test_cosine_symmetry_and_range():
    embedder = HashedBowEmbedder()
    u = embedder.embed("one two three")
    v = embedder.embed("two three four")
    assert cosine(u, v) == cosine(v, u)
    assert -1.0 <= cosine(u, v) <= 1.0


def test_cosine_zero_vector():
    assert cosine([0.0, 0.0], [1.0, 0.0]) == 0.0


def test_cosine_dimension_mismatch():
    with pytest.raises(ConfigError):
        cosine([1.0], [1.0, 2.0])


def test_semantic_similarity_embedder_failure_is_null():
    from ragkit.errors import EndpointError

    class Broken:
        def embed(self, text):
            raise EndpointError("down")

    assert semantic_similarity("x", ["y"], Broken()) is None


# ---------------------------------------------------------------------------
# run_evaluation


def eval_config(tmp_path, metrics, data_rows, generated_rows, **extra):
    data_file = tmp_path / "data.jsonl"
    generated_file = tmp_path / "generated.jsonl"
    write_jsonl(data_file, data_rows)
    write_jsonl(generated_file, generated_rows)
    doc = {
        "answer_processor": {"capture_pattern": "Answer: (.*)"},
        "metrics": metrics,
        "data_file": str(data_file),
        "generated_file": str(generated_file),
        "results_file": str(tmp_path / "results.yaml"),
        **extra,
    }
    return EvalConfig.from_mapping(doc)


def toy_rows(n=50):
    data, generated = [], []
    for i in range(n):
        data.append({"query": f"q{i}", "answers": [f"answer {i}"]})
        text = f"Answer: answer {i}" if i % 2 == 0 else f"Answer: wrong {i} guess"
        generated.append({"index": i, "generated": text})
    return data, generated


def test_run_evaluation_means_rederivable(tmp_path):
    data, generated = toy_rows(50)
    config = eval_config(tmp_path, [{"_target_": "exact_match"}, {"_target_": "token_f1"}], data, generated)
    report = run_evaluation(config)

    rows = [json.loads(l) for l in open(report.examples_file)]
    assert len(rows) == 50
    for metric in ("exact_match", "token_f1"):
        values = [r["metrics"][metric] for r in rows if r["metrics"][metric] is not None]
        assert report.global_scores[metric] == pytest.approx(sum(values) / len(values), abs=1e-12)

    results = yaml.safe_load(open(report.results_file))
    assert results["global"]["exact_match"] == report.global_scores["exact_match"]
    assert results["evaluated"] == 50 and results["skipped"] == 0
    assert results["examples_file"] == report.examples_file
    assert "config_digest" in results and len(results["config_digest"]) == 64


def test_run_evaluation_empty_metrics_rejected(tmp_path):
    data, generated = toy_rows(2)
    with pytest.raises(ConfigError, match="no metrics configured"):
        eval_config(tmp_path, [], data, generated)


def test_run_evaluation_length_mismatch_names_counts(tmp_path):
    data, generated = toy_rows(3)
    config = eval_config(tmp_path, [{"_target_": "exact_match"}], data, generated[:-1])
    with pytest.raises(ConfigError, match="3 rows.*2"):
        run_evaluation(config)


def test_run_evaluation_unknown_metric(tmp_path):
    data, generated = toy_rows(2)
    with pytest.raises(ConfigError, match="unknown metric id"):
        eval_config(tmp_path, [{"_target_": "bleu"}], data, generated)


def test_run_evaluation_null_for_failed_rows(tmp_path):
    data = [{"query": "q", "answers": ["a"]}, {"query": "q2", "answers": ["b"]}]
    generated = [{"index": 0, "generated": "Answer: a"}, {"index": 1, "generated": None}]
    config = eval_config(tmp_path, [{"_target_": "exact_match"}], data, generated)
    report = run_evaluation(config)
    assert report.evaluated == 1 and report.skipped == 1
    assert report.examples[1].metrics["exact_match"] is None
    assert report.global_scores["exact_match"] == 1.0  # mean over the single non-null


def test_run_evaluation_classification_global(tmp_path):
    data = [{"query": "q", "answers": ["yes"]}, {"query": "q", "answers": ["no"]}]
    generated = [
        {"index": 0, "generated": "Answer: yes definitely"},
        {"index": 1, "generated": "Answer: no"},
    ]
    config = eval_config(
        tmp_path, [{"_target_": "classification", "labels": ["yes", "no", "maybe"]}], data, generated
    )
    report = run_evaluation(config)
    assert report.global_scores["classification"] == {"accuracy": 1.0, "macro_f1": 1.0}


def test_run_evaluation_does_not_mutate_inputs(tmp_path):
    data, generated = toy_rows(5)
    config = eval_config(tmp_path, [{"_target_": "exact_match"}], data, generated)
    before = (open(config.data_file, "rb").read(), open(config.generated_file, "rb").read())
    run_evaluation(config)
    after = (open(config.data_file, "rb").read(), open(config.generated_file, "rb").read())
    assert before == after


def test_run_evaluation_str_em_groups(tmp_path):
    data = [{"query": "q", "answers": [["Paris"], ["Lyon"]]}]
    generated = [{"index": 0, "generated": "Answer: both Paris and Lyon"}]
    config = eval_config(tmp_path, [{"_target_": "str_em"}], data, generated)
    report = run_evaluation(config)
    assert report.global_scores["str_em"] == 1.0


def test_run_evaluation_concurrency_invisible(tmp_path):
    data, generated = toy_rows(40)
    seq = eval_config(
        tmp_path, [{"_target_": "exact_match"}, {"_target_": "token_f1"}], data, generated,
        max_concurrency=1, results_file=str(tmp_path / "r1.yaml"),
        examples_file=str(tmp_path / "e1.jsonl"),
    )
    par = eval_config(
        tmp_path, [{"_target_": "exact_match"}, {"_target_": "token_f1"}], data, generated,
        max_concurrency=8, results_file=str(tmp_path / "r8.yaml"),
        examples_file=str(tmp_path / "e8.jsonl"),
    )
    run_evaluation(seq)
    run_evaluation(par)
    assert open(seq.examples_file, "rb").read() == open(par.examples_file, "rb").read()
