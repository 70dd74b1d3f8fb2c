"""Metric unit tests plus the hand-computed 3-sample golden report.

The golden fixture uses a hand-set embedding table: content tokens map to
distinct basis vectors and every glue token maps to the zero vector, so all
retrieval rankings below can be verified by hand.
"""

import json

import httpx
import numpy as np
import pytest

from flowrag.catalog import (
    Catalog,
    LabeledSample,
    StepCategory,
    StepDefinition,
    WorkflowDocument,
    WorkflowStep,
)
from flowrag.dense_index import build_index
from flowrag.encoder import EncoderModel
from flowrag.evaluation import (
    EvalConfig,
    EvalReport,
    bag_of_steps,
    evaluate_split,
    hallucination_rates,
    recall_at_k,
    save_per_sample,
    save_report,
    trigger_exact_match,
    uniqueness_analysis,
    verify_aggregates,
)
from flowrag.pipeline import GeneratorBinding


def doc(step_names, trigger=None):
    return WorkflowDocument(trigger=trigger, steps=tuple(WorkflowStep(n, i) for i, n in enumerate(step_names)))


def trig(name, table=None):
    return WorkflowStep(name, 0, properties={"table": table} if table else {})


# ---------------------------------------------------------------------------
# Metric operations

def test_trigger_em_cases():
    daily = trig("daily_trigger")
    assert trigger_exact_match(doc([], daily), doc([], daily)) == 1
    with_ticks = trig("record_trigger", "ticks")
    with_tocks = trig("record_trigger", "tocks")
    assert trigger_exact_match(doc([], with_ticks), doc([], with_tocks)) == 0
    assert trigger_exact_match(doc([], None), doc([], None)) is None  # skip
    assert trigger_exact_match(doc([], daily), doc([], None)) is None  # spurious, gold has none
    assert trigger_exact_match(doc([], None), doc([], daily)) == 0  # missing
    assert trigger_exact_match(doc([], trig("other")), doc([], daily)) == 0


def test_bag_of_steps_cases():
    assert bag_of_steps(["a", "b", "b"], ["b", "a", "b"]) == 1.0
    assert bag_of_steps(["a"], ["b"]) == 0.0
    assert bag_of_steps(["a", "b", "c"], ["a", "b", "d"]) == pytest.approx(2 * 2 / 6)
    assert bag_of_steps([], []) == 1.0
    assert bag_of_steps(["a"], []) == 0.0


def test_bag_of_steps_symmetric_and_order_free():
    gen, gold = ["a", "b", "c", "b"], ["b", "d", "a"]
    value = bag_of_steps(gen, gold)
    assert bag_of_steps(gold, gen) == value
    assert bag_of_steps(list(reversed(gen)), gold) == value
    assert bag_of_steps(gen, list(reversed(gold))) == value


def test_hallucination_rates_cases(tiny_catalog):
    hs, ht = hallucination_rates(doc(["send_email", "create_report"]), tiny_catalog)
    assert hs == 0.0 and ht is None
    hs, _ = hallucination_rates(doc(["send_email", "ghost", "create_report"]), tiny_catalog)
    assert hs == pytest.approx(1 / 3)
    hs, ht = hallucination_rates(doc([]), tiny_catalog)
    assert hs is None and ht is None
    _, ht = hallucination_rates(doc([], trig("record_trigger", "nonexistent")), tiny_catalog)
    assert ht == 1.0


def test_recall_cases():
    assert recall_at_k(["a", "b", "c"], {"a", "b"}, 3) == 1.0
    assert recall_at_k(["a", "x", "y"], {"a", "b"}, 3) == 0.5
    assert recall_at_k(["a"], set(), 5) is None
    assert recall_at_k(["a", "x"], {"a", "b"}, 3, mode="coverage") == 0.0
    assert recall_at_k(["a", "b"], {"a", "b"}, 2, mode="coverage") == 1.0
    with pytest.raises(ValueError):
        recall_at_k(["a"], {"a"}, 0)
    with pytest.raises(ValueError):
        recall_at_k(["a"], {"a"}, 1, mode="other")


def test_recall_non_decreasing_in_k():
    ranked = list("abcdefgh")
    gold = {"c", "f", "h"}
    values = [recall_at_k(ranked, gold, k) for k in range(1, 9)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_uniqueness_cases(tiny_catalog):
    docs = [doc(["send_email"]), doc(["send_email"]), doc(["send_email"])]
    assert uniqueness_analysis(docs, tiny_catalog) == (1, 0.0, 0, 0.0)
    docs = [doc(["send_email", "create_report"]), doc(["ghost"])]
    unique_steps, pct_steps, _, _ = uniqueness_analysis(docs, tiny_catalog)
    assert unique_steps == 3
    assert pct_steps == pytest.approx(1 / 3)
    assert uniqueness_analysis([], tiny_catalog) == (0, 0.0, 0, 0.0)


# ---------------------------------------------------------------------------
# Golden 3-sample split

def golden_setup():
    steps = [
        StepDefinition("alpha", StepCategory.ACTION, ""),
        StepDefinition("beta", StepCategory.ACTION, ""),
        StepDefinition("gamma", StepCategory.ACTION, ""),
        StepDefinition("daily_trigger", StepCategory.TRIGGER, "start daily"),
        StepDefinition("record_trigger", StepCategory.TRIGGER, "start on record", requires_table=True),
    ]
    catalog = Catalog.build(steps, ["ticks", "tocks"], common_steps=())
    glue = [
        "name", "description", "start", "on", "record", "daily", "when", "a", "is",
        "created", "in", "the", "table", "then", "and",
    ]
    content = {"alpha": 0, "beta": 1, "gamma": 2, "ticks": 3, "tocks": 4, "trigger": 5}
    vocab = {**content, **{tok: 6 + i for i, tok in enumerate(glue)}}
    table = np.zeros((len(vocab), 6))
    for token, axis in content.items():
        table[vocab[token], axis] = 1.0
    model = EncoderModel(vocab=vocab, embedding_table=table, dim=6)

    samples = [
        # Perfect reconstruction: trigger EM 1, BofS 1, step recall 1.
        LabeledSample(
            "daily alpha and beta",
            doc(["alpha", "beta"], trig("daily_trigger")),
        ),
        # Query mentions gamma but gold wants beta, and gold's table is
        # tocks while the query names ticks: BofS 0.5, trigger EM 0,
        # step recall 0.5, table recall 0.
        LabeledSample(
            "when a record is created in the ticks table then alpha and gamma",
            doc(["alpha", "beta"], trig("record_trigger", "tocks")),
        ),
        # Over-generation: oracle emits [beta, gamma] against gold [beta]:
        # BofS 2/3; no gold trigger so trigger EM skips.
        LabeledSample("beta then gamma", doc(["beta"])),
    ]
    step_index = build_index(model, catalog, "step")
    table_index = build_index(model, catalog, "table")
    return catalog, model, samples, step_index, table_index


def test_golden_three_sample_report():
    catalog, model, samples, step_index, table_index = golden_setup()
    report = evaluate_split(
        samples, model, step_index, table_index, catalog,
        GeneratorBinding(kind="oracle"),
        EvalConfig(k_steps=2, k_tables=1),
    )
    # Hand-computed values (see sample comments above):
    assert report.trigger_em == pytest.approx((1 + 0) / 2, abs=1e-9)
    assert report.bofs == pytest.approx((1.0 + 0.5 + 2.0 / 3.0) / 3, abs=1e-9)
    assert report.hs == pytest.approx(0.0, abs=1e-9)
    assert report.ht == pytest.approx(0.0, abs=1e-9)
    assert report.step_recall_at_k == pytest.approx((1.0 + 0.5 + 1.0) / 3, abs=1e-9)
    assert report.table_recall_at_k == pytest.approx(0.0, abs=1e-9)
    assert report.unique_steps_generated == 3
    assert report.pct_unique_steps_hallucinated == 0.0
    assert report.unique_tables_generated == 1
    assert report.pct_unique_tables_hallucinated == 0.0
    assert report.sample_count == 3
    assert verify_aggregates(report)


def test_golden_report_bit_deterministic(tmp_path):
    catalog, model, samples, step_index, table_index = golden_setup()
    binding = GeneratorBinding(kind="oracle")
    config = EvalConfig(k_steps=2, k_tables=1)
    first = evaluate_split(samples, model, step_index, table_index, catalog, binding, config)
    second = evaluate_split(samples, model, step_index, table_index, catalog, binding, config)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_report(first, a)
    save_report(second, b)
    assert a.read_bytes() == b.read_bytes()


def test_per_sample_jsonl(tmp_path):
    catalog, model, samples, step_index, table_index = golden_setup()
    report = evaluate_split(
        samples, model, step_index, table_index, catalog,
        GeneratorBinding(kind="oracle"), EvalConfig(k_steps=2, k_tables=1),
    )
    path = tmp_path / "per_sample.jsonl"
    save_per_sample(report, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert json.loads(lines[0])["trigger_em"] == 1


# ---------------------------------------------------------------------------
# Split-level behaviour on the synthetic corpus

def test_gold_injected_split_is_perfect(small_corpus):
    _, catalog, samples, model, step_index, table_index = small_corpus
    report = evaluate_split(
        samples[:30], model, step_index, table_index, catalog,
        GeneratorBinding(kind="oracle"),
        EvalConfig(suggestion_mode="gold"),
    )
    assert report.trigger_em == 1.0
    assert report.bofs == 1.0
    assert report.hs == 0.0
    assert report.ht == 0.0
    assert verify_aggregates(report)


def test_recall_one_when_k_covers_catalog(small_corpus):
    _, catalog, samples, model, step_index, table_index = small_corpus
    report = evaluate_split(
        samples[:20], model, step_index, table_index, catalog,
        GeneratorBinding(kind="oracle"),
        EvalConfig(k_steps=len(step_index), k_tables=len(table_index)),
    )
    assert report.step_recall_at_k == 1.0
    assert report.table_recall_at_k == 1.0


def test_augmented_suggestions_yield_full_measured_recall(small_corpus):
    # Cross-module consistency: recall measured on the gold-injected
    # suggestion list over the gold non-common set is always 1.
    from flowrag.pipeline import gold_injected_suggestions

    _, catalog, samples, model, step_index, table_index = small_corpus
    common = set(catalog.common_steps)
    for sample in samples[:30]:
        suggestions = gold_injected_suggestions(
            sample, step_index, table_index, catalog, model, 15, 10
        )
        gold = {n for n in sample.gold.step_names() if n not in common}
        value = recall_at_k(list(suggestions.steps), gold, 15)
        assert value is None or value == 1.0
        tables = set(sample.gold.table_values())
        table_value = recall_at_k(list(suggestions.tables), tables, 10)
        assert table_value is None or table_value == 1.0


def test_retrieval_error_recorded_not_fatal(small_corpus):
    _, catalog, samples, model, step_index, table_index = small_corpus
    weird = LabeledSample("zzzzqqq xxyyzz", samples[0].gold)
    report = evaluate_split(
        [weird, samples[0]], model, step_index, table_index, catalog,
        GeneratorBinding(kind="oracle"), EvalConfig(suggestion_mode="gold"),
    )
    assert report.sample_count == 2
    assert report.per_sample[0]["error"].startswith("retrieval:")
    assert report.per_sample[1]["error"] is None
    assert verify_aggregates(report)


def test_generator_error_recorded_not_fatal(small_corpus):
    _, catalog, samples, model, step_index, table_index = small_corpus

    def refuse(request):
        raise httpx.ConnectError("nothing here")

    client = httpx.Client(transport=httpx.MockTransport(refuse))
    report = evaluate_split(
        samples[:3], model, step_index, table_index, catalog,
        GeneratorBinding(kind="remote", endpoint="http://model"),
        EvalConfig(), client=client,
    )
    assert all(rec["error"].startswith("generation:") for rec in report.per_sample)
    assert all(rec["step_recall"] is not None for rec in report.per_sample)
    assert report.unique_steps_generated == 0


def test_eval_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(suggestion_mode="sometimes")
