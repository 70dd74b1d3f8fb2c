"""Split-level evaluation: trigger exact match, bag-of-steps overlap,
hallucination rates, retrieval recall, and name-uniqueness statistics.

Skip conventions (the denominators the aggregates divide by):

* trigger exact match counts only samples whose gold has a trigger;
* per-sample hallucination rates count only samples that generated at least
  one step (or table value);
* recall counts only samples that actually need items of that kind.

Rates are stored as fractions in [0, 1], including the ``pct_*`` uniqueness
fields. Recall is computed on the pre-common-filter ranking so retriever
quality is measured independently of the exclusion heuristic, and it comes
in two modes: ``fraction`` (share of needed items found, the default) and
``coverage`` (1 only when every needed item is found).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .catalog import Catalog, LabeledSample, WorkflowDocument
from .dense_index import VectorIndex, topk
from .encoder import EncoderModel, NoKnownTokens, encode
from .pipeline import (
    GeneratorBinding,
    Suggestions,
    assemble_prompt,
    generate,
    gold_injected_suggestions,
    retrieve_suggestions,
)

SKIP = None  # sentinel for samples excluded from a metric's denominator


def trigger_exact_match(gen: WorkflowDocument, gold: WorkflowDocument) -> Optional[int]:
    """1 iff trigger name and properties (including the table) are identical;
    0 on any mismatch; skip when gold has no trigger."""
    if gold.trigger is None:
        return SKIP
    if gen.trigger is None:
        return 0
    same = gen.trigger.name == gold.trigger.name and gen.trigger.properties == gold.trigger.properties
    return 1 if same else 0


def bag_of_steps(gen_names: list[str], gold_names: list[str]) -> float:
    """Multiset F1 between generated and gold step names; 1.0 when both
    sides are empty."""
    if not gen_names and not gold_names:
        return 1.0
    gen_counts = Counter(gen_names)
    gold_counts = Counter(gold_names)
    overlap = sum(min(count, gold_counts[name]) for name, count in gen_counts.items())
    return 2.0 * overlap / (len(gen_names) + len(gold_names))


def hallucination_rates(
    gen: WorkflowDocument, catalog: Catalog
) -> tuple[Optional[float], Optional[float]]:
    """Per-workflow fractions of generated step names and table values that
    are not in the catalog; skip when nothing of that kind was generated."""
    step_names = gen.step_names()
    hs = SKIP
    if step_names:
        hs = sum(1 for name in step_names if not catalog.has_step(name)) / len(step_names)
    tables = gen.table_values()
    ht = SKIP
    if tables:
        ht = sum(1 for name in tables if not catalog.has_table(name)) / len(tables)
    return hs, ht


def recall_at_k(
    ranked: list[str], gold: set[str], k: int, mode: str = "fraction"
) -> Optional[float]:
    """Share of needed items in the top-k (or full-coverage indicator); skip
    when nothing is needed."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if mode not in ("fraction", "coverage"):
        raise ValueError(f"unknown recall mode {mode!r}")
    if not gold:
        return SKIP
    found = len(gold & set(ranked[:k]))
    if mode == "coverage":
        return 1.0 if found == len(gold) else 0.0
    return found / len(gold)


def uniqueness_analysis(
    documents: list[WorkflowDocument], catalog: Catalog
) -> tuple[int, float, int, float]:
    """Distinct generated step names / table values and the fraction of each
    that is hallucinated; empty input yields (0, 0.0, 0, 0.0)."""
    step_names = {name for doc in documents for name in doc.step_names()}
    table_names = {name for doc in documents for name in doc.table_values()}
    pct_steps = (
        sum(1 for name in step_names if not catalog.has_step(name)) / len(step_names)
        if step_names
        else 0.0
    )
    pct_tables = (
        sum(1 for name in table_names if not catalog.has_table(name)) / len(table_names)
        if table_names
        else 0.0
    )
    return len(step_names), pct_steps, len(table_names), pct_tables


# ---------------------------------------------------------------------------
# Split evaluation

@dataclass
class EvalConfig:
    k_steps: int = 15
    k_tables: int = 10
    recall_mode: str = "fraction"
    suggestion_mode: str = "retrieval"  # retrieval | gold | none

    def __post_init__(self):
        if self.suggestion_mode not in ("retrieval", "gold", "none"):
            raise ValueError(f"unknown suggestion mode {self.suggestion_mode!r}")


@dataclass
class EvalReport:
    trigger_em: float = 0.0
    bofs: float = 0.0
    hs: float = 0.0
    ht: float = 0.0
    step_recall_at_k: float = 0.0
    table_recall_at_k: float = 0.0
    unique_steps_generated: int = 0
    pct_unique_steps_hallucinated: float = 0.0
    unique_tables_generated: int = 0
    pct_unique_tables_hallucinated: float = 0.0
    sample_count: int = 0
    per_sample: list[dict] = field(default_factory=list)

    def as_dict(self, include_per_sample: bool = True) -> dict:
        out = {
            "trigger_em": self.trigger_em,
            "bofs": self.bofs,
            "hs": self.hs,
            "ht": self.ht,
            "step_recall_at_k": self.step_recall_at_k,
            "table_recall_at_k": self.table_recall_at_k,
            "unique_steps_generated": self.unique_steps_generated,
            "pct_unique_steps_hallucinated": self.pct_unique_steps_hallucinated,
            "unique_tables_generated": self.unique_tables_generated,
            "pct_unique_tables_hallucinated": self.pct_unique_tables_hallucinated,
            "sample_count": self.sample_count,
        }
        if include_per_sample:
            out["per_sample"] = self.per_sample
        return out


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def aggregate_from_records(records: list[dict]) -> dict[str, float]:
    """Recompute split aggregates from per-sample records; used both by
    evaluate_split and by the aggregate-consistency check."""
    def collect(key: str) -> list[float]:
        return [rec[key] for rec in records if rec.get(key) is not None]

    return {
        "trigger_em": _mean(collect("trigger_em")),
        "bofs": _mean(collect("bofs")),
        "hs": _mean(collect("hs")),
        "ht": _mean(collect("ht")),
        "step_recall_at_k": _mean(collect("step_recall")),
        "table_recall_at_k": _mean(collect("table_recall")),
    }


def verify_aggregates(report: EvalReport, tol: float = 1e-12) -> bool:
    expected = aggregate_from_records(report.per_sample)
    return all(
        abs(getattr(report, name) - value) <= tol for name, value in expected.items()
    ) and report.sample_count == len(report.per_sample)


def evaluate_split(
    samples: list[LabeledSample],
    model: EncoderModel,
    step_index: VectorIndex,
    table_index: VectorIndex,
    catalog: Catalog,
    binding: GeneratorBinding,
    config: EvalConfig | None = None,
    client=None,
) -> EvalReport:
    """Retrieve, prompt, generate, parse, and score every sample; generator
    failures land in the per-sample record instead of aborting the split."""
    config = config or EvalConfig()
    records: list[dict] = []
    generated: list[WorkflowDocument] = []
    for i, sample in enumerate(samples):
        record: dict = {
            "index": i,
            "query": sample.query,
            "error": None,
            "trigger_em": SKIP,
            "bofs": SKIP,
            "hs": SKIP,
            "ht": SKIP,
            "step_recall": SKIP,
            "table_recall": SKIP,
            "hallucinated_steps": [],
            "hallucinated_tables": [],
        }
        try:
            query_vec = encode(model, sample.query)
        except NoKnownTokens as exc:
            record["error"] = f"retrieval: {exc}"
            records.append(record)
            continue

        raw_steps = [name for name, _ in topk(step_index, query_vec, config.k_steps)]
        raw_tables = [name for name, _ in topk(table_index, query_vec, config.k_tables)]
        record["step_recall"] = recall_at_k(
            raw_steps, set(sample.gold.step_names()), config.k_steps, config.recall_mode
        )
        record["table_recall"] = recall_at_k(
            raw_tables, set(sample.gold.table_values()), config.k_tables, config.recall_mode
        )

        if config.suggestion_mode == "gold":
            suggestions = gold_injected_suggestions(
                sample, step_index, table_index, catalog, model, config.k_steps, config.k_tables
            )
        elif config.suggestion_mode == "none":
            suggestions = Suggestions()
        else:
            suggestions = retrieve_suggestions(
                sample.query, step_index, table_index, catalog, model,
                config.k_steps, config.k_tables,
            )
        prompt = assemble_prompt(suggestions, sample.query, catalog)
        try:
            doc, parse_report, _raw = generate(binding, prompt, catalog, client=client)
        except Exception as exc:
            record["error"] = f"generation: {exc}"
            records.append(record)
            continue

        generated.append(doc)
        record["trigger_em"] = trigger_exact_match(doc, sample.gold)
        record["bofs"] = bag_of_steps(doc.step_names(), sample.gold.step_names())
        hs, ht = hallucination_rates(doc, catalog)
        record["hs"] = hs
        record["ht"] = ht
        record["hallucinated_steps"] = list(parse_report.hallucinated_steps)
        record["hallucinated_tables"] = list(parse_report.hallucinated_tables)
        records.append(record)

    aggregates = aggregate_from_records(records)
    uniq_steps, pct_steps, uniq_tables, pct_tables = uniqueness_analysis(generated, catalog)
    return EvalReport(
        trigger_em=aggregates["trigger_em"],
        bofs=aggregates["bofs"],
        hs=aggregates["hs"],
        ht=aggregates["ht"],
        step_recall_at_k=aggregates["step_recall_at_k"],
        table_recall_at_k=aggregates["table_recall_at_k"],
        unique_steps_generated=uniq_steps,
        pct_unique_steps_hallucinated=pct_steps,
        unique_tables_generated=uniq_tables,
        pct_unique_tables_hallucinated=pct_tables,
        sample_count=len(samples),
        per_sample=records,
    )


def save_report(report: EvalReport, path: Path, include_per_sample: bool = True) -> None:
    Path(path).write_text(
        json.dumps(report.as_dict(include_per_sample), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def save_per_sample(report: EvalReport, path: Path) -> None:
    """Per-sample records as JSONL."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in report.per_sample:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
