"""Prompt assembly, suggestion retrieval, and generation.

The prompt template is normative for this repository (LF newlines, trailing
newline, bit-exact):

    Tables:
    <one table name per line>
    Steps:
    <one serialized step object per line>
    Query: <query text>
    Flow:

Empty sections keep their header with zero lines. Suggested steps appear as
full serialized objects, tables as bare names, and suggestions always precede
the query.

Two generators are provided. The remote generator POSTs the prompt to a
model server. The oracle generator is a deterministic test double for the
fine-tuned LLM: it re-reads its prompt, matches candidate step names as
contiguous token n-grams of the query (ordered by match position), detects
the trigger from a fixed phrase map, and picks the first suggested table
mentioned in the query. It is paired with the synthetic corpus generator so
that reconstruction from gold-injected suggestions is exact, and it never
emits a name outside its prompt's suggestions plus the catalog's common
steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import httpx

from .catalog import (
    Catalog,
    LabeledSample,
    StepCategory,
    ValidationReport,
    WorkflowDocument,
    WorkflowStep,
    parse_workflow,
    serialize_workflow,
    step_definition_line,
)
from .datagen import TRIGGER_PHRASES, detect_trigger
from .dense_index import VectorIndex, topk
from .encoder import EncoderModel, encode
from .lexical import find_occurrences, tokenize


class RemoteUnavailable(ConnectionError):
    pass


class RemoteTimeout(TimeoutError):
    pass


@dataclass(frozen=True)
class Suggestions:
    steps: tuple[str, ...] = ()
    tables: tuple[str, ...] = ()


@dataclass(frozen=True)
class Prompt:
    text: str


@dataclass(frozen=True)
class GeneratorBinding:
    kind: str  # "oracle" or "remote"; decoding is fixed greedy
    endpoint: Optional[str] = None
    timeout: float = 30.0
    fallback_template_tables: bool = False  # oracle-only: invent table names
    # when the prompt carries no suggestions

    def __post_init__(self):
        if self.kind not in ("oracle", "remote"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote generator requires an endpoint")


def retrieve_suggestions(
    query: str,
    step_index: VectorIndex,
    table_index: VectorIndex,
    catalog: Catalog,
    model: EncoderModel,
    k_steps: int = 15,
    k_tables: int = 10,
) -> Suggestions:
    """Top-k per index with common steps filtered out after ranking; the
    filter does not consume k slots."""
    query_vec = encode(model, query)
    common = set(catalog.common_steps)
    ranked_steps = topk(step_index, query_vec, k_steps + len(common)) if k_steps > 0 else []
    steps = [name for name, _ in ranked_steps if name not in common][:k_steps]
    tables = [name for name, _ in topk(table_index, query_vec, k_tables)] if k_tables > 0 else []
    return Suggestions(steps=tuple(steps), tables=tuple(tables))


def assemble_prompt(suggestions: Suggestions, query: str, catalog: Catalog) -> Prompt:
    """Render the normative template; deterministic in its inputs. Queries
    are expected to be single-line."""
    lines = ["Tables:"]
    lines += list(suggestions.tables)
    lines.append("Steps:")
    for name in suggestions.steps:
        defn = catalog.steps.get(name)
        if defn is not None:
            lines.append(step_definition_line(defn))
        else:
            lines.append(json.dumps({"name": name, "description": ""}, ensure_ascii=False))
    lines.append(f"Query: {query}")
    lines.append("Flow:")
    return Prompt(text="\n".join(lines) + "\n")


def _merge_ranked_with_gold(ranked: list[str], gold: list[str], k: int) -> list[str]:
    """Retrieval-rank order with unranked gold appended in gold order; the
    lowest-ranked distractors are dropped first when the limit is exceeded.
    Gold items are never dropped."""
    gold_set = set(gold)
    merged = list(ranked)
    present = set(merged)
    merged += [name for name in gold if name not in present]
    excess = len(merged) - k
    if excess > 0:
        keep: list[str] = []
        removable = [name for name in merged if name not in gold_set]
        drop = set(removable[len(removable) - excess :]) if excess <= len(removable) else set(removable)
        keep = [name for name in merged if name in gold_set or name not in drop]
        merged = keep
    return merged


def gold_injected_suggestions(
    sample: LabeledSample,
    step_index: VectorIndex,
    table_index: VectorIndex,
    catalog: Catalog,
    model: EncoderModel,
    k_steps: int = 15,
    k_tables: int = 10,
) -> Suggestions:
    """Suggestions under the 100%-recall assumption: every gold non-common
    step and the gold table are always present, padded with retrieved
    distractors up to the k limits."""
    retrieved = retrieve_suggestions(
        sample.query, step_index, table_index, catalog, model, k_steps, k_tables
    )
    common = set(catalog.common_steps)
    gold_steps: list[str] = []
    for name in sample.gold.step_names():
        if name not in common and name not in gold_steps:
            gold_steps.append(name)
    gold_tables = list(dict.fromkeys(sample.gold.table_values()))
    return Suggestions(
        steps=tuple(_merge_ranked_with_gold(list(retrieved.steps), gold_steps, k_steps)),
        tables=tuple(_merge_ranked_with_gold(list(retrieved.tables), gold_tables, k_tables)),
    )


def augment_training_set(
    samples: list[LabeledSample],
    step_index: VectorIndex,
    table_index: VectorIndex,
    catalog: Catalog,
    model: EncoderModel,
    k_steps: int = 15,
    k_tables: int = 10,
    seed: int = 0,
) -> list[tuple[Prompt, str]]:
    """Generator fine-tuning pairs: gold-injected prompt plus the expected
    serialized document. ``seed`` is accepted for interface stability; the
    construction is fully deterministic."""
    del seed
    out: list[tuple[Prompt, str]] = []
    for sample in samples:
        suggestions = gold_injected_suggestions(
            sample, step_index, table_index, catalog, model, k_steps, k_tables
        )
        prompt = assemble_prompt(suggestions, sample.query, catalog)
        out.append((prompt, serialize_workflow(sample.gold)))
    return out


# ---------------------------------------------------------------------------
# Generators

def split_prompt(text: str) -> tuple[list[str], list[str], str]:
    """Invert :func:`assemble_prompt`: (table names, step names, query)."""
    lines = text.split("\n")
    try:
        steps_at = lines.index("Steps:")
    except ValueError:
        raise ValueError("prompt is missing the Steps: header")
    if not lines or lines[0] != "Tables:":
        raise ValueError("prompt is missing the Tables: header")
    tables = [line for line in lines[1:steps_at] if line]
    query = None
    step_lines: list[str] = []
    for line in lines[steps_at + 1 :]:
        if line.startswith("Query: "):
            query = line[len("Query: ") :]
            break
        if line:
            step_lines.append(line)
    if query is None:
        raise ValueError("prompt is missing the Query: line")
    steps = [json.loads(line)["name"] for line in step_lines]
    return tables, steps, query


class OracleGenerator:
    """Deterministic stand-in for the fine-tuned LLM (see module docstring)."""

    def __init__(self, catalog: Catalog, fallback_template_tables: bool = False):
        self.catalog = catalog
        self.fallback_template_tables = fallback_template_tables

    def _pick_table(self, suggested: list[str], query_tokens: list[str]) -> Optional[str]:
        for name in suggested:
            if find_occurrences(query_tokens, tuple(tokenize(name))):
                return name
        if not suggested and self.fallback_template_tables:
            # Invent a name the way an unaided model would: derive it from
            # the query text around the word "table".
            if "table" in query_tokens:
                before = query_tokens[query_tokens.index("table") - 1]
                return f"{before}_table"
            return "unknown_table"
        return suggested[0] if suggested else None

    def complete(self, prompt_text: str) -> str:
        tables, suggested_steps, query = split_prompt(prompt_text)
        query_tokens = tokenize(query)
        candidates: list[str] = []
        for name in list(suggested_steps) + list(self.catalog.common_steps):
            defn = self.catalog.steps.get(name)
            if defn is not None and defn.category == StepCategory.TRIGGER:
                continue
            if name not in candidates:
                candidates.append(name)
        hits: list[tuple[int, str]] = []
        for name in candidates:
            phrase = tuple(tokenize(name))
            if not phrase:
                continue
            for pos in find_occurrences(query_tokens, phrase):
                hits.append((pos, name))
        hits.sort()
        steps = tuple(
            WorkflowStep(name=name, order=i) for i, (_, name) in enumerate(hits)
        )
        trigger = None
        trigger_name = detect_trigger(query_tokens)
        if trigger_name is not None:
            properties = {}
            defn = self.catalog.steps.get(trigger_name)
            if defn is not None and defn.requires_table:
                table = self._pick_table(tables, query_tokens)
                if table is not None:
                    properties["table"] = table
            trigger = WorkflowStep(name=trigger_name, order=0, properties=properties)
        return serialize_workflow(WorkflowDocument(trigger=trigger, steps=steps))


class RemoteGenerator:
    """POSTs ``{prompt, max_tokens, greedy: true}`` to ``<endpoint>/v1/complete``
    and expects ``{"text": ...}`` back."""

    def __init__(self, endpoint: str, timeout: float = 30.0, client: Optional[httpx.Client] = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._client = client

    def complete(self, prompt_text: str, max_tokens: int = 1024) -> str:
        payload = {"prompt": prompt_text, "max_tokens": max_tokens, "greedy": True}
        client = self._client or httpx.Client(timeout=self.timeout)
        owns = self._client is None
        try:
            response = client.post(f"{self.endpoint}/v1/complete", json=payload)
        except httpx.TimeoutException as exc:
            raise RemoteTimeout(f"generator timed out after {self.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise RemoteUnavailable(f"generator unreachable: {exc}") from exc
        finally:
            if owns:
                client.close()
        if response.status_code != 200:
            raise RemoteUnavailable(f"generator returned HTTP {response.status_code}")
        try:
            return response.json()["text"]
        except (KeyError, ValueError) as exc:
            raise RemoteUnavailable(f"generator response missing text field: {exc}") from exc


def generate(
    binding: GeneratorBinding,
    prompt: Prompt,
    catalog: Catalog,
    client: Optional[httpx.Client] = None,
) -> tuple[WorkflowDocument, ValidationReport, str]:
    """Run the bound generator and validate its output against the catalog.
    The report flags hallucinated names for downstream display."""
    if binding.kind == "oracle":
        raw = OracleGenerator(catalog, binding.fallback_template_tables).complete(prompt.text)
    else:
        raw = RemoteGenerator(binding.endpoint, binding.timeout, client).complete(prompt.text)
    try:
        doc, report = parse_workflow(raw, catalog)
    except Exception as exc:
        exc.raw = raw  # keep the unparseable text for callers
        raise
    return doc, report, raw


__all__ = [
    "Suggestions",
    "Prompt",
    "GeneratorBinding",
    "OracleGenerator",
    "RemoteGenerator",
    "RemoteUnavailable",
    "RemoteTimeout",
    "TRIGGER_PHRASES",
    "retrieve_suggestions",
    "assemble_prompt",
    "gold_injected_suggestions",
    "augment_training_set",
    "split_prompt",
    "generate",
]
