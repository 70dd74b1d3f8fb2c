"""Workflow document schema, step/table catalogs, serialization, validation.

The wire format for a workflow document is a single JSON object with two
fields: ``trigger`` (a step object or null) and ``steps`` (an array of step
objects). Each step object is ``{"name", "order", "parent", "properties"}``
where ``parent`` is an integer index into ``steps`` (null for top level) and
``properties`` maps string keys to string values. Catalogs are persisted as
two JSONL files, ``steps.jsonl`` and ``tables.jsonl``, one record per line.

Parsing is deliberately lenient about names: a step or table name that does
not exist in the catalog is *recorded* in the validation report, never
rejected, because the hallucination metrics are computed from exactly those
records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional


class StepCategory(str, Enum):
    ACTION = "action"
    FLOW_LOGIC = "flow_logic"
    TRIGGER = "trigger"


#: Flow-logic step names every deployment understands; catalogs may add more.
FLOW_LOGIC_NAMES = ("IF", "ELSE", "FOREACH", "TRY", "CATCH")


class MalformedDocument(Exception):
    """Raised when a document cannot be parsed at all."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class StepDefinition:
    name: str
    category: StepCategory
    description: str = ""
    requires_table: bool = False  # meaningful only for trigger steps


@dataclass(frozen=True)
class Catalog:
    """Closed lexicons of steps and tables plus the common-step exclusion list."""

    steps: dict[str, StepDefinition]
    tables: frozenset[str]
    common_steps: tuple[str, ...] = ()

    @staticmethod
    def build(
        steps: Iterable[StepDefinition],
        tables: Iterable[str],
        common_steps: Iterable[str] = (),
    ) -> "Catalog":
        return Catalog(
            steps={s.name: s for s in steps},
            tables=frozenset(tables),
            common_steps=tuple(common_steps),
        )

    def has_step(self, name: str) -> bool:
        return name in self.steps

    def has_table(self, name: str) -> bool:
        return name in self.tables


@dataclass(frozen=True)
class WorkflowStep:
    name: str
    order: int = 0
    parent: Optional[int] = None
    properties: dict[str, str] = field(default_factory=dict)

    def table(self) -> Optional[str]:
        return self.properties.get("table")


@dataclass(frozen=True)
class WorkflowDocument:
    trigger: Optional[WorkflowStep] = None
    steps: tuple[WorkflowStep, ...] = ()

    def step_names(self) -> list[str]:
        return [s.name for s in self.steps]

    def table_values(self) -> list[str]:
        """Every "table" property value, trigger first then steps in order."""
        values = []
        if self.trigger is not None and self.trigger.table() is not None:
            values.append(self.trigger.table())
        for s in self.steps:
            if s.table() is not None:
                values.append(s.table())
        return values


@dataclass(frozen=True)
class LabeledSample:
    query: str
    gold: WorkflowDocument


@dataclass
class ValidationReport:
    """Ordered findings from parsing or catalog validation.

    ``hallucinated_steps`` and ``hallucinated_tables`` hold one entry per
    offending occurrence, in document order, so rate metrics can count them
    directly.
    """

    parse_errors: list[str] = field(default_factory=list)
    hallucinated_steps: list[str] = field(default_factory=list)
    hallucinated_tables: list[str] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    def ok(self) -> bool:
        return not (
            self.parse_errors
            or self.hallucinated_steps
            or self.hallucinated_tables
            or self.violations
        )

    def as_dict(self) -> dict:
        return {
            "parse_errors": list(self.parse_errors),
            "hallucinated_steps": list(self.hallucinated_steps),
            "hallucinated_tables": list(self.hallucinated_tables),
            "violations": list(self.violations),
        }


# ---------------------------------------------------------------------------
# Serialization

def _step_to_dict(step: WorkflowStep) -> dict:
    return {
        "name": step.name,
        "order": step.order,
        "parent": step.parent,
        "properties": {k: step.properties[k] for k in sorted(step.properties)},
    }


def serialize_workflow(doc: WorkflowDocument) -> str:
    """Canonical single-line JSON; properties keys sorted for stable bytes."""
    obj = {
        "trigger": _step_to_dict(doc.trigger) if doc.trigger is not None else None,
        "steps": [_step_to_dict(s) for s in doc.steps],
    }
    return json.dumps(obj, ensure_ascii=False)


def step_definition_line(defn: StepDefinition) -> str:
    """The serialized step object used in prompts and as encoder item text."""
    return json.dumps(
        {"name": defn.name, "description": defn.description}, ensure_ascii=False
    )


def _parse_step(raw: object, position: int, label: str, report: ValidationReport) -> Optional[WorkflowStep]:
    if not isinstance(raw, dict):
        report.parse_errors.append(f"{label}: not an object")
        return None
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        report.parse_errors.append(f"{label}: missing or non-string name")
        return None
    order = raw.get("order")
    if isinstance(order, bool) or not isinstance(order, int):
        report.parse_errors.append(f"{label}: missing or non-integer order")
        order = position
    parent = raw.get("parent")
    if parent is not None and (isinstance(parent, bool) or not isinstance(parent, int)):
        report.parse_errors.append(f"{label}: non-integer parent")
        parent = None
    props_raw = raw.get("properties")
    properties: dict[str, str] = {}
    if props_raw is None:
        pass
    elif not isinstance(props_raw, dict):
        report.parse_errors.append(f"{label}: properties not an object")
    else:
        for key in props_raw:
            value = props_raw[key]
            if not isinstance(value, str):
                report.parse_errors.append(f"{label}: non-string property {key!r}")
                value = json.dumps(value)
            properties[str(key)] = value
    return WorkflowStep(name=name, order=order, parent=parent, properties=properties)


def parse_workflow(text: str, catalog: Catalog) -> tuple[WorkflowDocument, ValidationReport]:
    """Parse a serialized document and validate it against the catalog.

    Unknown step names and table values are recorded as hallucinations, not
    rejected. Raises :class:`MalformedDocument` only when no document can be
    built from the text at all.
    """
    report = ValidationReport()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc.msg}", position=exc.pos) from exc
    if not isinstance(obj, dict):
        raise MalformedDocument("top level is not an object")
    steps_raw = obj.get("steps")
    if steps_raw is None:
        report.parse_errors.append("document: missing steps array")
        steps_raw = []
    if not isinstance(steps_raw, list):
        raise MalformedDocument("steps is not an array")

    trigger_raw = obj.get("trigger")
    trigger = None
    if trigger_raw is not None:
        trigger = _parse_step(trigger_raw, 0, "trigger", report)

    steps: list[WorkflowStep] = []
    for i, raw in enumerate(steps_raw):
        step = _parse_step(raw, i, f"steps[{i}]", report)
        if step is not None:
            steps.append(step)

    doc = WorkflowDocument(trigger=trigger, steps=tuple(steps))
    _check_names(doc, catalog, report)
    _check_relations(doc, catalog, report)
    return doc, report


def _check_names(doc: WorkflowDocument, catalog: Catalog, report: ValidationReport) -> None:
    if doc.trigger is not None and not catalog.has_step(doc.trigger.name):
        report.hallucinated_steps.append(doc.trigger.name)
    for step in doc.steps:
        if not catalog.has_step(step.name):
            report.hallucinated_steps.append(step.name)
    for value in doc.table_values():
        if not catalog.has_table(value):
            report.hallucinated_tables.append(value)


def _check_relations(doc: WorkflowDocument, catalog: Catalog, report: ValidationReport) -> None:
    if doc.trigger is not None:
        defn = catalog.steps.get(doc.trigger.name)
        if defn is not None and defn.requires_table and "table" not in doc.trigger.properties:
            report.violations.append("trigger: requires a table property but none set")
    for i, step in enumerate(doc.steps):
        if step.order < 0:
            report.violations.append(f"steps[{i}]: negative order")
        if step.parent is None:
            continue
        if not (0 <= step.parent < i):
            report.violations.append(f"steps[{i}]: parent {step.parent} is not an earlier step")
            continue
        parent_defn = catalog.steps.get(doc.steps[step.parent].name)
        # Unknown parent names are already flagged as hallucinations.
        if parent_defn is not None and parent_defn.category == StepCategory.ACTION:
            report.violations.append(
                f"steps[{i}]: parent {step.parent} is not a flow-logic or trigger step"
            )
    # Sibling order must strictly increase in list order within a parent group.
    last_order: dict[Optional[int], int] = {}
    for i, step in enumerate(doc.steps):
        prev = last_order.get(step.parent)
        if prev is not None and step.order <= prev:
            report.violations.append(f"steps[{i}]: order {step.order} not increasing among siblings")
        last_order[step.parent] = step.order


# ---------------------------------------------------------------------------
# Catalog validation and persistence

def validate_catalog(catalog: Catalog) -> ValidationReport:
    report = ValidationReport()
    for name in catalog.steps:
        if not name:
            report.violations.append("step: empty name")
    for name in sorted(catalog.tables):
        if not name:
            report.violations.append("table: empty name")
    seen: set[str] = set()
    for name in catalog.common_steps:
        if name in seen:
            report.violations.append(f"common_steps: duplicate entry {name!r}")
        seen.add(name)
        if name not in catalog.steps:
            report.violations.append(f"common_steps: unknown step {name!r}")
    return report


def validate_catalog_records(
    steps: list[StepDefinition], tables: list[str], common_steps: list[str]
) -> ValidationReport:
    """Like :func:`validate_catalog` but sees duplicates that dict/set
    construction would silently collapse. Used on raw file records."""
    report = ValidationReport()
    seen_steps: set[str] = set()
    for defn in steps:
        if not defn.name:
            report.violations.append("step: empty name")
        elif defn.name in seen_steps:
            report.violations.append(f"step: duplicate name {defn.name!r}")
        seen_steps.add(defn.name)
    seen_tables: set[str] = set()
    for name in tables:
        if not name:
            report.violations.append("table: empty name")
        elif name in seen_tables:
            report.violations.append(f"table: duplicate name {name!r}")
        seen_tables.add(name)
    seen_common: set[str] = set()
    for name in common_steps:
        if name in seen_common:
            report.violations.append(f"common_steps: duplicate entry {name!r}")
        seen_common.add(name)
        if name not in seen_steps:
            report.violations.append(f"common_steps: unknown step {name!r}")
    return report


def save_catalog(catalog: Catalog, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    common_rank = {name: i for i, name in enumerate(catalog.common_steps)}
    with open(directory / "steps.jsonl", "w", encoding="utf-8") as fh:
        for name in sorted(catalog.steps):
            defn = catalog.steps[name]
            record: dict = {
                "name": defn.name,
                "category": defn.category.value,
                "description": defn.description,
                "requires_table": defn.requires_table,
            }
            if name in common_rank:
                record["common_rank"] = common_rank[name]
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(directory / "tables.jsonl", "w", encoding="utf-8") as fh:
        for name in sorted(catalog.tables):
            fh.write(json.dumps({"name": name}, ensure_ascii=False) + "\n")


def load_catalog(directory: Path) -> tuple[Catalog, ValidationReport]:
    directory = Path(directory)
    steps: list[StepDefinition] = []
    ranked: list[tuple[int, str]] = []
    with open(directory / "steps.jsonl", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            steps.append(
                StepDefinition(
                    name=rec["name"],
                    category=StepCategory(rec["category"]),
                    description=rec.get("description", ""),
                    requires_table=bool(rec.get("requires_table", False)),
                )
            )
            if "common_rank" in rec:
                ranked.append((rec["common_rank"], rec["name"]))
    tables: list[str] = []
    with open(directory / "tables.jsonl", encoding="utf-8") as fh:
        for line in fh:
            tables.append(json.loads(line)["name"])
    common = [name for _, name in sorted(ranked)]
    report = validate_catalog_records(steps, tables, common)
    return Catalog.build(steps, tables, common), report


# ---------------------------------------------------------------------------
# Dataset persistence: one {"query", "gold"} object per line.

def save_samples(samples: Iterable[LabeledSample], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            gold = json.loads(serialize_workflow(sample.gold))
            fh.write(json.dumps({"query": sample.query, "gold": gold}, ensure_ascii=False) + "\n")


def load_samples(path: Path, catalog: Catalog) -> list[LabeledSample]:
    samples: list[LabeledSample] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            doc, _ = parse_workflow(json.dumps(rec["gold"]), catalog)
            samples.append(LabeledSample(query=rec["query"], gold=doc))
    return samples
