"""Deterministic synthetic corpus generator.

Produces a catalog of verb_noun action steps plus trigger and flow-logic
steps, and labeled samples whose query text mentions each chosen step's
tokens contiguously and in gold order. That makes the queries exactly
invertible by the oracle generator's n-gram matching: every sample is
rejection-checked so that scanning the whole catalog recovers precisely the
gold steps, trigger, and table. Realism is traded away for verifiability.

Step descriptions carry filler words the queries never use, so an untrained
encoder cannot retrieve by raw token overlap alone; training has to learn
which tokens matter.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .catalog import (
    FLOW_LOGIC_NAMES,
    Catalog,
    LabeledSample,
    StepCategory,
    StepDefinition,
    WorkflowDocument,
    WorkflowStep,
)
from .lexical import find_occurrences, tokenize

DAILY_TRIGGER = "daily_trigger"
RECORD_TRIGGER = "record_trigger"

#: Checked in order; first phrase found in the query wins.
TRIGGER_PHRASES: tuple[tuple[str, tuple[str, ...]], ...] = (
    (RECORD_TRIGGER, ("when", "a", "record", "is", "created")),
    (DAILY_TRIGGER, ("daily",)),
)

VERBS = (
    "send", "create", "update", "delete", "assign", "close", "open", "notify",
    "escalate", "archive", "approve", "reject", "schedule", "generate", "export",
    "import", "merge", "split", "tag", "review", "publish", "restore", "verify",
    "sync", "attach", "resolve", "forward", "log",
)

NOUNS = (
    "email", "report", "ticket", "record", "incident", "task", "alert", "invoice",
    "order", "user", "group", "document", "request", "summary", "reminder",
    "survey", "backup", "comment", "approval", "contract", "meeting", "note",
    "dashboard", "case", "asset", "change", "problem", "release", "policy",
    "account", "budget", "campaign", "catalog", "customer", "dataset", "device",
    "employee", "event", "feedback", "form", "goal", "inventory", "issue",
    "lead", "lesson", "license", "message", "metric", "milestone", "payment",
    "project", "quote", "risk", "role", "shipment", "vendor",
)

#: Description-only vocabulary, disjoint from verbs, nouns, and query glue.
FILLERS = (
    "ambient", "amber", "anchor", "axial", "bamboo", "basalt", "beacon", "birch",
    "bluff", "bronze", "canyon", "cedar", "chalk", "cinder", "cobalt", "copper",
    "coral", "cosmic", "crimson", "crystal", "delta", "dune", "ebony", "ember",
    "fjord", "flint", "fossil", "gale", "garnet", "glacier", "granite", "grove",
    "harbor", "hazel", "heron", "hollow", "indigo", "iris", "ivory", "jade",
    "juniper", "kelp", "lagoon", "lava", "lichen", "lunar", "magma", "maple",
    "marble", "meadow", "mesa", "mica", "mistral", "moss", "nebula", "nickel",
    "oasis", "obsidian", "ochre", "onyx", "opal", "orchid", "osprey", "pebble",
    "pine", "plume", "prairie", "quartz", "raven", "reef", "ridge", "saffron",
    "sage", "sandstone", "sapphire", "sepia", "shale", "sierra", "slate",
    "solstice", "sparrow", "spruce", "summit", "sundial", "talon", "thicket",
    "tidal", "timber", "topaz", "tundra", "umber", "velvet", "walnut", "willow",
    "zenith", "zephyr",
)

_MIDDLE_CONNECTORS = ("then", "next", "after that")


@dataclass
class GenSpec:
    seed: int = 0
    steps_count: int = 200
    tables_count: int = 50
    sample_count: int = 600
    max_steps_per_flow: int = 3
    trigger_mix: dict[str, float] = field(
        default_factory=lambda: {"none": 0.2, "daily": 0.4, "record": 0.4}
    )
    common_count: int = 10
    skew: float = 0.03  # geometric parameter for step popularity
    fillers_per_step: int = 8

    def __post_init__(self):
        if self.steps_count < len(FLOW_LOGIC_NAMES) + 3:
            raise ValueError("steps_count too small for triggers and flow logic")
        if self.tables_count < 1 or self.tables_count > len(NOUNS):
            raise ValueError(f"tables_count must be in 1..{len(NOUNS)}")
        if self.sample_count < 1 or self.max_steps_per_flow < 1:
            raise ValueError("sample_count and max_steps_per_flow must be positive")
        mix = self.trigger_mix
        if set(mix) != {"none", "daily", "record"} or abs(sum(mix.values()) - 1.0) > 1e-9:
            raise ValueError("trigger_mix needs none/daily/record fractions summing to 1")
        if any(v < 0 for v in mix.values()):
            raise ValueError("trigger_mix fractions must be non-negative")
        if not 0.0 < self.skew < 1.0:
            raise ValueError("skew must be in (0, 1)")


def _action_count(spec: GenSpec) -> int:
    return spec.steps_count - 2 - len(FLOW_LOGIC_NAMES)


def _action_names(spec: GenSpec) -> list[str]:
    """Generation-ordered action step names; position equals popularity rank."""
    combos = [f"{verb}_{noun}" for verb in VERBS for noun in NOUNS]
    count = _action_count(spec)
    if count > len(combos):
        raise ValueError(f"steps_count exceeds the {len(combos)} available verb_noun names")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(combos))
    return [combos[i] for i in order[:count]]


def generate_catalog(spec: GenSpec) -> Catalog:
    names = _action_names(spec)
    rng = np.random.default_rng(spec.seed + 101)
    steps: list[StepDefinition] = []
    for name in names:
        verb, noun = name.split("_", 1)
        picks = rng.choice(len(FILLERS), size=spec.fillers_per_step, replace=False)
        fillers = " ".join(FILLERS[i] for i in picks)
        steps.append(
            StepDefinition(
                name=name,
                category=StepCategory.ACTION,
                description=f"{verb} the {noun} {fillers}",
            )
        )
    steps.append(
        StepDefinition(
            name=DAILY_TRIGGER,
            category=StepCategory.TRIGGER,
            description="start once per day on a schedule",
        )
    )
    steps.append(
        StepDefinition(
            name=RECORD_TRIGGER,
            category=StepCategory.TRIGGER,
            description="start when a database record is created",
            requires_table=True,
        )
    )
    for logic in FLOW_LOGIC_NAMES:
        steps.append(
            StepDefinition(name=logic, category=StepCategory.FLOW_LOGIC, description="flow logic")
        )
    table_rng = np.random.default_rng(spec.seed + 202)
    noun_order = table_rng.permutation(len(NOUNS))
    tables = [f"{NOUNS[i]}s" for i in noun_order[: spec.tables_count]]
    return Catalog.build(steps, tables, common_steps=names[: spec.common_count])


def _step_weights(spec: GenSpec) -> np.ndarray:
    weights = (1.0 - spec.skew) ** np.arange(_action_count(spec), dtype=np.float64)
    return weights / weights.sum()


def detect_trigger(query_tokens: list[str]) -> str | None:
    for name, phrase in TRIGGER_PHRASES:
        if find_occurrences(query_tokens, phrase):
            return name
    return None


def _inverts_exactly(
    query: str,
    catalog: Catalog,
    gold_names: list[str],
    trigger_name: str | None,
    table: str | None,
) -> bool:
    """True when scanning the whole catalog recovers exactly the gold."""
    qtokens = tokenize(query)
    hits: list[tuple[int, str]] = []
    for name in catalog.steps:
        defn = catalog.steps[name]
        if defn.category == StepCategory.TRIGGER:
            continue
        phrase = tuple(tokenize(name))
        if not phrase:
            continue
        for pos in find_occurrences(qtokens, phrase):
            hits.append((pos, name))
    hits.sort()
    if [name for _, name in hits] != gold_names:
        return False
    if len({pos for pos, _ in hits}) != len(hits):
        return False
    if detect_trigger(qtokens) != trigger_name:
        return False
    mentioned_tables = {t for t in catalog.tables if find_occurrences(qtokens, tuple(tokenize(t)))}
    return mentioned_tables == ({table} if table is not None else set())


def _render_query(
    kind: str, names: list[str], table: str | None, rng: np.random.Generator
) -> str:
    parts = []
    for name in names:
        verb, noun = name.split("_", 1)
        parts.append(f"{verb} {noun}")
    if len(parts) == 1:
        body = parts[0]
    else:
        pieces = [f"first {parts[0]}"]
        for middle in parts[1:-1]:
            connector = _MIDDLE_CONNECTORS[int(rng.integers(len(_MIDDLE_CONNECTORS)))]
            pieces.append(f"{connector} {middle}")
        pieces.append(f"and finally {parts[-1]}")
        body = ", ".join(pieces)
    if kind == "daily":
        prefix = "On a daily schedule, "
    elif kind == "record":
        prefix = f"When a record is created in the {table} table, "
    else:
        prefix = "Please "
    return prefix + body + "."


def generate_samples(spec: GenSpec, catalog: Catalog) -> list[LabeledSample]:
    """Seeded samples; every query is verified to invert exactly before it is
    accepted, so the oracle round trip holds for the whole corpus."""
    action = _action_names(spec)
    for name in action:
        if name not in catalog.steps:
            raise ValueError("catalog does not come from generate_catalog with this spec")
    weights = _step_weights(spec)
    tables = sorted(catalog.tables)
    kinds = ("none", "daily", "record")
    mix = np.array([spec.trigger_mix[k] for k in kinds])
    rng = np.random.default_rng(spec.seed + 303)

    samples: list[LabeledSample] = []
    while len(samples) < spec.sample_count:
        for _ in range(64):
            kind = kinds[int(rng.choice(len(kinds), p=mix))]
            count = int(rng.integers(1, spec.max_steps_per_flow + 1))
            picks = rng.choice(len(action), size=count, replace=False, p=weights)
            names = [action[i] for i in picks]
            table = tables[int(rng.integers(len(tables)))] if kind == "record" else None
            query = _render_query(kind, names, table, rng)
            trigger_name = {"none": None, "daily": DAILY_TRIGGER, "record": RECORD_TRIGGER}[kind]
            if _inverts_exactly(query, catalog, names, trigger_name, table):
                break
        else:
            raise RuntimeError("could not generate an invertible sample; pools too collisive")
        trigger = None
        if trigger_name is not None:
            props = {"table": table} if table is not None else {}
            trigger = WorkflowStep(name=trigger_name, order=0, properties=props)
        steps = tuple(WorkflowStep(name=n, order=i) for i, n in enumerate(names))
        samples.append(LabeledSample(query=query, gold=WorkflowDocument(trigger=trigger, steps=steps)))
    return samples


def compute_common_steps(samples: list[LabeledSample], count: int = 10) -> list[str]:
    """Most frequent step names in a split, ties broken by name."""
    counts = Counter(name for s in samples for name in s.gold.step_names())
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return [name for name, _ in ranked[:count]]
