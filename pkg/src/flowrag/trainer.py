"""Contrastive training of the retriever encoder.

Positive pairs come straight from labeled samples: one step pair per gold
workflow step occurrence and one table pair per trigger that names a table.
Negatives are drawn per positive pair by three strategies: uniform over
non-gold items, lexical-ranked (Okapi), and cosine-ranked under the current
encoder with periodic refresh. Enabling several strategies pools their
negatives per positive pair.

The optimizer is plain gradient descent on the mean batch loss; everything is
seeded, so identical seed, data and config reproduce bit-identical weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import Catalog, LabeledSample, step_definition_line
from .encoder import EncoderModel
from .lexical import LexicalIndex, lexical_score, tokenize

STRATEGIES = ("random", "lexical", "hard_refresh")


class InsufficientCandidates(ValueError):
    """Fewer non-gold items than requested negatives."""


class NoTrainingData(ValueError):
    """No positive pair can be built from the samples."""


@dataclass(frozen=True)
class TrainingPair:
    query: str
    item_text: str
    label: int  # 1 = item belongs to the query's gold workflow
    kind: str  # "step" or "table"
    item_name: str = ""


@dataclass
class TrainerConfig:
    learning_rate: float = 2e-5
    batch_size: int = 128
    epochs: int = 10
    negatives_per_positive: int = 4
    strategies: tuple[str, ...] = ("random",)
    seed: int = 0
    hard_refresh_period: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValueError("learning_rate, batch_size and epochs must be positive")
        if self.negatives_per_positive <= 0 or self.hard_refresh_period <= 0:
            raise ValueError("negatives_per_positive and hard_refresh_period must be positive")
        if not self.strategies:
            raise ValueError("at least one negative-sampling strategy is required")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")


def contrastive_loss(distance: float, label: int) -> float:
    """Margin-1/2 contrastive loss over cosine distance D = 1 - cossim."""
    if label == 1:
        return 0.5 * distance * distance
    slack = max(0.0, 0.5 - distance)
    return 0.5 * slack * slack


def contrastive_loss_grad(distance: float, label: int) -> float:
    """dL/dD; the hinge is flat beyond the margin."""
    if label == 1:
        return distance
    return -max(0.0, 0.5 - distance)


def _item_text(catalog: Catalog, kind: str, name: str) -> str:
    if kind == "step":
        return step_definition_line(catalog.steps[name])
    return name


def _gold_names(sample: LabeledSample, kind: str) -> set[str]:
    if kind == "step":
        return set(sample.gold.step_names())
    return set(sample.gold.table_values())


def build_positive_pairs(samples: list[LabeledSample], catalog: Catalog) -> list[TrainingPair]:
    """One pair per gold step occurrence plus one per trigger table; queries
    whose trigger needs no table contribute zero table pairs."""
    pairs: list[TrainingPair] = []
    for sample in samples:
        for step in sample.gold.steps:
            pairs.append(
                TrainingPair(
                    query=sample.query,
                    item_text=_item_text(catalog, "step", step.name),
                    label=1,
                    kind="step",
                    item_name=step.name,
                )
            )
        trigger = sample.gold.trigger
        if trigger is not None and trigger.table() is not None:
            pairs.append(
                TrainingPair(
                    query=sample.query,
                    item_text=trigger.table(),
                    label=1,
                    kind="table",
                    item_name=trigger.table(),
                )
            )
    return pairs


def _candidate_pool(catalog: Catalog, kind: str, gold: set[str]) -> list[str]:
    names = sorted(catalog.steps) if kind == "step" else sorted(catalog.tables)
    return [n for n in names if n not in gold]


def _lexical_indices(catalog: Catalog) -> dict[str, LexicalIndex]:
    return {
        "step": LexicalIndex.build(
            {name: _item_text(catalog, "step", name) for name in catalog.steps}
        ),
        "table": LexicalIndex.build({name: name for name in catalog.tables}),
    }


def _rank_lexical(index: LexicalIndex, query_tokens: list[str], pool: list[str]) -> list[str]:
    scored = [(name, lexical_score(index, query_tokens, name)) for name in pool]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [name for name, score in scored if score > 0.0]


def _rank_cosine(vectors: dict[str, np.ndarray], query_vec: np.ndarray, pool: list[str]) -> list[str]:
    scored = sorted(pool, key=lambda name: (-float(vectors[name] @ query_vec), name))
    return scored


def _encode_cached(model: EncoderModel, cache: dict[str, np.ndarray], text: str) -> np.ndarray:
    vec = cache.get(text)
    if vec is None:
        rows = model.token_rows(text)
        if not rows:
            raise NoTrainingData(f"text has no in-vocabulary tokens: {text!r}")
        pooled = model.embedding_table[rows].mean(axis=0)
        vec = pooled / np.linalg.norm(pooled)
        cache[text] = vec
    return vec


def _negatives_grouped(
    samples: list[LabeledSample],
    catalog: Catalog,
    strategy: str,
    rng_seed: int,
    count_per_positive: int,
    model: EncoderModel | None = None,
) -> list[list[TrainingPair]]:
    """Negatives aligned with build_positive_pairs order, one list per
    positive pair."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "hard_refresh" and model is None:
        raise ValueError("hard_refresh sampling needs the current encoder")
    rng = np.random.default_rng(rng_seed)
    lex = _lexical_indices(catalog) if strategy == "lexical" else None
    item_vectors: dict[str, dict[str, np.ndarray]] = {}
    cache: dict[str, np.ndarray] = {}

    def vectors_for(kind: str) -> dict[str, np.ndarray]:
        if kind not in item_vectors:
            names = sorted(catalog.steps) if kind == "step" else sorted(catalog.tables)
            item_vectors[kind] = {
                name: _encode_cached(model, cache, _item_text(catalog, kind, name))
                for name in names
            }
        return item_vectors[kind]

    grouped: list[list[TrainingPair]] = []
    for sample in samples:
        for kind, positives in (
            ("step", sample.gold.steps),
            ("table", [sample.gold.trigger] if sample.gold.trigger is not None and sample.gold.trigger.table() is not None else []),
        ):
            if not positives:
                continue
            gold = _gold_names(sample, kind)
            pool = _candidate_pool(catalog, kind, gold)
            if len(pool) < count_per_positive:
                raise InsufficientCandidates(
                    f"{len(pool)} non-gold {kind}s available, {count_per_positive} requested"
                )
            for _ in positives:
                if strategy == "random":
                    picks = [pool[i] for i in rng.choice(len(pool), size=count_per_positive, replace=False)]
                elif strategy == "lexical":
                    ranked = _rank_lexical(lex[kind], tokenize(sample.query), pool)
                    picks = ranked[:count_per_positive]
                    if len(picks) < count_per_positive:
                        # Not enough lexical matches; top up at random.
                        rest = [n for n in pool if n not in set(picks)]
                        extra = rng.choice(len(rest), size=count_per_positive - len(picks), replace=False)
                        picks += [rest[i] for i in extra]
                else:
                    qvec = _encode_cached(model, cache, sample.query)
                    picks = _rank_cosine(vectors_for(kind), qvec, pool)[:count_per_positive]
                grouped.append(
                    [
                        TrainingPair(
                            query=sample.query,
                            item_text=_item_text(catalog, kind, name),
                            label=0,
                            kind=kind,
                            item_name=name,
                        )
                        for name in picks
                    ]
                )
    return grouped


def sample_negatives(
    samples: list[LabeledSample],
    catalog: Catalog,
    strategy: str,
    rng_seed: int,
    count_per_positive: int,
    model: EncoderModel | None = None,
) -> list[TrainingPair]:
    groups = _negatives_grouped(samples, catalog, strategy, rng_seed, count_per_positive, model)
    return [pair for group in groups for pair in group]


# ---------------------------------------------------------------------------
# Training loop

@dataclass
class _Tower:
    """Cached token rows for one text."""

    rows: np.ndarray


def _pair_step(
    table: np.ndarray,
    q_rows: np.ndarray,
    i_rows: np.ndarray,
    label: int,
    grad_acc: dict[int, np.ndarray],
) -> float:
    """Loss of one pair plus its gradient contribution on the shared table."""
    xq = table[q_rows].mean(axis=0)
    xi = table[i_rows].mean(axis=0)
    nq = float(np.linalg.norm(xq))
    ni = float(np.linalg.norm(xi))
    vq = xq / nq
    vi = xi / ni
    cos = float(vq @ vi)
    distance = 1.0 - cos
    loss = contrastive_loss(distance, label)
    dl_dcos = -contrastive_loss_grad(distance, label)
    if dl_dcos != 0.0:
        for rows, v, norm, upstream in (
            (q_rows, vq, nq, dl_dcos * vi),
            (i_rows, vi, ni, dl_dcos * vq),
        ):
            grad_pooled = (upstream - v * float(v @ upstream)) / norm
            per_occurrence = grad_pooled / len(rows)
            for row in rows:
                acc = grad_acc.get(row)
                if acc is None:
                    grad_acc[row] = per_occurrence.copy()
                else:
                    acc += per_occurrence
    return loss


def train(
    model: EncoderModel,
    samples: list[LabeledSample],
    catalog: Catalog,
    config: TrainerConfig,
) -> tuple[EncoderModel, list[float]]:
    """Gradient descent on mean batch loss; returns a new model and the
    per-epoch mean loss history."""
    positives = build_positive_pairs(samples, catalog)
    if not positives:
        raise NoTrainingData("no positive pairs could be built")

    trained = EncoderModel(
        vocab=dict(model.vocab),
        embedding_table=model.embedding_table.copy(),
        dim=model.dim,
    )
    table = trained.embedding_table

    static_groups: list[list[list[TrainingPair]]] = []
    for offset, strategy in enumerate(config.strategies):
        if strategy == "hard_refresh":
            continue
        static_groups.append(
            _negatives_grouped(
                samples, catalog, strategy, config.seed + offset, config.negatives_per_positive
            )
        )

    rows_cache: dict[str, np.ndarray] = {}

    def rows_of(text: str) -> np.ndarray:
        rows = rows_cache.get(text)
        if rows is None:
            indices = trained.token_rows(text)
            if not indices:
                raise NoTrainingData(f"text has no in-vocabulary tokens: {text!r}")
            rows = np.asarray(indices, dtype=np.intp)
            rows_cache[text] = rows
        return rows

    def assemble(hard: list[list[TrainingPair]] | None) -> list[TrainingPair]:
        dataset: list[TrainingPair] = []
        for i, positive in enumerate(positives):
            dataset.append(positive)
            seen: set[str] = set()
            for groups in static_groups:
                for pair in groups[i]:
                    if pair.item_name not in seen:
                        seen.add(pair.item_name)
                        dataset.append(pair)
            if hard is not None:
                for pair in hard[i]:
                    if pair.item_name not in seen:
                        seen.add(pair.item_name)
                        dataset.append(pair)
        return dataset

    uses_hard = "hard_refresh" in config.strategies
    hard_seed = config.seed + len(config.strategies)
    rng = np.random.default_rng(config.seed)
    history: list[float] = []
    dataset: list[TrainingPair] = assemble(None) if not uses_hard else []

    for epoch in range(config.epochs):
        if uses_hard and epoch % config.hard_refresh_period == 0:
            hard = _negatives_grouped(
                samples,
                catalog,
                "hard_refresh",
                hard_seed,
                config.negatives_per_positive,
                trained,
            )
            dataset = assemble(hard)
        order = rng.permutation(len(dataset))
        total_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            grad_acc: dict[int, np.ndarray] = {}
            for idx in batch:
                pair = dataset[idx]
                total_loss += _pair_step(
                    table, rows_of(pair.query), rows_of(pair.item_text), pair.label, grad_acc
                )
            scale = config.learning_rate / len(batch)
            for row, grad in grad_acc.items():
                table[row] -= scale * grad
        history.append(total_loss / len(dataset))
    return trained, history


def save_loss_history(history: list[float], path: Path) -> None:
    """CSV with header ``epoch,mean_loss``."""
    lines = ["epoch,mean_loss"]
    lines += [f"{epoch},{loss!r}" for epoch, loss in enumerate(history)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
