"""Command-line driver for every pipeline stage.

Exit codes: 0 success, 1 validation failure, 2 usage error. All randomness
sits behind ``--seed``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import datagen as dg
from .catalog import load_catalog, load_samples, save_catalog, save_samples
from .dense_index import (
    FingerprintMismatch,
    build_index,
    load_index,
    save_index,
    topk,
)
from .encoder import (
    NoKnownTokens,
    build_vocab,
    encode,
    init_model,
    load_model,
    model_fingerprint,
    save_model,
)
from .evaluation import EvalConfig, evaluate_split, save_per_sample, save_report
from .pipeline import GeneratorBinding, assemble_prompt, generate, retrieve_suggestions
from .trainer import TrainerConfig, save_loss_history, train


@click.group()
def cli():
    """Retrieval-augmented workflow generation toolkit."""


def _load_catalog_or_die(catalog_dir: str):
    catalog, report = load_catalog(Path(catalog_dir))
    if not report.ok():
        click.echo(f"catalog invalid: {json.dumps(report.as_dict())}", err=True)
        sys.exit(1)
    return catalog


def _parse_mix(text: str) -> dict[str, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise click.BadParameter("expected three comma-separated fractions: none,daily,record")
    return {"none": parts[0], "daily": parts[1], "record": parts[2]}


@cli.command("datagen")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--steps", "steps_count", type=int, default=200, show_default=True)
@click.option("--tables", "tables_count", type=int, default=50, show_default=True)
@click.option("--train-count", type=int, default=500, show_default=True)
@click.option("--dev-count", type=int, default=100, show_default=True)
@click.option("--max-steps-per-flow", type=int, default=3, show_default=True)
@click.option("--trigger-mix", default="0.2,0.4,0.4", show_default=True,
              help="Fractions for none,daily,record triggers.")
@click.option("--common-f", type=int, default=10, show_default=True,
              help="Number of most frequent train-split steps marked common.")
def datagen_cmd(seed, out_dir, steps_count, tables_count, train_count, dev_count,
                max_steps_per_flow, trigger_mix, common_f):
    """Generate a synthetic catalog plus train/dev splits."""
    spec = dg.GenSpec(
        seed=seed,
        steps_count=steps_count,
        tables_count=tables_count,
        sample_count=train_count + dev_count,
        max_steps_per_flow=max_steps_per_flow,
        trigger_mix=_parse_mix(trigger_mix),
        common_count=common_f,
    )
    catalog = dg.generate_catalog(spec)
    samples = dg.generate_samples(spec, catalog)
    train_split = samples[:train_count]
    dev_split = samples[train_count:]
    common = dg.compute_common_steps(train_split, common_f)
    catalog = type(catalog)(steps=catalog.steps, tables=catalog.tables, common_steps=tuple(common))
    out = Path(out_dir)
    save_catalog(catalog, out / "catalog")
    save_samples(train_split, out / "train.jsonl")
    save_samples(dev_split, out / "dev.jsonl")
    click.echo(
        f"wrote {len(catalog.steps)} steps, {len(catalog.tables)} tables, "
        f"{len(train_split)} train and {len(dev_split)} dev samples to {out}"
    )


@cli.group("catalog")
def catalog_group():
    """Catalog file operations."""


@catalog_group.command("validate")
@click.option("--catalog-dir", type=click.Path(exists=True), required=True)
def catalog_validate(catalog_dir):
    """Validate the catalog files; exit 1 on any finding."""
    _, report = load_catalog(Path(catalog_dir))
    if not report.ok():
        click.echo(json.dumps(report.as_dict(), indent=2))
        sys.exit(1)
    click.echo("catalog ok")


@cli.command("train-retriever")
@click.option("--catalog-dir", type=click.Path(exists=True), required=True)
@click.option("--train", "train_path", type=click.Path(exists=True), required=True)
@click.option("--out", "model_out", type=click.Path(), required=True)
@click.option("--loss-csv", type=click.Path(), default=None)
@click.option("--figures-dir", type=click.Path(), default=None)
@click.option("--dim", type=int, default=32, show_default=True)
@click.option("--learning-rate", type=float, default=2e-5, show_default=True)
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--epochs", type=int, default=10, show_default=True)
@click.option("--negatives", "negatives_per_positive", type=int, default=4, show_default=True)
@click.option("--strategies", default="random", show_default=True,
              help="Comma-separated subset of random,lexical,hard_refresh.")
@click.option("--hard-refresh-period", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def train_retriever(catalog_dir, train_path, model_out, loss_csv, figures_dir, dim,
                    learning_rate, batch_size, epochs, negatives_per_positive,
                    strategies, hard_refresh_period, seed):
    """Contrastively train the retriever encoder and save a checkpoint."""
    catalog = _load_catalog_or_die(catalog_dir)
    samples = load_samples(Path(train_path), catalog)
    from .dense_index import item_text

    texts = [item_text(catalog, "step", n) for n in catalog.steps]
    texts += [item_text(catalog, "table", n) for n in catalog.tables]
    texts += [s.query for s in samples]
    model = init_model(build_vocab(texts), dim=dim, seed=seed)
    config = TrainerConfig(
        learning_rate=learning_rate,
        batch_size=batch_size,
        epochs=epochs,
        negatives_per_positive=negatives_per_positive,
        strategies=tuple(s.strip() for s in strategies.split(",") if s.strip()),
        seed=seed,
        hard_refresh_period=hard_refresh_period,
    )
    trained, history = train(model, samples, catalog, config)
    save_model(trained, Path(model_out))
    click.echo(f"saved checkpoint {model_out} (fingerprint {model_fingerprint(trained).hex()[:12]})")
    if loss_csv:
        save_loss_history(history, Path(loss_csv))
        click.echo(f"wrote loss history to {loss_csv}")
    if figures_dir:
        from .figures import save_loss_curve

        Path(figures_dir).mkdir(parents=True, exist_ok=True)
        save_loss_curve(history, Path(figures_dir) / "loss_curve.png")
        click.echo(f"wrote loss curve to {figures_dir}/loss_curve.png")
    click.echo(f"final epoch mean loss {history[-1]:.6f}")


@cli.command("build-index")
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--catalog-dir", type=click.Path(exists=True), required=True)
@click.option("--kind", type=click.Choice(["step", "table"]), required=True)
@click.option("--out", "index_out", type=click.Path(), required=True)
def build_index_cmd(model_path, catalog_dir, kind, index_out):
    """Embed every catalog item of a kind into a searchable index file."""
    catalog = _load_catalog_or_die(catalog_dir)
    model = load_model(Path(model_path))
    try:
        index = build_index(model, catalog, kind)
    except NoKnownTokens as exc:
        click.echo(
            f"encoder/catalog mismatch (encoder fingerprint "
            f"{model_fingerprint(model).hex()[:12]}): {exc}",
            err=True,
        )
        sys.exit(1)
    save_index(index, Path(index_out))
    click.echo(f"indexed {len(index)} {kind}s into {index_out}")


def _load_serving_stack(model_path, step_index_path, table_index_path, catalog_dir):
    catalog = _load_catalog_or_die(catalog_dir)
    model = load_model(Path(model_path))
    fingerprint = model_fingerprint(model)
    try:
        step_index = load_index(Path(step_index_path), expected_fingerprint=fingerprint)
        table_index = load_index(Path(table_index_path), expected_fingerprint=fingerprint)
    except FingerprintMismatch as exc:
        click.echo(f"index/encoder mismatch: {exc}", err=True)
        sys.exit(1)
    return catalog, model, step_index, table_index


@cli.command("retrieve")
@click.option("--query", required=True)
@click.option("--k", type=int, default=15, show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--step-index", type=click.Path(exists=True), required=True)
@click.option("--table-index", type=click.Path(exists=True), required=True)
@click.option("--catalog-dir", type=click.Path(exists=True), required=True)
def retrieve_cmd(query, k, model_path, step_index, table_index, catalog_dir):
    """Print ranked suggestions, one tab-separated line per item."""
    catalog, model, s_index, t_index = _load_serving_stack(
        model_path, step_index, table_index, catalog_dir
    )
    try:
        query_vec = encode(model, query)
    except NoKnownTokens as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    for name, score in topk(s_index, query_vec, k):
        click.echo(f"step\t{name}\t{score:.6f}")
    for name, score in topk(t_index, query_vec, k):
        click.echo(f"table\t{name}\t{score:.6f}")


@cli.command("generate")
@click.option("--query", required=True)
@click.option("--generator", "generator_kind", type=click.Choice(["oracle", "remote"]),
              default="oracle", show_default=True)
@click.option("--endpoint", default=None, help="Remote generator base URL.")
@click.option("--timeout", type=float, default=30.0, show_default=True)
@click.option("--k-steps", type=int, default=15, show_default=True)
@click.option("--k-tables", type=int, default=10, show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--step-index", type=click.Path(exists=True), required=True)
@click.option("--table-index", type=click.Path(exists=True), required=True)
@click.option("--catalog-dir", type=click.Path(exists=True), required=True)
def generate_cmd(query, generator_kind, endpoint, timeout, k_steps, k_tables,
                 model_path, step_index, table_index, catalog_dir):
    """Retrieve suggestions, prompt the generator, print the result as JSON."""
    catalog, model, s_index, t_index = _load_serving_stack(
        model_path, step_index, table_index, catalog_dir
    )
    binding = GeneratorBinding(kind=generator_kind, endpoint=endpoint, timeout=timeout)
    suggestions = retrieve_suggestions(query, s_index, t_index, catalog, model, k_steps, k_tables)
    prompt = assemble_prompt(suggestions, query, catalog)
    doc, report, raw = generate(binding, prompt, catalog)
    click.echo(
        json.dumps(
            {
                "workflow": json.loads(raw),
                "suggestions": {"steps": list(suggestions.steps), "tables": list(suggestions.tables)},
                "report": report.as_dict(),
            },
            indent=2,
        )
    )


@cli.command("evaluate")
@click.option("--split", "split_path", type=click.Path(exists=True), required=True)
@click.option("--generator", "generator_kind", type=click.Choice(["oracle", "remote"]),
              default="oracle", show_default=True)
@click.option("--endpoint", default=None)
@click.option("--timeout", type=float, default=30.0, show_default=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--per-sample", "per_sample_path", type=click.Path(), default=None)
@click.option("--figures-dir", type=click.Path(), default=None)
@click.option("--k-steps", type=int, default=15, show_default=True)
@click.option("--k-tables", type=int, default=10, show_default=True)
@click.option("--recall-mode", type=click.Choice(["fraction", "coverage"]),
              default="fraction", show_default=True)
@click.option("--suggestions", "suggestion_mode",
              type=click.Choice(["retrieval", "gold", "none"]),
              default="retrieval", show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--step-index", type=click.Path(exists=True), required=True)
@click.option("--table-index", type=click.Path(exists=True), required=True)
@click.option("--catalog-dir", type=click.Path(exists=True), required=True)
def evaluate_cmd(split_path, generator_kind, endpoint, timeout, report_path,
                 per_sample_path, figures_dir, k_steps, k_tables, recall_mode,
                 suggestion_mode, model_path, step_index, table_index, catalog_dir):
    """Run the full metric suite over a split and write the report."""
    catalog, model, s_index, t_index = _load_serving_stack(
        model_path, step_index, table_index, catalog_dir
    )
    samples = load_samples(Path(split_path), catalog)
    binding = GeneratorBinding(kind=generator_kind, endpoint=endpoint, timeout=timeout)
    config = EvalConfig(
        k_steps=k_steps, k_tables=k_tables, recall_mode=recall_mode,
        suggestion_mode=suggestion_mode,
    )
    report = evaluate_split(samples, model, s_index, t_index, catalog, binding, config)
    save_report(report, Path(report_path))
    if per_sample_path:
        save_per_sample(report, Path(per_sample_path))
    if figures_dir:
        from .figures import save_bofs_histogram, save_metrics_bars

        Path(figures_dir).mkdir(parents=True, exist_ok=True)
        save_metrics_bars(report, Path(figures_dir) / "metrics.png")
        save_bofs_histogram(report, Path(figures_dir) / "bofs_histogram.png")
    for key, value in report.as_dict(include_per_sample=False).items():
        click.echo(f"{key}\t{value}")


@cli.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True),
              envvar="FLOWRAG_CONFIG", required=True,
              help="Config file path; falls back to $FLOWRAG_CONFIG.")
def serve_cmd(config_path):
    """Run the long-running retrieval/generation service."""
    from .service import load_service_config, serve

    serve(load_service_config(Path(config_path)))


def run_cli(argv: list[str] | None = None) -> int:
    """Programmatic entry point returning the exit code."""
    try:
        cli.main(args=argv, standalone_mode=True)
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
