"""Command-line interface for the survey coding toolkit."""
from __future__ import annotations

import json
from pathlib import Path

import click

from . import evaluation, features, multilabel, pipeline
from .config import ToolkitConfig, load_config


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML config file; defaults apply when omitted.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, seed: int | None) -> None:
    """Multi-label coding of open-ended survey answers."""
    cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = seed
    ctx.obj = cfg


def _load(cfg: ToolkitConfig, data: str):
    return pipeline.load_dataset(cfg.dataset_spec(data))


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--top", default=10, show_default=True, help="How many labels to list.")
@click.pass_obj
def stats(cfg: ToolkitConfig, data: str, top: int) -> None:
    """Dataset statistics: size, label count, cardinality, top labels."""
    records, _ = _load(cfg, data)
    summary = pipeline.dataset_stats(records, top_k=top)
    click.echo(f"records            {summary.n_records}")
    click.echo(f"labels             {summary.n_labels}")
    click.echo(f"cardinality        {summary.cardinality:.2f}")
    click.echo(f"multi-label        {summary.pct_multi_label:.1f}%")
    click.echo(f"max labels/record  {summary.max_labels}")
    click.echo(f"top {top} labels (% of all assigned labels):")
    for code, count, pct in summary.top_labels:
        click.echo(f"  {code:>8}  {count:>7}  {pct:5.2f}%")


@main.command("split")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def split_cmd(cfg: ToolkitConfig, data: str, out: str) -> None:
    """Create the seeded train/validation/test split file."""
    records, _ = _load(cfg, data)
    result = pipeline.split(records, cfg.split_config())
    pipeline.save_split(result, out)
    click.echo(
        f"split {len(result.train_ids)}/{len(result.validation_ids)}/{len(result.test_ids)}"
        f" (seed {result.seed}) -> {out}"
    )


def _prepared_matrices(cfg: ToolkitConfig, records, space, split_):
    rules = cfg.rules()
    lemmatizer = cfg.lemmatizer()
    by_id = {r.record_id: r for r in records}
    parts = {}
    train_records = [by_id[rid] for rid in split_.train_ids]
    train_docs = pipeline.prepare_documents(train_records, rules, lemmatizer)
    tfidf = features.fit_tfidf(train_docs, cfg.ngram_range(), cfg.l2_normalize())
    for name in ("train", "validation", "test"):
        part_records = [by_id[rid] for rid in split_.part(name)]
        docs = pipeline.prepare_documents(part_records, rules, lemmatizer)
        X = features.transform_many(docs, tfidf)
        Y = multilabel.label_matrix([r.labels for r in part_records], space)
        parts[name] = (part_records, X, Y)
    return tfidf, parts


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--algorithm", required=True, type=click.Choice(pipeline.ALGORITHMS))
@click.pass_obj
def gridsearch(cfg: ToolkitConfig, data: str, split_path: str, algorithm: str) -> None:
    """Grid search C/gamma/kernel against validation 0/1 loss."""
    records, space = _load(cfg, data)
    split_ = pipeline.load_split(split_path)
    _, parts = _prepared_matrices(cfg, records, space, split_)
    _, X_train, Y_train = parts["train"]
    validation_records, X_val, _ = parts["validation"]
    result = pipeline.grid_search(
        X_train,
        Y_train,
        X_val,
        [r.labels for r in validation_records],
        space,
        cfg.grid_spec(),
        algorithm,
        cfg.train_config(),
        cfg.ecc_config(),
        cfg.chain_order,
    )
    for cell in result.cells:
        c = cell.config
        gamma = f" gamma={c.gamma:g}" if c.gamma is not None else ""
        click.echo(f"  {c.kernel:<6} C={c.C:<8g}{gamma:<12} loss={cell.validation_loss:.4f}")
    best = result.best
    gamma = f" gamma={best.gamma:g}" if best.gamma is not None else ""
    click.echo(f"best: {best.kernel} C={best.C:g}{gamma}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--algorithm", required=True, type=click.Choice(pipeline.ALGORITHMS))
@click.option("--out", required=True, type=click.Path(), help="Output directory for the model bundle.")
@click.pass_obj
def train(cfg: ToolkitConfig, data: str, split_path: str, algorithm: str, out: str) -> None:
    """Train a model on the training part and store the bundle."""
    records, space = _load(cfg, data)
    split_ = pipeline.load_split(split_path)
    by_id = {r.record_id: r for r in records}
    rules, lemmatizer = cfg.rules(), cfg.lemmatizer()
    train_records = [by_id[rid] for rid in split_.train_ids]
    train_docs = pipeline.prepare_documents(train_records, rules, lemmatizer)
    tfidf = features.fit_tfidf(train_docs, cfg.ngram_range(), cfg.l2_normalize())
    X_train = features.transform_many(train_docs, tfidf)
    Y_train = multilabel.label_matrix([r.labels for r in train_records], space)
    model = pipeline.fit_algorithm(
        algorithm, X_train, Y_train, space, cfg.train_config(), cfg.ecc_config(), cfg.chain_order
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    features.save_tfidf(tfidf, out_dir / "features.json")
    bundle = multilabel.model_to_dict(model, feature_ref="features.json")
    (out_dir / "model.json").write_text(
        json.dumps(bundle, sort_keys=True), encoding="utf-8"
    )
    click.echo(f"trained {algorithm} on {len(train_records)} records -> {out_dir}")


@main.command()
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--subset", default="test", show_default=True,
              type=click.Choice(["train", "validation", "test"]))
@click.option("--out", required=True, type=click.Path())
@click.option("--force-min-one", is_flag=True, help="Replace empty predictions by the top-scoring label.")
@click.option("--model-tag", default=None, help="Tag written into the interchange records.")
@click.pass_obj
def predict(cfg: ToolkitConfig, model_dir: str, data: str, split_path: str,
            subset: str, out: str, force_min_one: bool, model_tag: str | None) -> None:
    """Predict a split part and write the interchange file."""
    records, _ = _load(cfg, data)
    split_ = pipeline.load_split(split_path)
    bundle = json.loads((Path(model_dir) / "model.json").read_text(encoding="utf-8"))
    model, feature_ref = multilabel.model_from_dict(bundle)
    tfidf = features.load_tfidf(Path(model_dir) / (feature_ref or "features.json"))
    by_id = {r.record_id: r for r in records}
    part_records = [by_id[rid] for rid in split_.part(subset)]
    docs = pipeline.prepare_documents(part_records, cfg.rules(), cfg.lemmatizer())
    X = features.transform_many(docs, tfidf)
    predicted_sets, scores = multilabel.predict_many(model, X, force_min_one=force_min_one)
    tag = model_tag or (
        f"{model.algorithm}-min1" if force_min_one else model.algorithm
    )
    out_records = []
    for i, record in enumerate(part_records):
        score_map = None
        if scores is not None:
            score_map = {
                code: float(scores[i, j]) for j, code in enumerate(model.label_space.codes)
            }
        out_records.append(
            evaluation.PredictionRecord(record.record_id, predicted_sets[i], None, score_map, tag)
        )
    pipeline.write_predictions(out_records, out)
    click.echo(f"wrote {len(out_records)} predictions ({tag}) -> {out}")


@main.command()
@click.option("--pred", "pred_paths", required=True, multiple=True, type=click.Path(exists=True),
              help="One or more interchange files; repeat the flag to compare methods.")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path(), help="Write the report(s) as JSON.")
@click.pass_obj
def evaluate(cfg: ToolkitConfig, pred_paths: tuple[str, ...], data: str, out: str | None) -> None:
    """Evaluate interchange files against dataset truth (0/1 loss tables)."""
    records, space = _load(cfg, data)
    reports = []
    truthful = None
    for path in pred_paths:
        predictions = pipeline.import_predictions(path, space)
        predictions = pipeline.attach_truth(predictions, records)
        truthful = predictions
        reports.append(evaluation.build_report(predictions, space))
    true_dist = evaluation.true_count_distribution(truthful) if truthful else None
    click.echo(evaluation.format_report_tables(reports, true_dist))
    if out:
        payload = [r.to_dict() for r in reports]
        Path(out).write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
        click.echo(f"report -> {out}")


@main.command("triage")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--data", default=None, type=click.Path(exists=True),
              help="Attach truth so the auto subset gets a 0/1 loss.")
@click.option("--out", required=True, type=click.Path())
@click.pass_obj
def triage_cmd(cfg: ToolkitConfig, pred_path: str, data: str | None, out: str) -> None:
    """Split predictions into an auto-accept subset and a manual queue."""
    if data is not None:
        records, space = _load(cfg, data)
        predictions = pipeline.import_predictions(pred_path, space)
        predictions = pipeline.attach_truth(predictions, records)
    else:
        # Without the dataset the label space is whatever the file mentions.
        predictions = _import_without_space(pred_path)
    report = pipeline.triage(predictions)
    pipeline.save_triage(report, out)
    click.echo(
        f"auto {len(report.auto)} ({report.auto_fraction:.3f}), manual {len(report.manual)}"
        + (f", auto 0/1 loss {report.auto_zero_one:.4f}" if report.auto_zero_one is not None else "")
    )
    click.echo(f"triage report -> {out}")


def _import_without_space(path: str) -> list[evaluation.PredictionRecord]:
    observed: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                observed.update(json.loads(line).get("predicted", []))
    space = multilabel.LabelSpace.from_observed(observed or {"_none"})
    return pipeline.import_predictions(path, space)


@main.command("import-eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path())
@click.pass_obj
def import_eval(cfg: ToolkitConfig, pred_path: str, data: str, out: str | None) -> None:
    """Validate an externally produced interchange file and evaluate it."""
    records, space = _load(cfg, data)
    predictions = pipeline.import_predictions(pred_path, space)
    click.echo(f"validated {len(predictions)} records from {pred_path}")
    predictions = pipeline.attach_truth(predictions, records)
    report = evaluation.build_report(predictions, space)
    click.echo(
        evaluation.format_report_tables([report], evaluation.true_count_distribution(predictions))
    )
    if out:
        evaluation.save_report(report, out)
        click.echo(f"report -> {out}")


if __name__ == "__main__":
    main()
