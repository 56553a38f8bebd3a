"""CLI: fine-tune a checkpoint on toolkit files and emit interchange output."""
from __future__ import annotations

import click

from . import adapter
from .data import read_dataset, read_split, select


@click.group()
def main() -> None:
    """Transformer adapter for the survey coding toolkit."""


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", default="bert-base-german-cased", show_default=True,
              help="Pretrained masked-LM checkpoint id or local path.")
@click.option("--epochs", default="5,10,20", show_default=True,
              help="Comma-separated epoch candidates.")
@click.option("--lrs", default="1e-3,1e-4,1e-5", show_default=True,
              help="Comma-separated learning-rate candidates.")
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-length", default=64, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--model-tag", default="bert", show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Checkpoint output directory.")
def finetune(data, split_path, checkpoint, epochs, lrs, threshold, seed,
             max_length, batch_size, model_tag, out):
    """Grid-search epochs x learning rate on validation 0/1 loss and save
    the winning fine-tuned checkpoint."""
    answers, codes = read_dataset(data)
    parts = read_split(split_path)
    cfg = adapter.AdapterConfig(
        checkpoint=checkpoint,
        epoch_candidates=tuple(int(e) for e in epochs.split(",")),
        lr_candidates=tuple(float(lr) for lr in lrs.split(",")),
        threshold=threshold,
        seed=seed,
        max_length=max_length,
        batch_size=batch_size,
        model_tag=model_tag,
    )
    result = adapter.finetune(
        select(answers, parts["train"]), select(answers, parts["validation"]), codes, cfg
    )
    adapter.save_checkpoint(result, cfg, out)
    for cell in result.cells:
        click.echo(
            f"  epochs={cell['epochs']:<3} lr={cell['lr']:<8g} "
            f"0/1={cell['validation_zero_one']:.4f}"
        )
    click.echo(f"chosen: epochs={result.chosen_epochs} lr={result.chosen_lr:g} -> {out}")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True),
              help="Fine-tuned checkpoint directory written by `finetune`.")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--subset", default="test", show_default=True,
              type=click.Choice(["train", "validation", "test"]))
@click.option("--out", required=True, type=click.Path())
def predict(checkpoint, data, split_path, subset, out):
    """Predict one split part and write the interchange file."""
    answers, _ = read_dataset(data)
    parts = read_split(split_path)
    model, tokenizer, meta = adapter.load_checkpoint(checkpoint)
    adapter.predict_to_interchange(
        model,
        tokenizer,
        select(answers, parts[subset]),
        meta["codes"],
        out,
        threshold=meta["threshold"],
        max_length=meta["max_length"],
        model_tag=meta["model_tag"],
    )
    click.echo(f"wrote {len(parts[subset])} predictions -> {out}")


if __name__ == "__main__":
    main()
