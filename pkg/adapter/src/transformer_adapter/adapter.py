"""Fine-tuning and prediction with a multi-label classification head.

One sigmoid output per label code; a label is predicted when its probability
is strictly above the threshold, so empty prediction sets are possible and
the downstream toolkit may apply its min-1-label fallback using the emitted
scores.  Model selection runs a small grid over epoch and learning-rate
candidates against validation 0/1 loss (exact labelset match), the same
criterion the toolkit reports.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, TensorDataset

from .data import Answer, code_sort_key

ADAPTER_META = "adapter.json"


@dataclass(frozen=True)
class AdapterConfig:
    checkpoint: str = "bert-base-german-cased"
    epoch_candidates: tuple[int, ...] = (5, 10, 20)
    lr_candidates: tuple[float, ...] = (1e-3, 1e-4, 1e-5)
    threshold: float = 0.5
    seed: int = 0
    max_length: int = 64
    batch_size: int = 16
    model_tag: str = "bert"

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if not self.epoch_candidates or not self.lr_candidates:
            raise ValueError("epoch and learning-rate grids must be nonempty")
        if any(e < 1 for e in self.epoch_candidates):
            raise ValueError("epoch candidates must be >= 1")


def _load_backbone(checkpoint: str, n_outputs: int):
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        model = AutoModelForSequenceClassification.from_pretrained(
            checkpoint,
            num_labels=n_outputs,
            problem_type="multi_label_classification",
        )
    except OSError as err:
        raise RuntimeError(
            f"checkpoint {checkpoint!r} is not available locally and could not "
            f"be downloaded; pass a local path or a cached model id ({err})"
        ) from err
    return tokenizer, model


def _encode(tokenizer, answers: list[Answer], codes: list[str], max_length: int):
    enc = tokenizer(
        [a.text for a in answers],
        padding="max_length",
        truncation=True,
        max_length=max_length,
        return_tensors="pt",
    )
    index = {code: i for i, code in enumerate(codes)}
    targets = torch.zeros(len(answers), len(codes))
    for row, answer in enumerate(answers):
        for code in answer.labels:
            targets[row, index[code]] = 1.0
    return TensorDataset(enc["input_ids"], enc["attention_mask"], targets)


def _train_one(model, dataset, epochs: int, lr: float, batch_size: int, seed: int):
    generator = torch.Generator().manual_seed(seed)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=True, generator=generator)
    optimizer = torch.optim.AdamW(model.parameters(), lr=lr)
    model.train()
    for _ in range(epochs):
        for input_ids, attention_mask, targets in loader:
            optimizer.zero_grad()
            out = model(input_ids=input_ids, attention_mask=attention_mask, labels=targets)
            out.loss.backward()
            optimizer.step()
    return model


@torch.no_grad()
def predict_probabilities(model, dataset, batch_size: int) -> np.ndarray:
    model.eval()
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False)
    chunks = []
    for input_ids, attention_mask, _ in loader:
        logits = model(input_ids=input_ids, attention_mask=attention_mask).logits
        chunks.append(torch.sigmoid(logits).cpu().numpy())
    return np.concatenate(chunks, axis=0)


def threshold_sets(
    probabilities: np.ndarray, codes: list[str], threshold: float
) -> list[list[str]]:
    """Strictly-greater thresholding; rows may come out empty."""
    out = []
    for row in probabilities:
        picked = [codes[j] for j in range(len(codes)) if row[j] > threshold]
        out.append(sorted(picked, key=code_sort_key))
    return out


def _zero_one(predicted: list[list[str]], answers: list[Answer]) -> float:
    wrong = sum(
        1 for sets, answer in zip(predicted, answers)
        if frozenset(sets) != answer.labels
    )
    return wrong / len(answers)


@dataclass
class FinetuneResult:
    model: object
    tokenizer: object
    codes: list[str]
    chosen_epochs: int
    chosen_lr: float
    cells: list[dict] = field(default_factory=list)


def finetune(
    train: list[Answer],
    validation: list[Answer],
    codes: list[str],
    cfg: AdapterConfig,
) -> FinetuneResult:
    """Grid over epochs x learning rate, selecting by validation 0/1 loss.

    Ties resolve toward fewer epochs, then the smaller learning rate.  Every
    cell restarts from the pretrained checkpoint with the same seed, so the
    search is reproducible.
    """
    cells = []
    best = None
    for epochs in cfg.epoch_candidates:
        for lr in cfg.lr_candidates:
            torch.manual_seed(cfg.seed)
            tokenizer, model = _load_backbone(cfg.checkpoint, len(codes))
            train_set = _encode(tokenizer, train, codes, cfg.max_length)
            _train_one(model, train_set, epochs, lr, cfg.batch_size, cfg.seed)
            val_set = _encode(tokenizer, validation, codes, cfg.max_length)
            probs = predict_probabilities(model, val_set, cfg.batch_size)
            loss = _zero_one(threshold_sets(probs, codes, cfg.threshold), validation)
            cells.append({"epochs": epochs, "lr": lr, "validation_zero_one": loss})
            key = (loss, epochs, lr)
            if best is None or key < best[0]:
                best = (key, model, tokenizer, epochs, lr)
    _, model, tokenizer, chosen_epochs, chosen_lr = best
    return FinetuneResult(model, tokenizer, list(codes), chosen_epochs, chosen_lr, cells)


def save_checkpoint(result: FinetuneResult, cfg: AdapterConfig, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result.model.save_pretrained(out_dir)
    result.tokenizer.save_pretrained(out_dir)
    meta = {
        "codes": result.codes,
        "threshold": cfg.threshold,
        "max_length": cfg.max_length,
        "model_tag": cfg.model_tag,
        "chosen_epochs": result.chosen_epochs,
        "chosen_lr": result.chosen_lr,
        "grid": result.cells,
    }
    (out_dir / ADAPTER_META).write_text(json.dumps(meta, indent=2), encoding="utf-8")


def load_checkpoint(path: str | Path):
    path = Path(path)
    meta = json.loads((path / ADAPTER_META).read_text(encoding="utf-8"))
    tokenizer, model = _load_backbone(str(path), len(meta["codes"]))
    return model, tokenizer, meta


def predict_to_interchange(
    model,
    tokenizer,
    answers: list[Answer],
    codes: list[str],
    out_path: str | Path,
    *,
    threshold: float = 0.5,
    max_length: int = 64,
    batch_size: int = 16,
    model_tag: str = "bert",
) -> None:
    """Predict and emit the line-oriented interchange file.

    Every record carries its full score map so the toolkit can evaluate,
    triage, or apply the min-1-label fallback without rerunning the model.
    """
    dataset = _encode(tokenizer, answers, codes, max_length)
    probs = predict_probabilities(model, dataset, batch_size)
    predicted = threshold_sets(probs, codes, threshold)
    lines = []
    for answer, sets, row in zip(answers, predicted, probs):
        payload = {
            "id": answer.record_id,
            "model_tag": model_tag,
            "predicted": sets,
            "scores": {code: float(row[j]) for j, code in enumerate(codes)},
        }
        lines.append(json.dumps(payload, sort_keys=True, separators=(",", ":")))
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
