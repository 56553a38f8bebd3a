"""Dataset ingestion, splitting, grid search, experiments, and triage.

File formats owned by this module:

* dataset: UTF-8 CSV with a header; columns for id, text, and labels, the
  label cell holding ";"-separated codes;
* split file: JSON with the seed, fractions, and the three id partitions;
* prediction interchange: UTF-8 JSON lines, one record per line, shaped as
  ``{"id": ..., "model_tag": ..., "predicted": [codes], "scores": {code: real}}``
  with ``scores`` optional.  Both the classical experiments and external
  adapters emit this format, so evaluations are always head-to-head.
"""
from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import evaluation, features, multilabel, svm, textprep
from .evaluation import EvalReport, PredictionRecord, build_report
from .features import TfidfModel
from .multilabel import ChainSpec, ECCConfig, LabelSet, LabelSpace, TrainedModel
from .svm import TrainConfig
from .textprep import Document, Lemmatizer, NormalizationRules

ALGORITHMS = ("br", "lp", "cc", "ecc")

SPLIT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class AnswerRecord:
    record_id: str
    text: str
    labels: LabelSet


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    id_column: str = "id"
    text_column: str = "text"
    label_column: str = "labels"
    label_delimiter: str = ";"


def _atomic_write(path: str | Path, content: str) -> None:
    """Whole-file atomic replacement; partial writes never become visible."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_dataset(spec: DatasetSpec) -> tuple[list[AnswerRecord], LabelSpace]:
    """Read answers and derive the label space from the observed codes.

    Rows with empty text are kept: nonsense answers still carry labels such
    as "no answer".  An empty label cell, a missing column, or a duplicate
    id is a hard error naming the offending row.
    """
    records: list[AnswerRecord] = []
    seen: dict[str, int] = {}
    observed: set[str] = set()
    with open(spec.path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for column in (spec.id_column, spec.text_column, spec.label_column):
            if column not in header:
                raise ValueError(f"{spec.path}: missing column {column!r} in header")
        for lineno, row in enumerate(reader, start=2):
            record_id = (row[spec.id_column] or "").strip()
            if not record_id:
                raise ValueError(f"{spec.path}:{lineno}: empty id")
            if record_id in seen:
                raise ValueError(
                    f"{spec.path}:{lineno}: duplicate id {record_id!r}"
                    f" (first seen on row {seen[record_id]})"
                )
            seen[record_id] = lineno
            label_cell = (row[spec.label_column] or "").strip()
            if not label_cell:
                raise ValueError(f"{spec.path}:{lineno}: empty label field")
            codes = [part.strip() for part in label_cell.split(spec.label_delimiter)]
            if any(not code for code in codes):
                raise ValueError(f"{spec.path}:{lineno}: blank label code in {label_cell!r}")
            labels = frozenset(codes)
            observed.update(labels)
            records.append(AnswerRecord(record_id, row[spec.text_column] or "", labels))
    if not records:
        raise ValueError(f"{spec.path}: dataset contains no rows")
    return records, LabelSpace.from_observed(observed)


@dataclass
class DatasetStats:
    n_records: int
    n_labels: int
    cardinality: float
    pct_multi_label: float
    max_labels: int
    top_labels: list[tuple[str, int, float]]  # (code, count, % of all labels)


def dataset_stats(records: Sequence[AnswerRecord], top_k: int = 10) -> DatasetStats:
    if not records:
        raise ValueError("no records")
    counts: dict[str, int] = {}
    total_labels = 0
    multi = 0
    max_labels = 0
    for record in records:
        k = len(record.labels)
        total_labels += k
        max_labels = max(max_labels, k)
        if k > 1:
            multi += 1
        for code in record.labels:
            counts[code] = counts.get(code, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], multilabel.code_sort_key(kv[0])))
    top = [
        (code, count, 100.0 * count / total_labels) for code, count in ranked[:top_k]
    ]
    return DatasetStats(
        n_records=len(records),
        n_labels=len(counts),
        cardinality=total_labels / len(records),
        pct_multi_label=100.0 * multi / len(records),
        max_labels=max_labels,
        top_labels=top,
    )


@dataclass(frozen=True)
class SplitConfig:
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise ValueError("need three positive fractions")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")


@dataclass
class Split:
    train_ids: list[str]
    validation_ids: list[str]
    test_ids: list[str]
    seed: int
    fractions: tuple[float, float, float]

    def part(self, name: str) -> list[str]:
        try:
            return {"train": self.train_ids, "validation": self.validation_ids, "test": self.test_ids}[name]
        except KeyError:
            raise ValueError(f"unknown split part {name!r}") from None


def _fisher_yates(n: int, rng: np.random.Generator) -> list[int]:
    # Spelled out (rather than rng.permutation) so the shuffle is pinned to
    # a documented algorithm: PCG64 draws j = integers(0, i+1), descending i.
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    return order


def split(records: Sequence[AnswerRecord], cfg: SplitConfig) -> Split:
    """Seeded uniform shuffle of the ids in file order, then contiguous cuts."""
    ids = [r.record_id for r in records]
    n = len(ids)
    n_train = int(cfg.fractions[0] * n)
    n_val = int(cfg.fractions[1] * n)
    if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
        raise ValueError(f"too few records ({n}) to populate all three parts")
    order = _fisher_yates(n, np.random.default_rng(cfg.seed))
    shuffled = [ids[k] for k in order]
    return Split(
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
        cfg.seed,
        tuple(cfg.fractions),
    )


def save_split(split_: Split, path: str | Path) -> None:
    payload = {
        "format_version": SPLIT_FORMAT_VERSION,
        "seed": split_.seed,
        "fractions": list(split_.fractions),
        "train": split_.train_ids,
        "validation": split_.validation_ids,
        "test": split_.test_ids,
    }
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=2))


def load_split(path: str | Path) -> Split:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != SPLIT_FORMAT_VERSION:
        raise ValueError(f"unsupported split file version {version!r}")
    parts = [payload["train"], payload["validation"], payload["test"]]
    all_ids = [rid for part in parts for rid in part]
    if len(set(all_ids)) != len(all_ids):
        raise ValueError(f"{path}: split parts overlap")
    return Split(*parts, seed=payload["seed"], fractions=tuple(payload["fractions"]))


@dataclass(frozen=True)
class GridSpec:
    kernels: tuple[str, ...] = ("linear", "rbf")
    C_values: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0, 1000.0)
    gamma_values: tuple[float, ...] = (0.01, 0.1, 0.5, 1.0)

    def __post_init__(self) -> None:
        if not self.kernels or not self.C_values:
            raise ValueError("kernel and C grids must be nonempty")
        for kernel in self.kernels:
            if kernel not in svm.KERNELS:
                raise ValueError(f"unknown kernel {kernel!r}")
        if "rbf" in self.kernels and not self.gamma_values:
            raise ValueError("rbf in the grid requires gamma candidates")

    def cells(self, base: TrainConfig) -> list[TrainConfig]:
        out = []
        for kernel in self.kernels:
            for C in self.C_values:
                if kernel == "rbf":
                    for gamma in self.gamma_values:
                        out.append(
                            TrainConfig(C, "rbf", gamma, base.tolerance, base.max_iterations, base.seed)
                        )
                else:
                    out.append(
                        TrainConfig(C, "linear", None, base.tolerance, base.max_iterations, base.seed)
                    )
        return out


def fit_algorithm(
    algorithm: str,
    X,
    Y: np.ndarray,
    space: LabelSpace,
    cfg: TrainConfig,
    ecc: ECCConfig | None = None,
    chain_order: Sequence[int] | None = None,
) -> TrainedModel:
    if algorithm == "br":
        return multilabel.br_fit(X, Y, space, cfg)
    if algorithm == "lp":
        return multilabel.lp_fit(X, Y, space, cfg)
    if algorithm == "cc":
        order = tuple(chain_order) if chain_order is not None else tuple(range(len(space)))
        return multilabel.cc_fit(X, Y, space, ChainSpec(order, cfg.seed), cfg)
    if algorithm == "ecc":
        return multilabel.ecc_fit(X, Y, space, ecc or ECCConfig(seed=cfg.seed), cfg)
    raise ValueError(f"unknown algorithm {algorithm!r} (expected one of {ALGORITHMS})")


@dataclass
class GridCell:
    config: TrainConfig
    validation_loss: float


@dataclass
class GridSearchResult:
    best: TrainConfig
    cells: list[GridCell]


def grid_search(
    X_train,
    Y_train: np.ndarray,
    X_validation,
    validation_sets: Sequence[LabelSet],
    space: LabelSpace,
    grid: GridSpec,
    algorithm: str,
    base: TrainConfig,
    ecc: ECCConfig | None = None,
    chain_order: Sequence[int] | None = None,
) -> GridSearchResult:
    """Train per cell, score validation 0/1 loss, return the argmin.

    Ties break toward smaller C, then smaller gamma, then linear before rbf,
    so repeated searches land on the same cell.
    """
    cells: list[GridCell] = []
    for cfg in grid.cells(base):
        model = fit_algorithm(algorithm, X_train, Y_train, space, cfg, ecc, chain_order)
        predicted, _ = multilabel.predict_many(model, svm.as_csr(X_validation))
        wrong = sum(1 for got, want in zip(predicted, validation_sets) if got != want)
        cells.append(GridCell(cfg, wrong / len(validation_sets)))

    def sort_key(cell: GridCell):
        cfg = cell.config
        return (
            cell.validation_loss,
            cfg.C,
            cfg.gamma if cfg.gamma is not None else 0.0,
            0 if cfg.kernel == "linear" else 1,
        )

    best = min(cells, key=sort_key).config
    return GridSearchResult(best, cells)


def prepare_documents(
    records: Sequence[AnswerRecord],
    rules: NormalizationRules,
    lemmatizer: Lemmatizer | None = None,
) -> list[Document]:
    return [
        textprep.prepare_document(textprep.RawAnswer(r.record_id, r.text), rules, lemmatizer)
        for r in records
    ]


@dataclass
class ExperimentResult:
    predictions: list[PredictionRecord]
    report: EvalReport
    model: TrainedModel
    tfidf: TfidfModel


def run_experiment(
    records: Sequence[AnswerRecord],
    space: LabelSpace,
    split_: Split,
    algorithm: str,
    *,
    rules: NormalizationRules = textprep.DEFAULT_RULES,
    lemmatizer: Lemmatizer | None = None,
    ngram_range: tuple[int, int] = (1, 1),
    l2_normalize: bool = True,
    train_cfg: TrainConfig = TrainConfig(),
    ecc_cfg: ECCConfig | None = None,
    chain_order: Sequence[int] | None = None,
    force_min_one: bool = False,
    model_tag: str | None = None,
) -> ExperimentResult:
    """Fit preprocessing and features on the training part only, train the
    requested meta-algorithm, predict the test part, and evaluate."""
    by_id = {r.record_id: r for r in records}
    train_records = [by_id[rid] for rid in split_.train_ids]
    test_records = [by_id[rid] for rid in split_.test_ids]

    train_docs = prepare_documents(train_records, rules, lemmatizer)
    tfidf = features.fit_tfidf(train_docs, ngram_range, l2_normalize)
    X_train = features.transform_many(train_docs, tfidf)
    Y_train = multilabel.label_matrix([r.labels for r in train_records], space)

    model = fit_algorithm(algorithm, X_train, Y_train, space, train_cfg, ecc_cfg, chain_order)

    test_docs = prepare_documents(test_records, rules, lemmatizer)
    X_test = features.transform_many(test_docs, tfidf)
    predicted_sets, scores = multilabel.predict_many(
        model, X_test, force_min_one=force_min_one
    )

    tag = model_tag or (f"{algorithm}-min1" if force_min_one else algorithm)
    predictions = []
    for i, record in enumerate(test_records):
        score_map = None
        if scores is not None:
            score_map = {code: float(scores[i, j]) for j, code in enumerate(space.codes)}
        predictions.append(
            PredictionRecord(record.record_id, predicted_sets[i], record.labels, score_map, tag)
        )
    report = build_report(predictions, space, tag)
    return ExperimentResult(predictions, report, model, tfidf)


def write_predictions(records: Sequence[PredictionRecord], path: str | Path) -> None:
    """Emit the interchange file (canonical JSON, one record per line)."""
    lines = []
    for record in records:
        payload: dict = {
            "id": record.record_id,
            "model_tag": record.model_tag,
            "predicted": sorted(record.predicted, key=multilabel.code_sort_key),
        }
        if record.scores is not None:
            payload["scores"] = {code: float(v) for code, v in record.scores.items()}
        lines.append(json.dumps(payload, sort_keys=True, separators=(",", ":")))
    _atomic_write(path, "\n".join(lines) + "\n")


def import_predictions(path: str | Path, space: LabelSpace) -> list[PredictionRecord]:
    """Read and validate an interchange file produced by any component."""
    records: list[PredictionRecord] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({err.msg})") from None
            if not isinstance(payload, dict):
                raise ValueError(f"{path}:{lineno}: expected an object per line")
            for key in ("id", "model_tag", "predicted"):
                if key not in payload:
                    raise ValueError(f"{path}:{lineno}: missing field {key!r}")
            record_id = str(payload["id"])
            if record_id in seen:
                raise ValueError(
                    f"{path}:{lineno}: duplicate id {record_id!r}"
                    f" (first seen on line {seen[record_id]})"
                )
            seen[record_id] = lineno
            predicted = payload["predicted"]
            if not isinstance(predicted, list):
                raise ValueError(f"{path}:{lineno}: 'predicted' must be a list of codes")
            for code in predicted:
                if code not in space.code_to_index:
                    raise ValueError(f"{path}:{lineno}: unknown label code {code!r}")
            scores = payload.get("scores")
            if scores is not None:
                if not isinstance(scores, dict):
                    raise ValueError(f"{path}:{lineno}: 'scores' must be an object")
                for code in scores:
                    if code not in space.code_to_index:
                        raise ValueError(f"{path}:{lineno}: unknown score code {code!r}")
                scores = {code: float(v) for code, v in scores.items()}
            records.append(
                PredictionRecord(
                    record_id, frozenset(predicted), None, scores, str(payload["model_tag"])
                )
            )
    return records


def attach_truth(
    predictions: Sequence[PredictionRecord], records: Sequence[AnswerRecord]
) -> list[PredictionRecord]:
    """Join imported predictions with dataset ground truth by record id."""
    truth = {r.record_id: r.labels for r in records}
    out = []
    for pred in predictions:
        if pred.record_id not in truth:
            raise ValueError(f"prediction id {pred.record_id!r} not in the dataset")
        out.append(
            PredictionRecord(
                pred.record_id, pred.predicted, truth[pred.record_id], pred.scores, pred.model_tag
            )
        )
    return out


@dataclass
class TriageReport:
    """Semi-automatic coding split: singleton predictions are auto-accepted,
    everything else is queued for human coders."""

    auto: list[tuple[str, str]]  # (record id, single predicted code)
    manual: list[PredictionRecord]
    auto_fraction: float
    auto_zero_one: float | None

    def to_dict(self) -> dict:
        return {
            "auto": [{"id": rid, "label": code} for rid, code in self.auto],
            "manual": [
                {
                    "id": r.record_id,
                    "predicted": sorted(r.predicted, key=multilabel.code_sort_key),
                    "scores": dict(r.scores) if r.scores is not None else None,
                }
                for r in self.manual
            ],
            "auto_fraction": self.auto_fraction,
            "auto_zero_one": self.auto_zero_one,
        }


def triage(records: Sequence[PredictionRecord]) -> TriageReport:
    if not records:
        raise ValueError("no predictions to triage")
    auto: list[tuple[str, str]] = []
    auto_records: list[PredictionRecord] = []
    manual: list[PredictionRecord] = []
    for record in records:
        if len(record.predicted) == 1:
            auto.append((record.record_id, next(iter(record.predicted))))
            auto_records.append(record)
        else:
            manual.append(record)
    auto_zero_one = None
    if auto_records and all(r.true is not None for r in auto_records):
        auto_zero_one = evaluation.zero_one_loss(auto_records)
    return TriageReport(auto, manual, len(auto) / len(records), auto_zero_one)


def save_triage(report: TriageReport, path: str | Path) -> None:
    _atomic_write(path, json.dumps(report.to_dict(), sort_keys=True, indent=2))
