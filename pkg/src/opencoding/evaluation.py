"""Evaluation of multi-label predictions: 0/1 loss, Hamming loss, per-count
breakdowns, label-count distributions, and inter-rater kappa.

0/1 loss is the headline criterion: a record only scores zero when the
predicted labelset equals the true labelset exactly.  A coder reviewing a
suspected misclassification recodes the whole answer either way, which is
what this loss prices in.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .multilabel import LabelSet, LabelSpace


@dataclass(frozen=True)
class PredictionRecord:
    """Interchange unit between all components."""

    record_id: str
    predicted: LabelSet
    true: LabelSet | None = None
    scores: Mapping[str, float] | None = None
    model_tag: str = ""

    def __post_init__(self) -> None:
        if self.true is not None and not self.true:
            raise ValueError(
                f"record {self.record_id!r}: true labelsets must be nonempty"
            )


def _require_truth(records: Sequence[PredictionRecord]) -> None:
    if not records:
        raise ValueError("cannot evaluate an empty record list")
    missing = [r.record_id for r in records if r.true is None]
    if missing:
        raise ValueError(f"records without ground truth: {missing[:5]}")


def zero_one_loss(records: Sequence[PredictionRecord]) -> float:
    """Fraction of records whose predicted set differs from the true set."""
    _require_truth(records)
    wrong = sum(1 for r in records if r.predicted != r.true)
    return wrong / len(records)


def hamming_loss(records: Sequence[PredictionRecord], space: LabelSpace) -> float:
    """Mean symmetric-difference size over the full label space."""
    _require_truth(records)
    total = sum(len(r.predicted ^ r.true) for r in records)
    return total / (len(records) * len(space))


def loss_by_true_count(records: Sequence[PredictionRecord]) -> dict[int, float]:
    """0/1 loss restricted to each true-cardinality stratum."""
    _require_truth(records)
    sizes: dict[int, int] = {}
    wrong: dict[int, int] = {}
    for r in records:
        k = len(r.true)
        sizes[k] = sizes.get(k, 0) + 1
        if r.predicted != r.true:
            wrong[k] = wrong.get(k, 0) + 1
    return {k: wrong.get(k, 0) / sizes[k] for k in sorted(sizes)}


def predicted_count_distribution(records: Sequence[PredictionRecord]) -> dict[int, float]:
    """Percent of records with k predicted labels, k = 0..max observed."""
    if not records:
        raise ValueError("cannot evaluate an empty record list")
    counts: dict[int, int] = {}
    for r in records:
        k = len(r.predicted)
        counts[k] = counts.get(k, 0) + 1
    top = max(counts)
    return {k: 100.0 * counts.get(k, 0) / len(records) for k in range(top + 1)}


def _cohens_kappa(p_observed: float, p_expected: float) -> float:
    if p_expected >= 1.0:
        if p_observed >= 1.0:
            return 1.0
        raise ValueError("degenerate marginals")
    return (p_observed - p_expected) / (1.0 - p_expected)


def _aligned_ids(
    coder1: Mapping[str, LabelSet], coder2: Mapping[str, LabelSet]
) -> list[str]:
    if set(coder1) != set(coder2):
        raise ValueError("both coders must cover the same record ids")
    if not coder1:
        raise ValueError("no records to compare")
    return sorted(coder1)


def kappa_label_level(
    coder1: Mapping[str, LabelSet],
    coder2: Mapping[str, LabelSet],
    space: LabelSpace,
) -> float:
    """Cohen's kappa with every (record, label) inclusion pooled into one 2x2 table."""
    ids = _aligned_ids(coder1, coder2)
    both = only1 = only2 = neither = 0
    for rid in ids:
        s1, s2 = coder1[rid], coder2[rid]
        for code in space.codes:
            in1, in2 = code in s1, code in s2
            if in1 and in2:
                both += 1
            elif in1:
                only1 += 1
            elif in2:
                only2 += 1
            else:
                neither += 1
    n = both + only1 + only2 + neither
    p_observed = (both + neither) / n
    yes1, yes2 = both + only1, both + only2
    p_expected = (yes1 * yes2 + (n - yes1) * (n - yes2)) / (n * n)
    return _cohens_kappa(p_observed, p_expected)


def kappa_answer_level(
    coder1: Mapping[str, LabelSet], coder2: Mapping[str, LabelSet]
) -> float:
    """Cohen's kappa where each distinct labelset is one category."""
    ids = _aligned_ids(coder1, coder2)
    categories = sorted(
        {frozenset(coder1[r]) for r in ids} | {frozenset(coder2[r]) for r in ids},
        key=lambda s: tuple(sorted(s)),
    )
    index = {cat: i for i, cat in enumerate(categories)}
    n = len(ids)
    marg1 = [0] * len(categories)
    marg2 = [0] * len(categories)
    agree = 0
    for rid in ids:
        c1, c2 = index[frozenset(coder1[rid])], index[frozenset(coder2[rid])]
        marg1[c1] += 1
        marg2[c2] += 1
        if c1 == c2:
            agree += 1
    p_observed = agree / n
    p_expected = sum(m1 * m2 for m1, m2 in zip(marg1, marg2)) / (n * n)
    return _cohens_kappa(p_observed, p_expected)


@dataclass
class EvalReport:
    model_tag: str
    n_records: int
    overall_zero_one: float
    hamming: float
    zero_one_by_true_count: dict[int, float]
    predicted_count_distribution: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "model_tag": self.model_tag,
            "n_records": self.n_records,
            "overall_zero_one": self.overall_zero_one,
            "hamming": self.hamming,
            "zero_one_by_true_count": {
                str(k): v for k, v in self.zero_one_by_true_count.items()
            },
            "predicted_count_distribution": {
                str(k): v for k, v in self.predicted_count_distribution.items()
            },
        }


def build_report(
    records: Sequence[PredictionRecord],
    space: LabelSpace,
    model_tag: str | None = None,
) -> EvalReport:
    _require_truth(records)
    tag = model_tag if model_tag is not None else records[0].model_tag
    return EvalReport(
        model_tag=tag,
        n_records=len(records),
        overall_zero_one=zero_one_loss(records),
        hamming=hamming_loss(records, space),
        zero_one_by_true_count=loss_by_true_count(records),
        predicted_count_distribution=predicted_count_distribution(records),
    )


def save_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2), encoding="utf-8"
    )


def true_count_distribution(records: Sequence[PredictionRecord]) -> dict[int, float]:
    """Percent of records with k true labels (the 'true' row of the counts table)."""
    _require_truth(records)
    counts: dict[int, int] = {}
    for r in records:
        k = len(r.true)
        counts[k] = counts.get(k, 0) + 1
    top = max(counts)
    return {k: 100.0 * counts.get(k, 0) / len(records) for k in range(top + 1)}


def format_report_tables(
    reports: Sequence[EvalReport],
    true_distribution: dict[int, float] | None = None,
) -> str:
    """Aligned text tables: 0/1 loss by true label count, then the predicted
    label-count distribution.  Rows are sorted by increasing overall loss;
    losses print with 4 decimals, percentages with 1.
    """
    reports = sorted(reports, key=lambda r: r.overall_zero_one)
    max_true = max((max(r.zero_one_by_true_count, default=1) for r in reports), default=1)
    max_pred = max((max(r.predicted_count_distribution, default=0) for r in reports), default=0)
    if true_distribution:
        max_pred = max(max_pred, max(true_distribution))
    name_width = max(
        [len(r.model_tag) for r in reports] + [len("true"), len("method")]
    )

    lines = ["0/1 loss by true number of labels"]
    header = ["method".ljust(name_width), "overall"]
    header += [f"{k} label" + ("s" if k != 1 else "") for k in range(1, max_true + 1)]
    lines.append("  ".join(h.rjust(8) if i else h for i, h in enumerate(header)))
    for rep in reports:
        cells = [rep.model_tag.ljust(name_width), f"{rep.overall_zero_one:.4f}".rjust(8)]
        for k in range(1, max_true + 1):
            loss = rep.zero_one_by_true_count.get(k)
            cells.append(("-" if loss is None else f"{loss:.4f}").rjust(8))
        lines.append("  ".join(cells))

    lines.append("")
    lines.append("distribution of the number of predicted labels (%)")
    header = ["method".ljust(name_width)]
    header += [f"{k} label" + ("s" if k != 1 else "") for k in range(0, max_pred + 1)]
    lines.append("  ".join(h.rjust(8) if i else h for i, h in enumerate(header)))
    if true_distribution:
        cells = ["true".ljust(name_width)]
        for k in range(0, max_pred + 1):
            cells.append(f"{true_distribution.get(k, 0.0):.1f}".rjust(8))
        lines.append("  ".join(cells))
    for rep in reports:
        cells = [rep.model_tag.ljust(name_width)]
        for k in range(0, max_pred + 1):
            cells.append(f"{rep.predicted_count_distribution.get(k, 0.0):.1f}".rjust(8))
        lines.append("  ".join(cells))
    return "\n".join(lines)
