"""Readers for the toolkit's dataset and split files.

The adapter talks to the classical toolkit exclusively through files, so
these readers implement the published formats directly: a UTF-8 CSV with
id/text/labels columns (";"-separated codes) and a JSON split file with the
three id partitions.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path


def code_sort_key(code: str):
    try:
        return (0, int(code), "")
    except ValueError:
        return (1, 0, code)


@dataclass(frozen=True)
class Answer:
    record_id: str
    text: str
    labels: frozenset[str]


def read_dataset(
    path: str | Path,
    id_column: str = "id",
    text_column: str = "text",
    label_column: str = "labels",
    label_delimiter: str = ";",
) -> tuple[list[Answer], list[str]]:
    """Load answers plus the observed label codes in canonical order."""
    answers: list[Answer] = []
    observed: set[str] = set()
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for column in (id_column, text_column, label_column):
            if column not in header:
                raise ValueError(f"{path}: missing column {column!r}")
        for lineno, row in enumerate(reader, start=2):
            record_id = (row[id_column] or "").strip()
            if not record_id or record_id in seen:
                raise ValueError(f"{path}:{lineno}: missing or duplicate id")
            seen.add(record_id)
            cell = (row[label_column] or "").strip()
            if not cell:
                raise ValueError(f"{path}:{lineno}: empty label field")
            labels = frozenset(part.strip() for part in cell.split(label_delimiter))
            observed.update(labels)
            answers.append(Answer(record_id, row[text_column] or "", labels))
    return answers, sorted(observed, key=code_sort_key)


def read_split(path: str | Path) -> dict[str, list[str]]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    parts = {name: list(payload[name]) for name in ("train", "validation", "test")}
    combined = [rid for ids in parts.values() for rid in ids]
    if len(set(combined)) != len(combined):
        raise ValueError(f"{path}: split parts overlap")
    return parts


def select(answers: list[Answer], ids: list[str]) -> list[Answer]:
    by_id = {a.record_id: a for a in answers}
    missing = [rid for rid in ids if rid not in by_id]
    if missing:
        raise ValueError(f"split ids missing from the dataset: {missing[:5]}")
    return [by_id[rid] for rid in ids]
