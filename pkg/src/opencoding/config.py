"""Structured config file covering every tunable of the toolkit.

One YAML document with optional sections; anything omitted falls back to
the paper-style defaults.  A single top-level ``seed`` feeds the SVM
solvers, the ECC ensemble, and the dataset split, and can be overridden by
the CLI's ``--seed`` flag.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .multilabel import ECCConfig
from .pipeline import DatasetSpec, GridSpec, SplitConfig
from .svm import TrainConfig
from .textprep import (
    DEFAULT_RULES,
    Lemmatizer,
    NormalizationRules,
    dictionary_lemmatizer,
    identity_lemmatizer,
    load_lemma_dictionary,
)

_SECTIONS = {
    "seed",
    "dataset",
    "normalization",
    "lemmatizer",
    "features",
    "svm",
    "ecc",
    "split",
    "grid",
    "chain_order",
}


def _check_keys(section: str, payload: dict, allowed: set[str]) -> None:
    unknown = set(payload) - allowed
    if unknown:
        raise ValueError(f"config section {section!r}: unknown keys {sorted(unknown)}")


@dataclass
class ToolkitConfig:
    seed: int = 0
    dataset_columns: dict | None = None
    normalization: dict | None = None
    lemmatizer_spec: dict | None = None
    features: dict | None = None
    svm_params: dict | None = None
    ecc_params: dict | None = None
    split_params: dict | None = None
    grid_params: dict | None = None
    chain_order: list[int] | None = None

    def dataset_spec(self, path: str) -> DatasetSpec:
        payload = self.dataset_columns or {}
        return DatasetSpec(
            path,
            payload.get("id_column", "id"),
            payload.get("text_column", "text"),
            payload.get("label_column", "labels"),
            payload.get("label_delimiter", ";"),
        )

    def rules(self) -> NormalizationRules:
        payload = self.normalization or {}
        entity_rules = payload.get("entity_rules")
        return NormalizationRules(
            entity_rules=(
                tuple((p, r) for p, r in entity_rules)
                if entity_rules is not None
                else DEFAULT_RULES.entity_rules
            ),
            drop_single_letters=payload.get("drop_single_letters", True),
            drop_numbers=payload.get("drop_numbers", True),
            drop_punctuation=payload.get("drop_punctuation", True),
        )

    def lemmatizer(self) -> Lemmatizer:
        payload = self.lemmatizer_spec or {}
        kind = payload.get("type", "identity")
        if kind == "identity":
            return identity_lemmatizer
        if kind == "dictionary":
            path = payload.get("path")
            if not path:
                raise ValueError("dictionary lemmatizer needs a 'path'")
            return dictionary_lemmatizer(load_lemma_dictionary(path))
        raise ValueError(f"unknown lemmatizer type {kind!r}")

    def ngram_range(self) -> tuple[int, int]:
        payload = self.features or {}
        lo, hi = payload.get("ngram_range", (1, 1))
        return (int(lo), int(hi))

    def l2_normalize(self) -> bool:
        payload = self.features or {}
        return bool(payload.get("l2_normalize", True))

    def train_config(self, kernel: str | None = None) -> TrainConfig:
        payload = self.svm_params or {}
        chosen = kernel or payload.get("kernel", "linear")
        gamma = float(payload.get("gamma", 0.5)) if chosen == "rbf" else None
        return TrainConfig(
            C=float(payload.get("C", 100.0)),
            kernel=chosen,
            gamma=gamma,
            tolerance=float(payload.get("tolerance", 1e-3)),
            max_iterations=int(payload.get("max_iterations", 10_000)),
            seed=self.seed,
        )

    def ecc_config(self) -> ECCConfig:
        payload = self.ecc_params or {}
        return ECCConfig(
            n_chains=int(payload.get("n_chains", 10)),
            vote_threshold=float(payload.get("vote_threshold", 0.5)),
            seed=self.seed,
        )

    def split_config(self) -> SplitConfig:
        payload = self.split_params or {}
        fractions = tuple(float(f) for f in payload.get("fractions", (0.6, 0.2, 0.2)))
        return SplitConfig(fractions, self.seed)

    def grid_spec(self) -> GridSpec:
        payload = self.grid_params or {}
        return GridSpec(
            kernels=tuple(payload.get("kernels", ("linear", "rbf"))),
            C_values=tuple(float(c) for c in payload.get("C", (0.1, 1.0, 10.0, 100.0, 1000.0))),
            gamma_values=tuple(float(g) for g in payload.get("gamma", (0.01, 0.1, 0.5, 1.0))),
        )


def load_config(path: str | Path | None) -> ToolkitConfig:
    if path is None:
        return ToolkitConfig()
    payload = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: config must be a mapping")
    unknown = set(payload) - _SECTIONS
    if unknown:
        raise ValueError(f"{path}: unknown config sections {sorted(unknown)}")
    _check_keys(
        "dataset",
        payload.get("dataset") or {},
        {"id_column", "text_column", "label_column", "label_delimiter"},
    )
    _check_keys(
        "normalization",
        payload.get("normalization") or {},
        {"entity_rules", "drop_single_letters", "drop_numbers", "drop_punctuation"},
    )
    _check_keys("lemmatizer", payload.get("lemmatizer") or {}, {"type", "path"})
    _check_keys("features", payload.get("features") or {}, {"ngram_range", "l2_normalize"})
    _check_keys(
        "svm", payload.get("svm") or {}, {"C", "kernel", "gamma", "tolerance", "max_iterations"}
    )
    _check_keys("ecc", payload.get("ecc") or {}, {"n_chains", "vote_threshold"})
    _check_keys("split", payload.get("split") or {}, {"fractions"})
    _check_keys("grid", payload.get("grid") or {}, {"kernels", "C", "gamma"})
    return ToolkitConfig(
        seed=int(payload.get("seed", 0)),
        dataset_columns=payload.get("dataset"),
        normalization=payload.get("normalization"),
        lemmatizer_spec=payload.get("lemmatizer"),
        features=payload.get("features"),
        svm_params=payload.get("svm"),
        ecc_params=payload.get("ecc"),
        split_params=payload.get("split"),
        grid_params=payload.get("grid"),
        chain_order=payload.get("chain_order"),
    )
