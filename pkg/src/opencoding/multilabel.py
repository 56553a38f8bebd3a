"""Meta-algorithms over the SVM base learner: BR, LP, CC, and ECC.

All four consume a TF-IDF feature matrix and a 0/1 label matrix whose
columns follow a fixed :class:`LabelSpace` order, and predict label sets
(frozensets of code strings).  Ground-truth sets are nonempty by contract;
predicted sets may be empty for every algorithm except Label Powerset.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import svm
from .svm import MulticlassModel, TrainConfig

LabelSet = frozenset[str]


def code_sort_key(code: str) -> tuple[int, int, str]:
    """Numeric codes sort numerically, everything else lexicographically after."""
    try:
        return (0, int(code), "")
    except ValueError:
        return (1, 0, code)


def labelset_key(labels: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(labels, key=code_sort_key))


class LabelSpace:
    """Fixed, serialized ordering of the label codes."""

    __slots__ = ("codes", "code_to_index")

    def __init__(self, codes: Sequence[str]):
        codes = tuple(codes)
        if len(set(codes)) != len(codes):
            raise ValueError("label codes must be unique")
        if not codes:
            raise ValueError("label space must contain at least one code")
        self.codes = codes
        self.code_to_index = {code: i for i, code in enumerate(codes)}

    @classmethod
    def from_observed(cls, codes: Iterable[str]) -> "LabelSpace":
        return cls(sorted(set(codes), key=code_sort_key))

    def __len__(self) -> int:
        return len(self.codes)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSpace) and self.codes == other.codes

    def __repr__(self) -> str:
        return f"LabelSpace({list(self.codes)!r})"

    def indices_of(self, labels: Iterable[str]) -> list[int]:
        return [self.code_to_index[code] for code in labels]

    def set_of(self, indices: Iterable[int]) -> LabelSet:
        return frozenset(self.codes[i] for i in indices)


def label_matrix(labelsets: Sequence[Iterable[str]], space: LabelSpace) -> np.ndarray:
    """Stack label sets into an n x L 0/1 matrix in label-space order."""
    Y = np.zeros((len(labelsets), len(space)), dtype=np.int8)
    for row, labels in enumerate(labelsets):
        for code in labels:
            Y[row, space.code_to_index[code]] = 1
    return Y


@dataclass(frozen=True)
class ChainSpec:
    """Label order of one classifier chain plus its bootstrap seed."""

    order: tuple[int, ...]
    bootstrap_seed: int = 0

    def __post_init__(self) -> None:
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("order must be a permutation of 0..L-1")


@dataclass(frozen=True)
class ECCConfig:
    n_chains: int = 10
    vote_threshold: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if not 0.0 < self.vote_threshold <= 1.0:
            raise ValueError("vote_threshold must lie in (0, 1]")


class LabelsetRegistry:
    """Distinct training labelsets with frequencies, most frequent first."""

    __slots__ = ("sets", "counts")

    def __init__(self, sets: Sequence[LabelSet], counts: Sequence[int]):
        for s in sets:
            if not s:
                raise ValueError("registered labelsets must be nonempty")
        self.sets = tuple(frozenset(s) for s in sets)
        self.counts = tuple(int(c) for c in counts)
        if len(self.sets) != len(set(self.sets)):
            raise ValueError("registered labelsets must be distinct")
        if len(self.sets) != len(self.counts):
            raise ValueError("sets and counts must align")

    @classmethod
    def from_labelsets(cls, labelsets: Iterable[Iterable[str]]) -> "LabelsetRegistry":
        counts: dict[LabelSet, int] = {}
        for labels in labelsets:
            key = frozenset(labels)
            counts[key] = counts.get(key, 0) + 1
        ordered = sorted(counts, key=lambda s: (-counts[s], labelset_key(s)))
        return cls(ordered, [counts[s] for s in ordered])

    def __len__(self) -> int:
        return len(self.sets)


@dataclass
class BRModel:
    label_space: LabelSpace
    models: list
    label_counts: np.ndarray
    algorithm: str = "br"


@dataclass
class LPModel:
    label_space: LabelSpace
    registry: LabelsetRegistry
    classifier: MulticlassModel
    label_counts: np.ndarray
    algorithm: str = "lp"


@dataclass
class CCModel:
    label_space: LabelSpace
    spec: ChainSpec
    models: list
    label_counts: np.ndarray
    algorithm: str = "cc"


@dataclass
class ECCModel:
    label_space: LabelSpace
    config: ECCConfig
    chains: list[CCModel]
    label_counts: np.ndarray
    algorithm: str = "ecc"


TrainedModel = BRModel | LPModel | CCModel | ECCModel


def _validate_xy(X: sp.csr_matrix, Y: np.ndarray, space: LabelSpace) -> None:
    if Y.ndim != 2 or Y.shape[1] != len(space):
        raise ValueError("label matrix must have one column per label code")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y disagree on the number of samples")


def br_fit(X, Y: np.ndarray, space: LabelSpace, cfg: TrainConfig) -> BRModel:
    """One independent binary SVM per label."""
    X = svm.as_csr(X)
    _validate_xy(X, Y, space)
    models = [
        svm.train_binary(X, 2.0 * Y[:, j] - 1.0, cfg) for j in range(len(space))
    ]
    return BRModel(space, models, Y.sum(axis=0).astype(np.int64))


def br_predict(model: BRModel, x) -> tuple[LabelSet, np.ndarray]:
    """Union of the per-label binary predictions, margins as scores."""
    margins = np.array([svm.decision(m, x) for m in model.models])
    predicted = model.label_space.set_of(np.flatnonzero(margins >= 0.0))
    return predicted, margins


def lp_fit(X, Y: np.ndarray, space: LabelSpace, cfg: TrainConfig) -> LPModel:
    """One multiclass problem whose classes are the observed labelsets."""
    X = svm.as_csr(X)
    _validate_xy(X, Y, space)
    labelsets = [space.set_of(np.flatnonzero(Y[i])) for i in range(Y.shape[0])]
    if any(not s for s in labelsets):
        raise ValueError("every training example needs a nonempty labelset")
    registry = LabelsetRegistry.from_labelsets(labelsets)
    classifier = svm.train_multiclass(X, labelsets, cfg)
    return LPModel(space, registry, classifier, Y.sum(axis=0).astype(np.int64))


def lp_predict(model: LPModel, x) -> LabelSet:
    """Always one of the registered labelsets, hence never empty."""
    return svm.predict_multiclass(model.classifier, x)


def _augment_columns(X: sp.csr_matrix, cols: np.ndarray) -> sp.csr_matrix:
    if cols.shape[1] == 0:
        return X
    return sp.hstack([X, sp.csr_matrix(cols.astype(np.float64))], format="csr")


def cc_fit(X, Y: np.ndarray, space: LabelSpace, spec: ChainSpec, cfg: TrainConfig) -> CCModel:
    """Chain of binary SVMs in ``spec.order``.

    Classifier k sees the TF-IDF features plus the ground-truth 0/1 values
    of the k-1 earlier labels in the chain, so its feature count is
    n_features + k - 1.  At prediction time the chain feeds its own earlier
    predictions into the same slots.
    """
    X = svm.as_csr(X)
    _validate_xy(X, Y, space)
    if len(spec.order) != len(space):
        raise ValueError("chain order length must equal the number of labels")
    models = []
    for k, j in enumerate(spec.order):
        augmented = _augment_columns(X, Y[:, list(spec.order[:k])])
        models.append(svm.train_binary(augmented, 2.0 * Y[:, j] - 1.0, cfg))
    return CCModel(space, spec, models, Y.sum(axis=0).astype(np.int64))


def cc_predict(model: CCModel, x) -> tuple[LabelSet, np.ndarray, np.ndarray]:
    """Returns (labelset, 0/1 vector in label-space order, per-label margins)."""
    space = model.label_space
    x = svm.vector_to_csr(x, model.models[0].n_features)
    bits = np.zeros(len(space), dtype=np.int8)
    margins = np.zeros(len(space))
    earlier: list[float] = []
    for k, j in enumerate(model.spec.order):
        if earlier:
            row = sp.hstack([x, sp.csr_matrix(np.array([earlier]))], format="csr")
        else:
            row = x
        margin = svm.decision(model.models[k], row)
        bit = 1 if margin >= 0.0 else 0
        margins[j] = margin
        bits[j] = bit
        earlier.append(float(bit))
    return space.set_of(np.flatnonzero(bits)), bits, margins


def ecc_fit(
    X,
    Y: np.ndarray,
    space: LabelSpace,
    ecc: ECCConfig,
    cfg: TrainConfig,
    *,
    bootstrap: bool = True,
    orders: Sequence[Sequence[int]] | None = None,
) -> ECCModel:
    """Ensemble of chains on bootstrap resamples with random label orders.

    Per chain, in this order, the master generator seeded with ``ecc.seed``
    draws the label permutation and then one bootstrap seed; the resample
    itself comes from a fresh generator on that seed.  ``bootstrap`` and
    ``orders`` exist so tests can pin a single chain against plain CC.
    """
    X = svm.as_csr(X)
    _validate_xy(X, Y, space)
    if orders is not None and len(orders) != ecc.n_chains:
        raise ValueError("need one fixed order per chain")
    master = np.random.default_rng(ecc.seed)
    n = X.shape[0]
    chains = []
    for c in range(ecc.n_chains):
        if orders is None:
            order = tuple(int(j) for j in master.permutation(len(space)))
        else:
            order = tuple(int(j) for j in orders[c])
        boot_seed = int(master.integers(0, 2**31 - 1))
        if bootstrap:
            rows = np.random.default_rng(boot_seed).integers(0, n, size=n)
        else:
            rows = np.arange(n)
        spec = ChainSpec(order, boot_seed)
        chains.append(cc_fit(X[rows], Y[rows], space, spec, cfg))
    return ECCModel(space, ecc, chains, Y.sum(axis=0).astype(np.int64))


def ecc_predict(model: ECCModel, x) -> tuple[LabelSet, np.ndarray]:
    """Majority vote over chains; the scores are vote fractions in [0, 1]."""
    votes = np.zeros(len(model.label_space))
    for chain in model.chains:
        _, bits, _ = cc_predict(chain, x)
        votes += bits
    fractions = votes / len(model.chains)
    predicted = model.label_space.set_of(
        np.flatnonzero(fractions >= model.config.vote_threshold)
    )
    return predicted, fractions


def force_min_one_label(
    pred: LabelSet,
    scores: np.ndarray | Mapping[str, float],
    space: LabelSpace,
    label_counts: np.ndarray | None = None,
) -> LabelSet:
    """Replace an empty prediction by the single best-scoring label.

    Ground-truth sets are never empty, so an empty prediction is certainly
    wrong and substituting any label cannot increase the 0/1 loss.  Ties go
    to the label more frequent in training, then to label-space order.
    """
    if pred:
        return pred
    if isinstance(scores, Mapping):
        missing = set(space.codes) - set(scores)
        if missing:
            raise ValueError(f"scores missing for codes {sorted(missing)}")
        values = np.array([float(scores[code]) for code in space.codes])
    else:
        values = np.asarray(scores, dtype=np.float64)
        if values.shape != (len(space),):
            raise ValueError("scores must cover the whole label space")
    counts = (
        np.zeros(len(space)) if label_counts is None else np.asarray(label_counts)
    )
    best = min(range(len(space)), key=lambda j: (-values[j], -counts[j], j))
    return frozenset({space.codes[best]})


def br_predict_many(model: BRModel, X: sp.csr_matrix) -> tuple[list[LabelSet], np.ndarray]:
    margins = np.column_stack([svm.decision_many(m, X) for m in model.models])
    space = model.label_space
    sets = [space.set_of(np.flatnonzero(row >= 0.0)) for row in margins]
    return sets, margins


def lp_predict_many(model: LPModel, X: sp.csr_matrix) -> list[LabelSet]:
    margins = np.column_stack(
        [svm.decision_many(m, X) for m in model.classifier.models]
    )
    winners = np.argmax(margins, axis=1)
    return [model.classifier.class_labels[int(j)] for j in winners]


def cc_predict_many(model: CCModel, X: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray]:
    """Run the whole matrix through the chain; returns (bits, margins)."""
    space = model.label_space
    n = X.shape[0]
    bits = np.zeros((n, len(space)), dtype=np.int8)
    margins = np.zeros((n, len(space)))
    earlier = np.zeros((n, 0))
    for k, j in enumerate(model.spec.order):
        augmented = _augment_columns(X, earlier)
        col = svm.decision_many(model.models[k], augmented)
        margins[:, j] = col
        bits[:, j] = col >= 0.0
        earlier = np.column_stack([earlier, bits[:, j].astype(np.float64)])
    return bits, margins


def ecc_predict_many(model: ECCModel, X: sp.csr_matrix) -> tuple[list[LabelSet], np.ndarray]:
    votes = np.zeros((X.shape[0], len(model.label_space)))
    for chain in model.chains:
        bits, _ = cc_predict_many(chain, X)
        votes += bits
    fractions = votes / len(model.chains)
    space = model.label_space
    threshold = model.config.vote_threshold
    sets = [space.set_of(np.flatnonzero(row >= threshold)) for row in fractions]
    return sets, fractions


def predict_many(
    model: TrainedModel, X: sp.csr_matrix, *, force_min_one: bool = False
) -> tuple[list[LabelSet], np.ndarray | None]:
    """Batched counterpart of :func:`predict`, one row per sample."""
    if isinstance(model, BRModel):
        sets, scores = br_predict_many(model, X)
    elif isinstance(model, LPModel):
        return lp_predict_many(model, X), None
    elif isinstance(model, CCModel):
        bits, scores = cc_predict_many(model, X)
        space = model.label_space
        sets = [space.set_of(np.flatnonzero(row)) for row in bits]
    elif isinstance(model, ECCModel):
        sets, scores = ecc_predict_many(model, X)
    else:
        raise TypeError(f"not a trained multi-label model: {type(model).__name__}")
    if force_min_one:
        sets = [
            force_min_one_label(s, row, model.label_space, model.label_counts)
            for s, row in zip(sets, scores)
        ]
    return sets, scores


def predict(
    model: TrainedModel, x, *, force_min_one: bool = False
) -> tuple[LabelSet, np.ndarray | None]:
    """Predict one sample under any trained meta-algorithm.

    Returns the labelset and per-label scores (margins for BR/CC, vote
    fractions for ECC, ``None`` for LP, which has no per-label scores and
    can never predict an empty set anyway).
    """
    if isinstance(model, BRModel):
        predicted, scores = br_predict(model, x)
    elif isinstance(model, LPModel):
        return lp_predict(model, x), None
    elif isinstance(model, CCModel):
        predicted, _, scores = cc_predict(model, x)
    elif isinstance(model, ECCModel):
        predicted, scores = ecc_predict(model, x)
    else:
        raise TypeError(f"not a trained multi-label model: {type(model).__name__}")
    if force_min_one:
        predicted = force_min_one_label(
            predicted, scores, model.label_space, model.label_counts
        )
    return predicted, scores


MODEL_FORMAT_VERSION = 1


def _chain_to_dict(chain: CCModel) -> dict:
    return {
        "order": list(chain.spec.order),
        "bootstrap_seed": chain.spec.bootstrap_seed,
        "models": [svm.binary_model_to_dict(m) for m in chain.models],
    }


def _chain_from_dict(payload: dict, space: LabelSpace, counts: np.ndarray) -> CCModel:
    spec = ChainSpec(tuple(payload["order"]), int(payload["bootstrap_seed"]))
    models = [svm.binary_model_from_dict(m) for m in payload["models"]]
    return CCModel(space, spec, models, counts)


def model_to_dict(model: TrainedModel, feature_ref: str | None = None) -> dict:
    """Bundle a trained meta-algorithm for JSON serialization.

    The bundle carries everything needed to reload and predict identically:
    label space, per-label training counts (tie-breaking), all base-learner
    parameters, the labelset registry / chain specs where applicable, and a
    reference to the feature model file.
    """
    payload: dict = {
        "format_version": MODEL_FORMAT_VERSION,
        "algorithm": model.algorithm,
        "label_space": list(model.label_space.codes),
        "label_counts": model.label_counts.tolist(),
        "feature_ref": feature_ref,
    }
    if isinstance(model, BRModel):
        payload["models"] = [svm.binary_model_to_dict(m) for m in model.models]
    elif isinstance(model, LPModel):
        payload["registry"] = {
            "sets": [sorted(s, key=code_sort_key) for s in model.registry.sets],
            "counts": list(model.registry.counts),
        }
        payload["classifier"] = {
            "class_labels": [
                sorted(s, key=code_sort_key) for s in model.classifier.class_labels
            ],
            "models": [svm.binary_model_to_dict(m) for m in model.classifier.models],
        }
    elif isinstance(model, CCModel):
        payload["chain"] = _chain_to_dict(model)
    elif isinstance(model, ECCModel):
        payload["ecc"] = {
            "n_chains": model.config.n_chains,
            "vote_threshold": model.config.vote_threshold,
            "seed": model.config.seed,
        }
        payload["chains"] = [_chain_to_dict(c) for c in model.chains]
    else:
        raise TypeError(f"not a trained multi-label model: {type(model).__name__}")
    return payload


def model_from_dict(payload: dict) -> tuple[TrainedModel, str | None]:
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model bundle version {version!r}")
    space = LabelSpace(payload["label_space"])
    counts = np.asarray(payload["label_counts"], dtype=np.int64)
    feature_ref = payload.get("feature_ref")
    algorithm = payload["algorithm"]
    if algorithm == "br":
        models = [svm.binary_model_from_dict(m) for m in payload["models"]]
        return BRModel(space, models, counts), feature_ref
    if algorithm == "lp":
        registry = LabelsetRegistry(
            [frozenset(s) for s in payload["registry"]["sets"]],
            payload["registry"]["counts"],
        )
        classifier = MulticlassModel(
            tuple(frozenset(s) for s in payload["classifier"]["class_labels"]),
            [svm.binary_model_from_dict(m) for m in payload["classifier"]["models"]],
        )
        return LPModel(space, registry, classifier, counts), feature_ref
    if algorithm == "cc":
        return _chain_from_dict(payload["chain"], space, counts), feature_ref
    if algorithm == "ecc":
        config = ECCConfig(
            payload["ecc"]["n_chains"],
            payload["ecc"]["vote_threshold"],
            payload["ecc"]["seed"],
        )
        chains = [_chain_from_dict(c, space, counts) for c in payload["chains"]]
        return ECCModel(space, config, chains, counts), feature_ref
    raise ValueError(f"unknown algorithm tag {algorithm!r}")
