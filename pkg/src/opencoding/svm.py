"""Binary SVM base learners and a one-vs-rest multi-class wrapper.

The linear solver is dual coordinate descent on the L1-hinge dual; the bias
is handled by appending a constant feature, so that dual has box constraints
only.  The rbf solver is sequential minimal optimization on the standard
biased dual, which keeps the equality constraint sum(alpha_i * y_i) = 0.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
import scipy.sparse as sp
from numba import njit

from .features import SparseVector

KERNELS = ("linear", "rbf")

# Updates below this projected-gradient magnitude are floating-point noise.
_PG_NOISE = 1e-12


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TrainConfig:
    C: float = 100.0
    kernel: str = "linear"
    gamma: float | None = None
    tolerance: float = 1e-3
    max_iterations: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "rbf":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("rbf kernel requires positive gamma")
        elif self.gamma is not None:
            raise ValueError("gamma is only meaningful for the rbf kernel")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    degenerate: bool = False
    converged: bool = field(default=True, compare=False)
    kkt_violation: float = field(default=0.0, compare=False)
    objective_history: list[float] = field(default_factory=list, repr=False, compare=False)

    @property
    def n_features(self) -> int:
        return int(self.weights.size)


@dataclass
class KernelModel:
    support_vectors: sp.csr_matrix
    alphas: np.ndarray  # signed coefficients alpha_i * y_i
    bias: float
    gamma: float
    n_features: int
    degenerate: bool = False
    converged: bool = field(default=True, compare=False)
    kkt_violation: float = field(default=0.0, compare=False)
    objective_history: list[float] = field(default_factory=list, repr=False, compare=False)


@dataclass
class MulticlassModel:
    """One-vs-rest wrapper; class order is training frequency, descending."""

    class_labels: tuple[Hashable, ...]
    models: list[LinearModel | KernelModel]

    def __post_init__(self) -> None:
        if len(self.class_labels) != len(self.models):
            raise ValueError("need exactly one binary model per class")


def as_csr(X, n_features: int | None = None) -> sp.csr_matrix:
    """Accept a CSR matrix, a dense array, or a list of SparseVector."""
    if sp.issparse(X):
        return X.tocsr()
    if isinstance(X, np.ndarray):
        return sp.csr_matrix(np.atleast_2d(X.astype(np.float64)))
    vectors = list(X)
    if n_features is None:
        n_features = max((int(v.indices[-1]) + 1 for v in vectors if v.nnz), default=0)
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    for vec in vectors:
        indices.extend(vec.indices.tolist())
        data.extend(vec.values.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(vectors), n_features),
    )


def vector_to_csr(x, n_features: int) -> sp.csr_matrix:
    if isinstance(x, SparseVector):
        if x.nnz and int(x.indices[-1]) >= n_features:
            raise ValueError(
                f"vector index {int(x.indices[-1])} out of range for {n_features} features"
            )
        return sp.csr_matrix((x.values, x.indices, [0, x.nnz]), shape=(1, n_features))
    if sp.issparse(x):
        if x.shape[1] != n_features:
            raise ValueError(f"expected {n_features} features, got {x.shape[1]}")
        return x.tocsr()
    arr = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if arr.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {arr.shape[1]}")
    return sp.csr_matrix(arr)


def _dual_objective_linear(alpha: np.ndarray, w: np.ndarray) -> float:
    return float(alpha.sum() - 0.5 * np.dot(w, w))


@njit(cache=True)
def _cd_sweep(indptr, indices, data, y, alpha, w, q_diag, C, order):
    """One coordinate-descent sweep in the given order; returns the largest
    projected-gradient violation seen.  Mutates ``alpha`` and ``w``."""
    max_violation = 0.0
    for t in range(order.size):
        i = order[t]
        lo, hi = indptr[i], indptr[i + 1]
        dot = 0.0
        for k in range(lo, hi):
            dot += w[indices[k]] * data[k]
        grad = y[i] * dot - 1.0
        a = alpha[i]
        if a <= 0.0:
            projected = min(grad, 0.0)
        elif a >= C:
            projected = max(grad, 0.0)
        else:
            projected = grad
        if abs(projected) > max_violation:
            max_violation = abs(projected)
        if abs(projected) > _PG_NOISE:
            a_new = a - grad / q_diag[i]
            if a_new < 0.0:
                a_new = 0.0
            elif a_new > C:
                a_new = C
            if a_new != a:
                step = (a_new - a) * y[i]
                for k in range(lo, hi):
                    w[indices[k]] += step * data[k]
                alpha[i] = a_new
    return max_violation


def _solve_dual_cd(
    X: sp.csr_matrix,
    y: np.ndarray,
    C: float,
    tol: float,
    max_iterations: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, bool, float, list[float]]:
    """Dual coordinate descent for the L1-hinge linear SVM (bias-augmented).

    One sweep visits every coordinate in a seeded random order; convergence
    is declared when the largest projected-gradient violation in a sweep
    drops below ``tol``.
    """
    n, _ = X.shape
    aug = sp.hstack([X, np.ones((n, 1))], format="csr")
    indptr = aug.indptr.astype(np.int64)
    indices = aug.indices.astype(np.int64)
    data = aug.data.astype(np.float64)
    w = np.zeros(aug.shape[1])
    alpha = np.zeros(n)
    q_diag = np.asarray(aug.multiply(aug).sum(axis=1)).ravel()
    history: list[float] = []
    converged = False
    for _ in range(max_iterations):
        order = rng.permutation(n)
        max_violation = _cd_sweep(indptr, indices, data, y, alpha, w, q_diag, C, order)
        history.append(_dual_objective_linear(alpha, w))
        if max_violation < tol:
            converged = True
            break
    # Residual at the final iterate (the in-sweep maximum is measured while
    # w still moves, so recompute once with w frozen).
    grad_all = y * np.asarray(aug @ w).ravel() - 1.0
    projected_all = np.where(
        alpha <= 0.0,
        np.minimum(grad_all, 0.0),
        np.where(alpha >= C, np.maximum(grad_all, 0.0), grad_all),
    )
    violation = float(np.abs(projected_all).max()) if n else 0.0
    return w, alpha, converged, violation, history


def _rbf_kernel_matrix(A: sp.csr_matrix, B: sp.csr_matrix, gamma: float) -> np.ndarray:
    sq_a = np.asarray(A.multiply(A).sum(axis=1)).ravel()
    sq_b = np.asarray(B.multiply(B).sum(axis=1)).ravel()
    cross = (A @ B.T).toarray()
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * cross
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


def _dual_objective_kernel(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def _solve_smo(
    X: sp.csr_matrix,
    y: np.ndarray,
    C: float,
    gamma: float,
    tol: float,
    max_iterations: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, bool, float, list[float]]:
    """Platt-style SMO on the biased rbf dual (box + equality constraints)."""
    n = X.shape[0]
    K = _rbf_kernel_matrix(X, X, gamma)
    alpha = np.zeros(n)
    bias = 0.0
    f_cache = np.zeros(n)  # f(x_i) for the current alpha, bias
    eps = 1e-12
    history: list[float] = []

    def take_step(i1: int, i2: int) -> bool:
        nonlocal bias, f_cache
        if i1 == i2:
            return False
        a1, a2 = alpha[i1], alpha[i2]
        y1, y2 = y[i1], y[i2]
        s = y1 * y2
        e1 = f_cache[i1] - y1
        e2 = f_cache[i2] - y2
        if s > 0:
            low, high = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        else:
            low, high = max(0.0, a2 - a1), min(C, C + a2 - a1)
        if high - low < eps:
            return False
        k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0.0:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(max(a2_new, low), high)
        else:
            # Objective at the segment endpoints decides (degenerate curvature).
            f1 = y1 * (e1 + bias) - a1 * k11 - s * a2 * k12
            f2 = y2 * (e2 + bias) - s * a1 * k12 - a2 * k22
            l1 = a1 + s * (a2 - low)
            h1 = a1 + s * (a2 - high)
            obj_low = l1 * f1 + low * f2 + 0.5 * l1 * l1 * k11 + 0.5 * low * low * k22 + s * low * l1 * k12
            obj_high = h1 * f1 + high * f2 + 0.5 * h1 * h1 * k11 + 0.5 * high * high * k22 + s * high * h1 * k12
            if obj_low < obj_high - eps:
                a2_new = low
            elif obj_low > obj_high + eps:
                a2_new = high
            else:
                a2_new = a2
        if abs(a2_new - a2) < eps * (a2_new + a2 + eps):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        # Snap to the box so support vectors are exactly bounded.
        if a1_new < 1e-8 * C:
            a2_new += s * a1_new
            a1_new = 0.0
        elif a1_new > (1.0 - 1e-8) * C:
            a2_new += s * (a1_new - C)
            a1_new = C
        if a2_new < 1e-8 * C:
            a1_new += s * a2_new
            a2_new = 0.0
        elif a2_new > (1.0 - 1e-8) * C:
            a1_new += s * (a2_new - C)
            a2_new = C
        b1 = bias - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12
        b2 = bias - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22
        if 0.0 < a1_new < C:
            b_new = b1
        elif 0.0 < a2_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        f_cache += (
            y1 * (a1_new - a1) * K[i1]
            + y2 * (a2_new - a2) * K[i2]
            + (b_new - bias)
        )
        alpha[i1], alpha[i2] = a1_new, a2_new
        bias = b_new
        return True

    def examine(i2: int) -> int:
        a2 = alpha[i2]
        e2 = f_cache[i2] - y[i2]
        r2 = e2 * y[i2]
        if not ((r2 < -tol and a2 < C) or (r2 > tol and a2 > 0.0)):
            return 0
        non_bound = np.flatnonzero((alpha > 0.0) & (alpha < C))
        if non_bound.size > 1:
            errors = f_cache[non_bound] - y[non_bound]
            i1 = int(non_bound[np.argmax(np.abs(errors - e2))])
            if take_step(i1, i2):
                return 1
        if non_bound.size:
            start = int(rng.integers(non_bound.size))
            for k in range(non_bound.size):
                if take_step(int(non_bound[(start + k) % non_bound.size]), i2):
                    return 1
        start = int(rng.integers(n))
        for k in range(n):
            if take_step((start + k) % n, i2):
                return 1
        return 0

    converged = False
    examine_all = True
    passes = 0
    while passes < max_iterations:
        passes += 1
        changed = 0
        if examine_all:
            for i in range(n):
                changed += examine(i)
        else:
            for i in np.flatnonzero((alpha > 0.0) & (alpha < C)):
                changed += examine(int(i))
        history.append(_dual_objective_kernel(alpha, y, K))
        if examine_all:
            if changed == 0:
                converged = True
                break
            examine_all = False
        elif changed == 0:
            examine_all = True
    # Canonical bias: the dual fixes alpha uniquely (PD kernel) but the bias
    # only up to an interval when every support vector is at a bound.  Pin it
    # to the free-vector mean residual, falling back to the interval midpoint,
    # so equal duals always yield equal decisions.
    grad = f_cache - bias
    residual_b = y - grad
    eps_b = 1e-6 * C
    free = (alpha > eps_b) & (alpha < C - eps_b)
    if np.any(free):
        bias = float(residual_b[free].mean())
    else:
        lower = residual_b[((alpha <= eps_b) & (y > 0)) | ((alpha >= C - eps_b) & (y < 0))]
        upper = residual_b[((alpha <= eps_b) & (y < 0)) | ((alpha >= C - eps_b) & (y > 0))]
        lo = float(lower.max()) if lower.size else -np.inf
        hi = float(upper.min()) if upper.size else np.inf
        if np.isfinite(lo) or np.isfinite(hi):
            bias = float(np.clip(0.0, lo, hi)) if not (np.isfinite(lo) and np.isfinite(hi)) else (lo + hi) / 2.0
    f_cache = grad + bias
    residual = y * f_cache - 1.0
    up_violation = np.where(alpha < C, np.maximum(0.0, -residual), 0.0)
    down_violation = np.where(alpha > 0.0, np.maximum(0.0, residual), 0.0)
    violation = float(np.maximum(up_violation, down_violation).max()) if n else 0.0
    return alpha, bias, converged, violation, history


def _degenerate_model(cfg: TrainConfig, vote: float, n_features: int):
    if cfg.kernel == "linear":
        return LinearModel(np.zeros(n_features), float(vote), degenerate=True)
    return KernelModel(
        sp.csr_matrix((0, n_features)),
        np.zeros(0),
        float(vote),
        cfg.gamma,
        n_features,
        degenerate=True,
    )


def train_binary(X, y, cfg: TrainConfig, n_features: int | None = None):
    """Train one binary SVM; returns a LinearModel or a KernelModel.

    Single-class input yields a degenerate constant classifier voting that
    class: bootstrap resamples can easily miss every positive of a rare
    label, and the caller still needs a usable model.
    """
    X = as_csr(X, n_features)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise ValueError("X and y disagree on the number of samples")
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty sample")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if np.unique(y).size == 1:
        return _degenerate_model(cfg, y[0], X.shape[1])

    rng = np.random.default_rng(cfg.seed)
    if cfg.kernel == "linear":
        w_aug, alpha, converged, violation, history = _solve_dual_cd(
            X, y, cfg.C, cfg.tolerance, cfg.max_iterations, rng
        )
        if not converged:
            warnings.warn(
                f"dual coordinate descent hit max_iterations={cfg.max_iterations}",
                ConvergenceWarning,
                stacklevel=2,
            )
        _assert_box(alpha, cfg.C)
        return LinearModel(
            w_aug[:-1].copy(),
            float(w_aug[-1]),
            converged=converged,
            kkt_violation=violation,
            objective_history=history,
        )

    alpha, bias, converged, violation, history = _solve_smo(
        X, y, cfg.C, cfg.gamma, cfg.tolerance, cfg.max_iterations, rng
    )
    if not converged:
        warnings.warn(
            f"SMO hit max_iterations={cfg.max_iterations}",
            ConvergenceWarning,
            stacklevel=2,
        )
    _assert_box(alpha, cfg.C)
    _assert_dual_equality(alpha, y, cfg.tolerance, cfg.C)
    mask = alpha > 0.0
    return KernelModel(
        X[mask].tocsr(),
        (alpha * y)[mask],
        float(bias),
        cfg.gamma,
        X.shape[1],
        converged=converged,
        kkt_violation=violation,
        objective_history=history,
    )


def _assert_box(alpha: np.ndarray, C: float) -> None:
    if alpha.size and (alpha.min() < -1e-9 or alpha.max() > C + 1e-9 * max(1.0, C)):
        raise AssertionError("dual variables left the [0, C] box")


def _assert_dual_equality(alpha: np.ndarray, y: np.ndarray, tol: float, C: float) -> None:
    if abs(float(np.dot(alpha, y))) > tol * max(1.0, C):
        raise AssertionError("dual equality constraint violated at convergence")


def decision(model, x) -> float:
    """Real-valued margin of one sample under a trained binary model."""
    if isinstance(model, LinearModel):
        if model.degenerate:
            return float(model.bias)
        row = vector_to_csr(x, model.n_features)
        return float((row @ model.weights)[0]) + model.bias
    if isinstance(model, KernelModel):
        if model.degenerate or model.alphas.size == 0:
            return float(model.bias)
        row = vector_to_csr(x, model.n_features)
        k = _rbf_kernel_matrix(model.support_vectors, row, model.gamma).ravel()
        return float(np.dot(model.alphas, k)) + model.bias
    raise TypeError(f"not a binary SVM model: {type(model).__name__}")


def decision_many(model, X: sp.csr_matrix) -> np.ndarray:
    """Margins for a whole CSR matrix at once."""
    if isinstance(model, LinearModel):
        if model.degenerate:
            return np.full(X.shape[0], model.bias)
        if X.shape[1] != model.n_features:
            raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
        return np.asarray(X @ model.weights).ravel() + model.bias
    if isinstance(model, KernelModel):
        if model.degenerate or model.alphas.size == 0:
            return np.full(X.shape[0], model.bias)
        if X.shape[1] != model.n_features:
            raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
        k = _rbf_kernel_matrix(X, model.support_vectors, model.gamma)
        return k @ model.alphas + model.bias
    raise TypeError(f"not a binary SVM model: {type(model).__name__}")


def predict_binary(model, x) -> int:
    """Sign of the margin; an exact zero counts as +1."""
    return 1 if decision(model, x) >= 0.0 else -1


def train_multiclass(X, labels: Sequence[Hashable], cfg: TrainConfig) -> MulticlassModel:
    """One-vs-rest training over arbitrary hashable class labels.

    Classes are ordered by descending training frequency (ties keep first
    occurrence), so that an argmax over margins resolves exact ties in
    favour of the most frequent class.
    """
    X = as_csr(X)
    labels = list(labels)
    if X.shape[0] != len(labels):
        raise ValueError("X and labels disagree on the number of samples")
    if not labels:
        raise ValueError("cannot train on an empty sample")
    counts: dict[Hashable, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    first_seen = {lab: i for i, lab in reversed(list(enumerate(labels)))}
    ordered = sorted(counts, key=lambda lab: (-counts[lab], first_seen[lab]))
    models = []
    for lab in ordered:
        y = np.where(np.asarray([l == lab for l in labels]), 1.0, -1.0)
        models.append(train_binary(X, y, cfg))
    return MulticlassModel(tuple(ordered), models)


def multiclass_margins(model: MulticlassModel, x) -> np.ndarray:
    return np.array([decision(m, x) for m in model.models])


def predict_multiclass(model: MulticlassModel, x) -> Hashable:
    """Argmax over per-class margins; ties go to the most frequent class."""
    margins = multiclass_margins(model, x)
    return model.class_labels[int(np.argmax(margins))]


def dual_equality_residual(model: KernelModel) -> float:
    """|sum of signed dual coefficients| of an rbf model (0 at optimality)."""
    return abs(float(model.alphas.sum())) if model.alphas.size else 0.0


def binary_model_to_dict(model) -> dict:
    """JSON-ready parameters of one binary model (diagnostics excluded)."""
    if isinstance(model, LinearModel):
        return {
            "type": "linear",
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "degenerate": model.degenerate,
        }
    if isinstance(model, KernelModel):
        sv = model.support_vectors.tocsr()
        return {
            "type": "rbf",
            "gamma": model.gamma,
            "bias": model.bias,
            "alphas": model.alphas.tolist(),
            "n_features": model.n_features,
            "sv_indptr": sv.indptr.tolist(),
            "sv_indices": sv.indices.tolist(),
            "sv_data": sv.data.tolist(),
            "degenerate": model.degenerate,
        }
    raise TypeError(f"not a binary SVM model: {type(model).__name__}")


def binary_model_from_dict(payload: dict):
    kind = payload.get("type")
    if kind == "linear":
        return LinearModel(
            np.asarray(payload["weights"], dtype=np.float64),
            float(payload["bias"]),
            degenerate=bool(payload["degenerate"]),
        )
    if kind == "rbf":
        n_sv = len(payload["sv_indptr"]) - 1
        support = sp.csr_matrix(
            (
                np.asarray(payload["sv_data"], dtype=np.float64),
                np.asarray(payload["sv_indices"], dtype=np.int64),
                np.asarray(payload["sv_indptr"], dtype=np.int64),
            ),
            shape=(n_sv, payload["n_features"]),
        )
        return KernelModel(
            support,
            np.asarray(payload["alphas"], dtype=np.float64),
            float(payload["bias"]),
            float(payload["gamma"]),
            int(payload["n_features"]),
            degenerate=bool(payload["degenerate"]),
        )
    raise ValueError(f"unknown binary model type {kind!r}")
