"""Multiclass soft-margin SVM with an RBF kernel, trained by SMO.

One-vs-one decomposition with majority vote; each binary machine is solved
by sequential minimal optimization with maximal-violating-pair working-set
selection. Training is fully deterministic: extremum lookups break ties
toward the lower index, so the optional seed only matters for fold
assignment in cross-validation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureSet
from .errors import (
    BadConfig,
    DimensionMismatch,
    NonConvergence,
    SingleClass,
    TooFewSamples,
)
from .graphs import pairwise_sq_dists

# conventional log2-spaced search grids
DEFAULT_C_GRID = tuple(float(2.0**p) for p in range(-5, 16, 2))
DEFAULT_GAMMA_GRID = tuple(float(2.0**p) for p in range(-15, 4, 2))

_TAU = 1e-12


@dataclass
class SvmConfig:
    c: float = 1.0
    gamma: float = 1.0
    tolerance: float = 1e-3
    max_iter: int = 100_000

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise BadConfig("C must be positive")
        if self.gamma <= 0:
            raise BadConfig("gamma must be positive")
        if self.tolerance <= 0:
            raise BadConfig("tolerance must be positive")
        if self.max_iter < 1:
            raise BadConfig("max_iter must be positive")


@dataclass
class BinarySvm:
    """One trained class-pair machine; decision > 0 votes for class_a."""

    class_a: int
    class_b: int
    support_vectors: np.ndarray
    coefs: np.ndarray  # alpha_i * y_i over support vectors
    bias: float


@dataclass
class SvmModel:
    machines: list[BinarySvm]
    classes: np.ndarray
    config: SvmConfig

    @property
    def dim(self) -> int:
        return self.machines[0].support_vectors.shape[1]


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * pairwise_sq_dists(a, b))


def median_gamma(features: np.ndarray, max_rows: int = 256) -> float:
    """1 / median squared pairwise distance, the usual RBF-gamma scale."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if n > max_rows:
        idx = np.linspace(0, n - 1, max_rows).astype(np.int64)
        features = features[idx]
    d2 = pairwise_sq_dists(features, features)
    med = float(np.median(d2[np.triu_indices(features.shape[0], k=1)]))
    return 1.0 / med if med > 0 else 1.0


def smo_solve(
    kernel: np.ndarray,
    y: np.ndarray,
    c: float,
    tolerance: float,
    max_iter: int,
) -> tuple[np.ndarray, float]:
    """Solve the binary SVM dual on a precomputed kernel matrix.

    Minimizes ``0.5 a^T Q a - 1^T a`` subject to ``y^T a = 0`` and
    ``0 <= a <= C`` with Q_ij = y_i y_j K_ij, picking the maximal violating
    pair each round. Returns the multipliers and the bias of
    ``f(x) = sum_i a_i y_i K(x_i, x) + b``.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual at alpha = 0
    pos = y > 0

    for _ in range(max_iter):
        up = (pos & (alpha < c)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < c))
        vals = -y * grad
        up_vals = np.where(up, vals, -np.inf)
        low_vals = np.where(low, vals, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        m_up = up_vals[i]
        m_low = low_vals[j]
        if m_up - m_low <= tolerance:
            b = 0.5 * (m_up + m_low)
            return alpha, float(b)

        quad = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        quad = max(quad, _TAU)
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = c + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = total - c
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = total - c
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        qi = y * y[i] * kernel[:, i]
        qj = y * y[j] * kernel[:, j]
        grad += qi * (alpha[i] - old_i) + qj * (alpha[j] - old_j)

    raise NonConvergence(f"SMO did not reach tolerance {tolerance} in {max_iter} rounds")


def dual_objective(kernel: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Value of the maximization-form dual ``sum(a) - 0.5 a^T Q a``."""
    qa = y * (kernel @ (alpha * y))
    return float(alpha.sum() - 0.5 * alpha @ qa)


def svm_train(features: FeatureSet, config: SvmConfig, seed: int = 0) -> SvmModel:
    """Train one-vs-one binary machines on the labeled rows.

    Deterministic regardless of ``seed`` (kept for interface symmetry with
    the cross-validated search).
    """
    del seed  # training has no random choices
    labeled = features.labeled()
    classes = np.unique(labeled.labels)
    if classes.size < 2:
        raise SingleClass(f"need at least 2 classes, found {classes.size}")
    machines = []
    for a, b in itertools.combinations(classes.tolist(), 2):
        mask = (labeled.labels == a) | (labeled.labels == b)
        x = labeled.features[mask]
        y = np.where(labeled.labels[mask] == a, 1.0, -1.0)
        kernel = rbf_kernel(x, x, config.gamma)
        alpha, bias = smo_solve(kernel, y, config.c, config.tolerance, config.max_iter)
        sv = alpha > 1e-12
        machines.append(
            BinarySvm(
                class_a=int(a),
                class_b=int(b),
                support_vectors=x[sv].copy(),
                coefs=(alpha[sv] * y[sv]).copy(),
                bias=bias,
            )
        )
    return SvmModel(machines=machines, classes=classes, config=config)


def decision_values(model: SvmModel, machine: BinarySvm, features: np.ndarray) -> np.ndarray:
    k = rbf_kernel(features, machine.support_vectors, model.config.gamma)
    return k @ machine.coefs + machine.bias


def svm_predict(model: SvmModel, features: np.ndarray) -> np.ndarray:
    """One-vs-one majority vote; vote ties go to the lower class id."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.dim:
        raise DimensionMismatch(
            f"features have dim {features.shape[-1]}, model expects {model.dim}"
        )
    max_class = int(model.classes.max()) + 1
    votes = np.zeros((features.shape[0], max_class), dtype=np.int64)
    for machine in model.machines:
        dec = decision_values(model, machine, features)
        votes[dec > 0, machine.class_a] += 1
        votes[dec <= 0, machine.class_b] += 1
    return np.argmax(votes, axis=1).astype(np.int64)


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Deterministic per-class round-robin fold assignment after a seeded shuffle."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        assignment[idx] = np.arange(idx.size) % folds
    return assignment


def grid_search_cv(
    features: FeatureSet,
    c_grid=DEFAULT_C_GRID,
    gamma_grid=DEFAULT_GAMMA_GRID,
    folds: int = 5,
    seed: int = 0,
    tolerance: float = 1e-3,
) -> SvmConfig:
    """Pick (C, gamma) maximizing mean stratified-CV accuracy.

    Fold assignment is deterministic by seed; accuracy ties are broken toward
    the smaller C, then the smaller gamma.
    """
    if folds < 2:
        raise BadConfig("folds must be >= 2")
    labeled = features.labeled()
    classes, counts = np.unique(labeled.labels, return_counts=True)
    if classes.size < 2:
        raise SingleClass(f"need at least 2 classes, found {classes.size}")
    if counts.min() < folds:
        raise TooFewSamples(
            f"every class needs >= {folds} samples for {folds}-fold stratification"
        )
    assignment = stratified_folds(labeled.labels, folds, seed)
    best: tuple[float, float, float] | None = None  # (accuracy, c, gamma)
    for c in sorted(set(float(v) for v in c_grid)):
        for g in sorted(set(float(v) for v in gamma_grid)):
            config = SvmConfig(c=c, gamma=g, tolerance=tolerance)
            accs = []
            for f in range(folds):
                train = FeatureSet(
                    labeled.features[assignment != f], labeled.labels[assignment != f]
                )
                model = svm_train(train, config)
                pred = svm_predict(model, labeled.features[assignment == f])
                accs.append(float(np.mean(pred == labeled.labels[assignment == f])))
            score = float(np.mean(accs))
            if best is None or score > best[0]:
                best = (score, c, g)
    return SvmConfig(c=best[1], gamma=best[2], tolerance=tolerance)
