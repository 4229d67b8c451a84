"""Kernels, similarity graphs, Laplacians, and a generalized eigensolver.

This is the shared numerical substrate for manifold alignment: RBF/linear
Gram matrices, k-NN topology graphs with Gaussian edge weights, label-driven
similarity/dissimilarity graphs, unnormalized graph Laplacians, and a
regularized symmetric-definite generalized eigensolver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    AsymmetricInput,
    BadConfig,
    DegenerateData,
    DimensionMismatch,
    LengthMismatch,
    NonConvergence,
    SingularPencil,
)

UNLABELED = -1


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice for one domain: ``rbf`` (needs a bandwidth) or ``linear``."""

    kind: str = "rbf"
    bandwidth: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("rbf", "linear"):
            raise BadConfig(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and (self.bandwidth is None or self.bandwidth <= 0):
            raise BadConfig("rbf kernel requires bandwidth > 0")


@dataclass
class LaplacianTriple:
    """The three Laplacians over the stacked multi-domain sample set."""

    topology: np.ndarray
    similarity: np.ndarray
    dissimilarity: np.ndarray


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    d2 = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def median_bandwidth(samples: np.ndarray) -> float:
    """Half of the median pairwise Euclidean distance between samples.

    The median over all N(N-1)/2 distances; for an even count it is the mean
    of the two central values. Raises ``DegenerateData`` when the median
    distance is zero (more than half of all pairs coincide).
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    if n < 2:
        raise BadConfig("need at least 2 samples for a bandwidth estimate")
    d2 = pairwise_sq_dists(samples, samples)
    iu = np.triu_indices(n, k=1)
    med = float(np.median(np.sqrt(d2[iu])))
    if med <= 0.0:
        raise DegenerateData("median pairwise distance is zero")
    return 0.5 * med


def gram(samples_a: np.ndarray, samples_b: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Kernel matrix between two sample sets.

    For ``rbf`` the entry is ``exp(-||a - b||^2 / (2 * bandwidth^2))``; for
    ``linear`` it is the dot product. When both arguments are the same data
    the result is exactly symmetric (rbf additionally has a unit diagonal).
    """
    a = np.asarray(samples_a, dtype=np.float64)
    b = np.asarray(samples_b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    if spec.kind == "linear":
        k = a @ b.T
        if a is samples_b or (a.shape == b.shape and np.array_equal(a, b)):
            k = 0.5 * (k + k.T)
        return k
    d2 = pairwise_sq_dists(a, b)
    if samples_a is samples_b or (a.shape == b.shape and np.array_equal(a, b)):
        d2 = 0.5 * (d2 + d2.T)
        np.fill_diagonal(d2, 0.0)
    return np.exp(-d2 / (2.0 * spec.bandwidth**2))


def knn_topology_weights(samples: np.ndarray, k: int, mode: str = "union") -> np.ndarray:
    """Gaussian-weighted k-NN graph: ``W[i, j] = exp(-||x_i - x_j||^2)`` on edges.

    An edge (i, j) exists when j is among the k nearest neighbors of i or
    (``mode="union"``, the default) vice versa; ``mode="mutual"`` keeps only
    edges selected from both sides. Distance ties are broken toward the lower
    sample index. The diagonal is zero.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    if not 1 <= k < n:
        raise BadConfig(f"k must satisfy 1 <= k < {n}, got {k}")
    if mode not in ("union", "mutual"):
        raise BadConfig(f"unknown kNN symmetrization {mode!r}")
    d2 = pairwise_sq_dists(samples, samples)
    # stable argsort on distances with the diagonal pushed to the end gives
    # lower-index tie-breaking for free
    d2_sorted = d2.copy()
    np.fill_diagonal(d2_sorted, np.inf)
    order = np.argsort(d2_sorted, axis=1, kind="stable")
    directed = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    directed[rows, order[:, :k].ravel()] = True
    adj = directed | directed.T if mode == "union" else directed & directed.T
    w = np.where(adj, np.exp(-d2), 0.0)
    np.fill_diagonal(w, 0.0)
    return w


def label_weights(labels: np.ndarray, mode: str) -> np.ndarray:
    """0/1 weights over labeled pairs: same-class or different-class edges.

    Rows and columns of unlabeled samples (label ``-1``) are all zero, as is
    the diagonal.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise LengthMismatch("labels must be a 1-d sequence")
    if mode not in ("same_class", "different_class"):
        raise BadConfig(f"unknown label weight mode {mode!r}")
    lab = labels != UNLABELED
    both = np.outer(lab, lab)
    eq = labels[:, None] == labels[None, :]
    adj = both & eq if mode == "same_class" else both & ~eq
    w = adj.astype(np.float64)
    np.fill_diagonal(w, 0.0)
    return w


def laplacian(weights: np.ndarray) -> np.ndarray:
    """Unnormalized graph Laplacian ``L = D - W`` of a symmetric weight matrix."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionMismatch("weights must be square")
    scale = max(np.abs(w).max(), 1.0)
    if np.abs(w - w.T).max() > 1e-10 * scale:
        raise AsymmetricInput("weight matrix is not symmetric")
    return np.diag(w.sum(axis=1)) - w


def build_laplacian_triple(
    domain_features: list[np.ndarray],
    labels: np.ndarray,
    knn_k: int,
    knn_mode: str = "union",
) -> LaplacianTriple:
    """Topology, similarity, and dissimilarity Laplacians for stacked domains.

    The topology graph links samples within each domain only (block-diagonal
    across domains); the label graphs span all domains. ``labels`` covers the
    stacked sample set in domain order.
    """
    sizes = [x.shape[0] for x in domain_features]
    total = sum(sizes)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (total,):
        raise LengthMismatch(f"{labels.size} labels for {total} stacked samples")
    w_top = np.zeros((total, total))
    start = 0
    for x, m in zip(domain_features, sizes):
        if m > 1:
            block = knn_topology_weights(x, min(knn_k, m - 1), mode=knn_mode)
            w_top[start : start + m, start : start + m] = block
        start += m
    return LaplacianTriple(
        topology=laplacian(w_top),
        similarity=laplacian(label_weights(labels, "same_class")),
        dissimilarity=laplacian(label_weights(labels, "different_class")),
    )


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    flipped = vectors.copy()
    for j in range(flipped.shape[1]):
        i = int(np.argmax(np.abs(flipped[:, j])))
        if flipped[i, j] < 0:
            flipped[:, j] = -flipped[:, j]
    return flipped


def solve_gevd(
    a: np.ndarray,
    b: np.ndarray,
    n: int,
    ridge: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``A v = lambda (B + ridge*I) v`` for the n smallest eigenpairs.

    Both matrices must be symmetric and of the same size; ``B + ridge*I`` must
    be positive definite (``SingularPencil`` otherwise). Returned eigenvalues
    are ascending; eigenvectors satisfy ``v^T (B + ridge*I) v = 1`` and carry a
    largest-magnitude-entry-positive sign so results are reproducible. Every
    returned pair satisfies
    ``||A v - lambda (B + ridge*I) v|| <= 1e-6 (||A||_F + |lambda| ||B||_F)``;
    ``NonConvergence`` is raised when the solver cannot meet that bound.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"incompatible pencil shapes {a.shape} and {b.shape}")
    size = a.shape[0]
    if not 1 <= n <= size:
        raise BadConfig(f"n must satisfy 1 <= n <= {size}, got {n}")
    for name, m in (("A", a), ("B", b)):
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m - m.T).max() > 1e-8 * scale:
            raise AsymmetricInput(f"{name} is not symmetric")
    if ridge < 0:
        raise BadConfig("ridge must be non-negative")
    a_sym = 0.5 * (a + a.T)
    b_reg = 0.5 * (b + b.T) + ridge * np.eye(size)
    try:
        scipy.linalg.cholesky(b_reg, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularPencil(f"B + ridge*I is not positive definite: {exc}") from None
    eigenvalues, vectors = scipy.linalg.eigh(a_sym, b_reg)
    eigenvalues = eigenvalues[:n]
    vectors = _fix_signs(vectors[:, :n])
    residual = a_sym @ vectors - (b_reg @ vectors) * eigenvalues[None, :]
    bound = 1e-6 * (np.linalg.norm(a, "fro") + np.abs(eigenvalues) * np.linalg.norm(b, "fro"))
    worst = np.linalg.norm(residual, axis=0) - bound
    if np.any(worst > 0):
        raise NonConvergence(
            f"eigenpair residual exceeds bound by {worst.max():.3e}"
        )
    return eigenvalues, vectors
