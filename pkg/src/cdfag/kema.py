"""Kernel manifold alignment across feature domains.

Fits per-domain projection coefficient blocks by solving the kernelized
generalized eigenproblem

    K (mu * L_top + (1 - mu) * L_sim) K V = lambda K L_dis K V

over the stacked sample set of all domains, where K is the block-diagonal
matrix of per-domain Gram matrices and the L terms are the topology,
same-class, and different-class graph Laplacians. New samples are projected
into the shared latent space through kernel evaluations against the training
anchors of their own domain.

The topology graph links samples within each domain only; the label graphs
span domains. Unlabeled samples contribute to the kernels and the topology
graph, receive latent coordinates, but never enter the label graphs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .data import UNLABELED, FeatureSet
from .errors import (
    BadConfig,
    DimensionMismatch,
    InsufficientLabels,
    UnknownDomain,
)
from .graphs import (
    KernelSpec,
    LaplacianTriple,
    build_laplacian_triple,
    gram,
    median_bandwidth,
    solve_gevd,
)

MIN_DISSIMILARITY_MASS = 0.5


@dataclass
class DomainBundle:
    """K feature domains sharing one class vocabulary."""

    domains: list[FeatureSet]
    class_count: int

    @property
    def k(self) -> int:
        return len(self.domains)

    @property
    def total_samples(self) -> int:
        return sum(d.n for d in self.domains)

    def stacked_labels(self) -> np.ndarray:
        return np.concatenate([d.labels for d in self.domains])

    def validate_for_fit(self) -> None:
        if self.k < 2:
            raise BadConfig("alignment needs at least two domains")
        if self.class_count < 2:
            raise InsufficientLabels("alignment needs at least two classes")
        for idx, dom in enumerate(self.domains):
            labeled = dom.labels[dom.labels != UNLABELED]
            if labeled.size and labeled.max() >= self.class_count:
                raise BadConfig(
                    f"domain {idx} has label {labeled.max()} outside [0, {self.class_count})"
                )
            present = np.unique(labeled)
            missing = np.setdiff1d(np.arange(self.class_count), present)
            if missing.size:
                raise InsufficientLabels(
                    f"domain {idx} has no labeled sample for class(es) {missing.tolist()}"
                )


@dataclass
class KemaConfig:
    mu: float = 0.1
    latent_dim: int = 100
    knn_k: int = 10
    ridge: float | None = None  # None -> 1e-6 * trace(B) / size
    kernels: list[KernelSpec] | None = None  # None -> per-domain rbf, median bandwidth
    knn_mode: str = "union"

    def __post_init__(self) -> None:
        if not 0.0 <= self.mu <= 1.0:
            raise BadConfig("mu must lie in [0, 1]")
        if self.latent_dim < 1:
            raise BadConfig("latent_dim must be positive")
        if self.knn_k < 1:
            raise BadConfig("knn_k must be positive")
        if self.ridge is not None and self.ridge < 0:
            raise BadConfig("ridge must be non-negative")


@dataclass
class AlignmentModel:
    """Fitted alignment state: training anchors, kernels, and coefficient blocks."""

    anchors: list[np.ndarray]
    kernels: list[KernelSpec]
    alphas: list[np.ndarray]  # per domain, (m_k, n)
    eigenvalues: np.ndarray
    config: KemaConfig

    @property
    def k(self) -> int:
        return len(self.anchors)

    @property
    def latent_dim(self) -> int:
        return self.alphas[0].shape[1]


@dataclass
class KemaDiagnostics:
    top: float
    sim: float
    dis: float
    objective: float


def resolve_kernels(bundle: DomainBundle, config: KemaConfig) -> list[KernelSpec]:
    """Per-domain kernel specs, defaulting to rbf with the median-distance heuristic."""
    if config.kernels is not None:
        if len(config.kernels) != bundle.k:
            raise BadConfig(f"expected {bundle.k} kernel specs, got {len(config.kernels)}")
        return list(config.kernels)
    return [
        KernelSpec(kind="rbf", bandwidth=median_bandwidth(dom.features))
        for dom in bundle.domains
    ]


def assemble_pencil(
    bundle: DomainBundle,
    config: KemaConfig,
    kernels: list[KernelSpec] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, LaplacianTriple]:
    """Build (A, B, K, laplacians) for the alignment eigenproblem."""
    kernels = resolve_kernels(bundle, config) if kernels is None else kernels
    grams = [gram(dom.features, dom.features, spec) for dom, spec in zip(bundle.domains, kernels)]
    k_block = scipy.linalg.block_diag(*grams)
    triple = build_laplacian_triple(
        [dom.features for dom in bundle.domains],
        bundle.stacked_labels(),
        config.knn_k,
        config.knn_mode,
    )
    left = config.mu * triple.topology + (1.0 - config.mu) * triple.similarity
    a = k_block @ left @ k_block
    b = k_block @ triple.dissimilarity @ k_block
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    return a, b, k_block, triple


def _default_ridge(b: np.ndarray) -> float:
    return 1e-6 * float(np.trace(b)) / b.shape[0]


def kema_fit(bundle: DomainBundle, config: KemaConfig | None = None) -> AlignmentModel:
    """Fit the alignment model on labeled + unlabeled training samples.

    Solves the regularized pencil for the smallest eigenpairs, drops
    near-zero spurious modes (|lambda| < 1e-12) backfilling from the next
    smallest, and slices the eigenvector matrix into per-domain coefficient
    blocks. The requested latent dimension is clamped to the usable rank
    with a warning when fewer informative eigenpairs exist.
    """
    config = KemaConfig() if config is None else config
    bundle.validate_for_fit()
    total = bundle.total_samples
    if config.latent_dim > total:
        raise BadConfig(
            f"latent_dim {config.latent_dim} exceeds total sample count {total}"
        )
    kernels = resolve_kernels(bundle, config)
    a, b, _, _ = assemble_pencil(bundle, config, kernels)
    ridge = _default_ridge(b) if config.ridge is None else config.ridge
    eigenvalues, vectors = solve_gevd(a, b, n=total, ridge=ridge)
    # Drop spurious modes, backfilling from the next smallest eigenvalues.
    # The exact pencil is singular: directions with zero dissimilarity mass
    # (constant embeddings, the numerical null space of K, modes concentrated
    # on unlabeled samples) only acquire a finite eigenvalue through the
    # ridge, and their out-of-sample coordinates are ridge-scaled garbage.
    # Near-zero |lambda| does not identify them: genuinely useful zero-cost
    # class-indicator modes also sit at lambda ~ 0. A mode is kept when the
    # dissimilarity form carries the majority of its B-normalization.
    dis_mass = np.einsum("ij,ij->j", vectors, b @ vectors)
    keep = dis_mass > MIN_DISSIMILARITY_MASS
    eigenvalues = eigenvalues[keep]
    vectors = vectors[:, keep]
    n = config.latent_dim
    if eigenvalues.size < n:
        warnings.warn(
            f"pencil rank {eigenvalues.size} is below requested latent_dim {n}; clamping",
            stacklevel=2,
        )
        n = eigenvalues.size
        if n == 0:
            raise InsufficientLabels("no informative eigenpairs; check labels and graphs")
    eigenvalues = eigenvalues[:n]
    vectors = vectors[:, :n]
    alphas = []
    start = 0
    for dom in bundle.domains:
        alphas.append(vectors[start : start + dom.n].copy())
        start += dom.n
    return AlignmentModel(
        anchors=[dom.features.copy() for dom in bundle.domains],
        kernels=kernels,
        alphas=alphas,
        eigenvalues=eigenvalues,
        config=config,
    )


def kema_project(model: AlignmentModel, domain_index: int, samples: np.ndarray) -> np.ndarray:
    """Project samples of one domain into the latent space via kernel expansion."""
    if not 0 <= domain_index < model.k:
        raise UnknownDomain(f"domain index {domain_index} out of range [0, {model.k})")
    samples = np.asarray(samples, dtype=np.float64)
    anchors = model.anchors[domain_index]
    if samples.ndim != 2 or samples.shape[1] != anchors.shape[1]:
        raise DimensionMismatch(
            f"samples have dim {samples.shape[-1]}, domain {domain_index} "
            f"anchors have dim {anchors.shape[1]}"
        )
    kvec = gram(samples, anchors, model.kernels[domain_index])
    return kvec @ model.alphas[domain_index]


def kema_transform_bundle(model: AlignmentModel, bundle: DomainBundle) -> list[FeatureSet]:
    """Latent coordinates of every training sample, labels carried through."""
    return [
        FeatureSet(kema_project(model, i, dom.features), dom.labels)
        for i, dom in enumerate(bundle.domains)
    ]


def kema_diagnostics(model: AlignmentModel, bundle: DomainBundle) -> KemaDiagnostics:
    """Evaluate the topology/similarity/dissimilarity traces and their ratio.

    The three scalars are ``trace(V^T K L K V)`` for the respective Laplacian;
    the objective is ``(mu * top + (1 - mu) * sim) / dis``, reported as
    ``inf`` when there are no dissimilar labeled pairs.
    """
    _, _, k_block, triple = assemble_pencil(bundle, model.config, model.kernels)
    v = np.vstack(model.alphas)
    kv = k_block @ v
    top = float(np.trace(kv.T @ triple.topology @ kv))
    sim = float(np.trace(kv.T @ triple.similarity @ kv))
    dis = float(np.trace(kv.T @ triple.dissimilarity @ kv))
    mu = model.config.mu
    numerator = mu * top + (1.0 - mu) * sim
    objective = numerator / dis if dis > 0 else float("inf")
    return KemaDiagnostics(top=top, sim=sim, dis=dis, objective=objective)
