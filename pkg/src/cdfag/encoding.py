"""Video-level feature encoding: k-means codebook, LLC codes, pooling, PCA.

Per-video sets of local descriptors are quantized against a learned codebook
with locality-constrained linear coding, pooled into one fixed-length vector
per video, and reduced with PCA.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DescriptorSet
from .errors import (
    BadConfig,
    DegenerateData,
    DimensionMismatch,
    EmptyInput,
    InsufficientData,
    NonFiniteInput,
)
from .graphs import pairwise_sq_dists

DEFAULT_CODEBOOK_SIZE = 4000
DEFAULT_PER_VIDEO_SAMPLE = 200
DEFAULT_NUM_BASES = 5
DEFAULT_LLC_REG = 1e-4

_KMEANS_MAX_ITER = 100
_KMEANS_REL_TOL = 1e-6


@dataclass
class Codebook:
    """Cluster centers used as coding bases, one per row."""

    bases: np.ndarray

    def __post_init__(self) -> None:
        self.bases = np.asarray(self.bases, dtype=np.float64)
        if self.bases.ndim != 2 or self.bases.shape[0] < 1:
            raise BadConfig("codebook must hold at least one basis row")
        if not np.all(np.isfinite(self.bases)):
            raise NonFiniteInput("codebook contains non-finite values")
        if np.unique(self.bases, axis=0).shape[0] != self.bases.shape[0]:
            raise BadConfig("codebook contains duplicate basis rows")

    @property
    def size(self) -> int:
        return self.bases.shape[0]

    @property
    def dim(self) -> int:
        return self.bases.shape[1]


@dataclass
class PcaModel:
    """Mean, orthonormal components (rows), and descending eigenvalues."""

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    retained_fraction: float

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def _subsample_descriptors(
    descriptor_sets: list[DescriptorSet], per_video_sample: int, rng: np.random.Generator
) -> np.ndarray:
    parts = []
    for ds in descriptor_sets:
        m = ds.descriptors.shape[0]
        if m > per_video_sample:
            idx = np.sort(rng.choice(m, size=per_video_sample, replace=False))
            parts.append(ds.descriptors[idx])
        else:
            parts.append(ds.descriptors)
    return np.vstack(parts)


def _kmeans_pp_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = data.shape[0]
    centers = np.empty((k, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    d2 = pairwise_sq_dists(data, centers[:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining mass sits on chosen centers; fall back to any
            # point not yet selected
            remaining = np.flatnonzero(d2 > 0)
            pick = remaining[0] if remaining.size else rng.integers(n)
        else:
            pick = rng.choice(n, p=d2 / total)
        centers[j] = data[pick]
        d2 = np.minimum(d2, pairwise_sq_dists(data, centers[j : j + 1])[:, 0])
    return centers


def build_codebook(
    descriptor_sets: list[DescriptorSet],
    codebook_size: int = DEFAULT_CODEBOOK_SIZE,
    per_video_sample: int = DEFAULT_PER_VIDEO_SAMPLE,
    seed: int = 0,
) -> Codebook:
    """Learn a codebook by k-means over randomly sub-sampled descriptors.

    At most ``per_video_sample`` descriptors are drawn from each video before
    clustering. Centers come from k-means++ initialized Lloyd iterations that
    stop when the relative inertia change drops below 1e-6 or after 100
    rounds. The result is deterministic given ``seed``.
    """
    if codebook_size < 1:
        raise BadConfig("codebook_size must be positive")
    if per_video_sample < 1:
        raise BadConfig("per_video_sample must be positive")
    if not descriptor_sets:
        raise InsufficientData("no descriptor sets supplied")
    rng = np.random.default_rng(seed)
    data = _subsample_descriptors(descriptor_sets, per_video_sample, rng)
    if not np.all(np.isfinite(data)):
        raise NonFiniteInput("descriptors contain NaN or Inf")
    distinct = np.unique(data, axis=0).shape[0]
    if distinct < codebook_size:
        raise InsufficientData(
            f"only {distinct} distinct descriptors after sampling, "
            f"need {codebook_size}"
        )

    centers = _kmeans_pp_init(data, codebook_size, rng)
    inertia = np.inf
    for _ in range(_KMEANS_MAX_ITER):
        d2 = pairwise_sq_dists(data, centers)
        assign = np.argmin(d2, axis=1)
        new_inertia = float(d2[np.arange(data.shape[0]), assign].sum())
        for j in range(codebook_size):
            member = assign == j
            if member.any():
                centers[j] = data[member].mean(axis=0)
            else:
                # re-seed an empty cluster on the point farthest from its center
                worst = int(np.argmax(d2[np.arange(data.shape[0]), assign]))
                centers[j] = data[worst]
                assign[worst] = j
        if np.isfinite(inertia) and inertia > 0:
            if abs(inertia - new_inertia) / inertia < _KMEANS_REL_TOL:
                inertia = new_inertia
                break
        if new_inertia == 0.0:
            break
        inertia = new_inertia
    return Codebook(centers)


def llc_encode(
    descriptors: DescriptorSet,
    codebook: Codebook,
    num_bases: int = DEFAULT_NUM_BASES,
    reg: float = DEFAULT_LLC_REG,
) -> np.ndarray:
    """Locality-constrained linear codes, one row per descriptor.

    Each descriptor is expressed on its ``num_bases`` nearest codewords
    (Euclidean distance, ties toward the lower codeword index) by solving
    ``(C + reg * trace(C) * I) w = 1`` on the local Gram matrix
    ``C = (B - x)(B - x)^T`` and normalizing ``w`` to sum one. All other
    entries are zero.
    """
    if num_bases > codebook.size:
        raise BadConfig(f"num_bases {num_bases} exceeds codebook size {codebook.size}")
    if num_bases < 1:
        raise BadConfig("num_bases must be positive")
    if reg <= 0:
        raise BadConfig("reg must be positive")
    x = descriptors.descriptors
    if x.shape[1] != codebook.dim:
        raise DimensionMismatch(
            f"descriptor dim {x.shape[1]} does not match codebook dim {codebook.dim}"
        )
    d2 = pairwise_sq_dists(x, codebook.bases)
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :num_bases]
    codes = np.zeros((x.shape[0], codebook.size))
    ones = np.ones(num_bases)
    for i in range(x.shape[0]):
        sel = nearest[i]
        z = codebook.bases[sel] - x[i]
        c = z @ z.T
        tr = np.trace(c)
        if tr > 0:
            w = np.linalg.solve(c + reg * tr * np.eye(num_bases), ones)
            w_sum = w.sum()
        else:
            w_sum = 0.0
        if w_sum == 0.0 or not np.isfinite(w_sum):
            # descriptor coincides with every selected codeword
            w = ones / num_bases
        else:
            w = w / w_sum
        codes[i, sel] = w
    return codes


def pool_codes(codes: np.ndarray, mode: str = "max") -> np.ndarray:
    """Collapse per-descriptor codes to one vector: ``max`` (default), ``sum`` or ``mean``."""
    codes = np.asarray(codes, dtype=np.float64)
    if codes.ndim != 2 or codes.shape[0] == 0:
        raise EmptyInput("need at least one code row to pool")
    if mode == "max":
        return codes.max(axis=0)
    if mode == "sum":
        return codes.sum(axis=0)
    if mode == "mean":
        return codes.mean(axis=0)
    raise BadConfig(f"unknown pooling mode {mode!r}")


def retained_component_count(eigenvalues: np.ndarray, retained_fraction: float) -> int:
    """Smallest p whose cumulative eigenvalue share strictly exceeds the fraction."""
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    total = eigenvalues.sum()
    if total <= 0:
        raise DegenerateData("total variance is zero")
    shares = np.cumsum(eigenvalues) / total
    above = np.flatnonzero(shares > retained_fraction)
    return int(above[0]) + 1 if above.size else eigenvalues.size


def pca_fit(features: np.ndarray, retained_fraction: float = 0.99) -> PcaModel:
    """Fit PCA keeping the top components that strictly exceed the variance fraction.

    Components are covariance eigenvectors (population covariance, divisor N)
    sorted by descending eigenvalue, with each component's largest-magnitude
    entry made positive so persisted models are reproducible.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise BadConfig("need at least 2 samples to fit PCA")
    if not 0 < retained_fraction <= 1:
        raise BadConfig("retained_fraction must lie in (0, 1]")
    n = features.shape[0]
    mean = features.mean(axis=0)
    centered = features - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    eigenvalues = svals**2 / n
    if eigenvalues.sum() <= 0:
        raise DegenerateData("sample covariance is all-zero")
    p = retained_component_count(eigenvalues, retained_fraction)
    components = vt[:p]
    for j in range(p):
        i = int(np.argmax(np.abs(components[j])))
        if components[j, i] < 0:
            components[j] = -components[j]
    return PcaModel(
        mean=mean,
        components=components,
        eigenvalues=eigenvalues[:p],
        retained_fraction=retained_fraction,
    )


def pca_project(model: PcaModel, features: np.ndarray) -> np.ndarray:
    """Project rows onto the retained components: ``(X - mean) @ components^T``."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.dim:
        raise DimensionMismatch(
            f"features have dim {features.shape[-1]}, model expects {model.dim}"
        )
    return (features - model.mean) @ model.components.T
