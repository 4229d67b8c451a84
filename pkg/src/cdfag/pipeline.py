"""End-to-end training and testing over the full alignment chain.

Training runs per-domain PCA, kernel manifold alignment, range scaling,
class-centroid targets, encoder training, and cross-validated SVM fitting in
sequence; testing pushes unseen target samples through the persisted chain
and predicts with the trained classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import serialize
from .age import (
    AgeModel,
    ClassTargets,
    RangeScaler,
    TrainConfig,
    age_generalize,
    age_train,
    class_targets,
)
from .data import FeatureSet
from .encoding import PcaModel, pca_fit, pca_project
from .errors import BadConfig, CdfagError, ClassSetMismatch, CorruptModel
from .graphs import KernelSpec
from .kema import AlignmentModel, DomainBundle, KemaConfig, kema_fit, kema_project
from .metrics import EvalReport, evaluate
from .svm import (
    DEFAULT_C_GRID,
    DEFAULT_GAMMA_GRID,
    SvmModel,
    grid_search_cv,
    median_gamma,
    svm_train,
)

FORMAT_VERSION = "CDFAG1"


@dataclass
class PipelineConfig:
    """Every knob of the training chain, with the stock defaults.

    The defaults mirror the standard recipe: trade-off mu 0.1, latent
    dimension 100, learning rate 0.1, momentum 0.9, 1000 encoder iterations,
    and 5-fold cross-validated SVM parameter search.
    """

    mu: float = 0.1
    latent_dim: int = 100
    knn_k: int = 10
    ridge: float | None = None
    kernel: str = "rbf"  # "rbf" (median-heuristic bandwidth per domain) or "linear"
    use_pca: bool = True
    pca_retain: float = 0.99
    age_iterations: int = 1000
    age_learning_rate: float = 0.1
    age_momentum: float = 0.9
    age_init: str = "uniform"  # "uniform" (stock recipe) or "scaled_uniform"
    svm_folds: int = 5
    svm_c_grid: tuple = DEFAULT_C_GRID
    svm_gamma_grid: tuple = DEFAULT_GAMMA_GRID
    svm_gamma_scale: str = "absolute"  # "absolute" or "median" (grid times 1/median sq dist)
    svm_tolerance: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kernel not in ("rbf", "linear"):
            raise BadConfig(f"kernel must be 'rbf' or 'linear', got {self.kernel!r}")
        if self.svm_gamma_scale not in ("absolute", "median"):
            raise BadConfig(
                f"svm_gamma_scale must be 'absolute' or 'median', got {self.svm_gamma_scale!r}"
            )
        self.svm_c_grid = tuple(float(v) for v in self.svm_c_grid)
        self.svm_gamma_grid = tuple(float(v) for v in self.svm_gamma_grid)

    def kema_config(self) -> KemaConfig:
        kernels = None
        if self.kernel == "linear":
            kernels = [KernelSpec(kind="linear"), KernelSpec(kind="linear")]
        return KemaConfig(
            mu=self.mu,
            latent_dim=self.latent_dim,
            knn_k=self.knn_k,
            ridge=self.ridge,
            kernels=kernels,
        )


_CONFIG_PARSERS = {
    "mu": float,
    "latent_dim": int,
    "knn_k": int,
    "ridge": lambda v: None if v.lower() in ("auto", "none", "") else float(v),
    "kernel": str,
    "use_pca": lambda v: v.lower() in ("1", "true", "yes"),
    "pca_retain": float,
    "age_iterations": int,
    "age_learning_rate": float,
    "age_momentum": float,
    "age_init": str,
    "svm_folds": int,
    "svm_c_grid": lambda v: tuple(float(x) for x in v.split(",") if x.strip()),
    "svm_gamma_grid": lambda v: tuple(float(x) for x in v.split(",") if x.strip()),
    "svm_gamma_scale": str,
    "svm_tolerance": float,
    "seed": int,
}


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a line-oriented ``key = value`` config file; unknown keys are errors."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise BadConfig(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_PARSERS:
            raise BadConfig(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](value.strip())
        except ValueError as exc:
            raise BadConfig(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return PipelineConfig(**values)


@dataclass
class PipelineModel:
    """A versioned bundle of every fitted stage, sufficient for testing."""

    version: str
    pca_source: PcaModel | None
    pca_target: PcaModel | None
    alignment: AlignmentModel
    scaler: RangeScaler
    age_source: AgeModel
    age_target: AgeModel
    targets: ClassTargets
    svm: SvmModel
    config: PipelineConfig
    class_count: int

    def validate_chain(self) -> None:
        """Check that stage dimensions chain correctly."""
        for pca, idx in ((self.pca_source, 0), (self.pca_target, 1)):
            anchor_dim = self.alignment.anchors[idx].shape[1]
            if pca is not None and pca.n_components != anchor_dim:
                raise CorruptModel(
                    f"PCA output dim {pca.n_components} does not feed domain {idx} "
                    f"anchors of dim {anchor_dim}"
                )
        n = self.alignment.latent_dim
        for label, dim in (
            ("scaler", self.scaler.dim),
            ("source encoder", self.age_source.input_dim),
            ("target encoder", self.age_target.input_dim),
            ("class targets", self.targets.targets.shape[1]),
            ("svm", self.svm.dim),
        ):
            if dim != n:
                raise CorruptModel(f"{label} dim {dim} does not match latent dim {n}")


def _stage(name: str, exc: CdfagError) -> CdfagError:
    wrapped = type(exc)(f"[stage:{name}] {exc}")
    wrapped.__cause__ = exc
    return wrapped


def train_pipeline(
    source: FeatureSet, target: FeatureSet, config: PipelineConfig | None = None
) -> PipelineModel:
    """Run the full training chain and return the persistable model bundle."""
    config = PipelineConfig() if config is None else config
    src_classes = source.present_classes()
    tgt_classes = target.present_classes()
    if not np.array_equal(src_classes, tgt_classes):
        raise ClassSetMismatch(
            f"source classes {src_classes.tolist()} != target classes {tgt_classes.tolist()}"
        )
    if src_classes.size == 0:
        raise ClassSetMismatch("no labeled samples in either domain")
    class_count = int(src_classes.max()) + 1

    try:
        if config.use_pca:
            pca_s = pca_fit(source.features, config.pca_retain)
            pca_t = pca_fit(target.features, config.pca_retain)
            xs = pca_project(pca_s, source.features)
            xt = pca_project(pca_t, target.features)
        else:
            pca_s = pca_t = None
            xs, xt = source.features, target.features
    except CdfagError as exc:
        raise _stage("pca", exc) from exc

    try:
        bundle = DomainBundle(
            domains=[FeatureSet(xs, source.labels), FeatureSet(xt, target.labels)],
            class_count=class_count,
        )
        alignment = kema_fit(bundle, config.kema_config())
        aligned_s = kema_project(alignment, 0, xs)
        aligned_t = kema_project(alignment, 1, xt)
    except CdfagError as exc:
        raise _stage("kema", exc) from exc

    try:
        scaler = RangeScaler.fit(np.vstack([aligned_s, aligned_t]))
        targets = class_targets(
            FeatureSet(aligned_s, source.labels),
            FeatureSet(aligned_t, target.labels),
            scaler,
        )
    except CdfagError as exc:
        raise _stage("scale", exc) from exc

    try:
        train_config = TrainConfig(
            learning_rate=config.age_learning_rate,
            momentum=config.age_momentum,
            iterations=config.age_iterations,
            seed=config.seed,
            init=config.age_init,
        )
        scaled_s = FeatureSet(scaler.transform(aligned_s), source.labels)
        scaled_t = FeatureSet(scaler.transform(aligned_t), target.labels)
        age_s, age_t, _ = age_train(scaled_s, scaled_t, targets, train_config, scaler=scaler)
    except CdfagError as exc:
        raise _stage("age", exc) from exc

    try:
        gen_s = age_generalize(age_s, scaled_s.labeled().features)
        gen_t = age_generalize(age_t, scaled_t.labeled().features)
        pooled = FeatureSet(
            np.vstack([gen_s, gen_t]),
            np.concatenate([scaled_s.labeled().labels, scaled_t.labeled().labels]),
        )
        gamma_grid = config.svm_gamma_grid
        if config.svm_gamma_scale == "median":
            scale = median_gamma(pooled.features)
            gamma_grid = tuple(g * scale for g in gamma_grid)
        best = grid_search_cv(
            pooled,
            c_grid=config.svm_c_grid,
            gamma_grid=gamma_grid,
            folds=config.svm_folds,
            seed=config.seed + 1,
            tolerance=config.svm_tolerance,
        )
        svm_model = svm_train(pooled, best)
    except CdfagError as exc:
        raise _stage("svm", exc) from exc

    model = PipelineModel(
        version=FORMAT_VERSION,
        pca_source=pca_s,
        pca_target=pca_t,
        alignment=alignment,
        scaler=scaler,
        age_source=age_s,
        age_target=age_t,
        targets=targets,
        svm=svm_model,
        config=config,
        class_count=class_count,
    )
    model.validate_chain()
    return model


def transform_target(model: PipelineModel, features: np.ndarray) -> np.ndarray:
    """Target-domain feature chain up to (and including) generalization."""
    x = np.asarray(features, dtype=np.float64)
    try:
        if model.pca_target is not None:
            x = pca_project(model.pca_target, x)
    except CdfagError as exc:
        raise _stage("pca", exc) from exc
    try:
        aligned = kema_project(model.alignment, 1, x)
    except CdfagError as exc:
        raise _stage("kema", exc) from exc
    scaled = model.scaler.transform(aligned)
    return age_generalize(model.age_target, scaled)


def test_pipeline(
    model: PipelineModel, target_test: FeatureSet
) -> tuple[np.ndarray, EvalReport | None]:
    """Predict labels for unseen target samples; report accuracy when truth is present."""
    generalized = transform_target(model, target_test.features)
    predictions = svm_predict_model(model, generalized)
    report = None
    if target_test.n and bool(target_test.labeled_mask.all()):
        report = evaluate(predictions, target_test.labels, model.class_count)
    return predictions, report


def svm_predict_model(model: PipelineModel, generalized: np.ndarray) -> np.ndarray:
    from .svm import svm_predict

    return svm_predict(model.svm, generalized)


# -- persistence ----------------------------------------------------------------

def _config_sections(config: PipelineConfig, prefix: str) -> serialize.Sections:
    return [
        (prefix + "mu", float(config.mu)),
        (prefix + "latent_dim", int(config.latent_dim)),
        (prefix + "knn_k", int(config.knn_k)),
        (prefix + "ridge", float(config.ridge if config.ridge is not None else -1.0)),
        (prefix + "kernel", config.kernel),
        (prefix + "use_pca", bool(config.use_pca)),
        (prefix + "pca_retain", float(config.pca_retain)),
        (prefix + "age_iterations", int(config.age_iterations)),
        (prefix + "age_learning_rate", float(config.age_learning_rate)),
        (prefix + "age_momentum", float(config.age_momentum)),
        (prefix + "age_init", config.age_init),
        (prefix + "svm_folds", int(config.svm_folds)),
        (prefix + "svm_c_grid", np.asarray(config.svm_c_grid, dtype=np.float64)),
        (prefix + "svm_gamma_grid", np.asarray(config.svm_gamma_grid, dtype=np.float64)),
        (prefix + "svm_gamma_scale", config.svm_gamma_scale),
        (prefix + "svm_tolerance", float(config.svm_tolerance)),
        (prefix + "seed", int(config.seed)),
    ]


def _config_from(sections: dict[str, object], prefix: str) -> PipelineConfig:
    ridge = float(sections[prefix + "ridge"])
    return PipelineConfig(
        mu=float(sections[prefix + "mu"]),
        latent_dim=int(sections[prefix + "latent_dim"]),
        knn_k=int(sections[prefix + "knn_k"]),
        ridge=None if ridge < 0 else ridge,
        kernel=str(sections[prefix + "kernel"]),
        use_pca=bool(sections[prefix + "use_pca"]),
        pca_retain=float(sections[prefix + "pca_retain"]),
        age_iterations=int(sections[prefix + "age_iterations"]),
        age_learning_rate=float(sections[prefix + "age_learning_rate"]),
        age_momentum=float(sections[prefix + "age_momentum"]),
        age_init=str(sections[prefix + "age_init"]),
        svm_folds=int(sections[prefix + "svm_folds"]),
        svm_c_grid=tuple(np.asarray(sections[prefix + "svm_c_grid"]).tolist()),
        svm_gamma_grid=tuple(np.asarray(sections[prefix + "svm_gamma_grid"]).tolist()),
        svm_gamma_scale=str(sections[prefix + "svm_gamma_scale"]),
        svm_tolerance=float(sections[prefix + "svm_tolerance"]),
        seed=int(sections[prefix + "seed"]),
    )


def save_model(path: str | Path, model: PipelineModel) -> None:
    sections: serialize.Sections = [("version", model.version)]
    sections.append(("class_count", int(model.class_count)))
    sections.extend(_config_sections(model.config, "config."))
    sections.append(("pca.source.present", model.pca_source is not None))
    if model.pca_source is not None:
        sections.extend(serialize.pca_sections(model.pca_source, "pca.source."))
    sections.append(("pca.target.present", model.pca_target is not None))
    if model.pca_target is not None:
        sections.extend(serialize.pca_sections(model.pca_target, "pca.target."))
    sections.extend(serialize.alignment_sections(model.alignment, "align."))
    sections.extend(serialize.scaler_sections(model.scaler, "scaler."))
    sections.extend(serialize.age_model_sections(model.age_source, "age.source."))
    sections.extend(serialize.age_model_sections(model.age_target, "age.target."))
    sections.extend(serialize.targets_sections(model.targets, "targets."))
    sections.extend(serialize.svm_sections(model.svm, "svm."))
    serialize.save_kind(path, "pipeline", sections)


def load_model(path: str | Path) -> PipelineModel:
    sections = serialize.load_kind(path, "pipeline")
    version = str(sections.get("version", ""))
    if version != FORMAT_VERSION:
        raise CorruptModel(f"{path}: unsupported pipeline version {version!r}")
    scaler = serialize.scaler_from(sections, "scaler.")
    model = PipelineModel(
        version=version,
        pca_source=(
            serialize.pca_from(sections, "pca.source.")
            if sections.get("pca.source.present")
            else None
        ),
        pca_target=(
            serialize.pca_from(sections, "pca.target.")
            if sections.get("pca.target.present")
            else None
        ),
        alignment=serialize.alignment_from(sections, "align."),
        scaler=scaler,
        age_source=serialize.age_model_from(sections, "age.source.", scaler),
        age_target=serialize.age_model_from(sections, "age.target.", scaler),
        targets=serialize.targets_from(sections, "targets."),
        svm=serialize.svm_from(sections, "svm."),
        config=_config_from(sections, "config."),
        class_count=int(sections["class_count"]),
    )
    model.validate_chain()
    return model
