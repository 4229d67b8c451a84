"""Cross-dataset feature alignment and generalization.

A library and CLI for semi-supervised alignment of two feature domains via
kernel manifold alignment, feature generalization with a pair of
aligned-to-generalized encoders, and multiclass SVM classification, plus a
synthetic two-domain benchmark harness.
"""

from .age import (
    AgeModel,
    ClassTargets,
    RangeScaler,
    TrainConfig,
    age_forward,
    age_generalize,
    age_train,
    class_targets,
)
from .bench import SplitCounts, SynthSpec, generate, run_protocol
from .data import DescriptorSet, FeatureSet, load_feature_csv, save_feature_csv
from .encoding import (
    Codebook,
    PcaModel,
    build_codebook,
    llc_encode,
    pca_fit,
    pca_project,
    pool_codes,
)
from .graphs import (
    KernelSpec,
    LaplacianTriple,
    gram,
    knn_topology_weights,
    label_weights,
    laplacian,
    median_bandwidth,
    solve_gevd,
)
from .kema import (
    AlignmentModel,
    DomainBundle,
    KemaConfig,
    kema_diagnostics,
    kema_fit,
    kema_project,
)
from .metrics import EvalReport, evaluate
from .pipeline import (
    PipelineConfig,
    PipelineModel,
    load_config,
    load_model,
    save_model,
    test_pipeline,
    train_pipeline,
)
from .svm import SvmConfig, SvmModel, grid_search_cv, svm_predict, svm_train

__version__ = "0.1.0"

__all__ = [
    "AgeModel",
    "AlignmentModel",
    "ClassTargets",
    "Codebook",
    "DescriptorSet",
    "DomainBundle",
    "EvalReport",
    "FeatureSet",
    "KemaConfig",
    "KernelSpec",
    "LaplacianTriple",
    "PcaModel",
    "PipelineConfig",
    "PipelineModel",
    "RangeScaler",
    "SplitCounts",
    "SvmConfig",
    "SvmModel",
    "SynthSpec",
    "TrainConfig",
    "age_forward",
    "age_generalize",
    "age_train",
    "build_codebook",
    "class_targets",
    "evaluate",
    "generate",
    "gram",
    "grid_search_cv",
    "kema_diagnostics",
    "kema_fit",
    "kema_project",
    "knn_topology_weights",
    "label_weights",
    "laplacian",
    "llc_encode",
    "load_config",
    "load_feature_csv",
    "load_model",
    "median_bandwidth",
    "pca_fit",
    "pca_project",
    "pool_codes",
    "run_protocol",
    "save_feature_csv",
    "save_model",
    "solve_gevd",
    "svm_predict",
    "svm_train",
    "test_pipeline",
    "train_pipeline",
]
