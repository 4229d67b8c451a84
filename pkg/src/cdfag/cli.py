"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import serialize
from .age import RangeScaler, TrainConfig, age_train, class_targets
from .bench import (
    METHODS,
    SplitCounts,
    SynthSpec,
    default_bench_config,
    generate,
    report_rows,
    run_protocol,
)
from .data import (
    FeatureSet,
    load_descriptor_dir,
    load_feature_csv,
    load_label_map,
    save_feature_csv,
)
from .encoding import build_codebook, llc_encode, pca_fit, pca_project, pool_codes
from .errors import BadConfig, BadSpec, CdfagError, UnknownDomain
from .graphs import build_laplacian_triple
from .kema import DomainBundle, KemaConfig, kema_fit, kema_project
from .metrics import EvalReport
from .pipeline import PipelineConfig, load_config, load_model, save_model, test_pipeline, train_pipeline
from .svm import DEFAULT_C_GRID, DEFAULT_GAMMA_GRID, grid_search_cv, svm_train

DOMAIN_INDEX = {"source": 0, "target": 1}


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise BadConfig(f"expected comma-separated floats, got {text!r}") from None
    if not values:
        raise BadConfig("empty grid")
    return values


def _cmd_codebook(args: argparse.Namespace) -> None:
    sets = load_descriptor_dir(args.in_dir)
    model = build_codebook(sets, args.size, args.sample, args.seed)
    serialize.save_kind(args.out, "codebook", serialize.codebook_sections(model))
    print(f"codebook: {model.size} bases of dim {model.dim} -> {args.out}")


def _cmd_encode(args: argparse.Namespace) -> None:
    sections = serialize.load_kind(args.codebook, "codebook")
    codebook = serialize.codebook_from(sections)
    sets = load_descriptor_dir(args.in_dir)
    labels = load_label_map(args.labels) if args.labels else {}
    rows, row_labels = [], []
    for ds in sets:
        codes = llc_encode(ds, codebook, args.bases, args.reg)
        rows.append(pool_codes(codes, args.pool))
        row_labels.append(labels.get(ds.video_id, -1))
    save_feature_csv(args.out, FeatureSet(np.vstack(rows), np.array(row_labels)))
    print(f"encoded {len(rows)} videos -> {args.out}")


def _cmd_pca_fit(args: argparse.Namespace) -> None:
    fs = load_feature_csv(args.in_file)
    model = pca_fit(fs.features, args.retain)
    serialize.save_kind(args.out, "pca", serialize.pca_sections(model))
    print(f"pca: {model.dim} -> {model.n_components} dims -> {args.out}")


def _cmd_pca_project(args: argparse.Namespace) -> None:
    model = serialize.pca_from(serialize.load_kind(args.model, "pca"))
    fs = load_feature_csv(args.in_file)
    save_feature_csv(args.out, FeatureSet(pca_project(model, fs.features), fs.labels))


def _cmd_align_fit(args: argparse.Namespace) -> None:
    source = load_feature_csv(args.source)
    target = load_feature_csv(args.target)
    classes = np.union1d(source.present_classes(), target.present_classes())
    if classes.size == 0:
        raise BadConfig("no labeled samples in the training files")
    bundle = DomainBundle([source, target], class_count=int(classes.max()) + 1)
    config = PipelineConfig(
        mu=args.mu, latent_dim=args.latent, knn_k=args.knn, kernel=args.kernel
    ).kema_config()
    model = kema_fit(bundle, config)
    serialize.save_kind(args.out, "alignment", serialize.alignment_sections(model))
    if args.dump_laplacians:
        out = Path(args.dump_laplacians)
        out.mkdir(parents=True, exist_ok=True)
        triple = build_laplacian_triple(
            [d.features for d in bundle.domains],
            bundle.stacked_labels(),
            config.knn_k,
            config.knn_mode,
        )
        for name, mat in (
            ("topology", triple.topology),
            ("similarity", triple.similarity),
            ("dissimilarity", triple.dissimilarity),
        ):
            np.savetxt(out / f"laplacian_{name}.csv", mat, delimiter=",")
    print(f"alignment: latent dim {model.latent_dim} -> {args.out}")


def _cmd_align_project(args: argparse.Namespace) -> None:
    model = serialize.alignment_from(serialize.load_kind(args.model, "alignment"))
    if args.domain not in DOMAIN_INDEX:
        raise UnknownDomain(f"domain must be 'source' or 'target', got {args.domain!r}")
    fs = load_feature_csv(args.in_file)
    latent = kema_project(model, DOMAIN_INDEX[args.domain], fs.features)
    save_feature_csv(args.out, FeatureSet(latent, fs.labels))


def _cmd_age_train(args: argparse.Namespace) -> None:
    source = load_feature_csv(args.source_aligned)
    target = load_feature_csv(args.target_aligned)
    scaler = RangeScaler.fit(np.vstack([source.features, target.features]))
    targets = class_targets(source, target, scaler)
    config = TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        iterations=args.iters,
        seed=args.seed,
    )
    scaled_source = FeatureSet(scaler.transform(source.features), source.labels)
    scaled_target = FeatureSet(scaler.transform(target.features), target.labels)
    model_s, model_t, log = age_train(scaled_source, scaled_target, targets, config, scaler=scaler)
    sections = serialize.scaler_sections(scaler, "scaler.")
    sections += serialize.targets_sections(targets, "targets.")
    sections += serialize.age_model_sections(model_s, "source.")
    sections += serialize.age_model_sections(model_t, "target.")
    serialize.save_kind(args.out, "age", sections)
    if args.loss_log:
        with open(args.loss_log, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loss_source", "loss_target"])
            for i, (ls, lt) in enumerate(zip(log.loss_source, log.loss_target)):
                writer.writerow([i, repr(float(ls)), repr(float(lt))])
    print(
        f"age: final losses {log.loss_source[-1]:.6f} / {log.loss_target[-1]:.6f} -> {args.out}"
    )


def _cmd_svm_train(args: argparse.Namespace) -> None:
    fs = load_feature_csv(args.in_file)
    best = grid_search_cv(
        fs,
        c_grid=args.c_grid,
        gamma_grid=args.gamma_grid,
        folds=args.cv,
        seed=args.seed,
    )
    model = svm_train(fs, best)
    serialize.save_kind(args.out, "svm", serialize.svm_sections(model))
    print(f"svm: C={best.c} gamma={best.gamma} -> {args.out}")


def _cmd_train(args: argparse.Namespace) -> None:
    config = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    source = load_feature_csv(args.source)
    target = load_feature_csv(args.target)
    model = train_pipeline(source, target, config)
    save_model(args.out, model)
    print(f"pipeline: latent dim {model.alignment.latent_dim} -> {args.out}")


def _write_report(path: str, report: EvalReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "row", "col", "value"])
        writer.writerow(["ap", "", "", repr(report.average_precision)])
        for cls, p in enumerate(report.per_class_precision):
            writer.writerow(["precision", cls, "", repr(float(p))])
        for i in range(report.confusion.shape[0]):
            for j in range(report.confusion.shape[1]):
                writer.writerow(["confusion", i, j, int(report.confusion[i, j])])


def _cmd_test(args: argparse.Namespace) -> None:
    model = load_model(args.pipeline)
    fs = load_feature_csv(args.in_file)
    if not args.truth:
        fs = FeatureSet(fs.features, np.full(fs.n, -1))
    predictions, report = test_pipeline(model, fs)
    _write_predictions(args.out, predictions)
    if report is not None:
        print(f"ap: {100.0 * report.average_precision:.2f}%")
        if args.report:
            _write_report(args.report, report)
    elif args.report:
        raise BadConfig("--report needs --truth and fully labeled input")


def _write_predictions(path: str, predictions: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "predicted_label"])
        for i, p in enumerate(predictions):
            writer.writerow([i, int(p)])


def _cmd_predict(args: argparse.Namespace) -> None:
    model = load_model(args.pipeline)
    fs = load_feature_csv(args.in_file)
    predictions, _ = test_pipeline(model, FeatureSet(fs.features, np.full(fs.n, -1)))
    _write_predictions(args.out, predictions)
    print(f"predicted {predictions.size} rows -> {args.out}")


_SPEC_KEYS = {
    "class_count": int,
    "dim": int,
    "samples_per_class": int,
    "noise": float,
    "mean_scale": float,
    "domain_map": str,
    "translate_scale": float,
    "warp": lambda v: None if v.lower() in ("", "none") else v,
    "warp_scale": float,
    "seed": int,
    "s_train": int,
    "t_train": int,
    "t_test": int,
}


def _load_spec(path: str | None) -> tuple[SynthSpec, SplitCounts]:
    values: dict[str, object] = {}
    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise BadSpec(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key not in _SPEC_KEYS:
                raise BadSpec(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _SPEC_KEYS[key](value.strip())
            except ValueError as exc:
                raise BadSpec(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    split_kwargs = {k: values.pop(k) for k in ("s_train", "t_train", "t_test") if k in values}
    return SynthSpec(**values), SplitCounts(**split_kwargs)


def _cmd_bench_synth(args: argparse.Namespace) -> None:
    spec, splits = _load_spec(args.spec)
    config = load_config(args.config) if args.config else default_bench_config()
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in METHODS:
            raise BadConfig(f"unknown method {m!r}; choose from {','.join(METHODS)}")
    seeds = tuple(range(args.seeds))
    rows = []
    if args.latent_sweep:
        grid = [int(v) for v in args.latent_grid.split(",")]
        for n in grid:
            run_config = replace(config, latent_dim=n)
            for seed in seeds:
                bundle = generate(replace(spec, seed=spec.seed + seed))
                report = run_protocol(bundle, "cdfag", splits, run_config, seed=seed)
                report.metadata["latent_dim"] = n
                rows.append(report)
    else:
        for seed in seeds:
            bundle = generate(replace(spec, seed=spec.seed + seed))
            for method in methods:
                rows.append(run_protocol(bundle, method, splits, config, seed=seed))
    flat = report_rows(rows)
    fields = sorted({k for row in flat for k in row}, key=str)
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(flat)
    for method in methods if not args.latent_sweep else ():
        aps = [r.average_precision for r in rows if r.metadata["method"] == method]
        print(f"{method}: mean ap {100.0 * float(np.mean(aps)):.2f}%")
    print(f"{len(flat)} runs -> {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdfag",
        description="Cross-dataset feature alignment and generalization pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codebook", help="learn a k-means codebook from descriptor files")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--size", type=int, default=4000)
    p.add_argument("--sample", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_codebook)

    p = sub.add_parser("encode", help="LLC-encode and pool descriptors per video")
    p.add_argument("--codebook", required=True)
    p.add_argument("--bases", type=int, default=5)
    p.add_argument("--pool", choices=("max", "sum", "mean"), default="max")
    p.add_argument("--reg", type=float, default=1e-4)
    p.add_argument("--labels", default=None, help="optional video_id,label CSV")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("pca-fit", help="fit a PCA reduction on encoded features")
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--retain", type=float, default=0.99)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pca_fit)

    p = sub.add_parser("pca-project", help="apply a fitted PCA model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pca_project)

    p = sub.add_parser("align-fit", help="fit kernel manifold alignment on two domains")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--latent", type=int, default=100)
    p.add_argument("--knn", type=int, default=10)
    p.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-laplacians", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_align_fit)

    p = sub.add_parser("align-project", help="project samples into the aligned space")
    p.add_argument("--model", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_align_project)

    p = sub.add_parser("age-train", help="train the aligned-to-generalized encoder pair")
    p.add_argument("--source-aligned", required=True)
    p.add_argument("--target-aligned", required=True)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-log", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_age_train)

    p = sub.add_parser("svm-train", help="cross-validated SVM on generalized features")
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--cv", type=int, default=5)
    p.add_argument("--c-grid", type=_float_list, default=DEFAULT_C_GRID)
    p.add_argument("--gamma-grid", type=_float_list, default=DEFAULT_GAMMA_GRID)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_svm_train)

    p = sub.add_parser("train", help="run the full training pipeline")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("test", help="run the testing pipeline on target samples")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--truth", action="store_true", help="input labels are ground truth")
    p.add_argument("--out", default="predictions.csv")
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("predict", help="predict labels with a trained pipeline")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--in", dest="in_file", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("bench-synth", help="synthetic two-domain benchmark")
    p.add_argument("--spec", default=None, help="key = value spec file")
    p.add_argument("--methods", default="na,kema,cdfag")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--config", default=None)
    p.add_argument("--latent-sweep", action="store_true")
    p.add_argument("--latent-grid", default="10,25,50,100,200")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench_synth)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CdfagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
