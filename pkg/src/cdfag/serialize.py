"""Binary model persistence.

One container format for every fitted artifact: the 6-byte magic ``CDFAG1``
followed by tagged sections. Each section is a length-prefixed UTF-8 tag, a
one-byte type code, and a payload; arrays are stored as little-endian 64-bit
values with an explicit shape. Writing is deterministic, so save/load/save
round-trips are byte-identical.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .age import AgeModel, ClassTargets, RangeScaler
from .encoding import Codebook, PcaModel
from .errors import CorruptModel, VersionMismatch
from .graphs import KernelSpec
from .kema import AlignmentModel, KemaConfig
from .svm import BinarySvm, SvmConfig, SvmModel

MAGIC = b"CDFAG1"

_T_F64_ARRAY = 0
_T_I64_ARRAY = 1
_T_STR = 2
_T_F64 = 3
_T_I64 = 4
_T_BOOL = 5

Sections = list[tuple[str, object]]


def _encode_value(value: object) -> bytes:
    if isinstance(value, bool):
        return struct.pack("<BB", _T_BOOL, 1 if value else 0)
    if isinstance(value, (int, np.integer)):
        return struct.pack("<Bq", _T_I64, int(value))
    if isinstance(value, (float, np.floating)):
        return struct.pack("<Bd", _T_F64, float(value))
    if isinstance(value, str):
        raw = value.encode("utf-8")
        return struct.pack("<BI", _T_STR, len(raw)) + raw
    if isinstance(value, np.ndarray):
        if value.dtype.kind == "f":
            code, dtype = _T_F64_ARRAY, "<f8"
        elif value.dtype.kind in "iu":
            code, dtype = _T_I64_ARRAY, "<i8"
        else:
            raise TypeError(f"unsupported array dtype {value.dtype}")
        arr = np.ascontiguousarray(value.astype(dtype, copy=False))
        head = struct.pack("<BB", code, arr.ndim)
        head += b"".join(struct.pack("<Q", d) for d in arr.shape)
        return head + arr.tobytes()
    raise TypeError(f"unsupported section value type {type(value)!r}")


def write_sections(path: str | Path, sections: Sections) -> None:
    blob = bytearray(MAGIC)
    for tag, value in sections:
        raw_tag = tag.encode("utf-8")
        blob += struct.pack("<H", len(raw_tag)) + raw_tag
        blob += _encode_value(value)
    Path(path).write_bytes(bytes(blob))


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.path = path
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise CorruptModel(f"{self.path}: truncated model file")
        out = self.blob[self.pos : self.pos + count]
        self.pos += count
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_sections(path: str | Path) -> dict[str, object]:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < len(MAGIC):
        raise CorruptModel(f"{path}: file too short for magic header")
    if blob[: len(MAGIC)] != MAGIC:
        if blob[:5] == MAGIC[:5]:
            raise VersionMismatch(
                f"{path}: format version {blob[5:6]!r} not supported (expected {MAGIC[5:6]!r})"
            )
        raise CorruptModel(f"{path}: bad magic header")
    reader = _Reader(blob, str(path))
    reader.pos = len(MAGIC)
    sections: dict[str, object] = {}
    while reader.pos < len(blob):
        (tag_len,) = reader.unpack("<H")
        tag = reader.take(tag_len).decode("utf-8")
        (code,) = reader.unpack("<B")
        if code == _T_BOOL:
            sections[tag] = bool(reader.unpack("<B")[0])
        elif code == _T_I64:
            sections[tag] = int(reader.unpack("<q")[0])
        elif code == _T_F64:
            sections[tag] = float(reader.unpack("<d")[0])
        elif code == _T_STR:
            (length,) = reader.unpack("<I")
            sections[tag] = reader.take(length).decode("utf-8")
        elif code in (_T_F64_ARRAY, _T_I64_ARRAY):
            (ndim,) = reader.unpack("<B")
            shape = tuple(reader.unpack("<Q")[0] for _ in range(ndim))
            dtype = "<f8" if code == _T_F64_ARRAY else "<i8"
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = reader.take(count * 8)
            sections[tag] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        else:
            raise CorruptModel(f"{path}: unknown section type {code} for tag {tag!r}")
    return sections


def _need(sections: dict[str, object], tag: str):
    if tag not in sections:
        raise CorruptModel(f"missing model section {tag!r}")
    return sections[tag]


# -- per-model section builders ------------------------------------------------

def codebook_sections(model: Codebook, prefix: str = "") -> Sections:
    return [(prefix + "bases", model.bases)]


def codebook_from(sections: dict[str, object], prefix: str = "") -> Codebook:
    return Codebook(bases=_need(sections, prefix + "bases"))


def pca_sections(model: PcaModel, prefix: str = "") -> Sections:
    return [
        (prefix + "mean", model.mean),
        (prefix + "components", model.components),
        (prefix + "eigenvalues", model.eigenvalues),
        (prefix + "retained_fraction", float(model.retained_fraction)),
    ]


def pca_from(sections: dict[str, object], prefix: str = "") -> PcaModel:
    return PcaModel(
        mean=_need(sections, prefix + "mean"),
        components=_need(sections, prefix + "components"),
        eigenvalues=_need(sections, prefix + "eigenvalues"),
        retained_fraction=float(_need(sections, prefix + "retained_fraction")),
    )


def _kernel_sections(spec: KernelSpec, prefix: str) -> Sections:
    return [
        (prefix + "kind", spec.kind),
        (prefix + "bandwidth", float(spec.bandwidth if spec.bandwidth is not None else -1.0)),
    ]


def _kernel_from(sections: dict[str, object], prefix: str) -> KernelSpec:
    bandwidth = float(_need(sections, prefix + "bandwidth"))
    return KernelSpec(
        kind=str(_need(sections, prefix + "kind")),
        bandwidth=None if bandwidth < 0 else bandwidth,
    )


def alignment_sections(model: AlignmentModel, prefix: str = "") -> Sections:
    cfg = model.config
    out: Sections = [
        (prefix + "domains", int(model.k)),
        (prefix + "eigenvalues", model.eigenvalues),
        (prefix + "config.mu", float(cfg.mu)),
        (prefix + "config.latent_dim", int(cfg.latent_dim)),
        (prefix + "config.knn_k", int(cfg.knn_k)),
        (prefix + "config.ridge", float(cfg.ridge if cfg.ridge is not None else -1.0)),
        (prefix + "config.knn_mode", cfg.knn_mode),
    ]
    for i in range(model.k):
        out.append((f"{prefix}domain.{i}.anchors", model.anchors[i]))
        out.append((f"{prefix}domain.{i}.alpha", model.alphas[i]))
        out.extend(_kernel_sections(model.kernels[i], f"{prefix}domain.{i}.kernel."))
    return out


def alignment_from(sections: dict[str, object], prefix: str = "") -> AlignmentModel:
    k = int(_need(sections, prefix + "domains"))
    ridge = float(_need(sections, prefix + "config.ridge"))
    config = KemaConfig(
        mu=float(_need(sections, prefix + "config.mu")),
        latent_dim=int(_need(sections, prefix + "config.latent_dim")),
        knn_k=int(_need(sections, prefix + "config.knn_k")),
        ridge=None if ridge < 0 else ridge,
        kernels=None,
        knn_mode=str(_need(sections, prefix + "config.knn_mode")),
    )
    anchors, alphas, kernels = [], [], []
    for i in range(k):
        anchors.append(_need(sections, f"{prefix}domain.{i}.anchors"))
        alphas.append(_need(sections, f"{prefix}domain.{i}.alpha"))
        kernels.append(_kernel_from(sections, f"{prefix}domain.{i}.kernel."))
    return AlignmentModel(
        anchors=anchors,
        kernels=kernels,
        alphas=alphas,
        eigenvalues=_need(sections, prefix + "eigenvalues"),
        config=config,
    )


def scaler_sections(scaler: RangeScaler, prefix: str = "") -> Sections:
    return [
        (prefix + "minimum", scaler.minimum),
        (prefix + "maximum", scaler.maximum),
        (prefix + "lo", float(scaler.lo)),
        (prefix + "hi", float(scaler.hi)),
    ]


def scaler_from(sections: dict[str, object], prefix: str = "") -> RangeScaler:
    return RangeScaler(
        minimum=_need(sections, prefix + "minimum"),
        maximum=_need(sections, prefix + "maximum"),
        lo=float(_need(sections, prefix + "lo")),
        hi=float(_need(sections, prefix + "hi")),
    )


def age_model_sections(model: AgeModel, prefix: str = "") -> Sections:
    return [
        (prefix + "w1", model.w1),
        (prefix + "b1", model.b1),
        (prefix + "w2", model.w2),
        (prefix + "b2", model.b2),
    ]


def age_model_from(sections: dict[str, object], prefix: str, scaler: RangeScaler | None) -> AgeModel:
    return AgeModel(
        w1=_need(sections, prefix + "w1"),
        b1=_need(sections, prefix + "b1"),
        w2=_need(sections, prefix + "w2"),
        b2=_need(sections, prefix + "b2"),
        scaler=scaler,
    )


def targets_sections(targets: ClassTargets, prefix: str = "") -> Sections:
    return [
        (prefix + "matrix", targets.targets),
        (prefix + "source_counts", targets.source_counts),
        (prefix + "target_counts", targets.target_counts),
    ]


def targets_from(sections: dict[str, object], prefix: str = "") -> ClassTargets:
    return ClassTargets(
        targets=_need(sections, prefix + "matrix"),
        source_counts=_need(sections, prefix + "source_counts"),
        target_counts=_need(sections, prefix + "target_counts"),
    )


def svm_sections(model: SvmModel, prefix: str = "") -> Sections:
    out: Sections = [
        (prefix + "classes", model.classes),
        (prefix + "c", float(model.config.c)),
        (prefix + "gamma", float(model.config.gamma)),
        (prefix + "tolerance", float(model.config.tolerance)),
        (prefix + "max_iter", int(model.config.max_iter)),
        (prefix + "machines", len(model.machines)),
    ]
    for i, machine in enumerate(model.machines):
        out.extend(
            [
                (f"{prefix}machine.{i}.class_a", int(machine.class_a)),
                (f"{prefix}machine.{i}.class_b", int(machine.class_b)),
                (f"{prefix}machine.{i}.support_vectors", machine.support_vectors),
                (f"{prefix}machine.{i}.coefs", machine.coefs),
                (f"{prefix}machine.{i}.bias", float(machine.bias)),
            ]
        )
    return out


def svm_from(sections: dict[str, object], prefix: str = "") -> SvmModel:
    config = SvmConfig(
        c=float(_need(sections, prefix + "c")),
        gamma=float(_need(sections, prefix + "gamma")),
        tolerance=float(_need(sections, prefix + "tolerance")),
        max_iter=int(_need(sections, prefix + "max_iter")),
    )
    machines = []
    for i in range(int(_need(sections, prefix + "machines"))):
        machines.append(
            BinarySvm(
                class_a=int(_need(sections, f"{prefix}machine.{i}.class_a")),
                class_b=int(_need(sections, f"{prefix}machine.{i}.class_b")),
                support_vectors=_need(sections, f"{prefix}machine.{i}.support_vectors"),
                coefs=_need(sections, f"{prefix}machine.{i}.coefs"),
                bias=float(_need(sections, f"{prefix}machine.{i}.bias")),
            )
        )
    return SvmModel(machines=machines, classes=_need(sections, prefix + "classes"), config=config)


def save_kind(path: str | Path, kind: str, sections: Sections) -> None:
    write_sections(path, [("kind", kind)] + sections)


def load_kind(path: str | Path, expected: str) -> dict[str, object]:
    sections = read_sections(path)
    kind = sections.get("kind")
    if kind != expected:
        raise CorruptModel(f"{path}: expected a {expected!r} model file, found {kind!r}")
    return sections
