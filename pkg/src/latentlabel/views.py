"""Multi-modality representation: scaled feature blocks plus kernel views.

Every kernel value is produced by the same per-row routine
(:func:`_kernel_against`), which sums elementwise-commutative terms along
a contiguous axis.  That makes Gram matrices exactly symmetric and makes
``kernel_row(anchor_i)`` reproduce Gram row ``i`` bit for bit.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .data_model import ModalityKind, ModalityMatrix, MultiModalView
from .exceptions import DimensionMismatch, EmptyInput, NegativeFeature

__all__ = [
    "KernelKind",
    "KernelSpec",
    "ScalingKind",
    "ScalingSpec",
    "DEFAULT_KERNELS",
    "concat_features",
    "fit_scaling",
    "apply_scaling",
    "histogram_rows",
    "median_sigma",
    "gram_matrix",
    "kernel_row",
    "assemble_view",
    "ViewAssembly",
]


class KernelKind(str, enum.Enum):
    LINEAR = "linear"
    GAUSSIAN = "gaussian"
    BHATTACHARYYA = "bhattacharyya"
    CHI_SQUARE = "chi2"


_HISTOGRAM = (KernelKind.BHATTACHARYYA, KernelKind.CHI_SQUARE)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice.  ``gaussian_sigma`` is a positive float or ``"auto"``."""

    kind: KernelKind = KernelKind.LINEAR
    gaussian_sigma: object = "auto"
    histogram_normalize: object = None

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.histogram_normalize is None:
            object.__setattr__(self, "histogram_normalize", self.kind in _HISTOGRAM)
        sigma = self.gaussian_sigma
        if sigma != "auto" and not (float(sigma) > 0):
            raise ValueError(f"gaussian_sigma must be positive or 'auto', got {sigma!r}")

    @property
    def is_histogram(self):
        return self.kind in _HISTOGRAM


DEFAULT_KERNELS = (
    KernelSpec(KernelKind.LINEAR),
    KernelSpec(KernelKind.GAUSSIAN),
    KernelSpec(KernelKind.BHATTACHARYYA),
    KernelSpec(KernelKind.CHI_SQUARE),
)


class ScalingKind(str, enum.Enum):
    NONE = "none"
    ZSCORE = "zscore"
    MINMAX = "minmax"


@dataclass(frozen=True, eq=False)
class ScalingSpec:
    """Per-column affine scaling ``(x - offset) / scale``.

    ``offset`` and ``scale`` are filled by :func:`fit_scaling`; a column
    with zero spread gets scale 0 and is mapped to 0.
    """

    kind: ScalingKind = ScalingKind.ZSCORE
    offset: np.ndarray = None
    scale: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScalingKind(self.kind))

    @property
    def fitted(self):
        return self.offset is not None


def _values(X):
    return X.values if isinstance(X, ModalityMatrix) else np.asarray(X, dtype=np.float64)


def concat_features(motor, nonmotor):
    """Column-wise concatenation, motor block first."""
    a, b = _values(motor), _values(nonmotor)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(
            f"motor has {a.shape[0]} rows, non-motor has {b.shape[0]}", where="nonmotor")
    return ModalityMatrix(np.hstack([a, b]), ModalityKind.RAW, name="concat")


def fit_scaling(X, kind):
    """Compute column statistics over every row of ``X``."""
    X = _values(X)
    kind = ScalingKind(kind)
    d = X.shape[1]
    if kind is ScalingKind.NONE:
        return ScalingSpec(kind, np.zeros(d), np.ones(d))
    if X.shape[0] == 0:
        raise EmptyInput("cannot fit scaling on zero rows")
    if kind is ScalingKind.ZSCORE:
        offset = X.mean(axis=0)
        scale = X.std(axis=0)
    else:
        offset = X.min(axis=0)
        scale = X.max(axis=0) - offset
    return ScalingSpec(kind, offset, scale)


def apply_scaling(X, spec):
    X = _values(X)
    if X.shape[1] != len(spec.offset):
        raise DimensionMismatch(
            f"expected {len(spec.offset)} columns, got {X.shape[1]}", where="features")
    safe = np.where(spec.scale > 0, spec.scale, 1.0)
    out = (X - spec.offset) / safe
    out[:, spec.scale <= 0] = 0.0
    return out


def histogram_rows(X):
    """L1-normalize rows; an all-zero row stays zero."""
    X = _values(X)
    s = X.sum(axis=1, keepdims=True)
    return np.divide(X, s, out=np.zeros_like(X), where=s > 0)


def median_sigma(X):
    """Median pairwise Euclidean distance between distinct rows (1.0 if degenerate)."""
    X = _values(X)
    n = X.shape[0]
    if n < 2:
        return 1.0
    dists = []
    for i in range(n - 1):
        diff = X[i + 1:] - X[i]
        dists.append(np.sqrt(np.sum(diff * diff, axis=1)))
    med = float(np.median(np.concatenate(dists)))
    return med if med > 0 else 1.0


def _kernel_against(z, anchors, kind, sigma):
    if kind is KernelKind.LINEAR:
        return np.sum(anchors * z, axis=1)
    if kind is KernelKind.GAUSSIAN:
        diff = anchors - z
        return np.exp(-np.sum(diff * diff, axis=1) / (2.0 * sigma * sigma))
    if kind is KernelKind.BHATTACHARYYA:
        return np.sum(np.sqrt(anchors * z), axis=1)
    num = 2.0 * anchors * z
    den = anchors + z
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return np.sum(terms, axis=1)


def _check_histogram(X, where):
    if (X < 0).any():
        idx = tuple(int(i) for i in np.argwhere(X < 0)[0])
        raise NegativeFeature(
            f"histogram kernel needs nonnegative input; {where}{list(idx)} = {X[idx]!r}",
            where=where, index=idx)


def _resolve_sigma(spec, X):
    if spec.kind is not KernelKind.GAUSSIAN:
        return 1.0
    if spec.gaussian_sigma == "auto":
        return median_sigma(X)
    return float(spec.gaussian_sigma)


def gram_matrix(X, spec, sigma=None, anchor_ids=None):
    """Square kernel matrix over the rows of ``X``.

    ``X`` is used as given: histogram kernels require it nonnegative (use
    :func:`histogram_rows` beforehand when ``spec.histogram_normalize``).
    """
    Xv = _values(X)
    if Xv.size == 0:
        raise EmptyInput("kernel input is empty", where="X")
    if spec.is_histogram:
        _check_histogram(Xv, "X")
    if sigma is None:
        sigma = _resolve_sigma(spec, Xv)
    n = Xv.shape[0]
    K = np.empty((n, n))
    for i in range(n):
        K[i] = _kernel_against(Xv[i], Xv, spec.kind, sigma)
    upper = np.triu(K)
    K = upper + np.triu(K, 1).T
    ids = tuple(range(n)) if anchor_ids is None else tuple(anchor_ids)
    return ModalityMatrix(K, ModalityKind.KERNEL, ids, name=spec.kind.value)


def kernel_row(z, anchors, spec, sigma=None):
    """Kernel values between one sample and every anchor row."""
    A = _values(anchors)
    z = np.asarray(z, dtype=np.float64).ravel()
    if A.size == 0:
        raise EmptyInput("anchor set is empty", where="anchors")
    if z.shape[0] != A.shape[1]:
        raise DimensionMismatch(
            f"sample has {z.shape[0]} features, anchors have {A.shape[1]}", where="z")
    if spec.is_histogram:
        _check_histogram(z[None, :], "z")
    if sigma is None:
        sigma = _resolve_sigma(spec, A)
    return _kernel_against(z, A, spec.kind, sigma)


@dataclass(frozen=True, eq=False)
class ViewAssembly:
    """Everything needed to map new raw samples into a fitted view.

    Holds the feature scaling, the (scaled) anchor rows for each kernel
    and the resolved Gaussian bandwidths.
    """

    motor_scaling: ScalingSpec
    nonmotor_scaling: ScalingSpec
    kernels: tuple
    sigmas: tuple
    histogram_scaling: ScalingSpec
    anchors: np.ndarray
    anchor_ids: tuple

    @property
    def n_modalities(self):
        return 2 + len(self.kernels)

    def kernel_input(self, scaled_concat, spec, clip=False):
        if not spec.histogram_normalize:
            return scaled_concat
        X = apply_scaling(scaled_concat, self.histogram_scaling)
        if clip:
            # unseen samples can fall outside the anchors' min/max range
            X = np.clip(X, 0.0, None)
        return histogram_rows(X)

    def transform(self, motor, nonmotor, clip=True):
        """Per-modality matrices for new samples, kernels against the stored anchors."""
        m = apply_scaling(motor, self.motor_scaling)
        nm = apply_scaling(nonmotor, self.nonmotor_scaling)
        if m.shape[0] != nm.shape[0]:
            raise DimensionMismatch(
                f"motor has {m.shape[0]} rows, non-motor has {nm.shape[0]}",
                where="nonmotor")
        out = [m, nm]
        concat = np.hstack([m, nm])
        for spec, sigma in zip(self.kernels, self.sigmas):
            Z = self.kernel_input(concat, spec, clip=clip)
            A = self.kernel_input(self.anchors, spec)
            rows = np.empty((Z.shape[0], A.shape[0]))
            for i in range(Z.shape[0]):
                rows[i] = kernel_row(Z[i], A, spec, sigma)
            out.append(rows)
        return out

    def to_dict(self):
        def sc(s):
            return {"kind": s.kind.value, "offset": s.offset.tolist(),
                    "scale": s.scale.tolist()}
        return {
            "motor_scaling": sc(self.motor_scaling),
            "nonmotor_scaling": sc(self.nonmotor_scaling),
            "histogram_scaling": sc(self.histogram_scaling),
            "kernels": [{"kind": k.kind.value, "gaussian_sigma": k.gaussian_sigma,
                         "histogram_normalize": bool(k.histogram_normalize)}
                        for k in self.kernels],
            "sigmas": list(self.sigmas),
            "anchors": self.anchors.tolist(),
            "anchor_ids": list(self.anchor_ids),
        }

    @classmethod
    def from_dict(cls, doc):
        def sc(d):
            return ScalingSpec(d["kind"], np.array(d["offset"], dtype=np.float64),
                               np.array(d["scale"], dtype=np.float64))
        kernels = tuple(KernelSpec(**k) for k in doc["kernels"])
        anchors = np.array(doc["anchors"], dtype=np.float64)
        if anchors.ndim != 2:
            anchors = anchors.reshape(len(doc["anchor_ids"]), -1)
        return cls(sc(doc["motor_scaling"]), sc(doc["nonmotor_scaling"]), kernels,
                   tuple(float(s) for s in doc["sigmas"]), sc(doc["histogram_scaling"]),
                   anchors, tuple(doc["anchor_ids"]))


def assemble_view(motor, nonmotor, scaling=ScalingKind.ZSCORE, kernels=DEFAULT_KERNELS,
                  sample_ids=None, return_assembly=False):
    """Build ``[scaled motor, scaled non-motor] + one kernel view per spec``.

    Kernels are computed on the scaled concatenation; histogram kernels
    additionally min-max rescale it and L1-normalize its rows.  Scaling
    statistics cover every row passed in (training and test alike).
    """
    mv, nv = _values(motor), _values(nonmotor)
    if mv.shape[0] != nv.shape[0]:
        raise DimensionMismatch(
            f"motor has {mv.shape[0]} rows, non-motor has {nv.shape[0]}", where="nonmotor")
    if mv.shape[0] == 0:
        raise EmptyInput("no samples", where="motor")
    kind = scaling.kind if isinstance(scaling, ScalingSpec) else ScalingKind(scaling)
    m_sc = fit_scaling(mv, kind)
    n_sc = fit_scaling(nv, kind)
    m = apply_scaling(mv, m_sc)
    nm = apply_scaling(nv, n_sc)
    n = m.shape[0]
    ids = tuple(range(n)) if sample_ids is None else tuple(sample_ids)
    if len(ids) != n:
        raise DimensionMismatch(f"{len(ids)} sample ids for {n} rows", where="sample_ids")
    concat = np.hstack([m, nm])
    h_sc = fit_scaling(concat, ScalingKind.MINMAX)
    kernels = tuple(k if isinstance(k, KernelSpec) else KernelSpec(k) for k in kernels)

    assembly_partial = ViewAssembly(m_sc, n_sc, kernels, (), h_sc, concat, ids)
    mods = [ModalityMatrix(m, ModalityKind.RAW, name="motor"),
            ModalityMatrix(nm, ModalityKind.RAW, name="nonmotor")]
    sigmas = []
    for spec in kernels:
        Xk = assembly_partial.kernel_input(concat, spec)
        sigma = _resolve_sigma(spec, Xk)
        sigmas.append(sigma)
        mods.append(gram_matrix(Xk, spec, sigma=sigma, anchor_ids=ids))
    view = MultiModalView(mods, ids)
    if not return_assembly:
        return view
    assembly = ViewAssembly(m_sc, n_sc, kernels, tuple(sigmas), h_sc, concat, ids)
    return view, assembly
