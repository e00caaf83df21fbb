"""Immutable containers for views, labels and fitted model state.

Samples are always ordered training rows first, unlabeled (test) rows
after.  The training mask is therefore a prefix and is carried as the
integer ``n_train`` instead of a dense diagonal matrix.
"""

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatch,
    NonBinaryLabel,
    NonFiniteValue,
    ValidationError,
)

__all__ = [
    "ModalityKind",
    "ModalityMatrix",
    "MultiModalView",
    "LabelMatrix",
    "ModelState",
    "validate",
    "check_inputs",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class ModalityKind(str, enum.Enum):
    RAW = "raw"
    KERNEL = "kernel"


@dataclass(frozen=True, eq=False)
class ModalityMatrix:
    """One representation of all samples: raw features or a kernel block.

    For kernel modalities ``anchor_ids`` lists the samples that define the
    columns.
    """

    values: np.ndarray
    kind: ModalityKind = ModalityKind.RAW
    anchor_ids: tuple = ()
    name: str = ""

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise DimensionMismatch(
                f"modality {self.name!r} must be 2-D, got shape {values.shape}",
                where=self.name,
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", ModalityKind(self.kind))
        object.__setattr__(self, "anchor_ids", tuple(self.anchor_ids))

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]

    def take(self, rows):
        """Reorder/select rows; kernel columns (anchors) are left untouched."""
        return ModalityMatrix(self.values[np.asarray(rows)], self.kind,
                              self.anchor_ids, self.name)


@dataclass(frozen=True, eq=False)
class MultiModalView:
    modalities: tuple
    sample_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "modalities", tuple(self.modalities))
        ids = tuple(self.sample_ids)
        if not ids and self.modalities:
            ids = tuple(range(self.modalities[0].n_rows))
        object.__setattr__(self, "sample_ids", ids)

    @classmethod
    def from_arrays(cls, arrays, sample_ids=()):
        """Wrap plain 2-D arrays as raw-feature modalities."""
        mods = [ModalityMatrix(a, name=f"view{i}") for i, a in enumerate(arrays)]
        return cls(mods, sample_ids)

    @property
    def n_modalities(self):
        return len(self.modalities)

    @property
    def n_samples(self):
        return self.modalities[0].n_rows if self.modalities else 0

    @property
    def dims(self):
        return [m.dim for m in self.modalities]

    def arrays(self):
        return [m.values for m in self.modalities]

    def take(self, rows):
        rows = np.asarray(rows)
        return MultiModalView([m.take(rows) for m in self.modalities],
                              [self.sample_ids[r] for r in rows])


@dataclass(frozen=True, eq=False)
class LabelMatrix:
    """Binary label matrix over all samples; rows past ``n_train`` are withheld."""

    values: np.ndarray
    n_train: int
    n_test: int = 0

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise DimensionMismatch(f"labels must be 2-D, got shape {values.shape}",
                                    where="Y")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "n_train", int(self.n_train))
        object.__setattr__(self, "n_test", int(self.n_test))

    @classmethod
    def from_training(cls, y_train, n_test=0):
        """Pad the training labels with ``n_test`` zero rows."""
        y_train = np.asarray(y_train, dtype=np.float64)
        if y_train.ndim == 1:
            y_train = y_train[:, None]
        full = np.vstack([y_train, np.zeros((n_test, y_train.shape[1]))])
        return cls(full, y_train.shape[0], n_test)

    @property
    def n_labels(self):
        return self.values.shape[1]

    @property
    def n_samples(self):
        return self.n_train + self.n_test

    @property
    def train_values(self):
        return self.values[: self.n_train]


@dataclass(frozen=True, eq=False)
class ModelState:
    U: tuple
    P: np.ndarray
    V: np.ndarray
    alpha: float
    beta: float
    k: int
    anchor_ids: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "U", tuple(_frozen(u) for u in self.U))
        object.__setattr__(self, "P", _frozen(self.P))
        object.__setattr__(self, "V", _frozen(self.V))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "anchor_ids", tuple(tuple(a) for a in self.anchor_ids))

    @property
    def modality_dims(self):
        return [u.shape[0] for u in self.U]

    @property
    def n_modalities(self):
        return len(self.U)

    def replace(self, **changes):
        kw = dict(U=self.U, P=self.P, V=self.V, alpha=self.alpha, beta=self.beta,
                  k=self.k, anchor_ids=self.anchor_ids, meta=self.meta)
        kw.update(changes)
        return ModelState(**kw)


def _first_bad(mask):
    idx = np.argwhere(mask)[0]
    return tuple(int(i) for i in idx)


def validate(view, labels=None, state=None):
    """Collect every invariant violation instead of raising.

    Returns a list of :class:`ValidationError` instances; an empty list
    means the inputs are consistent.
    """
    problems = []
    if view is not None:
        if view.n_modalities < 1:
            problems.append(DimensionMismatch("view has no modalities", where="view"))
        n_rows = view.n_samples
        for i, mod in enumerate(view.modalities):
            name = mod.name or f"X{i + 1}"
            if mod.n_rows != n_rows:
                problems.append(DimensionMismatch(
                    f"{name} has {mod.n_rows} rows, expected {n_rows}", where=name))
            bad = ~np.isfinite(mod.values)
            if bad.any():
                idx = _first_bad(bad)
                problems.append(NonFiniteValue(
                    f"{name} has a non-finite entry at {idx}", where=name, index=idx))
            if mod.kind == ModalityKind.KERNEL and mod.dim != len(mod.anchor_ids):
                problems.append(DimensionMismatch(
                    f"{name} has {mod.dim} columns but {len(mod.anchor_ids)} anchors",
                    where=name))
        if view.sample_ids and len(view.sample_ids) != n_rows:
            problems.append(DimensionMismatch(
                f"{len(view.sample_ids)} sample ids for {n_rows} rows", where="sample_ids"))

    if labels is not None:
        Y = labels.values
        if labels.n_train < 1:
            problems.append(ValidationError("need at least one training row", where="Y"))
        if Y.shape[1] < 1:
            problems.append(DimensionMismatch("labels need at least one column", where="Y"))
        if Y.shape[0] != labels.n_train + labels.n_test:
            problems.append(DimensionMismatch(
                f"Y has {Y.shape[0]} rows, n_train + n_test = "
                f"{labels.n_train + labels.n_test}", where="Y"))
        bad = ~np.isfinite(Y)
        if bad.any():
            idx = _first_bad(bad)
            problems.append(NonFiniteValue(f"Y has a non-finite entry at {idx}",
                                           where="Y", index=idx))
        else:
            nonbin = (Y != 0) & (Y != 1)
            if nonbin.any():
                idx = _first_bad(nonbin)
                problems.append(NonBinaryLabel(
                    f"Y[{idx[0]}, {idx[1]}] = {Y[idx]!r} is not 0/1", where="Y", index=idx))
            withheld = Y[labels.n_train:]
            if withheld.size and (withheld != 0).any():
                idx = _first_bad(withheld != 0)
                idx = (idx[0] + labels.n_train, idx[1])
                problems.append(ValidationError(
                    f"withheld row {idx[0]} of Y is not all-zero", where="Y", index=idx))
        if view is not None and view.n_modalities and Y.shape[0] != view.n_samples:
            problems.append(DimensionMismatch(
                f"Y has {Y.shape[0]} rows but the view has {view.n_samples}", where="Y"))

    if state is not None:
        for name, arr in [("P", state.P), ("V", state.V)] + [
                (f"U{i + 1}", u) for i, u in enumerate(state.U)]:
            bad = ~np.isfinite(arr)
            if bad.any():
                idx = _first_bad(bad)
                problems.append(NonFiniteValue(f"{name} has a non-finite entry at {idx}",
                                               where=name, index=idx))
        k = state.k
        if state.P.shape[1] != k or state.V.shape[0] != k:
            problems.append(DimensionMismatch(
                f"P is {state.P.shape}, V is {state.V.shape}, k = {k}", where="P"))
        for i, u in enumerate(state.U):
            if u.ndim != 2 or u.shape[1] != k:
                problems.append(DimensionMismatch(f"U{i + 1} has shape {u.shape}, k = {k}",
                                                  where=f"U{i + 1}"))
        if view is not None:
            if state.n_modalities != view.n_modalities:
                problems.append(DimensionMismatch(
                    f"model has {state.n_modalities} modalities, view has "
                    f"{view.n_modalities}", where="U"))
            else:
                for i, (u, d) in enumerate(zip(state.U, view.dims)):
                    if u.shape[0] != d:
                        problems.append(DimensionMismatch(
                            f"U{i + 1} has {u.shape[0]} rows, modality has {d} columns",
                            where=f"U{i + 1}"))
            if state.P.shape[0] != view.n_samples:
                problems.append(DimensionMismatch(
                    f"P has {state.P.shape[0]} rows, view has {view.n_samples}",
                    where="P"))
        if labels is not None and state.V.shape[1] != labels.n_labels:
            problems.append(DimensionMismatch(
                f"V has {state.V.shape[1]} columns, Y has {labels.n_labels}", where="V"))
    return problems


def check_inputs(view, labels=None, state=None):
    """Raise the first problem reported by :func:`validate`."""
    problems = validate(view, labels, state)
    if problems:
        raise problems[0]


def model_to_dict(state):
    return {
        "alpha": state.alpha,
        "beta": state.beta,
        "k": state.k,
        "U": [u.tolist() for u in state.U],
        "P": state.P.tolist(),
        "V": state.V.tolist(),
        "modality_dims": state.modality_dims,
        "anchor_ids": [list(a) for a in state.anchor_ids],
        "meta": state.meta,
    }


def model_from_dict(doc):
    k = int(doc["k"])
    U = [np.array(u, dtype=np.float64).reshape(d, k)
         for u, d in zip(doc["U"], doc["modality_dims"])]
    if len(U) != len(doc["U"]):
        raise DimensionMismatch("modality_dims does not match U", where="U")
    P = np.array(doc["P"], dtype=np.float64).reshape(-1, k)
    V = np.array(doc["V"], dtype=np.float64)
    if V.ndim != 2:
        V = V.reshape(k, -1)
    return ModelState(U, P, V, doc["alpha"], doc["beta"], k,
                      anchor_ids=doc.get("anchor_ids", ()), meta=doc.get("meta", {}))


def save_model(state, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(state), fh)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
