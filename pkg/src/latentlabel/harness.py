"""Evaluation protocol: fold splits, grid search, repeated CV, baseline, synthetic data.

All fits are transductive.  For a split, the view's rows are reordered so
that training rows come first; the features of held-out rows stay in the
view while their labels are zeroed.  Scaling and kernel views are computed
once over all rows and are not refit per fold.
"""

import math
import os
from dataclasses import asdict, dataclass

import numpy as np
from joblib import Parallel, delayed

from .data_model import LabelMatrix, ModalityKind, ModelState, MultiModalView
from .exceptions import DimensionMismatch, InvalidFoldCount, NumericalError, SingularSystem
from .metrics import EvalReport, evaluate, hamming_loss
from .solver import SolverConfig, fit, predict_transductive, threshold_scores
from .views import DEFAULT_KERNELS, assemble_view

__all__ = [
    "DEFAULT_REG_VALUES",
    "DEFAULT_K_VALUES",
    "GridSpec",
    "SyntheticSpec",
    "kfold_splits",
    "holdout_split",
    "transductive_split",
    "fit_transductive",
    "grid_search",
    "repeated_cv",
    "binary_relevance_fit",
    "binary_relevance_predict",
    "generate_synthetic",
    "n_jobs_from_env",
]

DEFAULT_REG_VALUES = (1.0, 0.5, 0.3, 0.1, 0.05, 0.01, 0.005, 0.001, 5e-4, 1e-4, 5e-5,
                    1e-5, 1e-6, 1e-8, 1e-10)
DEFAULT_K_VALUES = tuple(range(10, 101, 10))
BR_LAMBDAS = (1e-3, 1e-1, 1.0, 10.0)


def n_jobs_from_env(default=1):
    """Worker cap from ``LATENTLABEL_THREADS``."""
    raw = os.environ.get("LATENTLABEL_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


@dataclass(frozen=True)
class GridSpec:
    alpha_values: tuple = DEFAULT_REG_VALUES
    beta_values: tuple = DEFAULT_REG_VALUES
    k_values: tuple = DEFAULT_K_VALUES

    def __post_init__(self):
        for name in ("alpha_values", "beta_values", "k_values"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            if any(v < 0 for v in vals):
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, vals)
        if any(int(k) != k or k < 1 for k in self.k_values):
            raise ValueError("k_values must be positive integers")
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))

    def cells(self):
        """Grid cells in alpha-major, then beta, then k order."""
        return [(a, b, k) for a in self.alpha_values for b in self.beta_values
                for k in self.k_values]


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 136
    k_true: int = 10
    c: int = 31
    modality_dims: tuple = (55, 143)
    v_sparsity: float = 0.3
    noise_sd: float = 1.0
    label_threshold: float = 1.0
    seed: int = 0
    with_kernels: bool = True
    scaling: str = "minmax"

    def __post_init__(self):
        object.__setattr__(self, "modality_dims", tuple(int(d) for d in self.modality_dims))
        if not 0 < self.v_sparsity <= 1:
            raise ValueError("v_sparsity must lie in (0, 1]")
        if min(self.n_samples, self.k_true, self.c, *self.modality_dims) < 1:
            raise ValueError("sizes must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        if self.with_kernels and len(self.modality_dims) != 2:
            raise ValueError("kernel views need exactly two feature blocks")


def kfold_splits(n, folds, seed=0):
    """Seeded permutation cut into ``folds`` contiguous blocks.

    Each fold takes ``ceil(n / folds)`` samples while enough remain for
    every later fold to get at least one, so ``n=136, folds=10`` gives nine
    folds of 14 and a last fold of 10.
    """
    if not (isinstance(folds, (int, np.integer)) and 1 <= folds <= n):
        raise InvalidFoldCount(f"folds must be in [1, {n}], got {folds!r}")
    perm = np.random.default_rng(seed).permutation(n)
    size = math.ceil(n / folds)
    splits = []
    start = 0
    for f in range(folds):
        remaining = n - start
        take = min(size, remaining - (folds - f - 1))
        test = np.sort(perm[start:start + take])
        train = np.sort(np.concatenate([perm[:start], perm[start + take:]]))
        splits.append((train, test))
        start += take
    return splits


def holdout_split(n, fraction=0.1, seed=0):
    """Random ``(train_ids, holdout_ids)`` with ``round(fraction * n)`` held out (>= 1)."""
    n_hold = min(max(1, int(round(fraction * n))), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_hold:]), np.sort(perm[:n_hold])


def transductive_split(view, Y, train_ids, test_ids):
    """Reorder rows to ``train + test`` and withhold the test labels.

    Returns ``(view, LabelMatrix, truth_of_test_rows)``.
    """
    Y = np.asarray(Y.values if isinstance(Y, LabelMatrix) else Y, dtype=np.float64)
    order = np.concatenate([np.asarray(train_ids), np.asarray(test_ids)]).astype(int)
    sub = view.take(order)
    labels = LabelMatrix.from_training(Y[np.asarray(train_ids, dtype=int)], len(test_ids))
    return sub, labels, Y[np.asarray(test_ids, dtype=int)]


def fit_transductive(view, Y, train_ids, test_ids, alpha, beta, k, config=SolverConfig(),
                     on_fit=None):
    """Fit on the split and return ``(scores_test, labels_test, truth_test, model, trace)``."""
    sub, labels, truth = transductive_split(view, Y, train_ids, test_ids)
    if on_fit is not None:
        on_fit(sub, labels)
    model, trace = fit(sub, labels, alpha, beta, k, config)
    scores, _ = predict_transductive(model, sub)
    n_train = labels.n_train
    test_scores = scores[n_train:]
    return test_scores, threshold_scores(test_scores), truth, model, trace


def _full_labels(labels):
    if isinstance(labels, LabelMatrix):
        if labels.n_test:
            raise ValueError("evaluation needs labels for every sample")
        return labels.values
    return np.asarray(labels, dtype=np.float64)


def _grid_cell(view, Y, train_ids, hold_ids, cell, config):
    alpha, beta, k = cell
    try:
        _, pred, truth, _, _ = fit_transductive(view, Y, train_ids, hold_ids, alpha, beta,
                                                k, config)
    except (NumericalError, ValueError, np.linalg.LinAlgError) as exc:
        return {"alpha": alpha, "beta": beta, "k": k, "hamming_loss": None,
                "error": f"{type(exc).__name__}: {exc}"}
    return {"alpha": alpha, "beta": beta, "k": k,
            "hamming_loss": hamming_loss(pred, truth), "error": None}


def grid_search(view, labels, grid=GridSpec(), holdout_fraction=0.1, seed=0,
                config=SolverConfig(), n_jobs=1):
    """Pick ``(alpha, beta, k)`` by holdout Hamming loss.

    Every cell is fit on the same random ``1 - holdout_fraction`` split.
    Ties go to the earliest cell in alpha-major/beta/k order; failed cells
    are recorded and skipped.  Returns ``(best, table, meta)``.
    """
    Y = _full_labels(labels)
    n = Y.shape[0]
    train_ids, hold_ids = holdout_split(n, holdout_fraction, seed)
    cells = grid.cells()
    n_k = sum(1 for k in grid.k_values if k > len(train_ids) + len(hold_ids))
    table = Parallel(n_jobs=n_jobs)(
        delayed(_grid_cell)(view, Y, train_ids, hold_ids, cell, config) for cell in cells)
    best = None
    best_loss = math.inf
    for row in table:
        loss = row["hamming_loss"]
        if loss is not None and loss < best_loss:
            best, best_loss = (row["alpha"], row["beta"], row["k"]), loss
    meta = {
        "seed": seed,
        "holdout_fraction": holdout_fraction,
        "holdout_ids": [int(i) for i in hold_ids],
        "n_cells": len(cells),
        "n_failed": sum(1 for r in table if r["hamming_loss"] is None),
        "n_k_too_large": n_k,
        "note": "the selection holdout is drawn independently of any later CV folds "
                "and may overlap them",
    }
    return best, table, meta


def _cv_job(view, Y, train_ids, test_ids, hyper, method, config, on_fit, br_seed):
    if method == "latent":
        alpha, beta, k = hyper
        scores, pred, truth, _, _ = fit_transductive(view, Y, train_ids, test_ids, alpha,
                                                     beta, k, config, on_fit=on_fit)
    elif method == "binary_relevance":
        X = np.hstack([m.values for m in view.modalities if m.kind == ModalityKind.RAW])
        model = binary_relevance_fit(X[train_ids], Y[train_ids], seed=br_seed)
        scores, pred = binary_relevance_predict(model, X[test_ids])
        truth = Y[test_ids]
    else:
        raise ValueError(f"unknown method {method!r}")
    return evaluate(scores, pred, truth)


def _mean_sd(values):
    vals = np.array([v for v in values if not np.isnan(v)], dtype=np.float64)
    if vals.size == 0:
        return float("nan"), float("nan")
    vals = np.sort(vals)
    sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return float(np.mean(vals)), sd


def repeated_cv(view, labels, hyper=(0.3, 0.1, 50), repeats=100, folds=10, seed=0,
                config=SolverConfig(), method="latent", n_jobs=1, on_fit=None):
    """Repeated k-fold CV; mean and sample sd of every metric over all folds.

    Repeat ``r`` uses fold seed ``seed + r``.  ``on_fit(view, labels)`` sees
    the exact inputs of every fit.  Returns a JSON-ready dict.
    """
    Y = _full_labels(labels)
    n = Y.shape[0]
    jobs = []
    for r in range(repeats):
        for f, (train_ids, test_ids) in enumerate(kfold_splits(n, folds, seed + r)):
            jobs.append((r, f, train_ids, test_ids))
    if on_fit is not None:
        n_jobs = 1
    reports = Parallel(n_jobs=n_jobs)(
        delayed(_cv_job)(view, Y, tr, te, hyper, method, config, on_fit, seed + r)
        for r, f, tr, te in jobs)
    per_fold = []
    for (r, f, tr, te), rep in zip(jobs, reports):
        entry = {"repeat": r, "fold": f, "n_test": int(len(te))}
        entry.update(rep.scalars())
        per_fold.append(entry)
    summary = {}
    for name in EvalReport.METRICS:
        mean, sd = _mean_sd([e[name] for e in per_fold])
        summary[name] = {"mean": mean, "sd": sd}
    return {
        "method": method,
        "hyper": {"alpha": hyper[0], "beta": hyper[1], "k": hyper[2]}
        if method == "latent" else None,
        "repeats": repeats,
        "folds": folds,
        "seed": seed,
        "summary": summary,
        "per_fold": per_fold,
    }


def _ridge(X, y, lam):
    d = X.shape[1]
    A = X.T @ X + lam * np.eye(d)
    for _ in range(10):
        try:
            return np.linalg.solve(A, X.T @ y), lam
        except np.linalg.LinAlgError:
            lam = 10.0 * lam if lam > 0 else 1e-8
            A = X.T @ X + lam * np.eye(d)
    raise SingularSystem(f"ridge system singular even with lambda={lam:g}")


def binary_relevance_fit(X, Y, lambdas=BR_LAMBDAS, holdout_fraction=0.1, seed=0):
    """Independent ridge regressions, one per label, sharing a holdout-chosen lambda.

    The penalty is picked by Hamming loss of the 0.5-thresholded predictions
    on a random holdout of the training rows, then refit on all rows.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] == 0:
        raise ValueError("binary relevance needs training rows")
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}", where="Y")
    lambdas = tuple(lambdas)
    if len(lambdas) > 1 and X.shape[0] >= 2:
        tr, ho = holdout_split(X.shape[0], holdout_fraction, seed)
        losses = []
        for lam in lambdas:
            W, _ = _ridge(X[tr], Y[tr], lam)
            losses.append(hamming_loss(threshold_scores(X[ho] @ W), Y[ho]))
        lam = lambdas[int(np.argmin(losses))]
    else:
        lam = lambdas[0]
    W, lam = _ridge(X, Y, lam)
    return {"W": W, "lambda": lam}


def binary_relevance_predict(model, X):
    scores = np.asarray(X, dtype=np.float64) @ model["W"]
    return scores, threshold_scores(scores)


def generate_synthetic(spec=SyntheticSpec()):
    """Planted latent-factor data with known ground truth.

    ``Z`` (n x k) is standard normal; block ``i`` is ``Z A_i / sqrt(k) +
    noise_sd * E``, so noiseless features have unit variance.  The planted
    ``V*`` has a Bernoulli(v_sparsity) support (at least one entry per
    label), random signs, and columns scaled to unit norm so every label
    score ``Z V*[:, j]`` has unit variance.  ``Y = 1[Z V* > threshold]``.

    Returns ``(view, labels, planted_state, raw_blocks)``.
    """
    rng = np.random.default_rng(spec.seed)
    n, k, c = spec.n_samples, spec.k_true, spec.c
    Z = rng.standard_normal((n, k))
    blocks = []
    for d in spec.modality_dims:
        A = rng.standard_normal((k, d))
        blocks.append(Z @ A / math.sqrt(k) + spec.noise_sd * rng.standard_normal((n, d)))
    support = rng.random((k, c)) < spec.v_sparsity
    for j in range(c):
        if not support[:, j].any():
            support[rng.integers(k), j] = True
    signs = rng.choice([-1.0, 1.0], size=(k, c))
    V = np.where(support, signs, 0.0)
    V /= np.sqrt(support.sum(axis=0))
    scores = Z @ V
    Y = (scores > spec.label_threshold).astype(np.float64)
    ids = tuple(range(n))
    if spec.with_kernels:
        view = assemble_view(blocks[0], blocks[1], spec.scaling, DEFAULT_KERNELS,
                             sample_ids=ids)
    else:
        view = MultiModalView.from_arrays(blocks, ids)
    Us = [np.linalg.lstsq(X, Z, rcond=None)[0] for X in view.arrays()]
    planted = ModelState(Us, Z, V, 0.0, 0.0, k,
                         anchor_ids=[m.anchor_ids for m in view.modalities],
                         meta={"synthetic": asdict(spec)})
    return view, LabelMatrix(Y, n, 0), planted, blocks
