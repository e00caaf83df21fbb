"""Multi-label evaluation metrics.

Tie conventions are fixed so results are reproducible:

* one-error picks the lowest-index label among tied top scores;
* coverage gives a true label the worst rank among labels tied with it;
* ranking loss counts a tied (relevant, irrelevant) pair as half an error.

Samples for which a ranking metric is undefined (no relevant labels, or
for ranking loss no irrelevant labels either) are skipped.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, NoEvaluableSamples

__all__ = [
    "EvalReport",
    "hamming_loss",
    "one_error",
    "coverage",
    "ranking_loss",
    "label_confusion",
    "evaluate",
    "format_table",
]


def _pair(a, b, names=("pred", "truth")):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 1:
        a = a[None, :]
    if b.ndim == 1:
        b = b[None, :]
    if a.shape != b.shape:
        raise DimensionMismatch(f"{names[0]} {a.shape} vs {names[1]} {b.shape}",
                                where=names[0])
    return a, b


def hamming_loss(pred, truth):
    pred, truth = _pair(pred, truth)
    if pred.size == 0:
        raise NoEvaluableSamples("empty label matrix")
    return float(np.mean(pred.astype(bool) != truth.astype(bool)))


def one_error(scores, truth):
    scores, truth = _pair(scores, truth, ("scores", "truth"))
    truth = truth.astype(bool)
    keep = truth.any(axis=1)
    if not keep.any():
        raise NoEvaluableSamples("no sample has a relevant label")
    top = np.argmax(scores[keep], axis=1)
    hit = truth[keep][np.arange(top.size), top]
    return float(np.mean(~hit))


def _worst_ranks(scores):
    # rank of each label = number of labels scoring >= it (1-based, ties pessimistic)
    return np.sum(scores[:, None, :] >= scores[:, :, None], axis=2)


def coverage(scores, truth):
    """Returns ``(raw, normalized)``; normalized divides by the label count."""
    scores, truth = _pair(scores, truth, ("scores", "truth"))
    truth = truth.astype(bool)
    keep = truth.any(axis=1)
    if not keep.any():
        raise NoEvaluableSamples("no sample has a relevant label")
    ranks = _worst_ranks(scores[keep])
    worst = np.max(np.where(truth[keep], ranks, 0), axis=1)
    raw = float(np.mean(worst - 1))
    return raw, raw / scores.shape[1]


def ranking_loss(scores, truth):
    scores, truth = _pair(scores, truth, ("scores", "truth"))
    truth = truth.astype(bool)
    n_pos = truth.sum(axis=1)
    n_neg = truth.shape[1] - n_pos
    keep = (n_pos > 0) & (n_neg > 0)
    if not keep.any():
        raise NoEvaluableSamples("no sample has both relevant and irrelevant labels")
    losses = []
    for s, t in zip(scores[keep], truth[keep]):
        pos = s[t][:, None]
        neg = s[~t][None, :]
        bad = np.sum(pos < neg) + 0.5 * np.sum(pos == neg)
        losses.append(bad / (pos.size * neg.size))
    return float(np.mean(losses))


def label_confusion(pred, truth):
    """Per-label ``(tp, fp, tn, fn)`` plus label-averaged sensitivity, specificity, accuracy.

    A label whose sensitivity (or specificity) denominator is zero is left
    out of that mean; the mean is NaN if no label qualifies.
    """
    pred, truth = _pair(pred, truth)
    p = pred.astype(bool)
    t = truth.astype(bool)
    tp = np.sum(p & t, axis=0)
    fp = np.sum(p & ~t, axis=0)
    tn = np.sum(~p & ~t, axis=0)
    fn = np.sum(~p & t, axis=0)
    m = p.shape[0]

    def _mean_ratio(num, den):
        ok = den > 0
        return float(np.mean(num[ok] / den[ok])) if ok.any() else float("nan")

    confusion = [tuple(int(x) for x in row) for row in zip(tp, fp, tn, fn)]
    return {
        "per_label": confusion,
        "mean_sensitivity": _mean_ratio(tp, tp + fn),
        "mean_specificity": _mean_ratio(tn, tn + fp),
        "mean_accuracy": float(np.mean((tp + tn) / m)) if m else float("nan"),
    }


@dataclass
class EvalReport:
    hamming_loss: float
    one_error: float
    coverage_normalized: float
    ranking_loss: float
    mean_sensitivity: float
    mean_specificity: float
    mean_accuracy: float
    coverage_raw: float = float("nan")
    per_label_confusion: list = field(default_factory=list)
    skipped: dict = field(default_factory=dict)

    METRICS = ("hamming_loss", "one_error", "coverage_normalized", "ranking_loss",
               "mean_sensitivity", "mean_specificity", "mean_accuracy")

    def scalars(self):
        return {name: getattr(self, name) for name in self.METRICS}

    def to_dict(self):
        doc = asdict(self)
        doc["per_label_confusion"] = [list(c) for c in self.per_label_confusion]
        return doc

    def to_flat_dict(self):
        """Scalar-only view: per-label counts become ``tp_j``/``fp_j``/... keys."""
        doc = {name: getattr(self, name) for name in self.METRICS}
        doc["coverage_raw"] = self.coverage_raw
        for name, count in self.skipped.items():
            doc[f"skipped_{name}"] = count
        for j, counts in enumerate(self.per_label_confusion):
            for tag, value in zip(("tp", "fp", "tn", "fn"), counts):
                doc[f"{tag}_{j}"] = value
        return doc

    def to_json(self):
        return json.dumps(self.to_flat_dict())


def format_table(summary):
    """Fixed-width ``metric  mean  sd`` table from a ``{name: {"mean", "sd"}}`` mapping."""
    lines = [f"{'metric':<22}{'mean':>10}{'sd':>10}"]
    for name in EvalReport.METRICS:
        row = summary[name]
        lines.append(f"{name:<22}{row['mean']:>10.4f}{row['sd']:>10.4f}")
    return "\n".join(lines)


def evaluate(scores, pred, truth):
    """All seven metrics; undefined ranking metrics come back as NaN."""
    scores, truth = _pair(scores, truth, ("scores", "truth"))
    pred, _ = _pair(pred, truth)
    t = truth.astype(bool)
    n_pos = t.sum(axis=1)
    skipped = {
        "one_error": int(np.sum(n_pos == 0)),
        "coverage": int(np.sum(n_pos == 0)),
        "ranking_loss": int(np.sum((n_pos == 0) | (n_pos == t.shape[1]))),
    }

    def _safe(fn):
        try:
            return fn(scores, truth)
        except NoEvaluableSamples:
            return None

    oe = _safe(one_error)
    cov = _safe(coverage)
    rl = _safe(ranking_loss)
    conf = label_confusion(pred, truth)
    nan = float("nan")
    return EvalReport(
        hamming_loss=hamming_loss(pred, truth),
        one_error=nan if oe is None else oe,
        coverage_normalized=nan if cov is None else cov[1],
        ranking_loss=nan if rl is None else rl,
        mean_sensitivity=conf["mean_sensitivity"],
        mean_specificity=conf["mean_specificity"],
        mean_accuracy=conf["mean_accuracy"],
        coverage_raw=nan if cov is None else cov[0],
        per_label_confusion=conf["per_label"],
        skipped=skipped,
    )
