import json
import math

import numpy as np
import pytest

from latentlabel.exceptions import DimensionMismatch, NoEvaluableSamples
from latentlabel.metrics import (
    EvalReport,
    coverage,
    evaluate,
    format_table,
    hamming_loss,
    label_confusion,
    one_error,
    ranking_loss,
)

import brute


def test_hamming_examples():
    T = np.array([[1, 0, 1], [0, 1, 0]])
    assert hamming_loss(T, T) == 0
    assert hamming_loss(1 - T, T) == 1
    P = T.copy()
    P[0, 0] = 0
    P[1, 2] = 1
    assert hamming_loss(P, T) == pytest.approx(1 / 3, abs=1e-15)


def test_one_error_examples():
    T = np.array([[1, 0], [0, 1], [1, 0]])
    assert one_error(np.array([[0.9, 0.1], [0.2, 0.8], [0.7, 0.3]]), T) == 0
    assert one_error(np.array([[0.1, 0.9], [0.8, 0.2], [0.3, 0.7]]), T) == 1
    assert one_error(np.array([[0.9, 0.1], [0.8, 0.2], [0.7, 0.3]]), T) == \
        pytest.approx(1 / 3, abs=1e-15)


def test_coverage_examples():
    assert coverage(np.array([[0.9, 0.5, 0.1]]), np.array([[1, 0, 0]])) == (0.0, 0.0)
    assert coverage(np.array([[0.9, 0.5, 0.1]]), np.array([[1, 1, 1]]))[0] == 2.0
    raw, norm = coverage(np.array([[0.9, 0.5, 0.1]]), np.array([[1, 0, 1]]))
    assert raw == 2.0
    assert norm == pytest.approx(2 / 3, abs=1e-15)


def test_ranking_loss_examples():
    assert ranking_loss(np.array([[0.9, 0.8, 0.1]]), np.array([[1, 1, 0]])) == 0
    assert ranking_loss(np.array([[0.1, 0.2, 0.9]]), np.array([[1, 1, 0]])) == 1
    assert ranking_loss(np.array([[0.2, 0.8]]), np.array([[1, 0]])) == 1.0
    assert ranking_loss(np.array([[0.5, 0.5]]), np.array([[1, 0]])) == 0.5


def test_label_confusion_examples():
    T = np.array([[1, 0], [0, 1], [1, 1], [0, 0]])
    perfect = label_confusion(T, T)
    assert perfect["mean_sensitivity"] == perfect["mean_specificity"] == 1.0
    assert perfect["mean_accuracy"] == 1.0
    zero = label_confusion(np.zeros_like(T), T)
    assert zero["mean_sensitivity"] == 0.0 and zero["mean_specificity"] == 1.0
    # one tp, fp, tn, fn per label
    T = np.array([[1, 1], [1, 1], [0, 0], [0, 0]])
    P = np.array([[1, 0], [0, 1], [0, 1], [1, 0]])
    conf = label_confusion(P, T)
    assert conf["per_label"] == [(1, 1, 1, 1), (1, 1, 1, 1)]
    assert conf["mean_sensitivity"] == conf["mean_specificity"] == conf["mean_accuracy"] == 0.5


def test_undefined_samples_are_skipped():
    scores = np.array([[0.9, 0.1], [0.3, 0.7]])
    truth = np.array([[0, 0], [0, 1]])
    assert one_error(scores, truth) == 0.0
    with pytest.raises(NoEvaluableSamples):
        one_error(scores, np.zeros((2, 2)))
    with pytest.raises(NoEvaluableSamples):
        ranking_loss(scores, np.ones((2, 2)))
    report = evaluate(scores, np.zeros((2, 2), int), np.ones((2, 2)))
    assert math.isnan(report.ranking_loss)
    assert report.skipped["ranking_loss"] == 2


def test_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        hamming_loss(np.zeros((2, 3)), np.zeros((3, 2)))


def _random_case(rng):
    m, c = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    # coarse score grid forces ties
    scores = rng.integers(0, 4, size=(m, c)) / 4.0
    truth = (rng.random((m, c)) < 0.4).astype(int)
    pred = (rng.random((m, c)) < 0.4).astype(int)
    return scores, truth, pred


def _close(value, exact):
    if exact is None:
        return math.isnan(value)
    return abs(value - float(exact)) <= 1e-12


@pytest.mark.parametrize("seed", range(200))
def test_metrics_match_enumeration(seed):
    rng = np.random.default_rng(seed)
    scores, truth, pred = _random_case(rng)
    S, T, Pl = scores.tolist(), truth.tolist(), pred.tolist()
    report = evaluate(scores, pred, truth)
    assert _close(report.hamming_loss, brute.hamming(Pl, T))
    assert _close(report.one_error, brute.one_error(S, T))
    cov = brute.coverage_raw(S, T)
    assert _close(report.coverage_raw, cov)
    if cov is not None:
        assert _close(report.coverage_normalized, cov / len(T[0]))
    assert _close(report.ranking_loss, brute.ranking_loss(S, T))
    counts = brute.confusion(Pl, T)
    assert report.per_label_confusion == counts
    sens = [tp / (tp + fn) for tp, fp, tn, fn in counts if tp + fn]
    spec = [tn / (tn + fp) for tp, fp, tn, fn in counts if tn + fp]
    assert (math.isnan(report.mean_sensitivity) if not sens
            else abs(report.mean_sensitivity - sum(sens) / len(sens)) <= 1e-12)
    assert (math.isnan(report.mean_specificity) if not spec
            else abs(report.mean_specificity - sum(spec) / len(spec)) <= 1e-12)
    acc = sum((tp + tn) / len(T) for tp, fp, tn, fn in counts) / len(counts)
    assert abs(report.mean_accuracy - acc) <= 1e-12


def test_report_serializes():
    report = evaluate(np.array([[0.9, 0.1]]), np.array([[1, 0]]), np.array([[1, 0]]))
    assert set(EvalReport.METRICS) <= set(report.to_dict())
    flat = json.loads(report.to_json())
    assert flat["hamming_loss"] == 0.0 and flat["tp_0"] == 1 and flat["skipped_coverage"] == 0
    assert all(not isinstance(v, (list, dict)) for v in flat.values())


def test_format_table():
    summary = {name: {"mean": 0.25, "sd": 0.0} for name in EvalReport.METRICS}
    lines = format_table(summary).splitlines()
    assert len(lines) == 8 and len({len(line) for line in lines}) == 1
