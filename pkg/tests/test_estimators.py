import numpy as np
import pytest
from sklearn.base import clone

from latentlabel import BinaryRelevanceRidge, LatentSubspaceClassifier, MultiViewBuilder
from latentlabel.harness import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="module")
def data():
    spec = SyntheticSpec(n_samples=40, modality_dims=(5, 7), c=4, k_true=3, seed=1,
                         with_kernels=False, label_threshold=0.3)
    _, labels, _, blocks = generate_synthetic(spec)
    return np.hstack(blocks), labels.values


def test_params_round_trip():
    clf = LatentSubspaceClassifier(alpha=0.5, k=3)
    assert clf.get_params()["alpha"] == 0.5
    twin = clone(clf)
    assert twin.get_params() == clf.get_params()
    assert clone(MultiViewBuilder(n_motor=5)).n_motor == 5
    assert clone(BinaryRelevanceRidge(lambdas=(1.0,))).lambdas == (1.0,)


def test_shipped_defaults():
    clf = LatentSubspaceClassifier()
    assert (clf.alpha, clf.beta, clf.k) == (0.3, 0.1, 50)


def test_transductive_pipeline(data):
    X, Y = data
    blocks = MultiViewBuilder(n_motor=5).fit_transform(X)
    assert [b.shape[1] for b in blocks] == [5, 7, 40, 40, 40, 40]
    clf = LatentSubspaceClassifier(alpha=0.1, beta=0.01, k=3).fit(blocks, Y[:30])
    assert clf.transductive_predict().shape == (10, 4)
    assert clf.V_.shape == (3, 4) and len(clf.U_) == 6
    # scoring the fitted rows reproduces the transductive scores
    np.testing.assert_allclose(clf.decision_function(blocks), clf.transductive_scores_,
                               atol=1e-12)


def test_inductive_transform_matches_fit_rows(data):
    X, _ = data
    builder = MultiViewBuilder(n_motor=5).fit(X[:30])
    new = builder.transform(X[:30])
    for a, b in zip(new, builder.view_.arrays()):
        np.testing.assert_allclose(a, b, atol=1e-12)
    assert [b.shape for b in builder.transform(X[30:])][2] == (10, 30)


def test_builder_rejects_bad_split(data):
    X, _ = data
    with pytest.raises(ValueError):
        MultiViewBuilder(n_motor=12).fit(X)


def test_binary_relevance_estimator(data):
    X, Y = data
    br = BinaryRelevanceRidge(lambdas=(0.1, 1.0)).fit(X[:30], Y[:30])
    assert br.coef_.shape == (12, 4)
    assert br.lambda_ in (0.1, 1.0)
    assert 0.0 <= br.score(X[30:], Y[30:]) <= 1.0
