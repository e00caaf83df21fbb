"""scikit-learn style wrappers around the functional core.

``MultiViewBuilder`` turns a feature matrix into the list of per-modality
blocks; ``LatentSubspaceClassifier`` fits the latent-subspace model on such
a list (transductively when it has more rows than labels);
``BinaryRelevanceRidge`` is the per-label ridge baseline.
"""

import numpy as np
from sklearn.base import BaseEstimator, MultiOutputMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data_model import LabelMatrix, ModalityMatrix, MultiModalView
from .exceptions import DimensionMismatch
from .harness import BR_LAMBDAS, binary_relevance_fit, binary_relevance_predict
from .metrics import hamming_loss
from .solver import SolverConfig, fit, predict, predict_transductive, threshold_scores
from .views import KernelSpec, assemble_view

__all__ = ["MultiViewBuilder", "LatentSubspaceClassifier", "BinaryRelevanceRidge"]


class MultiViewBuilder(TransformerMixin, BaseEstimator):
    """Split features into motor/non-motor blocks and add kernel views.

    Parameters
    ----------
    n_motor : int
        Number of leading columns forming the first feature block.
    scaling : {"minmax", "zscore", "none"}
    kernels : sequence of str or KernelSpec
    gaussian_sigma : float or "auto"
        Bandwidth for Gaussian kernels given by name.

    After ``fit`` the rows seen become the kernel anchors; ``transform``
    evaluates kernels of new rows against them.
    """

    def __init__(self, n_motor=55, scaling="minmax",
                 kernels=("linear", "gaussian", "bhattacharyya", "chi2"),
                 gaussian_sigma="auto"):
        self.n_motor = n_motor
        self.scaling = scaling
        self.kernels = kernels
        self.gaussian_sigma = gaussian_sigma

    def _specs(self):
        specs = []
        for k in self.kernels:
            if isinstance(k, KernelSpec):
                specs.append(k)
            elif k == "gaussian":
                specs.append(KernelSpec(k, gaussian_sigma=self.gaussian_sigma))
            else:
                specs.append(KernelSpec(k))
        return tuple(specs)

    def _split(self, X):
        if not 0 < self.n_motor < X.shape[1]:
            raise DimensionMismatch(
                f"n_motor={self.n_motor} must split {X.shape[1]} columns", where="X")
        return X[:, :self.n_motor], X[:, self.n_motor:]

    def fit(self, X, y=None, sample_ids=None):
        X = check_array(X, dtype=np.float64)
        motor, nonmotor = self._split(X)
        self.view_, self.assembly_ = assemble_view(
            motor, nonmotor, self.scaling, self._specs(), sample_ids=sample_ids,
            return_assembly=True)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "assembly_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"expected {self.n_features_in_} features, got {X.shape[1]}", where="X")
        motor, nonmotor = self._split(X)
        return self.assembly_.transform(motor, nonmotor)

    def fit_transform(self, X, y=None, sample_ids=None):
        return self.fit(X, sample_ids=sample_ids).view_.arrays()


def _as_view(X):
    if isinstance(X, MultiModalView):
        return X
    mods = []
    for i, block in enumerate(X):
        if isinstance(block, ModalityMatrix):
            mods.append(block)
        else:
            mods.append(ModalityMatrix(check_array(block, dtype=np.float64),
                                       name=f"view{i}"))
    return MultiModalView(mods)


class LatentSubspaceClassifier(MultiOutputMixin, BaseEstimator):
    """Multi-label classifier through a shared latent space across modalities.

    ``fit(X, Y)`` takes ``X`` as a list of per-modality arrays (or a
    ``MultiModalView``) over ``n + m`` rows and ``Y`` as the ``n x c``
    labels of the first ``n`` rows.  The remaining ``m`` rows take part
    in learning without labels; their predictions are available from
    :meth:`transductive_predict`.
    """

    def __init__(self, alpha=0.3, beta=0.1, k=50, max_outer_iters=200, outer_rel_tol=1e-6,
                 fista_max_iters=500, fista_rel_tol=1e-8, block_updates="exact",
                 u_steps=5, p_steps=5, random_state=0):
        self.alpha = alpha
        self.beta = beta
        self.k = k
        self.max_outer_iters = max_outer_iters
        self.outer_rel_tol = outer_rel_tol
        self.fista_max_iters = fista_max_iters
        self.fista_rel_tol = fista_rel_tol
        self.block_updates = block_updates
        self.u_steps = u_steps
        self.p_steps = p_steps
        self.random_state = random_state

    def solver_config(self):
        return SolverConfig(
            max_outer_iters=self.max_outer_iters, outer_rel_tol=self.outer_rel_tol,
            fista_max_iters=self.fista_max_iters, fista_rel_tol=self.fista_rel_tol,
            block_updates=self.block_updates, u_steps=self.u_steps, p_steps=self.p_steps,
            seed=self.random_state)

    def fit(self, X, Y):
        view = _as_view(X)
        Y = check_array(Y, dtype=np.float64, ensure_2d=False)
        if Y.ndim == 1:
            Y = Y[:, None]
        n_test = view.n_samples - Y.shape[0]
        if n_test < 0:
            raise DimensionMismatch(
                f"{Y.shape[0]} label rows for {view.n_samples} samples", where="Y")
        labels = LabelMatrix.from_training(Y, n_test)
        self.state_, self.trace_ = fit(view, labels, self.alpha, self.beta, self.k,
                                       self.solver_config())
        self.n_train_ = Y.shape[0]
        self.n_modalities_ = view.n_modalities
        self.modality_dims_ = view.dims
        self.transductive_scores_, _ = predict_transductive(self.state_, view)
        return self

    @property
    def U_(self):
        return self.state_.U

    @property
    def P_(self):
        return self.state_.P

    @property
    def V_(self):
        return self.state_.V

    def decision_function(self, X):
        check_is_fitted(self, "state_")
        blocks = X.arrays() if isinstance(X, MultiModalView) else X
        scores, _ = predict(self.state_, [np.atleast_2d(np.asarray(b, dtype=np.float64))
                                          for b in blocks])
        return scores

    def predict(self, X):
        return threshold_scores(self.decision_function(X))

    def transductive_predict(self):
        """Labels for the unlabeled rows seen during ``fit``."""
        check_is_fitted(self, "state_")
        return threshold_scores(self.transductive_scores_[self.n_train_:])

    def score(self, X, Y):
        """One minus the Hamming loss."""
        return 1.0 - hamming_loss(self.predict(X), Y)


class BinaryRelevanceRidge(MultiOutputMixin, BaseEstimator):
    """One ridge regression per label, thresholded at 0.5.

    The shared penalty is picked from ``lambdas`` by holdout Hamming loss.
    """

    def __init__(self, lambdas=BR_LAMBDAS, holdout_fraction=0.1, random_state=0):
        self.lambdas = lambdas
        self.holdout_fraction = holdout_fraction
        self.random_state = random_state

    def fit(self, X, Y):
        X = check_array(X, dtype=np.float64)
        Y = check_array(Y, dtype=np.float64, ensure_2d=False)
        model = binary_relevance_fit(X, Y, self.lambdas, self.holdout_fraction,
                                     self.random_state)
        self.coef_ = model["W"]
        self.lambda_ = model["lambda"]
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        scores, _ = binary_relevance_predict({"W": self.coef_}, X)
        return scores

    def predict(self, X):
        return threshold_scores(self.decision_function(X))

    def score(self, X, Y):
        return 1.0 - hamming_loss(self.predict(X), Y)
