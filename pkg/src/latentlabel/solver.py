"""Alternating minimization of the latent-subspace multi-label objective.

The objective over modalities ``X_i`` (all ``n + m`` rows), labels ``Y``
(withheld rows zero) and training prefix mask ``J`` is::

    F(U, P, V) = sum_i ( ||X_i U_i - P||_F^2 + alpha ||U_i||_F^2 )
                 + ||J (Y - P V)||_F^2 + beta ||V||_1

Each outer iteration updates every ``U_i``, solves the ``V`` lasso
subproblem with FISTA, then updates ``P``.  With ``block_updates="exact"``
(the default) the ``U`` and ``P`` blocks are minimized in closed form,
which is the limit of running their gradient steps to convergence.  With
``block_updates="gradient"`` they take a fixed number of Armijo-backtracked
gradient steps instead.  Either way every block step is a descent step, so
the recorded objective is nonincreasing.

Gradients carry the exact factor 2 of the squared-norm terms.  Because
the ``U`` and ``P`` blocks are quadratic, the Armijo test is evaluated on
the closed-form decrement ``-rho ||g||^2 + rho^2 q`` rather than on a
difference of two large objective values.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .data_model import ModelState, check_inputs
from .exceptions import DimensionMismatch, InvalidK, LineSearchFailed

__all__ = [
    "SolverConfig",
    "FitTrace",
    "objective",
    "lasso_objective",
    "grad_U",
    "grad_P",
    "grad_V_smooth",
    "shrink",
    "soft_threshold",
    "update_U",
    "solve_V_fista",
    "update_P",
    "RidgeFactor",
    "solve_U_exact",
    "solve_P_exact",
    "pca_scores",
    "init_state",
    "fit",
    "predict",
    "predict_transductive",
    "threshold_scores",
]

ARMIJO_C = 1e-4
MIN_STEP = 1e-18


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 200
    outer_rel_tol: float = 1e-6
    fista_max_iters: int = 500
    fista_rel_tol: float = 1e-8
    backtrack_shrink: float = 0.5
    backtrack_init_step: float = 1.0
    u_steps: int = 5
    p_steps: int = 5
    block_updates: str = "exact"
    seed: int = 0

    def __post_init__(self):
        if not (self.outer_rel_tol > 0 and self.fista_rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.backtrack_shrink < 1:
            raise ValueError("backtrack_shrink must lie in (0, 1)")
        if not self.backtrack_init_step > 0:
            raise ValueError("backtrack_init_step must be positive")
        if min(self.max_outer_iters, self.fista_max_iters, self.u_steps, self.p_steps) < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.block_updates not in ("exact", "gradient"):
            raise ValueError("block_updates must be 'exact' or 'gradient'")


@dataclass
class FitTrace:
    objective_per_outer_iter: list = field(default_factory=list)
    fista_iters_per_outer: list = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False
    initial_objective: float = float("nan")

    def to_dict(self, include_time=False):
        doc = {
            "initial_objective": self.initial_objective,
            "objective": list(self.objective_per_outer_iter),
            "fista_iters": list(self.fista_iters_per_outer),
            "converged": self.converged,
        }
        if include_time:
            doc["wall_time"] = self.wall_time
        return doc


def _arrays(view):
    return view.arrays() if hasattr(view, "arrays") else [np.asarray(x) for x in view]


def _sq(a):
    return float(np.vdot(a, a))


def _label_residual(P, V, Y, n_train):
    return Y[:n_train] - P[:n_train] @ V


def objective(state, view, labels):
    """Value of the full objective; withheld label rows do not contribute."""
    Xs = _arrays(view)
    if len(Xs) != len(state.U):
        raise DimensionMismatch(
            f"{len(Xs)} modalities but {len(state.U)} U blocks", where="U")
    total = 0.0
    for X, U in zip(Xs, state.U):
        if X.shape[1] != U.shape[0] or X.shape[0] != state.P.shape[0]:
            raise DimensionMismatch(
                f"X {X.shape}, U {U.shape}, P {state.P.shape}", where="U")
        total += _sq(X @ U - state.P) + state.alpha * _sq(U)
    Y = labels.values
    if Y.shape[0] != state.P.shape[0] or Y.shape[1] != state.V.shape[1]:
        raise DimensionMismatch(f"Y {Y.shape}, P {state.P.shape}, V {state.V.shape}",
                                where="Y")
    total += _sq(_label_residual(state.P, state.V, Y, labels.n_train))
    total += state.beta * float(np.sum(np.abs(state.V)))
    return total


def lasso_objective(V, P, Y, n_train, beta):
    """``||J (Y - P V)||_F^2 + beta ||V||_1``."""
    return _sq(_label_residual(P, V, Y, n_train)) + beta * float(np.abs(V).sum())


def grad_U(X, U, P, alpha):
    """Gradient of ``||X U - P||^2 + alpha ||U||^2`` in ``U``."""
    return 2.0 * (X.T @ (X @ U - P) + alpha * U)


def grad_V_smooth(P, V, Y, n_train):
    """Gradient of ``||J (Y - P V)||^2`` in ``V``."""
    Pt = P[:n_train]
    return 2.0 * Pt.T @ (Pt @ V - Y[:n_train])


def grad_P(Xs, Us, P, V, Y, n_train):
    """Gradient of ``||J (Y - P V)||^2 + sum_i ||X_i U_i - P||^2`` in ``P``."""
    G = np.zeros_like(P)
    for X, U in zip(Xs, Us):
        G -= X @ U - P
    G *= 2.0
    G[:n_train] -= 2.0 * _label_residual(P, V, Y, n_train) @ V.T
    return G


def shrink(x, eps):
    """Soft-threshold: move ``x`` toward zero by ``eps``, zeroing ``[-eps, eps]``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if x > eps:
        return x - eps
    if x < -eps:
        return x + eps
    return 0.0


def soft_threshold(A, eps):
    """Elementwise :func:`shrink` on an array."""
    return np.sign(A) * np.maximum(np.abs(A) - eps, 0.0)


def _armijo_step(g_sq, q, rho0, config):
    """Largest backtracked step meeting the sufficient-decrease test.

    For a quadratic block, the change along ``-g`` is exactly
    ``-rho g_sq + rho^2 q`` with ``q = <g, H g> / 2``.
    """
    if g_sq == 0.0:
        return 0.0
    rho = rho0
    while -rho * g_sq + rho * rho * q > -ARMIJO_C * rho * g_sq:
        rho *= config.backtrack_shrink
        if rho < MIN_STEP:
            raise LineSearchFailed(f"step fell below {MIN_STEP:g} (|g|^2 = {g_sq:.3e})")
    return rho


def _check_finite(name, *arrays):
    for a in arrays:
        if not np.isfinite(a).all():
            raise LineSearchFailed(f"non-finite values in the {name} block")


def update_U(state, view, config=SolverConfig(), steps=None, step_init=None):
    """Backtracked gradient steps on each ``U_i`` with ``P`` held fixed.

    Returns ``(U_list, step_sizes)``; ``step_sizes`` can seed the next call
    through ``step_init``.
    """
    Xs = _arrays(view)
    steps = config.u_steps if steps is None else steps
    P = state.P
    alpha = state.alpha
    new_U, rhos = [], []
    for i, (X, U) in enumerate(zip(Xs, state.U)):
        rho0 = config.backtrack_init_step if step_init is None else step_init[i]
        U = np.array(U)
        for _ in range(steps):
            g = grad_U(X, U, P, alpha)
            _check_finite("U", g)
            g_sq = _sq(g)
            q = _sq(X @ g) + alpha * g_sq
            rho = _armijo_step(g_sq, q, rho0, config)
            if rho == 0.0:
                break
            U = U - rho * g
            rho0 = rho / config.backtrack_shrink
        new_U.append(U)
        rhos.append(rho0)
    return new_U, rhos


def update_P(state, view, labels, config=SolverConfig(), steps=None, step_init=None):
    """Backtracked gradient steps on ``P`` with ``U`` and ``V`` fixed.

    Returns ``(P, step_size)``.
    """
    Xs = _arrays(view)
    steps = config.p_steps if steps is None else steps
    Y, n_train = labels.values, labels.n_train
    V = state.V
    s = len(Xs)
    P = np.array(state.P)
    rho0 = config.backtrack_init_step if step_init is None else step_init
    for _ in range(steps):
        G = grad_P(Xs, state.U, P, V, Y, n_train)
        _check_finite("P", G)
        g_sq = _sq(G)
        q = _sq(G[:n_train] @ V) + s * g_sq
        rho = _armijo_step(g_sq, q, rho0, config)
        if rho == 0.0:
            break
        P = P - rho * G
        rho0 = rho / config.backtrack_shrink
    return P, rho0


class RidgeFactor:
    """Thin SVD of one modality, reused for every exact ``U`` solve.

    ``solve(P)`` returns ``argmin_U ||X U - P||^2 + alpha ||U||^2``; with
    ``alpha = 0`` and a rank-deficient ``X`` it is the minimum-norm solution.
    """

    def __init__(self, X, alpha):
        W, sig, Qt = np.linalg.svd(np.asarray(X, dtype=np.float64), full_matrices=False)
        cutoff = max(X.shape) * np.finfo(float).eps * (sig[0] if sig.size else 0.0)
        keep = sig > cutoff
        self.W = W[:, keep]
        self.Qt = Qt[keep]
        sig = sig[keep]
        self.gain = sig / (sig * sig + alpha)

    def solve(self, P):
        return self.Qt.T @ (self.gain[:, None] * (self.W.T @ P))


def solve_U_exact(view, P, alpha, factors=None):
    """Exact minimizer of every ``U_i`` block for fixed ``P``."""
    Xs = _arrays(view)
    if factors is None:
        factors = [RidgeFactor(X, alpha) for X in Xs]
    return [f.solve(P) for f in factors]


def solve_P_exact(state, view, labels):
    """Exact minimizer of the ``P`` block.

    Training rows solve ``p (V V^T + s I) = y V^T + sum_i x_i U_i``;
    withheld rows are the mean of the modality projections.
    """
    Xs = _arrays(view)
    s = len(Xs)
    proj = Xs[0] @ state.U[0]
    for X, U in zip(Xs[1:], state.U[1:]):
        proj = proj + X @ U
    V = state.V
    n_train = labels.n_train
    A = V @ V.T + s * np.eye(V.shape[0])
    rhs = labels.values[:n_train] @ V.T + proj[:n_train]
    P = proj / s
    P[:n_train] = np.linalg.solve(A, rhs.T).T
    return P


def solve_V_fista(P, labels, beta, V0, config=SolverConfig()):
    """FISTA with backtracking on the lasso subproblem in ``V``.

    Works on half the objective, ``(1/2)||J(Y - PV)||^2 + (beta/2)||V||_1``,
    so that the gradient is ``-P^T J (Y - P Gamma)`` and the prox of a
    ``1/l`` step is a soft-threshold at ``beta / (2 l)``.  The best iterate
    seen is returned, so the result never scores worse than ``V0``.

    Returns ``(V, n_iters)``.
    """
    Y, n_train = labels.values, labels.n_train
    Pt = P[:n_train]
    Yt = Y[:n_train]
    PtP = Pt.T @ Pt
    PtY = Pt.T @ Yt

    V_prev = np.array(V0, dtype=np.float64)
    best = V_prev
    h_best = lasso_objective(V_prev, P, Y, n_train, beta)
    h_last = h_best
    gamma = V_prev
    psi = 1.0
    lip = 1.0 / config.backtrack_init_step
    up = 1.0 / config.backtrack_shrink
    it = 0
    for it in range(1, config.fista_max_iters + 1):
        half_grad = PtP @ gamma - PtY
        _check_finite("V", half_grad)
        while True:
            V = soft_threshold(gamma - half_grad / lip, beta / (2.0 * lip))
            D = V - gamma
            d_sq = _sq(D)
            if d_sq == 0.0 or _sq(Pt @ D) <= lip * d_sq:
                break
            lip *= up
            if 1.0 / lip < MIN_STEP:
                raise LineSearchFailed(f"FISTA step fell below {MIN_STEP:g}")
        psi_next = (1.0 + np.sqrt(1.0 + 4.0 * psi * psi)) / 2.0
        gamma = V + ((psi - 1.0) / psi_next) * (V - V_prev)
        psi = psi_next
        h = lasso_objective(V, P, Y, n_train, beta)
        if h <= h_best:
            best, h_best = V, h
        decrease = h_last - h
        V_prev = V
        h_last = h
        if 0.0 <= decrease <= config.fista_rel_tol * max(abs(h), np.finfo(float).tiny):
            break
    return best, it


def pca_scores(X, k):
    """Top-``k`` principal component scores of the column-centered ``X``.

    Components beyond the numerical rank are zero columns.  Each component's
    sign makes its largest-magnitude loading positive.
    """
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    n = Xc.shape[0]
    scores = np.zeros((n, k))
    if Xc.size == 0:
        return scores
    Uu, S, Vt = np.linalg.svd(Xc, full_matrices=False)
    tol = max(Xc.shape) * np.finfo(float).eps * (S[0] if S.size else 0.0)
    rank = int(np.sum(S > tol))
    r = min(rank, k)
    for j in range(r):
        load = Vt[j]
        sign = 1.0 if load[np.argmax(np.abs(load))] >= 0 else -1.0
        scores[:, j] = sign * Uu[:, j] * S[j]
    return scores


def init_state(view, labels, k, alpha=0.0, beta=0.0):
    """Constant ``U_i``/``V`` and PCA-initialized ``P``.

    PCA runs on the concatenation of the raw-feature modalities (all
    modalities if the view has none).
    """
    n = view.n_samples
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= n):
        raise InvalidK(f"k must be an integer in [1, {n}], got {k!r}")
    k = int(k)
    c = labels.n_labels
    U = [np.full((d, k), 1.0 / (d * k)) for d in view.dims]
    V = np.full((k, c), 1.0 / (k * c))
    raw = [m.values for m in view.modalities if m.kind.value == "raw"]
    if not raw:
        raw = view.arrays()
    P = pca_scores(np.hstack(raw), k)
    anchors = [m.anchor_ids for m in view.modalities]
    return ModelState(U, P, V, alpha, beta, k, anchor_ids=anchors)


def fit(view, labels, alpha, beta, k, config=SolverConfig(), init=None, callback=None):
    """Run the alternating scheme until the relative decrease drops below tolerance.

    Returns ``(ModelState, FitTrace)``.  ``callback(iteration, state, value)``
    is invoked after every outer iteration when given.
    """
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be nonnegative")
    check_inputs(view, labels)
    start = time.perf_counter()
    state = init if init is not None else init_state(view, labels, k, alpha, beta)
    state = state.replace(alpha=alpha, beta=beta)
    Xs = view.arrays()
    trace = FitTrace()
    f_prev = objective(state, Xs, labels)
    trace.initial_objective = f_prev
    exact = config.block_updates == "exact"
    factors = [RidgeFactor(X, alpha) for X in Xs] if exact else None
    u_steps = None
    p_step = None
    P, V = np.array(state.P), np.array(state.V)
    for it in range(config.max_outer_iters):
        if exact:
            U = solve_U_exact(Xs, P, alpha, factors)
        else:
            U, u_steps = update_U(state, Xs, config, step_init=u_steps)
        state = state.replace(U=U)
        V, n_fista = solve_V_fista(P, labels, beta, V, config)
        state = state.replace(V=V)
        if exact:
            P = solve_P_exact(state, Xs, labels)
        else:
            P, p_step = update_P(state, Xs, labels, config, step_init=p_step)
        state = state.replace(P=P)
        f = objective(state, Xs, labels)
        trace.objective_per_outer_iter.append(f)
        trace.fista_iters_per_outer.append(n_fista)
        if callback is not None:
            callback(it, state, f)
        rel = (f_prev - f) / max(abs(f_prev), np.finfo(float).tiny)
        f_prev = f
        if rel < config.outer_rel_tol:
            trace.converged = True
            break
    trace.wall_time = time.perf_counter() - start
    meta = dict(state.meta)
    meta["n_train"] = labels.n_train
    return state.replace(meta=meta), trace


def threshold_scores(scores):
    """Label 1 strictly above 0.5; exactly 0.5 maps to 0."""
    return (np.asarray(scores) > 0.5).astype(np.int64)


def predict(model, test_modalities):
    """Scores ``(1/s) sum_i z_i U_i V`` and thresholded labels.

    ``test_modalities`` holds one vector per modality (or one 2-D block of
    rows per modality); kernel modalities must already be evaluated against
    the model's anchors.
    """
    zs = [np.asarray(z, dtype=np.float64) for z in test_modalities]
    if len(zs) != model.n_modalities:
        raise DimensionMismatch(
            f"got {len(zs)} modalities, model has {model.n_modalities}", where="z")
    single = zs[0].ndim == 1
    acc = None
    for i, (z, U) in enumerate(zip(zs, model.U)):
        z2 = z[None, :] if z.ndim == 1 else z
        if z2.shape[1] != U.shape[0]:
            raise DimensionMismatch(
                f"modality {i + 1} has {z2.shape[1]} columns, model expects {U.shape[0]}",
                where=f"z{i + 1}")
        term = z2 @ U
        acc = term if acc is None else acc + term
    scores = (acc / len(zs)) @ model.V
    if single:
        scores = scores[0]
    return scores, threshold_scores(scores)


def predict_transductive(model, view):
    """Scores and labels for every row of the view the model was fitted on."""
    if view.n_modalities != model.n_modalities:
        raise DimensionMismatch(
            f"view has {view.n_modalities} modalities, model has {model.n_modalities}",
            where="view")
    return predict(model, view.arrays())
