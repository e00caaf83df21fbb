"""Slow reference computations used to cross-check the solver.

Nothing here calls into :mod:`latentlabel.solver`; matrix arithmetic is
done with explicit Python loops (or a direct dense solve where a closed
form exists) so that an error in the vectorized code cannot cancel out.
Sizes are meant to stay around 10 x 10 x 10.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch

__all__ = [
    "FiniteDiffSpec",
    "objective_direct",
    "lasso_value_direct",
    "finite_diff_grad",
    "ridge_closed_form",
    "p_closed_form",
    "lasso_cd",
    "zero_solution_threshold",
]


@dataclass(frozen=True)
class FiniteDiffSpec:
    h: float = 1e-5
    scheme: str = "central"

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.scheme != "central":
            raise ValueError("only the central scheme is supported")


def _as_lists(A):
    return np.asarray(A, dtype=np.float64).tolist()


def _matmul(A, B):
    n, inner, m = len(A), len(B), len(B[0]) if B else 0
    if A and len(A[0]) != inner:
        raise DimensionMismatch(f"inner dimensions {len(A[0])} and {inner} differ")
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        Ai = A[i]
        row = out[i]
        for t in range(inner):
            a = Ai[t]
            Bt = B[t]
            for j in range(m):
                row[j] += a * Bt[j]
    return out


def _fro_sq(A):
    return sum(x * x for row in A for x in row)


def lasso_value_direct(V, P, Y, n_train, beta):
    """``sum over training rows (Y - P V)^2 + beta sum |V|`` by loops."""
    P, V, Y = _as_lists(P), _as_lists(V), _as_lists(Y)
    PV = _matmul(P[:n_train], V)
    loss = 0.0
    for i in range(n_train):
        for j in range(len(Y[0])):
            r = Y[i][j] - PV[i][j]
            loss += r * r
    return loss + beta * sum(abs(x) for row in V for x in row)


def objective_direct(state, view, labels):
    """Elementwise evaluation of the full objective."""
    Xs = view.arrays() if hasattr(view, "arrays") else list(view)
    if len(Xs) != len(state.U):
        raise DimensionMismatch(f"{len(Xs)} modalities, {len(state.U)} U blocks")
    P = _as_lists(state.P)
    total = 0.0
    for X, U in zip(Xs, state.U):
        X, U = _as_lists(X), _as_lists(U)
        if len(X) != len(P):
            raise DimensionMismatch(f"X has {len(X)} rows, P has {len(P)}")
        XU = _matmul(X, U)
        for i in range(len(P)):
            for j in range(len(P[0])):
                r = XU[i][j] - P[i][j]
                total += r * r
        total += state.alpha * _fro_sq(U)
    Y = labels.values
    if Y.shape[0] != len(P):
        raise DimensionMismatch(f"Y has {Y.shape[0]} rows, P has {len(P)}")
    total += lasso_value_direct(state.V, state.P, Y, labels.n_train, state.beta)
    return total


def finite_diff_grad(f, at, spec=FiniteDiffSpec()):
    """Central-difference gradient of scalar ``f`` at matrix ``at``."""
    at = np.array(at, dtype=np.float64)
    grad = np.zeros_like(at)
    h = spec.h
    for idx in np.ndindex(at.shape):
        orig = at[idx]
        at[idx] = orig + h
        fp = f(at.copy())
        at[idx] = orig - h
        fm = f(at.copy())
        at[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * h)
    return grad


def ridge_closed_form(X, P, alpha):
    """``(X^T X + alpha I)^{-1} X^T P`` via a dense solve."""
    X = np.asarray(X, dtype=np.float64)
    A = X.T @ X + alpha * np.eye(X.shape[1])
    return np.linalg.solve(A, X.T @ np.asarray(P, dtype=np.float64))


def p_closed_form(Xs, Us, V, Y, n_train):
    """Row-wise minimizer of ``||J(Y - PV)||^2 + sum_i ||X_i U_i - P||^2``.

    Training rows solve ``p (V V^T + s I) = y V^T + sum_i x_i U_i``;
    withheld rows are the mean of the modality projections.
    """
    s = len(Xs)
    V = np.asarray(V, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    proj = sum(np.asarray(X) @ np.asarray(U) for X, U in zip(Xs, Us))
    k = V.shape[0]
    A = V @ V.T + s * np.eye(k)
    P = proj / s
    for i in range(n_train):
        rhs = Y[i] @ V.T + proj[i]
        P[i] = np.linalg.solve(A.T, rhs)
    return P


def zero_solution_threshold(P, labels):
    """Smallest ``beta`` for which ``V = 0`` minimizes the lasso subproblem."""
    P = _as_lists(P)
    Y = labels.values.tolist()
    n_train = labels.n_train
    best = 0.0
    k = len(P[0]) if P else 0
    for a in range(k):
        for j in range(len(Y[0])):
            g = 0.0
            for i in range(n_train):
                g += P[i][a] * Y[i][j]
            best = max(best, abs(2.0 * g))
    return best


def lasso_cd(P, labels, beta, tol=1e-12, max_sweeps=100000):
    """Cyclic coordinate descent with exact soft-threshold coordinate updates."""
    P = _as_lists(P)
    Y = labels.values.tolist()
    n = labels.n_train
    k = len(P[0])
    c = len(Y[0])
    V = [[0.0] * c for _ in range(k)]
    col_sq = [sum(P[i][a] ** 2 for i in range(n)) for a in range(k)]
    # residual R = Y - P V on training rows
    R = [list(Y[i]) for i in range(n)]
    for _ in range(max_sweeps):
        max_change = 0.0
        for j in range(c):
            for a in range(k):
                if col_sq[a] == 0.0:
                    continue
                old = V[a][j]
                rho = sum(P[i][a] * (R[i][j] + P[i][a] * old) for i in range(n))
                # minimize col_sq v^2 - 2 rho v + beta |v|
                if rho > beta / 2.0:
                    new = (rho - beta / 2.0) / col_sq[a]
                elif rho < -beta / 2.0:
                    new = (rho + beta / 2.0) / col_sq[a]
                else:
                    new = 0.0
                if new != old:
                    delta = new - old
                    for i in range(n):
                        R[i][j] -= P[i][a] * delta
                    V[a][j] = new
                    max_change = max(max_change, abs(delta))
        if max_change < tol:
            break
    return np.array(V)
