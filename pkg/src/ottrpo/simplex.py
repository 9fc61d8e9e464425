"""Dense-tableau two-phase simplex with Bland's anti-cycling rule.

Meant for the tiny exact LPs in this package (transport problems between
action distributions and the certification LP), where exactness and
independence from the dual solver matter more than speed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

PIVOT_TOL = 1e-10
MAX_PIVOTS = 100_000


class LpError(RuntimeError):
    pass


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray]
    fun: Optional[float]
    n_pivots: int = 0


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])
    basis[row] = col


def _run(T, basis, n_cols, tol):
    """Minimise the objective in the last row of ``T`` over columns ``< n_cols``."""
    pivots = 0
    m = T.shape[0] - 1
    while True:
        reduced = T[-1, :n_cols]
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            return "optimal", pivots
        col = int(candidates[0])  # Bland: lowest index enters
        column = T[:m, col]
        positive = np.flatnonzero(column > tol)
        if positive.size == 0:
            return "unbounded", pivots
        ratios = T[positive, -1] / column[positive]
        best = ratios.min()
        ties = positive[ratios <= best + tol * max(1.0, abs(best))]
        # Bland: among tied rows, the one whose basic variable has the lowest index leaves
        row = int(ties[np.argmin(basis[ties])])
        _pivot(T, basis, row, col)
        pivots += 1
        if pivots > MAX_PIVOTS:
            raise LpError("simplex pivot limit exceeded")


def linprog_min(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol=PIVOT_TOL) -> LpResult:
    """Minimise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # Rows: [A_ub | I] for slacks, then [A_eq | 0]; flip rows with negative rhs.
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    n_struct = n + m_ub
    basis = np.full(m, -1, dtype=int)
    for i in range(m_ub):
        if not flip[i]:
            basis[i] = n + i
    needs_art = np.flatnonzero(basis < 0)
    n_art = needs_art.size
    T = np.zeros((m + 1, n_struct + n_art + 1))
    T[:m, :n_struct] = A
    T[:m, -1] = b
    for k, i in enumerate(needs_art):
        T[i, n_struct + k] = 1.0
        basis[i] = n_struct + k

    pivots = 0
    if n_art:
        # Phase I: minimise the sum of artificials (objective row priced out).
        T[-1, n_struct:n_struct + n_art] = 1.0
        for i in needs_art:
            T[-1] -= T[i]
        status, k = _run(T, basis, n_struct + n_art, tol)
        pivots += k
        if -T[-1, -1] > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
            return LpResult("infeasible", None, None, pivots)
        keep = np.ones(m + 1, bool)
        for i in range(m):
            if basis[i] >= n_struct:
                nonzero = np.flatnonzero(np.abs(T[i, :n_struct]) > tol)
                if nonzero.size:
                    _pivot(T, basis, i, int(nonzero[0]))
                    pivots += 1
                else:
                    keep[i] = False  # redundant equality
        T = np.delete(T[keep], np.s_[n_struct:n_struct + n_art], axis=1)
        basis = basis[keep[:-1]]

    # Phase II
    T[-1] = 0.0
    T[-1, :n] = c
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    status, k = _run(T, basis, n_struct, tol)
    pivots += k
    if status == "unbounded":
        return LpResult("unbounded", None, None, pivots)
    x_full = np.zeros(n_struct)
    x_full[basis] = T[:-1, -1]
    x = np.clip(x_full[:n], 0.0, None)
    return LpResult("optimal", x, float(c @ x), pivots)


def linprog_max(c, **kwargs) -> LpResult:
    res = linprog_min(-np.asarray(c, float), **kwargs)
    if res.fun is not None:
        res.fun = -res.fun
    return res
