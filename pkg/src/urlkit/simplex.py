"""Dense two-phase primal simplex with Bland's anti-cycling rule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9


class Infeasible(ValueError):
    pass


class Unbounded(ValueError):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    pivots: int
    basis: list
    multipliers: np.ndarray


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])
    basis[row] = col


def _run(T, basis, allowed, tol, max_pivots, bounded=False):
    """Bland's rule on tableau ``T`` (last row reduced costs, last column rhs).

    With ``bounded`` the objective is known to be bounded below, so a column
    without positive entries can only be rounding noise and is skipped.
    """
    m = T.shape[0] - 1
    pivots = 0
    while True:
        costs = T[m, :-1]
        entering = -1
        for j in np.flatnonzero(costs < -tol):
            if allowed[j]:
                entering = int(j)
                break
        if entering < 0:
            return pivots
        column = T[:m, entering]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            if bounded:
                allowed[entering] = False
                continue
            raise Unbounded(f"column {entering} is unbounded")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, abs(best))]
        leave = int(min(tied, key=lambda r: basis[r]))
        _pivot(T, basis, leave, entering)
        pivots += 1
        if max_pivots is not None and pivots > max_pivots:
            raise RuntimeError("simplex pivot limit reached")


def _phase_two(T, basis, c, tol, max_pivots):
    n = T.shape[1] - 1
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r, j in enumerate(basis):
        T[-1] -= c[j] * T[r]
    return _run(T, basis, np.ones(n, dtype=bool), tol, max_pivots)


def simplex_min(c, A, b, basis=None, tol=PIVOT_TOL, max_pivots=None) -> SimplexResult:
    """Minimize ``c @ x`` subject to ``A @ x == b`` and ``x >= 0``.

    ``basis`` may name a feasible starting basis (one column per row); otherwise a
    phase-one problem over artificial variables finds one.  The result carries the
    simplex multipliers ``y`` (solving ``B^T y = c_B``), which are the optimal dual
    variables.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign
    pivots = 0

    if basis is not None:
        basis = [int(j) for j in basis]
        if len(basis) != m:
            raise ValueError("starting basis needs one column per row")
        B = A[:, basis]
        T = np.zeros((m + 1, n + 1))
        T[:m, :n] = np.linalg.solve(B, A)
        T[:m, -1] = np.linalg.solve(B, b)
        if T[:m, -1].min(initial=0.0) < -tol:
            raise Infeasible("starting basis is not feasible")
        T[:m, -1] = np.maximum(T[:m, -1], 0.0)
        rows = list(range(m))
    else:
        # phase one: artificial basis, minimize the sum of artificials
        T1 = np.zeros((m + 1, n + m + 1))
        T1[:m, :n] = A
        T1[:m, n:n + m] = np.eye(m)
        T1[:m, -1] = b
        T1[m, :n] = -A.sum(axis=0)
        T1[m, -1] = -b.sum()
        basis = list(range(n, n + m))
        allowed = np.ones(n + m, dtype=bool)
        pivots = _run(T1, basis, allowed, tol, max_pivots, bounded=True)
        if -T1[m, -1] > 1e3 * tol * max(1.0, np.abs(b).max(initial=0.0)):
            raise Infeasible("no feasible point")
        # drive remaining artificials out of the basis, dropping redundant rows
        rows = []
        for r in range(m):
            if basis[r] >= n:
                nz = np.flatnonzero(np.abs(T1[r, :n]) > tol)
                if nz.size:
                    _pivot(T1, basis, r, int(nz[0]))
                    pivots += 1
                    rows.append(r)
            else:
                rows.append(r)
        T = np.zeros((len(rows) + 1, n + 1))
        T[:-1, :n] = T1[rows, :n]
        T[:-1, -1] = T1[rows, -1]
        basis = [basis[r] for r in rows]

    pivots += _phase_two(T, basis, c, tol, max_pivots)
    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    y = np.zeros(m)
    y[rows] = np.linalg.solve(A[np.ix_(rows, basis)].T, c[basis])
    return SimplexResult(x, float(c @ x), pivots, list(basis), y * sign)
