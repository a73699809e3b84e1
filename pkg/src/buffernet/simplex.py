"""Dense two-phase simplex for the small certificate linear programs.

Problem sizes here are tiny (tens of variables), so a dense tableau with
Bland's anti-cycling rule is plenty: deterministic, dependency-free, and
finite-terminating.  Solves ``min c @ x  s.t.  A x <= b,  x >= lower``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PIVOT_TOL = 1e-9


class LpInfeasible(RuntimeError):
    """No point satisfies the constraints."""


class LpUnbounded(RuntimeError):
    """The objective decreases without bound over the feasible set."""


class SimplexStalled(RuntimeError):
    """Iteration limit hit; numerical trouble (Bland's rule cannot cycle)."""


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    iterations: int


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    colvals = tableau[:, col].copy()
    colvals[row] = 0.0
    tableau -= np.outer(colvals, tableau[row])
    basis[row] = col


def _run_simplex(
    tableau: np.ndarray,
    basis: np.ndarray,
    cost: np.ndarray,
    max_iter: int,
) -> int:
    """Minimize ``cost`` over the tableau in place; returns iteration count.

    Entering variable: lowest index with negative reduced cost; leaving
    variable: lowest basis index among the minimum-ratio rows (Bland).
    """
    m = tableau.shape[0]
    for it in range(max_iter):
        reduced = cost - cost[basis] @ tableau[:, :-1]
        reduced[basis] = 0.0
        entering_candidates = np.nonzero(reduced < -_PIVOT_TOL)[0]
        if entering_candidates.size == 0:
            return it
        col = int(entering_candidates[0])
        colvals = tableau[:, col]
        rows = np.nonzero(colvals > _PIVOT_TOL)[0]
        if rows.size == 0:
            raise LpUnbounded("no blocking constraint for entering variable")
        ratios = tableau[rows, -1] / colvals[rows]
        best = ratios.min()
        ties = rows[ratios <= best + _PIVOT_TOL * (1.0 + abs(best))]
        row = int(ties[np.argmin(basis[ties])])
        _pivot(tableau, basis, row, col)
    raise SimplexStalled(f"simplex did not terminate in {max_iter} iterations")


def solve_lp(
    c: np.ndarray,
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    lower: np.ndarray | float = 0.0,
    max_iter: int = 20000,
) -> LpResult:
    """Solve ``min c @ x  s.t.  a_ub @ x <= b_ub,  x >= lower``.

    Raises :class:`LpInfeasible` / :class:`LpUnbounded` accordingly.
    """
    c = np.asarray(c, dtype=float)
    a = np.atleast_2d(np.asarray(a_ub, dtype=float))
    b = np.asarray(b_ub, dtype=float)
    n = c.size
    m = a.shape[0]
    if a.shape != (m, n) or b.shape != (m,):
        raise ValueError(f"inconsistent LP shapes: c {c.shape}, A {a.shape}, b {b.shape}")
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy()

    # shift to y = x - lower >= 0
    rhs = b - a @ lower

    # equality form: a y + I sl = rhs; flip rows with negative rhs and give
    # them artificial variables so the starting basis is the identity
    neg = rhs < 0
    a_eq = a.copy()
    rhs_eq = rhs.copy()
    slack = np.eye(m)
    a_eq[neg] *= -1.0
    rhs_eq[neg] *= -1.0
    slack[neg] *= -1.0

    art_rows = np.nonzero(neg)[0]
    n_art = art_rows.size
    art = np.zeros((m, n_art))
    for k, i in enumerate(art_rows):
        art[i, k] = 1.0

    tableau = np.hstack([a_eq, slack, art, rhs_eq[:, None]])
    n_total = n + m + n_art
    basis = np.empty(m, dtype=int)
    basis[:] = n + np.arange(m)  # slacks
    basis[art_rows] = n + m + np.arange(n_art)  # artificials

    iters = 0
    if n_art:
        phase1 = np.zeros(n_total)
        phase1[n + m :] = 1.0
        iters += _run_simplex(tableau, basis, phase1, max_iter)
        resid = float(phase1[basis] @ tableau[:, -1])
        if resid > 1e-7:
            raise LpInfeasible(f"phase-1 residual {resid:.3e}")
        # drive leftover artificials out of the basis
        for i in range(m):
            if basis[i] >= n + m:
                pivot_cols = np.nonzero(np.abs(tableau[i, : n + m]) > _PIVOT_TOL)[0]
                if pivot_cols.size:
                    _pivot(tableau, basis, i, int(pivot_cols[0]))
                else:
                    tableau[i, :] = 0.0  # redundant row
                    basis[i] = n + m  # keep a harmless artificial marker
        tableau = np.hstack([tableau[:, : n + m], tableau[:, -1:]])
        keep = basis < n + m
        tableau = tableau[keep]
        basis = basis[keep]

    cost = np.zeros(n + m)
    cost[:n] = c
    iters += _run_simplex(tableau, basis, cost, max_iter)

    y = np.zeros(n + m)
    y[basis] = tableau[:, -1]
    x = y[:n] + lower
    return LpResult(x=x, objective=float(c @ x), iterations=iters)
