"""Pure-numpy simplex pivot kernels (fallback for the compiled core).

Both backends implement the same contract:

* ``primal_loop`` runs Bland-rule primal simplex steps on a maximization
  problem in computational standard form (A x = b, x >= 0), updating
  ``basis`` and ``binv`` in place.
* ``dual_loop`` restores primal feasibility after a right-hand-side change,
  keeping dual feasibility (used for the parametric promise sweeps).

Status codes: 0 optimal, 1 unbounded (primal) / infeasible (dual),
2 iteration chunk exhausted, 3 numeric drift (caller refactorizes).
"""

from __future__ import annotations

import numpy as np

OPTIMAL = 0
NO_DIRECTION = 1
ITER_LIMIT = 2
NUMERIC = 3

_DRIFT_TOL = 1e-7


def _pivot(binv: np.ndarray, d: np.ndarray, rr: int) -> None:
    piv = d[rr]
    binv[rr, :] /= piv
    col = d.copy()
    col[rr] = 0.0
    binv -= np.outer(col, binv[rr, :])


def primal_loop(A, b, c, basis, binv, enter_ok, feas_tol, opt_tol, piv_tol, max_iter):
    m, n = A.shape
    enter_ok = np.asarray(enter_ok, dtype=bool)
    it = 0
    while it < max_iter:
        xb = binv @ b
        if xb.min(initial=0.0) < -_DRIFT_TOL:
            return NUMERIC, it
        y = c[basis] @ binv
        red = c - y @ A
        is_basic = np.zeros(n, dtype=bool)
        is_basic[basis] = True
        cand = np.flatnonzero(enter_ok & ~is_basic & (red > opt_tol))
        if cand.size == 0:
            return OPTIMAL, it
        j = int(cand[0])  # Bland: smallest eligible index
        d = binv @ A[:, j]
        pos = d > piv_tol
        if not pos.any():
            return NO_DIRECTION, it
        ratios = np.full(m, np.inf)
        xb_pos = np.maximum(xb, 0.0)
        ratios[pos] = xb_pos[pos] / d[pos]
        theta = ratios.min()
        tie = np.flatnonzero(ratios <= theta + 1e-12 + 1e-9 * theta)
        rr = int(tie[np.argmin(basis[tie])])  # Bland: smallest leaving label
        _pivot(binv, d, rr)
        basis[rr] = j
        it += 1
    return ITER_LIMIT, it


def dual_loop(A, b, c, basis, binv, enter_ok, feas_tol, opt_tol, piv_tol, max_iter):
    m, n = A.shape
    enter_ok = np.asarray(enter_ok, dtype=bool)
    it = 0
    while it < max_iter:
        xb = binv @ b
        viol = np.flatnonzero(xb < -feas_tol)
        if viol.size == 0:
            return OPTIMAL, it
        rr = int(viol[np.argmin(basis[viol])])  # smallest infeasible basic label
        w = binv[rr, :] @ A
        y = c[basis] @ binv
        red = c - y @ A
        is_basic = np.zeros(n, dtype=bool)
        is_basic[basis] = True
        cand = np.flatnonzero(enter_ok & ~is_basic & (w < -piv_tol))
        if cand.size == 0:
            return NO_DIRECTION, it
        ratios = red[cand] / w[cand]
        theta = ratios.min()
        j = int(cand[np.flatnonzero(ratios <= theta + 1e-12 + 1e-9 * abs(theta))[0]])
        d = binv @ A[:, j]
        if abs(d[rr]) < 1e-12:
            return NUMERIC, it
        _pivot(binv, d, rr)
        basis[rr] = j
        it += 1
    return ITER_LIMIT, it
