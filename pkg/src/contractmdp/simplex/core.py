"""Two-phase dense revised simplex with Bland's rule, plus dual reoptimization.

The pivot kernels live in the selected backend (compiled or numpy); this
module owns phase management, artificial handling, refactorization, and the
optimality certificate.  Problems arrive in computational standard form:
maximize c.x subject to A x = b, x >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import get_kernels
from ..errors import NumericalError

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIV_TOL = 1e-11
CHUNK = 256
MAX_ITER = 200_000

_OPTIMAL, _NO_DIRECTION, _ITER_LIMIT, _NUMERIC = 0, 1, 2, 3


@dataclass
class LpState:
    """A solved standard-form LP: basis, basis inverse, and status."""

    A: np.ndarray        # (m, n) Fortran order, artificials removed
    b: np.ndarray
    c: np.ndarray
    basis: np.ndarray    # (m,) int64
    binv: np.ndarray     # (m, m)
    status: str          # 'optimal' | 'infeasible' | 'unbounded'
    kept_rows: np.ndarray = field(default=None)  # map to caller's row ids

    def x(self) -> np.ndarray:
        out = np.zeros(self.A.shape[1])
        xb = self.binv @ self.b
        out[self.basis] = np.maximum(xb, 0.0)
        return out

    def objective(self) -> float:
        return float(self.c @ self.x())

    def duals(self) -> np.ndarray:
        return self.c[self.basis] @ self.binv


def _refactorize(A, basis, binv) -> bool:
    try:
        binv[:] = np.linalg.inv(A[:, basis])
    except np.linalg.LinAlgError:
        return False
    return True


def _run(loop, A, b, c, basis, binv, enter_ok, budget=MAX_ITER):
    """Drive a kernel loop to optimal/no-direction, refactorizing as needed."""
    used = 0
    stalls = 0
    while used < budget:
        status, it = loop(A, b, c, basis, binv, enter_ok,
                          FEAS_TOL, OPT_TOL, PIV_TOL, min(CHUNK, budget - used))
        used += max(it, 1)
        if status in (_OPTIMAL, _NO_DIRECTION):
            return status
        if not _refactorize(A, basis, binv):
            raise NumericalError("simplex basis became singular")
        if status == _NUMERIC:
            stalls = stalls + 1 if it == 0 else 0
            if stalls > 3:
                raise NumericalError("simplex cannot restore feasibility")
    raise NumericalError(f"simplex exceeded {budget} iterations")


def _fortran(A: np.ndarray) -> np.ndarray:
    return np.asfortranarray(A, dtype=np.float64)


def solve_standard(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                   kernels=None) -> LpState:
    """Two-phase solve; returns an LpState whose rows may be a subset of the
    input rows (redundant rows found in phase 1 are dropped)."""
    k = kernels or get_kernels()
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    c = np.array(c, dtype=np.float64)
    m, n = A.shape

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    # phase 1: all-artificial start
    A1 = _fortran(np.hstack([A, np.eye(m)]))
    c1 = np.zeros(n + m)
    c1[n:] = -1.0
    basis = np.arange(n, n + m, dtype=np.int64)
    binv = np.eye(m)
    ok1 = np.zeros(n + m, dtype=np.uint8)
    ok1[:n] = 1
    status = _run(k.primal_loop, A1, b, c1, basis, binv, ok1)
    if status != _OPTIMAL:
        raise NumericalError("phase-1 simplex did not terminate at an optimum")
    xb = binv @ b
    if float(c1[basis] @ np.maximum(xb, 0.0)) < -1e-7:
        return LpState(_fortran(A), b, c, basis, binv, "infeasible",
                       kept_rows=np.arange(m))

    # drive artificials out of the basis; drop redundant rows
    drop = []
    for i in range(m):
        if basis[i] < n:
            continue
        row = binv[i, :] @ A
        cand = np.flatnonzero(np.abs(row) > 1e-9)
        cand = [j for j in cand if j not in set(basis.tolist())]
        if cand:
            j = int(cand[0])
            d = binv @ A1[:, j]
            piv = d[i]
            binv[i, :] /= piv
            col = d.copy()
            col[i] = 0.0
            binv -= np.outer(col, binv[i, :])
            basis[i] = j
        else:
            drop.append(i)
    kept = np.setdiff1d(np.arange(m), np.array(drop, dtype=int))
    if drop:
        A = A[kept]
        b = b[kept]
        basis = basis[kept]
        binv = np.eye(len(kept))
        if not _refactorize(A, basis, binv):
            raise NumericalError("basis singular after dropping redundant rows")

    A2 = _fortran(A)
    ok2 = np.ones(n, dtype=np.uint8)
    status = _run(k.primal_loop, A2, b, c, basis, binv, ok2)
    st = "optimal" if status == _OPTIMAL else "unbounded"
    state = LpState(A2, b, c, basis, binv, st, kept_rows=kept)
    if st == "optimal":
        certify(state, kernels=k)
    return state


def certify(state: LpState, kernels=None) -> None:
    """Verify primal feasibility, Ax=b residual, and dual feasibility.

    One refactorize-and-reoptimize retry; a persistent failure raises, never
    returning an uncertified optimum.
    """
    k = kernels or get_kernels()
    ok = np.ones(state.A.shape[1], dtype=np.uint8)
    for attempt in range(3):
        x = state.x()
        resid = float(np.max(np.abs(state.A @ x - state.b), initial=0.0))
        xb = state.binv @ state.b
        red = state.c - state.duals() @ state.A
        red[state.basis] = 0.0
        if resid <= 1e-7 and xb.min(initial=0.0) >= -1e-7 and red.max(initial=0.0) <= 1e-7:
            return
        if not _refactorize(state.A, state.basis, state.binv):
            raise NumericalError("certification refactorization failed")
        _run(k.primal_loop, state.A, state.b, state.c, state.basis, state.binv, ok)
    raise NumericalError("could not certify LP optimum (numerical instability)")


def reoptimize_rhs(state: LpState, new_b: np.ndarray, kernels=None) -> bool:
    """Dual-simplex reoptimization after a right-hand-side change.

    Returns False when the perturbed LP is infeasible (the basis is left
    dual-feasible, so the sweep may continue probing further cells).
    """
    k = kernels or get_kernels()
    state.b = np.asarray(new_b, dtype=np.float64)
    xb = state.binv @ state.b
    if xb.min(initial=0.0) >= -FEAS_TOL:
        state.status = "optimal"
        return True
    ok = np.ones(state.A.shape[1], dtype=np.uint8)
    status = _run(k.dual_loop, state.A, state.b, state.c, state.basis, state.binv, ok)
    if status == _NO_DIRECTION:
        state.status = "infeasible"
        return False
    state.status = "optimal"
    return True
