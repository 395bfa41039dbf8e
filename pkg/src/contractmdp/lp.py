"""Per-cell linear programs over the promise grid and the approximation oracle.

For a step/state/promise cell the relaxed problem optimizes a recommendation
lottery ``alpha``, one contract per recommended action, and a convex
combination ``q_tilde`` of feasible next-step grid promises per (action,
next-state).  After linearization the variables are ``nu_a`` (action
probability), ``gamma[a][s']`` (probability-weighted payment) and
``xi[k][a][s']`` (probability-weighted promise weight); the oracle solves the
LP, discretizes the fractional promises onto the grid, and certifies the
incentive constraints of the rounded tuple.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .model import Instance
from .simplex import get_kernels
from .simplex.core import (FEAS_TOL, LpState, certify, reoptimize_rhs,
                           solve_standard)

GRID_SNAP = 1e-9
MIN_DELTA = 1e-7


@dataclass(frozen=True)
class PromiseGrid:
    """Uniform promise grid {k*delta : 0 <= k <= floor(bound/delta)}."""

    delta: float
    num_points: int

    @classmethod
    def for_bound(cls, delta: float, bound: float) -> "PromiseGrid":
        if delta <= 0:
            raise ValidationError(f"grid step {delta!r} must be positive")
        if delta < MIN_DELTA:
            warnings.warn(
                f"grid step {delta:g} below {MIN_DELTA:g}; clamping", stacklevel=2)
            delta = MIN_DELTA
        return cls(delta, int(math.floor(bound / delta + GRID_SNAP)) + 1)

    @property
    def values(self) -> np.ndarray:
        vals = np.arange(self.num_points) * self.delta
        vals.setflags(write=False)
        return vals

    def value(self, k: int) -> float:
        return float(k * self.delta)

    def index(self, iota: float) -> int:
        k = int(round(iota / self.delta))
        if not 0 <= k < self.num_points or abs(k * self.delta - iota) > GRID_SNAP:
            raise ValidationError(f"promise {iota!r} is not a grid point")
        return k

    def floor_index(self, iota: float) -> int:
        k = int(math.floor(iota / self.delta + GRID_SNAP))
        return min(max(k, 0), self.num_points - 1)

    def ceil_index(self, iota: float) -> int:
        k = int(math.ceil(iota / self.delta - GRID_SNAP))
        return min(max(k, 0), self.num_points - 1)


def grid_for(inst: Instance, delta: float) -> PromiseGrid:
    return PromiseGrid.for_bound(delta, inst.horizon * inst.payment_bound)


def feasible_indices(m_row: np.ndarray) -> np.ndarray:
    """Grid indices with finite table value (the feasible set D^{M,s'})."""
    return np.flatnonzero(np.isfinite(m_row))


# ---------------------------------------------------------------------------
# LP construction


@dataclass(frozen=True)
class CellLayout:
    """Variable layout: nu block, gamma block, then ragged xi blocks."""

    num_actions: int
    states: tuple[int, ...]           # next-states carrying gamma/xi variables
    feas: tuple[np.ndarray, ...]      # grid indices per state in `states`

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def gamma_off(self) -> int:
        return self.num_actions

    def gamma_idx(self, a: int, t: int) -> int:
        return self.gamma_off + a * self.n_states + t

    @property
    def xi_off(self) -> int:
        return self.gamma_off + self.num_actions * self.n_states

    def xi_slice(self, a: int, t: int) -> slice:
        sizes = [len(f) for f in self.feas]
        per_action = sum(sizes)
        start = self.xi_off + a * per_action + sum(sizes[:t])
        return slice(start, start + sizes[t])

    @property
    def n_vars(self) -> int:
        return self.xi_off + self.num_actions * sum(len(f) for f in self.feas)


@dataclass
class LpDescription:
    """Explicit cell LP: objective, rows with senses, and parametric rhs."""

    h: int
    s: int
    iota: float
    grid: PromiseGrid
    layout: CellLayout
    c: np.ndarray
    rows: np.ndarray          # (n_rows, n_vars)
    senses: np.ndarray        # -1 <=, 0 ==, +1 >=
    rhs0: np.ndarray          # rhs = rhs0 + iota * rhs_iota
    rhs_iota: np.ndarray
    row_names: list[str]
    structurally_infeasible: bool = False

    @property
    def rhs(self) -> np.ndarray:
        return self.rhs0 + self.iota * self.rhs_iota

    @property
    def num_variables(self) -> int:
        return self.layout.n_vars


def _cell_rows(inst: Instance, h: int, s: int, delta: float, grid: PromiseGrid,
               m_next: np.ndarray, layout: CellLayout, skip_zero_ic: bool):
    """Rows shared by the full description and the reduced solver form.

    ``h`` is 1-based; ``m_next`` is the (S, K) step-(h+1) table.
    """
    A_n = inst.num_actions
    P = inst.transition[h - 1, s]         # (A, S)
    cost = inst.agent_cost[h - 1, s]      # (A,)
    reward = inst.principal_reward[h - 1, s]  # (S,)
    n = layout.n_vars
    vals = grid.values

    def agent_row(weights: np.ndarray, a: int, cost_of: int) -> np.ndarray:
        """weights[s'] * (gamma[a][s'] - nu_a c(s, cost_of) + sum_k xi * iota_k)."""
        row = np.zeros(n)
        row[a] = -cost[cost_of]
        for t, sp in enumerate(layout.states):
            w = weights[sp]
            if w == 0.0:
                continue
            row[layout.gamma_idx(a, t)] = w
            row[layout.xi_slice(a, t)] = w * vals[layout.feas[t]]
        return row

    rows, senses, rhs0, rhs_i, names = [], [], [], [], []

    honesty = np.zeros(n)
    for a in range(A_n):
        honesty += agent_row(P[a], a, a)
    rows.append(honesty)
    senses.append(+1)
    rhs0.append(-delta)
    rhs_i.append(1.0)
    names.append("honesty_ge")
    rows.append(honesty.copy())
    senses.append(-1)
    rhs0.append(+delta)
    rhs_i.append(1.0)
    names.append("honesty_le")

    for a in range(A_n):
        own = agent_row(P[a], a, a)
        for ahat in range(A_n):
            if ahat == a:
                continue
            row = own - agent_row(P[ahat], a, ahat)
            if skip_zero_ic and np.max(np.abs(row)) <= 0.0:
                continue
            rows.append(row)
            senses.append(+1)
            rhs0.append(0.0)
            rhs_i.append(0.0)
            names.append(f"ic_{a}_{ahat}")

    B = inst.payment_bound
    for a in range(A_n):
        for t in range(layout.n_states):
            row = np.zeros(n)
            row[layout.gamma_idx(a, t)] = 1.0
            row[a] = -B
            rows.append(row)
            senses.append(-1)
            rhs0.append(0.0)
            rhs_i.append(0.0)
            names.append(f"paybound_{a}_{layout.states[t]}")

    for a in range(A_n):
        for t in range(layout.n_states):
            row = np.zeros(n)
            row[layout.xi_slice(a, t)] = 1.0
            row[a] = -1.0
            rows.append(row)
            senses.append(0)
            rhs0.append(0.0)
            rhs_i.append(0.0)
            names.append(f"xidist_{a}_{layout.states[t]}")

    row = np.zeros(n)
    row[:A_n] = 1.0
    rows.append(row)
    senses.append(0)
    rhs0.append(1.0)
    rhs_i.append(0.0)
    names.append("nu_sum")

    objective = np.zeros(n)
    for a in range(A_n):
        objective[a] = float(P[a] @ reward)
        for t, sp in enumerate(layout.states):
            w = P[a, sp]
            if w == 0.0:
                continue
            objective[layout.gamma_idx(a, t)] = -w
            objective[layout.xi_slice(a, t)] = w * m_next[sp][layout.feas[t]]
    return (objective, np.array(rows), np.array(senses, dtype=np.int8),
            np.array(rhs0), np.array(rhs_i), names, honesty)


def build_lp(inst: Instance, h: int, s: int, iota: float, delta: float,
             m_next: np.ndarray) -> LpDescription:
    """Full cell LP with variables over every next state's feasible promises."""
    grid = grid_for(inst, delta)
    feas = tuple(feasible_indices(m_next[sp]) for sp in range(inst.num_states))
    layout = CellLayout(inst.num_actions, tuple(range(inst.num_states)), feas)
    obj, rows, senses, rhs0, rhs_i, names, _ = _cell_rows(
        inst, h, s, delta, grid, m_next, layout, skip_zero_ic=False)
    desc = LpDescription(h, s, iota, grid, layout, obj, rows, senses, rhs0,
                         rhs_i, names,
                         structurally_infeasible=any(len(f) == 0 for f in feas))
    return desc


def dump_lp(desc: LpDescription, path) -> None:
    """Plain-text dump (objective, rows, bounds) for external cross-checks."""
    lo = desc.layout

    def vname(j: int) -> str:
        if j < lo.num_actions:
            return f"nu_{j}"
        if j < lo.xi_off:
            k = j - lo.gamma_off
            return f"gamma_{k // lo.n_states}_{lo.states[k % lo.n_states]}"
        for a in range(lo.num_actions):
            for t in range(lo.n_states):
                sl = lo.xi_slice(a, t)
                if sl.start <= j < sl.stop:
                    return f"xi_{a}_{lo.states[t]}_k{lo.feas[t][j - sl.start]}"
        raise IndexError(j)

    def terms(row: np.ndarray) -> str:
        parts = [f"{row[j]:+.17g} {vname(j)}" for j in np.flatnonzero(row)]
        return " ".join(parts) if parts else "0"

    sym = {-1: "<=", 0: "=", +1: ">="}
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"\\ cell h={desc.h} s={desc.s} iota={desc.iota!r} delta={desc.grid.delta!r}\n")
        f.write("Maximize\n  obj: " + terms(desc.c) + "\n")
        f.write("Subject To\n")
        rhs = desc.rhs
        for i, row in enumerate(desc.rows):
            f.write(f"  {desc.row_names[i]}: {terms(row)} {sym[int(desc.senses[i])]} {rhs[i]:.17g}\n")
        f.write("Bounds\n")
        for j in range(desc.num_variables):
            f.write(f"  0 <= {vname(j)}\n")
        f.write("End\n")


# ---------------------------------------------------------------------------
# solving


INFEASIBLE = "infeasible"


@dataclass
class LpSolution:
    """Optimal (nu, gamma, xi) of a cell LP, certified within 1e-9."""

    nu: np.ndarray        # (A,)
    gamma: np.ndarray     # (A, S) zero outside the layout's states
    xi: list              # xi[a][s'] -> weights aligned with feasible indices
    objective: float


def _standardize(desc_rows, senses, rhs):
    n_rows, n_vars = desc_rows.shape
    ineq = np.flatnonzero(senses != 0)
    A = np.zeros((n_rows, n_vars + len(ineq)))
    A[:, :n_vars] = desc_rows
    for col, i in enumerate(ineq):
        A[i, n_vars + col] = -1.0 if senses[i] > 0 else 1.0
    return A, rhs.copy()


def solve_lp(desc: LpDescription, kernels=None):
    """Solve the full cell LP; returns LpSolution or the INFEASIBLE marker."""
    if desc.structurally_infeasible:
        return INFEASIBLE
    A, b = _standardize(desc.rows, desc.senses, desc.rhs)
    c = np.zeros(A.shape[1])
    c[:desc.num_variables] = desc.c
    state = solve_standard(A, b, c, kernels=kernels)
    if state.status == "infeasible":
        return INFEASIBLE
    if state.status != "optimal":
        raise NumericalError("cell LP reported unbounded; the model bounds payments")
    x = state.x()
    lo = desc.layout
    S = max(lo.states) + 1 if lo.states else 0
    nu = np.maximum(x[:lo.num_actions], 0.0)
    gamma = np.zeros((lo.num_actions, S))
    xi = [[np.zeros(0)] * S for _ in range(lo.num_actions)]
    for a in range(lo.num_actions):
        for t, sp in enumerate(lo.states):
            gamma[a, sp] = x[lo.gamma_idx(a, t)]
            xi[a][sp] = np.maximum(x[lo.xi_slice(a, t)], 0.0)
    return LpSolution(nu, gamma, xi, state.objective())


@dataclass
class RelaxedSolution:
    """(alpha, contracts, q_tilde) recovered from an LP solution."""

    alpha: np.ndarray     # (A,)
    pays: np.ndarray      # (A, S)
    q_tilde: list         # q_tilde[a][s'] weights over feasible grid indices
    q: np.ndarray         # (A, S) expected next promise
    y: np.ndarray         # (A, S) expected next table value


def lp_to_relaxed(sol: LpSolution, m_next: np.ndarray, grid: PromiseGrid) -> RelaxedSolution:
    A_n, S = sol.gamma.shape
    alpha = sol.nu.copy()
    pays = np.zeros((A_n, S))
    q = np.zeros((A_n, S))
    y = np.zeros((A_n, S))
    q_tilde = [[None] * S for _ in range(A_n)]
    for a in range(A_n):
        for sp in range(S):
            feas = feasible_indices(m_next[sp])
            if alpha[a] > 0.0:
                pays[a, sp] = sol.gamma[a, sp] / alpha[a]
                w = sol.xi[a][sp] / alpha[a]
            else:
                w = np.zeros(len(feas))
                if len(feas):
                    w[0] = 1.0  # zero-probability actions park on promise 0
            q_tilde[a][sp] = w
            if len(feas):
                q[a, sp] = float(w @ grid.values[feas])
                y[a, sp] = float(w @ m_next[sp][feas])
    return RelaxedSolution(alpha, pays, q_tilde, q, y)


def discretize(q: np.ndarray, m_next: np.ndarray, grid: PromiseGrid) -> np.ndarray:
    """Round each expected promise to the feasible grid point with the largest
    table value among those strictly within one grid step; ties go down."""
    A_n, S = q.shape
    zk = np.zeros((A_n, S), dtype=np.int64)
    for a in range(A_n):
        for sp in range(S):
            zk[a, sp] = _discretize_one(q[a, sp], m_next[sp], grid)
    return zk


def _discretize_one(qv: float, m_row: np.ndarray, grid: PromiseGrid) -> int:
    k = int(round(qv / grid.delta))
    if 0 <= k < grid.num_points and abs(k * grid.delta - qv) <= GRID_SNAP:
        if not np.isfinite(m_row[k]):
            raise NumericalError(
                f"promise {qv!r} rounds onto an infeasible grid point (solver bug)")
        return k
    lo = int(math.floor(qv / grid.delta))
    cands = [k for k in (lo, lo + 1)
             if 0 <= k < grid.num_points
             and abs(k * grid.delta - qv) < grid.delta
             and np.isfinite(m_row[k])]
    if not cands:
        raise NumericalError(
            f"no feasible grid point within {grid.delta!r} of promise {qv!r}")
    best = cands[0]
    for k in cands[1:]:
        if m_row[k] > m_row[best]:
            best = k
    return best


# ---------------------------------------------------------------------------
# the sweep (shared by the oracle and the dynamic program)


def agent_one_step(inst: Instance, h: int, s: int, pays: np.ndarray,
                   znext: np.ndarray) -> np.ndarray:
    """T[a, x] = sum_s' P(s'|s,x) (pay_a(s') + znext_a(s')) - c(s, x)."""
    P = inst.transition[h - 1, s]
    cost = inst.agent_cost[h - 1, s]
    return (pays + znext) @ P.T - cost[None, :]


def relaxed_honesty_value(inst, h, s, alpha, pays, znext) -> float:
    T = agent_one_step(inst, h, s, pays, znext)
    return float(alpha @ np.diag(T))


def relaxed_ic_violation(inst, h, s, alpha, pays, znext, tol=0.0) -> float:
    """Largest incentive-constraint violation across recommended actions."""
    T = agent_one_step(inst, h, s, pays, znext)
    worst = 0.0
    for a in np.flatnonzero(alpha > tol):
        worst = max(worst, float(T[a].max() - T[a, a]))
    return worst


@dataclass
class CellSolution:
    feasible: bool
    value: float = -math.inf
    alpha: np.ndarray = None
    pays: np.ndarray = None      # (A, S)
    zk: np.ndarray = None        # (A, S) grid indices
    q: np.ndarray = None
    y: np.ndarray = None
    q_tilde: list = None         # sparse: list per (a) of dict s' -> (idx, w)
    ic_defect: float = 0.0
    repaired: bool = False


class CellSweep:
    """Solves one (step, state) column of cells for increasing grid promises.

    The LP matrix is built once; moving from promise k to k+1 only shifts the
    two honesty bounds, so each cell is a dual-simplex reoptimization.  Cells
    must be requested with non-decreasing k.
    """

    def __init__(self, inst: Instance, h: int, s: int, grid: PromiseGrid,
                 m_next: np.ndarray, kernels=None):
        self.inst = inst
        self.h = h
        self.s = s
        self.grid = grid
        self.m_next = m_next
        self.kernels = kernels or get_kernels()

        P = inst.transition[h - 1, s]
        active = tuple(int(sp) for sp in np.flatnonzero(P.max(axis=0) > 0.0))
        feas = tuple(feasible_indices(m_next[sp]) for sp in active)
        self.layout = CellLayout(inst.num_actions, active, feas)
        self.dead = any(len(f) == 0 for f in feas)
        if not self.dead:
            (obj, rows, senses, rhs0, rhs_i, names, honesty) = _cell_rows(
                inst, h, s, grid.delta, grid, m_next, self.layout, skip_zero_ic=True)
            self.obj = obj
            self.honesty_row = honesty
            A, _ = _standardize(rows, senses, rhs0)
            self.A_std = A
            self.rhs0 = rhs0
            self.rhs_i = rhs_i
            self.c_std = np.zeros(A.shape[1])
            self.c_std[:self.layout.n_vars] = obj
        self.state: LpState | None = None
        self._duals = None
        self._exhausted = False
        self._last_k = -1
        self._pivots_since_refactor = 0
        self._hi = None

    # -- the honesty-range LP used for the prefix assertion ----------------

    def max_honest_value(self) -> float:
        """Largest aggregate agent value achievable under the cell's
        non-honesty constraints; -inf when even those are infeasible."""
        if self.dead:
            return -math.inf
        if self._hi is not None:
            return self._hi
        A, b = _standardize_rows_tail(self.A_std, self.rhs0, drop=2)
        c = np.zeros(A.shape[1])
        c[:self.layout.n_vars] = self.honesty_row
        st = solve_standard(A, b, c, kernels=self.kernels)
        if st.status == "infeasible":
            self._hi = -math.inf
        elif st.status != "optimal":
            raise NumericalError("honesty-range LP unbounded")
        else:
            self._hi = st.objective()
        return self._hi

    def last_feasible_k(self) -> int:
        """Largest grid index whose honesty window can intersect the
        achievable agent-value range."""
        hi = self.max_honest_value()
        if hi == -math.inf:
            return -1
        return min(self.grid.num_points - 1,
                   self.grid.floor_index(hi + self.grid.delta))

    # -- per-cell solves ----------------------------------------------------

    def solve_k(self, k: int) -> CellSolution:
        if self.dead:
            return CellSolution(False)
        if k <= self._last_k:
            raise ValueError("cells must be swept with increasing k")
        self._last_k = k
        if self._exhausted:
            return CellSolution(False)
        b = self.rhs0 + self.grid.value(k) * self.rhs_i
        if self.state is None:
            A = self.A_std
            self.state = solve_standard(A, b, self.c_std, kernels=self.kernels)
            if self.state.kept_rows is not None and len(self.state.kept_rows) != len(b):
                self._kept = self.state.kept_rows
            else:
                self._kept = None
            if self.state.status == "infeasible":
                self._exhausted = True
                return CellSolution(False)
            if self.state.status != "optimal":
                raise NumericalError("cell LP unbounded")
            self._duals = None
        else:
            bb = b if self._kept is None else b[self._kept]
            before = self.state.basis.copy()
            if not reoptimize_rhs(self.state, bb, kernels=self.kernels):
                self._exhausted = True
                return CellSolution(False)
            if not np.array_equal(before, self.state.basis):
                self._duals = None
                self._pivots_since_refactor += 1
                if self._pivots_since_refactor >= 128:
                    certify(self.state, kernels=self.kernels)
                    self._pivots_since_refactor = 0
        return self._extract()

    def _extract(self) -> CellSolution:
        st = self.state
        lo = self.layout
        if self._duals is None:
            self._duals = st.c[st.basis] @ st.binv
        xb = st.binv @ st.b
        value = float(self._duals @ st.b)
        A_n = self.inst.num_actions
        S = self.inst.num_states
        alpha = np.zeros(A_n)
        gamma = np.zeros((A_n, lo.n_states))
        nact = lo.n_states
        sizes = np.array([len(f) for f in lo.feas])
        per_action = int(sizes.sum())
        xi_entries = [[] for _ in range(A_n * nact)]
        xi_off = lo.xi_off
        offs = np.concatenate([[0], np.cumsum(sizes)])
        for pos, var in enumerate(st.basis):
            v = xb[pos]
            if v <= 0.0 or var >= lo.n_vars:
                continue
            if var < A_n:
                alpha[var] = v
            elif var < xi_off:
                idx = var - A_n
                gamma[idx // nact, idx % nact] = v
            else:
                idx = var - xi_off
                a, rem = divmod(idx, per_action)
                t = int(np.searchsorted(offs, rem, side="right")) - 1
                xi_entries[a * nact + t].append((int(rem - offs[t]), float(v)))

        ssum = alpha.sum()
        if abs(ssum - 1.0) > 1e-7:
            certify(st, kernels=self.kernels)
            return self._extract_after_certify()
        alpha /= ssum

        pays = np.zeros((A_n, S))
        q = np.zeros((A_n, S))
        y = np.zeros((A_n, S))
        zk = np.zeros((A_n, S), dtype=np.int64)
        q_tilde = [dict() for _ in range(A_n)]
        vals = self.grid.values
        for a in range(A_n):
            if alpha[a] <= 1e-12:
                alpha[a] = 0.0
                for t, sp in enumerate(lo.states):
                    q_tilde[a][sp] = (np.array([0]), np.array([1.0]))
                continue
            for t, sp in enumerate(lo.states):
                pays[a, sp] = max(0.0, gamma[a, t] / alpha[a])
                ent = xi_entries[a * nact + t]
                feas = lo.feas[t]
                if ent:
                    ks = np.array([feas[i] for i, _ in ent])
                    ws = np.array([w for _, w in ent]) / alpha[a]
                    tot = ws.sum()
                    if tot > 0:
                        ws /= tot
                else:
                    ks = np.array([feas[0]])
                    ws = np.array([1.0])
                q_tilde[a][sp] = (ks, ws)
                q[a, sp] = float(ws @ vals[ks])
                y[a, sp] = float(ws @ self.m_next[sp][ks])
                zk[a, sp] = _discretize_one(q[a, sp], self.m_next[sp], self.grid)

        sol = CellSolution(True, value, alpha, pays, zk, q, y, q_tilde)
        self._repair_ic(sol)
        return sol

    def _extract_after_certify(self) -> CellSolution:
        self._duals = None
        return self._extract()

    def _repair_ic(self, sol: CellSolution) -> None:
        """Restore exact incentive compatibility lost to promise rounding.

        Rounding each expected promise independently can break the incentive
        constraint the LP enforced on the fractional solution.  Flipping some
        rounded promises to their other neighbour often restores it; a flip
        is admissible only while the aggregate rounded value stays at or
        above the LP optimum so the oracle sandwich survives.
        """
        inst, h, s = self.inst, self.h, self.s
        vals = self.grid.values
        znext = vals[sol.zk]
        viol = relaxed_ic_violation(inst, h, s, sol.alpha, sol.pays, znext)
        if viol <= 1e-10:
            sol.ic_defect = 0.0
            return
        P = inst.transition[h - 1, s]
        slack_budget = 0.0
        choices = {}
        for a in np.flatnonzero(sol.alpha > 0):
            frac = []
            for sp in self.layout.states:
                qv = sol.q[a, sp]
                k = int(round(qv / self.grid.delta))
                if abs(k * self.grid.delta - qv) <= GRID_SNAP:
                    continue
                lo_k = int(math.floor(qv / self.grid.delta))
                hi_k = lo_k + 1
                if (np.isfinite(self.m_next[sp][lo_k])
                        and hi_k < self.grid.num_points
                        and np.isfinite(self.m_next[sp][hi_k])):
                    frac.append((sp, lo_k, hi_k))
            base_z = znext[a].copy()
            best = None
            if len(frac) <= 14:
                for mask in range(1 << len(frac)):
                    z_try = base_z.copy()
                    for bit, (sp, lo_k, hi_k) in enumerate(frac):
                        if mask >> bit & 1:
                            cur = sol.zk[a, sp]
                            z_try[sp] = vals[lo_k if cur == hi_k else hi_k]
                    T = (sol.pays[a] + z_try) @ P.T - inst.agent_cost[h - 1, s]
                    if T.max() - T[np.arange(len(T)) == 0 if False else slice(None)][int(a)] > 1e-11:
                        continue
                    zi = np.array([int(round(zv / self.grid.delta)) for zv in z_try])
                    mz = np.array([self.m_next[sp][zi[sp]] for sp in range(len(z_try))])
                    slack = float(sol.alpha[a] * (P[a] @ (mz - _dense_y(sol, a, len(z_try)))))
                    key = (slack, -bin(mask).count("1"), -mask)
                    if best is None or key > best[0]:
                        best = (key, mask, z_try, zi, slack)
            if best is None:
                sol.ic_defect = viol
                return
            choices[int(a)] = best
            slack_budget += best[4]
        if slack_budget < -1e-12:
            sol.ic_defect = viol
            return
        for a, (_, _, z_try, zi, _) in choices.items():
            sol.zk[a] = zi
        znext = vals[sol.zk]
        sol.ic_defect = relaxed_ic_violation(inst, h, s, sol.alpha, sol.pays, znext)
        sol.repaired = True


def _dense_y(sol: CellSolution, a: int, S: int) -> np.ndarray:
    out = np.zeros(S)
    out[:] = sol.y[a]
    return out


def _standardize_rows_tail(A_std: np.ndarray, rhs0: np.ndarray, drop: int):
    """Standard-form arrays with the first `drop` rows (and their slack
    columns) removed; used for the honesty-range LP."""
    # the first two rows are >= and <= with dedicated slack columns appended
    # in row order; locate them by their unit entries.
    m, n = A_std.shape
    keep_rows = np.arange(drop, m)
    drop_cols = []
    for i in range(drop):
        col = np.flatnonzero(A_std[i, :] != 0.0)
        for j in col:
            if np.count_nonzero(A_std[:, j]) == 1 and abs(abs(A_std[i, j]) - 1.0) < 1e-15:
                drop_cols.append(j)
    keep_cols = np.setdiff1d(np.arange(n), np.array(drop_cols, dtype=int))
    return A_std[np.ix_(keep_rows, keep_cols)], rhs0[keep_rows].copy()


# ---------------------------------------------------------------------------
# the approximation oracle


@dataclass
class OracleResult:
    """(alpha, contracts, rounded promises, value) for one cell."""

    feasible: bool
    value: float
    alpha: np.ndarray = None
    pays: np.ndarray = None
    z: np.ndarray = None          # (A, S) promise values
    zk: np.ndarray = None         # (A, S) grid indices
    q: np.ndarray = None          # pre-discretization promises
    y: np.ndarray = None
    q_tilde: list = None
    ic_defect: float = 0.0
    repaired: bool = False


def approximation_oracle(inst: Instance, h: int, s: int, iota: float,
                         delta: float, m_next: np.ndarray,
                         kernels=None, dump_path=None) -> OracleResult:
    """Solve the relaxed cell problem and round promises onto the grid.

    Feasible results satisfy: honesty within 2*delta of ``iota``, incentive
    constraints exact (up to 1e-9; see ``ic_defect``), every rounded promise
    feasible in ``m_next``, and the value sandwiched between the exact window
    optimum and the rounded tuple's objective.
    """
    grid = grid_for(inst, delta)
    k = grid.index(iota)
    if dump_path is not None:
        dump_lp(build_lp(inst, h, s, iota, delta, m_next), dump_path)
    sweep = CellSweep(inst, h, s, grid, m_next, kernels=kernels)
    # one-off call: sweep straight to the requested index
    sweep._last_k = k - 1
    sol = sweep.solve_k(k)
    if not sol.feasible:
        return OracleResult(False, -math.inf)
    certify(sweep.state, kernels=sweep.kernels)
    return OracleResult(True, sol.value, sol.alpha, sol.pays,
                        grid.values[sol.zk], sol.zk, sol.q, sol.y,
                        sol.q_tilde, sol.ic_defect, sol.repaired)
