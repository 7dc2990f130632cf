"""Minimal conic-program container and solver bridge.

Supports exactly the shapes the optimizer emits: affine equalities and
inequalities, variable bounds, second-order cones ``||A x + b|| <= c^T x + d``
and logarithm hypographs ``s <= log(u(x))`` (exponential cones). The default
backend is Clarabel; a cvxpy backend is available for cross-checking.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"
ITERATION_LIMIT = "iteration_limit"


class ConicSolveError(RuntimeError):
    status = NUMERICAL_FAILURE


class ProgramInfeasible(ConicSolveError):
    status = INFEASIBLE


class ProgramUnbounded(ConicSolveError):
    status = UNBOUNDED


class NumericalFailure(ConicSolveError):
    status = NUMERICAL_FAILURE


class IterationLimit(ConicSolveError):
    status = ITERATION_LIMIT


_ERRORS = {INFEASIBLE: ProgramInfeasible, UNBOUNDED: ProgramUnbounded,
           NUMERICAL_FAILURE: NumericalFailure, ITERATION_LIMIT: IterationLimit}


@dataclass(frozen=True)
class Affine:
    """Sparse affine expression ``coef @ x[idx] + const``."""

    idx: np.ndarray
    coef: np.ndarray
    const: float = 0.0

    def value(self, x: np.ndarray) -> float:
        return float(self.coef @ x[self.idx] + self.const) if self.idx.size else float(self.const)


def affine(terms=None, const: float = 0.0) -> Affine:
    """Build an :class:`Affine` from ``{index: coef}`` or ``(idx, coef)``."""
    if terms is None:
        return Affine(np.zeros(0, dtype=int), np.zeros(0), float(const))
    if isinstance(terms, dict):
        idx = np.fromiter(terms.keys(), dtype=int, count=len(terms))
        coef = np.fromiter(terms.values(), dtype=float, count=len(terms))
    else:
        idx, coef = terms
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape).copy()
    return Affine(idx, coef, float(const))


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-7
    gap: float = 1e-7
    max_iter: int = 200


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray | None
    objective: float | None
    stats: dict = field(default_factory=dict)

    def raise_for_status(self) -> "ConicSolution":
        if self.status != OPTIMAL:
            raise _ERRORS.get(self.status, ConicSolveError)(
                f"conic solve ended with status {self.status}: {self.stats.get('raw_status')}")
        return self


class ConicProgram:
    """Maximization program over a flat real vector ``x``."""

    def __init__(self):
        self.n_vars = 0
        self.lb: list = []
        self.ub: list = []
        self.names: dict = {}
        self.objective = affine()
        self.eqs: list = []     # Affine == 0
        self.les: list = []     # Affine <= 0
        self.socs: list = []    # (t: Affine, rows: list of Affine): ||rows|| <= t
        self.exps: list = []    # (s: Affine, u: Affine): s <= log(u)

    def add_variables(self, n: int, lb=-np.inf, ub=np.inf, name: str | None = None) -> np.ndarray:
        idx = np.arange(self.n_vars, self.n_vars + n)
        self.n_vars += n
        self.lb.extend(np.broadcast_to(np.asarray(lb, dtype=float), (n,)).tolist())
        self.ub.extend(np.broadcast_to(np.asarray(ub, dtype=float), (n,)).tolist())
        if name is not None:
            self.names[name] = idx
        return idx

    def set_objective(self, expr: Affine) -> None:
        self.objective = expr

    def add_eq(self, expr: Affine) -> None:
        self.eqs.append(expr)

    def add_le(self, lhs: Affine, rhs: float = 0.0) -> None:
        """``lhs <= rhs``."""
        self.les.append(Affine(lhs.idx, lhs.coef, lhs.const - rhs))

    def add_soc(self, t: Affine, rows) -> None:
        """``||[rows]|| <= t``."""
        self.socs.append((t, list(rows)))

    def add_log_hypograph(self, s: Affine, u: Affine) -> None:
        """``s <= log(u)`` with ``u`` implicitly positive."""
        self.exps.append((s, u))

    def validate(self) -> None:
        if self.n_vars < 1:
            raise ValueError("program has no variables")
        exprs = [self.objective, *self.eqs, *self.les]
        for t, rows in self.socs:
            exprs += [t, *rows]
        for s, u in self.exps:
            exprs += [s, u]
        for e in exprs:
            if e.idx.size and (e.idx.min() < 0 or e.idx.max() >= self.n_vars):
                raise ValueError("expression references an unknown variable")
            if not (np.all(np.isfinite(e.coef)) and np.isfinite(e.const)):
                raise ValueError("non-finite coefficient in program")

    def violations(self, x: np.ndarray) -> dict:
        """Largest violation of each constraint family at ``x``."""
        lb, ub = np.asarray(self.lb), np.asarray(self.ub)
        out = {
            "bounds": float(max(np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0))),
            "eq": max((abs(e.value(x)) for e in self.eqs), default=0.0),
            "le": max((max(e.value(x), 0.0) for e in self.les), default=0.0),
            "soc": max((max(np.linalg.norm([r.value(x) for r in rows]) - t.value(x), 0.0)
                        for t, rows in self.socs), default=0.0),
        }
        ev = 0.0
        for s, u in self.exps:
            uv = u.value(x)
            ev = max(ev, np.inf if uv <= 0 else max(s.value(x) - np.log(uv), 0.0))
        out["exp"] = ev
        return out


def _lower_to_clarabel(prog: ConicProgram):
    """Assemble ``A x + s = b, s in K`` blocks."""
    rows, cols, vals, b = [], [], [], []
    r = 0

    def put(expr: Affine, sign: float, rhs_extra: float = 0.0):
        # slack = b - A x with slack = sign * (coef x + const) + rhs_extra
        nonlocal r
        rows.extend([r] * expr.idx.size)
        cols.extend(expr.idx.tolist())
        vals.extend((-sign * expr.coef).tolist())
        b.append(sign * expr.const + rhs_extra)
        r += 1

    import clarabel

    cones = []
    for e in prog.eqs:
        put(e, 1.0)
    if prog.eqs:
        cones.append(clarabel.ZeroConeT(len(prog.eqs)))
    n_nonneg = 0
    for e in prog.les:
        put(e, -1.0)
        n_nonneg += 1
    for j, (lo, hi) in enumerate(zip(prog.lb, prog.ub)):
        if np.isfinite(lo):
            put(affine({j: 1.0}, -lo), 1.0)
            n_nonneg += 1
        if np.isfinite(hi):
            put(affine({j: 1.0}, -hi), -1.0)
            n_nonneg += 1
    if n_nonneg:
        cones.append(clarabel.NonnegativeConeT(n_nonneg))
    for t, soc_rows in prog.socs:
        put(t, 1.0)
        for e in soc_rows:
            put(e, 1.0)
        cones.append(clarabel.SecondOrderConeT(1 + len(soc_rows)))
    for s, u in prog.exps:
        # (s, 1, u) in K_exp  <=>  exp(s) <= u
        put(s, 1.0)
        put(affine(), 1.0, 1.0)
        put(u, 1.0)
        cones.append(clarabel.ExponentialConeT())
    A = sp.csc_matrix((vals, (rows, cols)), shape=(r, prog.n_vars))
    return A, np.asarray(b, dtype=float), cones


_CLARABEL_STATUS = {
    "Solved": OPTIMAL, "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE, "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED, "AlmostDualInfeasible": UNBOUNDED,
    "MaxIterations": ITERATION_LIMIT, "MaxTime": ITERATION_LIMIT,
}


def _solve_clarabel(prog: ConicProgram, tol: Tolerances) -> ConicSolution:
    import clarabel

    A, b, cones = _lower_to_clarabel(prog)
    n = prog.n_vars
    q = np.zeros(n)
    np.add.at(q, prog.objective.idx, -prog.objective.coef)
    res = None
    # a stalled run is retried once without Ruiz equilibration
    for equilibrate in (True, False):
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = tol.max_iter
        settings.tol_feas = min(tol.feas, 1e-8)
        settings.tol_gap_abs = min(tol.gap, 1e-8)
        settings.tol_gap_rel = min(tol.gap, 1e-8)
        settings.equilibrate_enable = equilibrate
        sol = clarabel.DefaultSolver(sp.csc_matrix((n, n)), q, A, b, cones, settings).solve()
        raw = str(sol.status)
        status = _CLARABEL_STATUS.get(raw, NUMERICAL_FAILURE)
        stats = {"raw_status": raw, "iterations": sol.iterations, "solve_time": sol.solve_time,
                 "equilibrated": equilibrate}
        x = np.asarray(sol.x, dtype=float) if status == OPTIMAL else None
        res = _finish(prog, status, x, tol, stats)
        if res.status != NUMERICAL_FAILURE:
            break
    return res


def _solve_cvxpy(prog: ConicProgram, tol: Tolerances) -> ConicSolution:
    import cvxpy as cp

    x = cp.Variable(prog.n_vars)

    def ex(e: Affine):
        return e.coef @ x[e.idx] + e.const if e.idx.size else cp.Constant(e.const)

    cons = [ex(e) == 0 for e in prog.eqs] + [ex(e) <= 0 for e in prog.les]
    lb, ub = np.asarray(prog.lb), np.asarray(prog.ub)
    fl, fu = np.flatnonzero(np.isfinite(lb)), np.flatnonzero(np.isfinite(ub))
    if fl.size:
        cons.append(x[fl] >= lb[fl])
    if fu.size:
        cons.append(x[fu] <= ub[fu])
    for t, rows in prog.socs:
        cons.append(cp.SOC(ex(t), cp.hstack([ex(r) for r in rows])))
    for s, u in prog.exps:
        cons.append(ex(s) <= cp.log(ex(u)))
    problem = cp.Problem(cp.Maximize(ex(prog.objective)), cons)
    try:
        problem.solve(solver=cp.CLARABEL, max_iter=tol.max_iter)
    except cp.SolverError as err:
        return ConicSolution(NUMERICAL_FAILURE, None, None, {"raw_status": str(err)})
    mapping = {cp.OPTIMAL: OPTIMAL, cp.OPTIMAL_INACCURATE: OPTIMAL,
               cp.INFEASIBLE: INFEASIBLE, cp.INFEASIBLE_INACCURATE: INFEASIBLE,
               cp.UNBOUNDED: UNBOUNDED, cp.UNBOUNDED_INACCURATE: UNBOUNDED,
               cp.USER_LIMIT: ITERATION_LIMIT}
    status = mapping.get(problem.status, NUMERICAL_FAILURE)
    xv = np.asarray(x.value, dtype=float) if status == OPTIMAL else None
    return _finish(prog, status, xv, tol, {"raw_status": problem.status})


def _finish(prog, status, x, tol, stats) -> ConicSolution:
    if status != OPTIMAL:
        return ConicSolution(status, None, None, stats)
    viol = prog.violations(x)
    stats["max_violation"] = max(viol.values())
    # absolute tolerance on O(1) rows, relative to the largest entry otherwise
    scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
    if stats["max_violation"] > tol.feas * scale:
        return ConicSolution(NUMERICAL_FAILURE, None, None, stats)
    return ConicSolution(OPTIMAL, x, prog.objective.value(x), stats)


def solve(program: ConicProgram, tolerances: Tolerances | None = None,
          backend: str = "clarabel") -> ConicSolution:
    """Solve ``program`` and map the backend status to a :class:`ConicSolution`."""
    program.validate()
    tol = tolerances or Tolerances()
    if backend == "clarabel":
        return _solve_clarabel(program, tol)
    if backend == "cvxpy":
        return _solve_cvxpy(program, tol)
    raise ValueError(f"unknown backend {backend!r}")
