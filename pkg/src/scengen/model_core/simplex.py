"""Bounded-variable revised primal simplex (dense, two-phase).

Rows ``lo <= A x <= hi`` are rewritten as ``A x - s = 0`` with the slack
``s`` carrying the row bounds, so every column is simply a bounded variable.
Phase 1 minimises the sum of artificial columns added on top of a slack
basis; phase 2 keeps artificials fixed at zero.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .solution import DegeneratePivotError, Solution, SolveSettings, SolverError, Status

_AT_LB, _AT_UB, _FREE, _BASIC = 0, 1, 2, 3
_REFACTOR_EVERY = 64
_BLAND_AFTER = 1000
_DJ_TOL = 1e-9


class _Tableau:
    def __init__(self, A: np.ndarray, c: np.ndarray, lb: np.ndarray, ub: np.ndarray,
                 row_lo: np.ndarray, row_hi: np.ndarray, pivot_tol: float, feas_tol: float):
        m, n = A.shape
        self.m, self.n = m, n
        self.pivot_tol = pivot_tol
        self.feas_tol = feas_tol
        # columns: structural | slacks | artificials
        self.lb = np.concatenate([lb, row_lo, np.zeros(m)])
        self.ub = np.concatenate([ub, row_hi, np.full(m, np.inf)])
        self.x = np.zeros(n + 2 * m)
        self.state = np.full(n + 2 * m, _AT_LB, dtype=np.int8)
        for j in range(n + m):
            lo, hi = self.lb[j], self.ub[j]
            if np.isfinite(lo):
                self.x[j], self.state[j] = lo, _AT_LB
            elif np.isfinite(hi):
                self.x[j], self.state[j] = hi, _AT_UB
            else:
                self.x[j], self.state[j] = 0.0, _FREE
        resid = -(A @ self.x[:n] - self.x[n:n + m])
        signs = np.where(resid >= 0, 1.0, -1.0)
        self.M = np.hstack([A, -np.eye(m), np.diag(signs)])
        self.basis = np.arange(n + m, n + 2 * m)
        self.x[n + m:] = np.abs(resid)
        self.state[n + m:] = _BASIC
        self.Binv = np.diag(signs)  # inverse of diag(signs) is itself
        self.c_orig = np.concatenate([c, np.zeros(2 * m)])
        self.iterations = 0

    # -- linear algebra ------------------------------------------------------
    def refactor(self) -> None:
        B = self.M[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            row = _singular_row(B)
            raise DegeneratePivotError(row, "basis matrix not invertible") from None
        if not np.all(np.isfinite(self.Binv)):
            raise DegeneratePivotError(_singular_row(B), "basis inverse overflow")
        nb = self.state != _BASIC
        rhs = -(self.M[:, nb] @ self.x[nb])
        self.x[self.basis] = self.Binv @ rhs

    # -- main loop -----------------------------------------------------------
    def run(self, cost: np.ndarray, eligible: np.ndarray, deadline: float) -> str:
        bland = False
        degenerate = 0
        since_refactor = 0
        max_iter = 50 * (self.m + self.n) + 10_000
        tol = self.pivot_tol
        while True:
            if self.iterations > max_iter:
                raise SolverError("simplex iteration limit exceeded")
            if time.perf_counter() > deadline:
                return "time"
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.M
            up = ((self.state == _AT_LB) | (self.state == _FREE)) & (self.x < self.ub) & (d < -_DJ_TOL)
            down = ((self.state == _AT_UB) | (self.state == _FREE)) & (self.x > self.lb) & (d > _DJ_TOL)
            cand = (up | down) & eligible
            if not cand.any():
                return "optimal"
            idx = np.flatnonzero(cand)
            q = int(idx[0]) if bland else int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if up[q] else -1.0
            alpha = self.Binv @ self.M[:, q]
            delta = -direction * alpha  # change of x_B per unit step of x_q
            xb = self.x[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = delta < -tol
            inc = delta > tol
            with np.errstate(invalid="ignore", divide="ignore"):
                r_dec = (xb - lbb) / -delta
                r_inc = (ubb - xb) / delta
            ratios[dec] = r_dec[dec]
            ratios[inc] = r_inc[inc]
            ratios = np.where(np.isnan(ratios), np.inf, np.maximum(ratios, 0.0))
            t_min = ratios.min() if self.m else np.inf
            flip = self.ub[q] - self.lb[q]
            if flip <= t_min:
                if not np.isfinite(flip):
                    return "unbounded"
                step = flip
                self.x[self.basis] = xb + step * delta
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
                self.state[q] = _AT_UB if direction > 0 else _AT_LB
                self.iterations += 1
                continue
            ties = np.flatnonzero(ratios <= t_min + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(delta[ties]))])
            piv = alpha[r]
            if abs(piv) < tol:
                raise DegeneratePivotError(r, f"pivot element {piv:.3e} below tolerance")
            step = t_min
            self.x[self.basis] = xb + step * delta
            self.x[q] += direction * step
            leaving = self.basis[r]
            if delta[r] < 0:
                self.x[leaving], self.state[leaving] = self.lb[leaving], _AT_LB
            else:
                self.x[leaving], self.state[leaving] = self.ub[leaving], _AT_UB
            self.basis[r] = q
            self.state[q] = _BASIC
            # product-form update of the inverse
            row_r = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row_r)
            self.Binv[r] = row_r
            self.iterations += 1
            since_refactor += 1
            if step <= 1e-12:
                degenerate += 1
                if degenerate >= _BLAND_AFTER:
                    bland = True
            if since_refactor >= _REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0


def _singular_row(B: np.ndarray) -> int:
    """Index of the basis position that is (nearly) linearly dependent."""
    try:
        _, s, vt = np.linalg.svd(B)
        return int(np.argmax(np.abs(vt[-1])))
    except np.linalg.LinAlgError:
        return 0


def simplex(A, c, lb, ub, row_lo, row_hi, settings: SolveSettings | None = None,
            deadline: float | None = None) -> Solution:
    """Minimise ``c @ x`` subject to ``row_lo <= A x <= row_hi`` and ``lb <= x <= ub``."""
    settings = settings or SolveSettings()
    t0 = time.perf_counter()
    deadline = deadline if deadline is not None else t0 + settings.time_limit
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
    m, n = A.shape
    c = np.asarray(c, dtype=float)
    lb, ub = np.asarray(lb, dtype=float), np.asarray(ub, dtype=float)
    row_lo, row_hi = np.asarray(row_lo, dtype=float), np.asarray(row_hi, dtype=float)
    if np.any(lb > ub + settings.feas_tol) or np.any(row_lo > row_hi + settings.feas_tol):
        return Solution(Status.INFEASIBLE, wall_time=time.perf_counter() - t0, message="crossed bounds")

    tab = _Tableau(A, c, lb, ub, row_lo, row_hi, settings.pivot_tol, settings.feas_tol)
    total = n + 2 * m
    art = np.zeros(total, dtype=bool)
    art[n + m:] = True
    fixed = tab.lb >= tab.ub

    # phase 1
    if m and tab.x[n + m:].max(initial=0.0) > 0:
        cost1 = art.astype(float)
        status = tab.run(cost1, ~fixed, deadline)
        if status == "time":
            return Solution(Status.TIME_LIMIT, wall_time=time.perf_counter() - t0, iterations=tab.iterations)
        tab.refactor()
        # each artificial is a residual in its own row's units
        row_scale = np.maximum(1.0, np.abs(A).max(axis=1, initial=0.0))
        infeas = float((tab.x[n + m:] / row_scale).max(initial=0.0))
        if infeas > 1e-7:
            return Solution(Status.INFEASIBLE, wall_time=time.perf_counter() - t0,
                            iterations=tab.iterations, message=f"phase-1 infeasibility {infeas:.3e}")
    # artificials stay at zero from here on
    tab.ub[n + m:] = 0.0
    tab.x[n + m:] = np.where(tab.state[n + m:] == _BASIC, tab.x[n + m:], 0.0)
    _drive_out_artificials(tab, art)
    eligible = ~art & ~(tab.lb >= tab.ub)
    status = tab.run(tab.c_orig, eligible, deadline)
    wall = time.perf_counter() - t0
    if status == "time":
        return Solution(Status.TIME_LIMIT, wall_time=wall, iterations=tab.iterations)
    if status == "unbounded":
        return Solution(Status.UNBOUNDED, wall_time=wall, iterations=tab.iterations)
    tab.refactor()
    x = tab.x[:n].copy()
    # snap values sitting within rounding of a bound
    for arr, bnd in ((x, lb), (x, ub)):
        close = np.isfinite(bnd) & (np.abs(arr - bnd) <= 1e-12 * np.maximum(1.0, np.abs(bnd)))
        arr[close] = bnd[close]
    x[x == 0.0] = 0.0  # drop negative zeros
    y = tab.c_orig[tab.basis] @ tab.Binv
    return Solution(Status.OPTIMAL, objective=float(c @ x), x=x, gap=0.0, wall_time=wall,
                    bound=float(c @ x), duals=y, iterations=tab.iterations)


def _drive_out_artificials(tab: _Tableau, art: np.ndarray) -> None:
    """Pivot zero-level artificials out of the basis where a structural column allows it."""
    n_real = tab.n + tab.m
    for r in range(tab.m):
        if not art[tab.basis[r]]:
            continue
        row = tab.Binv[r] @ tab.M[:, :n_real]
        nonbasic = tab.state[:n_real] != _BASIC
        cand = np.flatnonzero(nonbasic & (np.abs(row) > 1e-7))
        if cand.size == 0:
            continue  # redundant row; artificial stays basic at zero
        q = int(cand[np.argmax(np.abs(row[cand]))])
        alpha = tab.Binv @ tab.M[:, q]
        piv = alpha[r]
        leaving = tab.basis[r]
        tab.state[leaving] = _AT_LB
        tab.x[leaving] = 0.0
        tab.basis[r] = q
        tab.state[q] = _BASIC
        row_r = tab.Binv[r] / piv
        tab.Binv -= np.outer(alpha, row_r)
        tab.Binv[r] = row_r
    tab.refactor()
