#!/usr/bin/env python3
"""
Linear Program - dense two-phase revised simplex with Bland's rule

Solves  min c.x  subject to  A x = b, x >= 0.
Rows with a negative right-hand side are negated before phase 1, so any b
is accepted. The basis inverse is updated in product form and rebuilt from
scratch every `refactor_every` pivots to keep drift in check.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np


logger = logging.getLogger('bellbound.linear_program')


class SolverError(Exception):
    """Raised when a solver cannot produce a usable answer."""
    pass


class InfeasibleError(SolverError):
    "Raised when the constraints admit no nonnegative solution."
    pass


class UnboundedError(SolverError):
    "Raised when the objective decreases without bound."
    pass


@dataclass(frozen=True)
class LinearProgramResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    dual_objective: float
    iterations: int
    dual_infeasibility: float

    @property
    def gap(self) -> float:
        """Optimality residual: primal/dual objective mismatch."""
        return abs(self.objective - self.dual_objective)


class RevisedSimplex:
    def __init__(self, tol: float = 1e-9, max_iter: Optional[int] = None, refactor_every: int = 50):
        self.tol = tol
        self.max_iter = max_iter
        self.refactor_every = refactor_every
        self.iterations = 0

    def solve(self, c: np.ndarray, A: np.ndarray, b: np.ndarray) -> LinearProgramResult:
        c = np.asarray(c, dtype=float)
        A = np.array(A, dtype=float)
        b = np.array(b, dtype=float)
        m, n = A.shape
        if c.shape != (n,) or b.shape != (m,):
            raise ValueError(f"shape mismatch: c {c.shape}, A {A.shape}, b {b.shape}")

        flip = b < 0
        A[flip] *= -1
        b[flip] *= -1
        max_iter = self.max_iter or 50 * (m + n) + 1000
        self.iterations = 0

        # Phase 1: artificial identity block
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        basis = list(range(n, n + m))
        B_inv, x_B = self._iterate(A1, b, c1, basis, n + m, max_iter)
        infeasibility = float(c1[basis] @ x_B)
        if infeasibility > self.tol * max(1.0, float(np.abs(b).sum())):
            raise InfeasibleError(f"phase 1 ended with infeasibility {infeasibility:.3g}")

        B_inv, x_B = self._drive_out_artificials(A1, basis, B_inv, x_B, n)

        # Phase 2: artificials may stay basic at zero on redundant rows but never re-enter
        c2 = np.concatenate([c, np.zeros(m)])
        B_inv, x_B = self._iterate(A1, b, c2, basis, n, max_iter, B_inv, x_B)

        x = np.zeros(n + m)
        x[basis] = np.maximum(x_B, 0.0)
        duals = c2[basis] @ B_inv
        reduced = c - duals @ A
        duals = np.where(flip, -duals, duals)
        objective = float(c @ x[:n])
        dual_objective = float(np.where(flip, -b, b) @ duals)
        logger.debug(f"Simplex finished after {self.iterations} pivots, objective {objective:.12g}")
        return LinearProgramResult(
            x=x[:n],
            objective=objective,
            duals=duals,
            dual_objective=dual_objective,
            iterations=self.iterations,
            dual_infeasibility=float(max(0.0, -reduced.min())) if n else 0.0,
        )

    def _refactor(self, A: np.ndarray, b: np.ndarray, basis: List[int]):
        B_inv = np.linalg.inv(A[:, basis])
        x_B = B_inv @ b
        x_B[(x_B < 0) & (x_B > -self.tol)] = 0.0
        return B_inv, x_B

    def _iterate(self, A, b, c, basis, n_enter, max_iter, B_inv=None, x_B=None):
        if B_inv is None:
            B_inv, x_B = self._refactor(A, b, basis)
        since_refactor = 0
        while True:
            if since_refactor >= self.refactor_every:
                B_inv, x_B = self._refactor(A, b, basis)
                since_refactor = 0
            y = c[basis] @ B_inv
            reduced = c[:n_enter] - y @ A[:, :n_enter]
            candidates = np.flatnonzero(reduced < -self.tol)
            if candidates.size == 0:
                return B_inv, x_B
            if self.iterations >= max_iter:
                raise SolverError(f"simplex iteration cap {max_iter} exceeded")
            # Bland: lowest entering index
            j = int(candidates[0])
            d = B_inv @ A[:, j]
            positive = d > self.tol
            if not positive.any():
                raise UnboundedError(f"column {j} is an unbounded direction")
            ratios = np.full(d.shape, np.inf)
            ratios[positive] = x_B[positive] / d[positive]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + self.tol)
            # Bland: lowest leaving variable index among ties
            r = int(min(ties, key=lambda k: basis[k]))
            self._pivot(B_inv, x_B, d, r)
            basis[r] = j
            self.iterations += 1
            since_refactor += 1

    @staticmethod
    def _pivot(B_inv, x_B, d, r):
        row = B_inv[r] / d[r]
        B_inv -= np.outer(d, row)
        B_inv[r] = row
        value = x_B[r] / d[r]
        x_B -= d * value
        x_B[r] = value

    def _drive_out_artificials(self, A, basis, B_inv, x_B, n):
        for r in range(len(basis)):
            if basis[r] < n:
                continue
            row = B_inv[r] @ A[:, :n]
            in_basis = set(basis)
            candidates = [j for j in np.flatnonzero(np.abs(row) > self.tol) if j not in in_basis]
            if not candidates:
                logger.debug(f"Row {r} is redundant; artificial stays basic at zero")
                continue
            j = int(candidates[0])
            d = B_inv @ A[:, j]
            self._pivot(B_inv, x_B, d, r)
            basis[r] = j
            self.iterations += 1
        return B_inv, x_B


def solve_lp(c, A_eq, b_eq, tol: float = 1e-9, max_iter: Optional[int] = None,
             refactor_every: int = 50) -> LinearProgramResult:
    """Minimize c.x over {x >= 0 : A_eq x = b_eq}."""
    return RevisedSimplex(tol=tol, max_iter=max_iter, refactor_every=refactor_every).solve(c, A_eq, b_eq)
