#!/usr/bin/env python3
"""
Divergence - statistical divergences between behaviors and the distance to the local polytope

The aggregated distance between two behaviors is the mean, over all joint
settings, of the per-setting divergence. The distance to the local polytope
minimizes it over mixtures of deterministic vertices:

  TV          exact linear program (see linear_program.py)
  KL_BITS     away-step conditional gradient, duality-gap certificate
  INFIDELITY  away-step conditional gradient started at the KL_BITS minimizer;
              sqrt(1 - F^2) is not convex in the local behavior, so its
              certified lower bound is the trace-distance certificate (TV <= IF setting by setting)
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from inequality import BellFunctional
from linear_program import SolverError, solve_lp
from scenario import (
    Behavior,
    BehaviorValidationError,
    ScenarioMismatchError,
    DEFAULT_VERTEX_CAP,
    enumerate_vertices,
    validate_behavior,
)


DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 200000
DISTRIBUTION_TOL = 1e-9
LN2 = math.log(2.0)
UNIFORM_MIX = 1e-12
INTERIOR_MARGIN = 1e-9
GRID_POINTS = 48
STALL_WINDOW = 200

logger = logging.getLogger('bellbound.divergence')


class DivergenceInputError(Exception):
    """Raised for mismatched lengths or inputs that are not distributions."""
    pass


class DivergenceKind(Enum):
    TV = 'tv'
    KL_BITS = 'kl'
    INFIDELITY = 'if'

    @classmethod
    def from_label(cls, label: str) -> 'DivergenceKind':
        aliases = {
            'tv': cls.TV, 'trace': cls.TV, 'kolmogorov': cls.TV,
            'kl': cls.KL_BITS, 'kl_bits': cls.KL_BITS, 're': cls.KL_BITS,
            'if': cls.INFIDELITY, 'infidelity': cls.INFIDELITY,
        }
        try:
            return aliases[label.lower()]
        except KeyError:
            raise ValueError(f"unknown divergence {label!r}; use one of tv, kl, if") from None


def _check_distribution(name: str, x: np.ndarray):
    if x.ndim != 1:
        raise DivergenceInputError(f"{name} must be a vector")
    if np.any(x < -DISTRIBUTION_TOL):
        raise DivergenceInputError(f"{name} has negative entries")
    if abs(float(x.sum()) - 1.0) > DISTRIBUTION_TOL:
        raise DivergenceInputError(f"{name} sums to {float(x.sum()):.12g}, not 1")


def divergence(kind: DivergenceKind, p, q) -> float:
    """Divergence between two distributions on the same outcome set."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DivergenceInputError(f"length mismatch: {p.shape} vs {q.shape}")
    _check_distribution('p', p)
    _check_distribution('q', q)
    p = np.clip(p, 0.0, None)
    q = np.clip(q, 0.0, None)
    if kind is DivergenceKind.TV:
        return 0.5 * float(np.abs(p - q).sum())
    if kind is DivergenceKind.KL_BITS:
        support = p > 0
        if np.any(q[support] == 0):
            return math.inf
        return float(np.sum(p[support] * np.log2(p[support] / q[support])))
    fidelity = min(1.0, float(np.sum(np.sqrt(p * q))))
    return math.sqrt(max(0.0, 1.0 - fidelity * fidelity))


class _AggregateObjective:
    """(1/tau) sum_m D(p_m, q_m) and its gradient in q, for a fixed tested behavior p."""

    def __init__(self, kind: DivergenceKind, P: Behavior):
        s = P.scenario
        self.kind = kind
        self.p = P.table
        self.tau = s.tau
        self.owner = np.repeat(np.arange(s.tau), np.diff(np.array(s.offsets)))
        self.support = self.p > 0

    def _fidelities(self, q: np.ndarray) -> np.ndarray:
        root = np.sqrt(self.p * np.clip(q, 0.0, None))
        return np.minimum(1.0, np.bincount(self.owner, weights=root, minlength=self.tau))

    def value(self, q: np.ndarray) -> float:
        if self.kind is DivergenceKind.TV:
            return 0.5 * float(np.abs(self.p - q).sum()) / self.tau
        if self.kind is DivergenceKind.KL_BITS:
            qs = q[self.support]
            if np.any(qs <= 0):
                return math.inf
            ps = self.p[self.support]
            return float(np.sum(ps * np.log2(ps / qs))) / self.tau
        fidelity = self._fidelities(q)
        return float(np.sum(np.sqrt(np.maximum(0.0, 1.0 - fidelity ** 2)))) / self.tau

    def interior_value(self, q: np.ndarray) -> float:
        """value(q), or inf when q vanishes somewhere p does not."""
        if np.any(q[self.support] <= 0):
            return math.inf
        return self.value(q)

    def gradient(self, q: np.ndarray) -> np.ndarray:
        g = np.zeros_like(self.p)
        with np.errstate(divide='ignore', invalid='ignore'):
            if self.kind is DivergenceKind.KL_BITS:
                g[self.support] = -self.p[self.support] / (q[self.support] * LN2) / self.tau
                return g
            if self.kind is DivergenceKind.INFIDELITY:
                fidelity = self._fidelities(q)
                infidelity = np.sqrt(np.maximum(0.0, 1.0 - fidelity ** 2))
                # zero is a subgradient where a setting already matches exactly
                scale = np.where(infidelity > 1e-14, -fidelity / infidelity, 0.0) / self.tau
                dF = 0.5 * np.sqrt(self.p[self.support] / q[self.support])
                g[self.support] = np.where(scale[self.owner[self.support]] == 0.0, 0.0,
                                           scale[self.owner[self.support]] * dF)
                return g
        raise SolverError("trace distance has no gradient; it is solved as a linear program")


def aggregate_distance(kind: DivergenceKind, P: Behavior, Q: Behavior) -> float:
    """Mean over all joint settings of the per-setting divergence."""
    if P.scenario != Q.scenario:
        raise ScenarioMismatchError("behaviors live on different scenarios")
    return _AggregateObjective(kind, P).value(Q.table)


@dataclass(frozen=True, eq=False)
class DistanceResult:
    kind: DivergenceKind
    primal: float
    certified_lower: float
    gap: float
    iterations: int
    weights: Optional[np.ndarray] = None
    converged: bool = True
    region: str = 'local'
    stationarity: Optional[float] = None
    point: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> Dict:
        data = {
            'kind': self.kind.value,
            'primal': self.primal,
            'certified_lower': self.certified_lower,
            'gap': self.gap,
            'iterations': self.iterations,
            'converged': self.converged,
            'region': self.region,
        }
        if self.stationarity is not None:
            data['stationarity'] = self.stationarity
        if self.weights is not None:
            data['weights'] = {str(k): float(self.weights[k]) for k in np.flatnonzero(self.weights > 0)}
        return data


@dataclass(frozen=True, eq=False)
class FrankWolfeResult:
    weights: np.ndarray
    primal: float
    gap: float
    iterations: int
    converged: bool
    atoms: np.ndarray = field(repr=False)


def _line_search(objective: Callable, x: np.ndarray, direction: np.ndarray,
                 gamma_max: float, f0: float) -> Tuple[float, float]:
    """Best step on [0, gamma_max]; returns (0, f0) when no step improves.

    A bounded scalar search runs first. The objective need not be unimodal
    along the segment, so when that search finds nothing better than f0 a
    geometric grid toward zero and a uniform grid are scanned, and the best
    grid cell is refined.
    """
    phi = lambda t: objective(x + t * direction)
    upper = gamma_max
    f_upper = phi(upper)
    if not math.isfinite(f_upper):
        # the full step empties an entry the objective needs; stop just short of it
        upper = gamma_max * (1.0 - INTERIOR_MARGIN)
        f_upper = phi(upper)
    for _ in range(60):
        if math.isfinite(f_upper):
            break
        upper *= 0.5
        f_upper = phi(upper)
    else:
        return 0.0, f0
    res = minimize_scalar(phi, bounds=(0.0, upper), method='bounded', options={'xatol': 1e-13})
    gamma, value = (upper, f_upper) if f_upper <= res.fun else (float(res.x), float(res.fun))
    if value < f0:
        return gamma, value

    grid = np.unique(upper * np.concatenate([np.geomspace(1e-12, 1.0, GRID_POINTS),
                                             np.linspace(0.0, 1.0, GRID_POINTS)[1:]]))
    values = np.array([phi(t) for t in grid])
    values[~np.isfinite(values)] = math.inf
    k = int(np.argmin(values))
    if not values[k] < f0:
        return 0.0, f0
    gamma, value = float(grid[k]), float(values[k])
    lo = float(grid[k - 1]) if k > 0 else 0.0
    hi = float(grid[k + 1]) if k + 1 < grid.size else upper
    res = minimize_scalar(phi, bounds=(lo, hi), method='bounded', options={'xatol': 1e-15})
    if math.isfinite(res.fun) and res.fun < value:
        gamma, value = float(res.x), float(res.fun)
    return gamma, value


def _conditional_gradient(objective: Callable, gradient: Callable, atoms: np.ndarray,
                          weights: np.ndarray, lmo: Callable, tol: float, max_iter: int,
                          away_steps: bool = True, stall_window: Optional[int] = None) -> FrankWolfeResult:
    """Away-step conditional gradient over the convex hull of a growing atom set.

    lmo(g) returns the point of the feasible set minimizing <g, .>; it is
    appended to the atoms unless it is already one of them. When the preferred
    step (away or toward) cannot decrease the objective the other one is
    tried; the run ends early only when neither can. With stall_window set,
    the run also ends when the objective drops by less than tol over that many
    iterations, which is the stopping rule for objectives that are not convex.
    """
    atoms = np.array(atoms, dtype=float)
    weights = np.array(weights, dtype=float)
    x = atoms @ weights
    f = objective(x)
    if not math.isfinite(f):
        raise SolverError("internal error: objective is infinite at the start point")
    gap = math.inf
    retried = False
    checkpoint = f
    iteration = 0
    while iteration < max_iter:
        g = gradient(x)
        if not np.all(np.isfinite(g)):
            if retried:
                raise SolverError("gradient stays non-finite after mixing toward uniform weights")
            weights = (1.0 - UNIFORM_MIX) * weights + UNIFORM_MIX / weights.size
            x = atoms @ weights
            f = objective(x)
            retried = True
            continue
        retried = False
        iteration += 1

        gx = float(g @ x)
        s = lmo(g)
        gap = gx - float(g @ s)
        if gap <= tol:
            return FrankWolfeResult(weights, f, max(gap, 0.0), iteration, True, atoms)

        active = np.flatnonzero(weights > 0)
        away_scores = g @ atoms[:, active]
        a = int(active[int(np.argmax(away_scores))])
        away_gap = float(away_scores.max()) - gx
        can_away = away_steps and active.size > 1 and weights[a] < 1.0

        moved = False
        for step in (('away', 'toward') if can_away and away_gap > gap else ('toward', 'away')):
            if step == 'away':
                if not can_away:
                    continue
                direction = x - atoms[:, a]
                gamma_max = weights[a] / (1.0 - weights[a])
                gamma, _ = _line_search(objective, x, direction, gamma_max, f)
                if gamma > 0.0:
                    weights = (1.0 + gamma) * weights
                    weights[a] = 0.0 if gamma >= gamma_max else weights[a] - gamma
                    moved = True
                    break
            else:
                matches = np.flatnonzero(np.all(np.abs(atoms - s[:, None]) <= 1e-12, axis=0))
                if matches.size:
                    j = int(matches[0])
                else:
                    atoms = np.column_stack([atoms, s])
                    weights = np.append(weights, 0.0)
                    j = atoms.shape[1] - 1
                gamma, _ = _line_search(objective, x, atoms[:, j] - x, 1.0, f)
                if gamma > 0.0:
                    weights = (1.0 - gamma) * weights
                    weights[j] += gamma
                    moved = True
                    break
        if not moved:
            logger.warning(f"Frank-Wolfe found no decreasing step at iteration {iteration}; gap {gap:.3g}")
            return FrankWolfeResult(weights, f, max(gap, 0.0), iteration, False, atoms)

        weights[weights < 0] = 0.0
        weights /= weights.sum()
        x = atoms @ weights
        f = objective(x)
        if iteration % 1000 == 0:
            logger.debug(f"Frank-Wolfe iteration {iteration}: value {f:.12g}, gap {gap:.3g}")
        if stall_window and iteration % stall_window == 0:
            if checkpoint - f < tol:
                logger.info(f"Frank-Wolfe value settled at {f:.12g} after {iteration} iterations; "
                            f"stationarity gap {gap:.3g}")
                return FrankWolfeResult(weights, f, max(gap, 0.0), iteration, False, atoms)
            checkpoint = f

    logger.warning(f"Frank-Wolfe stopped after {iteration} iterations with gap {gap:.3g} > {tol:.3g}")
    return FrankWolfeResult(weights, f, max(gap, 0.0), iteration, False, atoms)


def frank_wolfe_minimize(objective: Callable, gradient: Callable, vertices,
                         start: Optional[np.ndarray] = None, tol: float = DEFAULT_TOL,
                         max_iter: int = DEFAULT_MAX_ITER, away_steps: bool = True,
                         stall_window: Optional[int] = None) -> FrankWolfeResult:
    """Minimize a convex function over the convex hull of the given vertex columns.

    vertices is a (dimension x count) array or a VertexSet; start is a weight
    vector over the vertices and defaults to uniform weights. The returned gap
    max_v <grad, x - v> bounds primal - minimum for convex objectives.
    """
    matrix = getattr(vertices, 'matrix', vertices)
    matrix = np.asarray(matrix, dtype=float)
    count = matrix.shape[1]
    if start is None:
        start = np.full(count, 1.0 / count)
    start = np.asarray(start, dtype=float)
    if start.shape != (count,) or np.any(start < 0) or abs(start.sum() - 1.0) > 1e-10:
        raise ValueError("start must be a weight vector over the vertices")

    def lmo(g):
        return matrix[:, int(np.argmin(g @ matrix))]

    return _conditional_gradient(objective, gradient, matrix, start, lmo, tol, max_iter,
                                 away_steps, stall_window)


def _require_valid(P: Behavior):
    violations = validate_behavior(P)
    if violations:
        raise BehaviorValidationError(violations)


def _tv_to_local(P: Behavior, vertices, lp_tol: float, refactor_every: int = 50) -> DistanceResult:
    s = P.scenario
    V = vertices.matrix
    n, count = V.shape
    scale = 1.0 / (2.0 * s.tau)
    A = np.zeros((n + 1, count + 2 * n))
    A[:n, :count] = V
    A[:n, count:count + n] = -np.eye(n)
    A[:n, count + n:] = np.eye(n)
    A[n, :count] = 1.0
    b = np.concatenate([P.table, [1.0]])
    c = np.concatenate([np.zeros(count), np.full(2 * n, scale)])
    lp = solve_lp(c, A, b, tol=lp_tol, refactor_every=refactor_every)

    weights = np.clip(lp.x[:count], 0.0, None)
    weights /= weights.sum()
    point = V @ weights
    primal = _AggregateObjective(DivergenceKind.TV, P).value(point)
    gap = max(0.0, primal - lp.dual_objective) + lp.dual_infeasibility
    return DistanceResult(
        kind=DivergenceKind.TV,
        primal=primal,
        certified_lower=max(0.0, primal - gap),
        gap=gap,
        iterations=lp.iterations,
        weights=weights,
        point=point,
    )


def _finish_convex(kind, P, fw: FrankWolfeResult, region: str, weights, point,
                   tv_floor: Optional[DistanceResult]) -> DistanceResult:
    if kind is DivergenceKind.KL_BITS:
        if not fw.converged:
            logger.warning(f"{kind.name} distance not converged; reporting the current certificate")
        primal = fw.primal
        return DistanceResult(kind, primal, max(0.0, primal - fw.gap), fw.gap, fw.iterations,
                              weights, fw.converged, region, fw.gap, point)
    primal = fw.primal
    certified = min(primal, tv_floor.certified_lower)
    return DistanceResult(kind, primal, max(0.0, certified), primal - certified, fw.iterations,
                          weights, fw.converged, region, fw.gap, point)


def _check_warm_start(warm_start: Optional[DistanceResult], region: str):
    if warm_start is None:
        return
    if warm_start.kind is not DivergenceKind.KL_BITS or warm_start.region != region:
        raise ValueError(f"warm start must be a relative-entropy result on region {region!r}")


def distance_to_local(P: Behavior, kind: DivergenceKind, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER, cap: int = DEFAULT_VERTEX_CAP,
                      lp_tol: float = 1e-9, tv_floor: Optional[DistanceResult] = None,
                      refactor_every: int = 50,
                      warm_start: Optional[DistanceResult] = None) -> DistanceResult:
    """Minimal aggregated divergence from P to the local polytope, with a certificate.

    The infidelity search starts from the relative-entropy minimizer
    (warm_start, computed here when absent) and only ever moves downhill
    from it, so its primal never exceeds the infidelity of that point.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    _require_valid(P)
    vertices = enumerate_vertices(P.scenario, cap)
    if kind is DivergenceKind.TV:
        return _tv_to_local(P, vertices, lp_tol, refactor_every)

    start = None
    stall_window = None
    if kind is DivergenceKind.INFIDELITY:
        _check_warm_start(warm_start, 'local')
        if tv_floor is None:
            tv_floor = _tv_to_local(P, vertices, lp_tol, refactor_every)
        if warm_start is None:
            warm_start = distance_to_local(P, DivergenceKind.KL_BITS, tol, max_iter, cap, lp_tol,
                                           refactor_every=refactor_every)
        start = warm_start.weights / warm_start.weights.sum()
        stall_window = STALL_WINDOW
    objective = _AggregateObjective(kind, P)
    fw = frank_wolfe_minimize(objective.interior_value, objective.gradient, vertices, start=start,
                              tol=tol, max_iter=max_iter, stall_window=stall_window)
    point = fw.atoms @ fw.weights
    return _finish_convex(kind, P, fw, 'local', fw.weights, point, tv_floor)


class _RegionProgram:
    """Linear programs over L_c = {Q normalized : beta(Q) <= c}."""

    def __init__(self, P: Behavior, functional: BellFunctional, bound: float, lp_tol: float,
                 refactor_every: int = 50):
        if functional.scenario != P.scenario:
            raise ScenarioMismatchError("functional and behavior live on different scenarios")
        s = P.scenario
        self.p = P.table
        self.n = s.size
        self.tau = s.tau
        self.coefficients = functional.dense()
        self.bound = float(bound)
        self.lp_tol = lp_tol
        self.refactor_every = refactor_every
        self.normalization = np.zeros((s.tau, s.size))
        for position in range(s.tau):
            self.normalization[position, s.block_slice(position)] = 1.0

    def _solve(self, c, A, b):
        return solve_lp(c, A, b, tol=self.lp_tol, refactor_every=self.refactor_every)

    def _rows(self, extra: int):
        """Normalization and Bell rows for [q | extra columns | slack]."""
        top = np.hstack([self.normalization, np.zeros((self.tau, extra + 1))])
        bell = np.concatenate([self.coefficients, np.zeros(extra), [1.0]])
        return np.vstack([top, bell]), np.concatenate([np.ones(self.tau), [self.bound]])

    def trace_distance(self):
        n = self.n
        rows, rhs = self._rows(2 * n)
        fit = np.hstack([np.eye(n), -np.eye(n), np.eye(n), np.zeros((n, 1))])
        A = np.vstack([fit, rows])
        b = np.concatenate([self.p, rhs])
        c = np.concatenate([np.zeros(n), np.full(2 * n, 1.0 / (2.0 * self.tau)), [0.0]])
        lp = self._solve(c, A, b)
        return np.clip(lp.x[:n], 0.0, None), lp

    def minimize_linear(self, g: np.ndarray) -> np.ndarray:
        rows, rhs = self._rows(0)
        lp = self._solve(np.concatenate([g, [0.0]]), rows, rhs)
        return np.clip(lp.x[:self.n], 0.0, None)

    def interior_point(self) -> np.ndarray:
        """Feasible behavior maximizing its smallest entry."""
        n = self.n
        rows, rhs = self._rows(n + 1)
        # columns: q (n), t (1), r (n), slack (1)
        floor = np.hstack([np.eye(n), -np.ones((n, 1)), -np.eye(n), np.zeros((n, 1))])
        A = np.vstack([floor, rows])
        b = np.concatenate([np.zeros(n), rhs])
        c = np.zeros(2 * n + 2)
        c[n] = -1.0
        lp = self._solve(c, A, b)
        if lp.x[n] <= 1e-12:
            raise SolverError(f"no strictly positive behavior satisfies beta <= {self.bound}")
        return np.clip(lp.x[:n], 0.0, None)


def distance_to_region(P: Behavior, functional: BellFunctional, bound: float,
                       kind: DivergenceKind, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, lp_tol: float = 1e-9,
                       tv_floor: Optional[DistanceResult] = None, refactor_every: int = 50,
                       warm_start: Optional[DistanceResult] = None) -> DistanceResult:
    """Minimal aggregated divergence from P to {Q : beta(Q) <= bound}.

    The infidelity search starts from the relative-entropy minimizer over the
    same region, as in distance_to_local.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    _require_valid(P)
    program = _RegionProgram(P, functional, bound, lp_tol, refactor_every)
    label = f"beta<={bound:.12g}"

    if kind is DivergenceKind.TV or (kind is DivergenceKind.INFIDELITY and tv_floor is None):
        point, lp = program.trace_distance()
        primal = _AggregateObjective(DivergenceKind.TV, P).value(point)
        gap = max(0.0, primal - lp.dual_objective) + lp.dual_infeasibility
        tv_result = DistanceResult(DivergenceKind.TV, primal, max(0.0, primal - gap), gap,
                                   lp.iterations, None, True, label, None, point)
        if kind is DivergenceKind.TV:
            return tv_result
        tv_floor = tv_result

    objective = _AggregateObjective(kind, P)
    stall_window = None
    if kind is DivergenceKind.INFIDELITY:
        _check_warm_start(warm_start, label)
        if warm_start is None:
            warm_start = distance_to_region(P, functional, bound, DivergenceKind.KL_BITS, tol, max_iter,
                                            lp_tol, refactor_every=refactor_every)
        start = warm_start.point
        stall_window = STALL_WINDOW
    else:
        start = program.interior_point()
    fw = _conditional_gradient(objective.interior_value, objective.gradient, start[:, None], np.ones(1),
                               program.minimize_linear, tol, max_iter, stall_window=stall_window)
    point = fw.atoms @ fw.weights
    return _finish_convex(kind, P, fw, label, None, point, tv_floor)
