#!/usr/bin/env python3
"""
Recipe Runner - builds the named example behaviors and executes reproduction recipes
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from bounds import MeasureKind, chsh_refined_bounds, theorem1_bounds, theorem2_bounds, two_qubit_concurrence_bound
from divergence import DistanceResult, DivergenceKind, aggregate_distance, distance_to_local, distance_to_region
from inequality import BellFunctional, alpha_normalizer, chsh, classical_bound, mabk, normalized_violation, yu_oh
from quantum import (
    behavior_from_quantum,
    bell_state_phi_plus,
    chsh_optimal_assemblage,
    ghz_graph_state,
    ghz_mabk_assemblage,
    ghz_mabk_behavior,
)
from recipe_registry import RecipeRegistry, SolverSettings, load_solver_settings
from scenario import Behavior, Scenario


EXAMPLES = ('chsh-tsirelson', 'mabk', 'yu-oh')

logger = logging.getLogger('bellbound.recipe_runner')


def tsirelson_behavior() -> Behavior:
    """(1 + (-1)^(a+b+xy)/sqrt2)/4 on the minimal scenario."""
    s = Scenario.uniform(2, 2, 2)
    r = 1.0 / math.sqrt(2.0)
    table = [(1 + (-1) ** (a + b + x * y) * r) / 4 for (x, y), (a, b) in s.entries()]
    return Behavior(s, np.array(table))


def yu_oh_violating_behavior(d: int) -> Behavior:
    """Normalized behavior with beta = 1: p(00|01) = 1 and no weight on penalized entries."""
    f = yu_oh(d)
    s = f.scenario
    table = np.zeros(s.size)
    for x, y in s.joint_settings:
        if (x, y) == (0, 1) or (x >= 1 and y == 1):
            outcome = (0, 0)
        else:
            outcome = (1, 0)
        table[s.index((x, y), outcome)] = 1.0
    return Behavior(s, table)


def build_example(name: str, n: Optional[int] = None) -> Tuple[Behavior, BellFunctional]:
    """Behavior and functional of a named example; n is the MABK party count or the Yu-Oh d."""
    name = name.lower()
    if name in ('chsh', 'chsh-tsirelson'):
        return tsirelson_behavior(), chsh()
    if name == 'mabk':
        n = 3 if n is None else n
        return ghz_mabk_behavior(n), mabk(n)
    if name in ('yu-oh', 'yu_oh'):
        d = 3 if n is None else n
        return yu_oh_violating_behavior(d), yu_oh(d)
    raise ValueError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}")


@dataclass
class CheckOutcome:
    recipe: str
    label: str
    computed: Optional[float]
    printed: float
    tolerance: float
    status: str  # 'ok', 'mismatch' or 'known-discrepancy'
    note: str = ''

    def to_dict(self) -> Dict:
        return {
            'recipe': self.recipe,
            'label': self.label,
            'computed': self.computed,
            'printed': self.printed,
            'tolerance': self.tolerance,
            'status': self.status,
            'note': self.note,
        }


@dataclass
class ReproductionReport:
    outcomes: List[CheckOutcome] = field(default_factory=list)
    strict: bool = False

    def count(self, status: str) -> int:
        return sum(1 for o in self.outcomes if o.status == status)

    @property
    def success(self) -> bool:
        if self.count('mismatch'):
            return False
        return not (self.strict and self.count('known-discrepancy'))

    def to_dict(self) -> Dict:
        return {
            'strict': self.strict,
            'success': self.success,
            'counts': {s: self.count(s) for s in ('ok', 'mismatch', 'known-discrepancy')},
            'checks': [o.to_dict() for o in self.outcomes],
        }

    def render(self) -> str:
        lines = [f"{'recipe':<22} {'check':<34} {'computed':>12} {'printed':>10} {'tol':>8}  status"]
        lines.append('-' * 100)
        for o in self.outcomes:
            computed = '-' if o.computed is None else f"{o.computed:.6f}"
            lines.append(f"{o.recipe:<22} {o.label:<34} {computed:>12} {o.printed:>10.6g} {o.tolerance:>8.1g}  {o.status}")
            if o.note:
                lines.append(f"{'':<22}   {o.note}")
        lines.append('')
        lines.append(f"{self.count('ok')} ok, {self.count('mismatch')} mismatch, "
                     f"{self.count('known-discrepancy')} known discrepancies")
        return '\n'.join(lines)


class RecipeRunner:
    def __init__(self, registry: RecipeRegistry = None, settings: SolverSettings = None):
        if registry is None:
            registry = RecipeRegistry()
        if settings is None:
            settings = load_solver_settings()
        self.registry = registry
        self.settings = settings
        self._distances: Dict[Tuple, DistanceResult] = {}
        self._lock = threading.Lock()

    def distance(self, example: str, n: Optional[int], kind: DivergenceKind,
                 c: Optional[float] = None) -> DistanceResult:
        """Distance to the local set, or to {beta <= c} when c is given; cached per run."""
        key = (example, n, kind, c)
        with self._lock:
            if key in self._distances:
                return self._distances[key]
        behavior, functional = build_example(example, n)
        s = self.settings
        tv_floor = warm_start = None
        if kind is DivergenceKind.INFIDELITY:
            tv_floor = self.distance(example, n, DivergenceKind.TV, c)
            warm_start = self.distance(example, n, DivergenceKind.KL_BITS, c)
        options = dict(tol=s.tolerance, max_iter=s.max_iter, lp_tol=s.lp_tolerance,
                       refactor_every=s.lp_refactor_every, tv_floor=tv_floor, warm_start=warm_start)
        if c is None:
            result = distance_to_local(behavior, kind, cap=s.vertex_cap, **options)
        else:
            result = distance_to_region(behavior, functional, c, kind, **options)
        with self._lock:
            self._distances[key] = result
        return result

    def run_recipe(self, recipe: Dict) -> List[CheckOutcome]:
        """Execute every check of one recipe"""
        outcomes = []
        for check in recipe.get('checks', []):
            label = check.get('label', check.get('type', '?'))
            printed = float(check['printed'])
            tolerance = float(check.get('tolerance', 1e-6))
            try:
                computed = self.execute_check(check)
            except Exception as e:
                logger.error(f"Recipe {recipe.get('name')} check {label} failed: {e}")
                outcomes.append(CheckOutcome(recipe.get('name', '?'), label, None, printed, tolerance,
                                             'mismatch', f"error: {e}"))
                continue
            note = ''
            if abs(computed - printed) <= tolerance:
                status = 'ok'
            elif check.get('known_discrepancy'):
                status = 'known-discrepancy'
                note = check['known_discrepancy']
                logger.warning(f"{recipe.get('name')} {label}: computed {computed:.6g}, printed {printed:g} ({note})")
            else:
                status = 'mismatch'
                logger.warning(f"{recipe.get('name')} {label}: computed {computed:.6g}, expected {printed:g} +- {tolerance:g}")
            outcomes.append(CheckOutcome(recipe.get('name', '?'), label, computed, printed, tolerance, status, note))
        return outcomes

    def execute_check(self, check: Dict) -> float:
        """Compute the value one check compares against the printed number"""
        check_type = check.get('type')
        example = check.get('example', 'chsh-tsirelson')
        n = check.get('n')
        c = check.get('c_override')
        c = None if c is None else _number(c)

        if check_type == 'violation':
            behavior, functional = build_example(example, n)
            report = normalized_violation(functional, behavior, c, cap=self.settings.vertex_cap)
            return float(getattr(report, check.get('quantity', 'beta_alpha')))

        elif check_type == 'alpha':
            _, functional = build_example(example, n)
            return alpha_normalizer(functional)

        elif check_type == 'classical_bound':
            _, functional = build_example(example, n)
            return classical_bound(functional, self.settings.vertex_cap)

        elif check_type == 'theorem2':
            behavior, functional = build_example(example, n)
            report = theorem2_bounds(normalized_violation(functional, behavior, c, cap=self.settings.vertex_cap))
            return _measure(report, check['measure'])

        elif check_type == 'theorem1':
            results = [self.distance(example, n, kind, c) for kind in DivergenceKind]
            return _measure(theorem1_bounds(*results), check['measure'])

        elif check_type == 'distance':
            kind = DivergenceKind.from_label(check.get('kind', 'tv'))
            if check.get('evaluate_at') == 'kl_minimizer':
                # printed infidelity figures are taken at the relative-entropy minimizer
                behavior, _ = build_example(example, n)
                nearest = self.distance(example, n, DivergenceKind.KL_BITS, c)
                value = aggregate_distance(kind, behavior, Behavior(behavior.scenario, nearest.point))
            else:
                result = self.distance(example, n, kind, c)
                value = getattr(result, check.get('field', 'certified_lower'))
            return _transform(value, check.get('transform'))

        elif check_type == 'chsh_refined':
            return chsh_refined_bounds(_number(check['beta']))[MeasureKind[check['measure']]]

        elif check_type == 'concurrence_bound':
            return two_qubit_concurrence_bound(_number(check['beta']))

        elif check_type == 'quantum_match':
            closed_form, _ = build_example(example, n)
            if example == 'mabk':
                generated = behavior_from_quantum(ghz_graph_state(n), ghz_mabk_assemblage(n))
            else:
                generated = behavior_from_quantum(bell_state_phi_plus(), chsh_optimal_assemblage())
            return float(np.max(np.abs(generated.table - closed_form.table)))

        raise ValueError(f"unknown check type {check_type!r}")

    def run_all(self, strict: bool = False, names: Optional[List[str]] = None) -> ReproductionReport:
        """Run recipes on a thread pool; outcomes keep declaration order"""
        recipes = self.registry.get_all_recipes()
        if names:
            recipes = [r for r in recipes if r.get('name') in names]
        with ThreadPoolExecutor(max_workers=max(1, self.settings.threads)) as pool:
            per_recipe = list(pool.map(self.run_recipe, recipes))
        report = ReproductionReport(strict=strict)
        for outcomes in per_recipe:
            report.outcomes.extend(outcomes)
        logger.info(f"Reproduced {len(report.outcomes)} checks from {len(recipes)} recipes")
        return report


def _number(value: Any) -> float:
    """Numbers or the strings 'sqrt2' / '2sqrt2' from the recipe file."""
    if isinstance(value, str):
        constants = {'sqrt2': math.sqrt(2.0), '2sqrt2': 2.0 * math.sqrt(2.0)}
        if value in constants:
            return constants[value]
    return float(value)


def _measure(report, name: str) -> float:
    value = report.value(MeasureKind[name])
    if value is None:
        raise ValueError(f"{name} was omitted from the {report.method} report")
    return value


def _transform(value: float, transform: Optional[str]) -> float:
    if transform is None:
        return value
    if transform == 'square':
        return value * value
    if transform == 'sqrt2':
        return math.sqrt(2.0) * value
    if transform == 'robustness':
        return value / (1.0 - value)
    raise ValueError(f"unknown transform {transform!r}")
