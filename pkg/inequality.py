#!/usr/bin/env python3
"""
Inequality - Bell functionals, classical bounds and normalized violations

Ships the CHSH, MABK(n) and Yu-Oh(d) functionals; anything else is read
from a JSON functional file.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from scenario import (
    Behavior,
    BehaviorStructureError,
    Scenario,
    ScenarioMismatchError,
    DEFAULT_VERTEX_CAP,
    enumerate_vertices,
)


BOUND_TOL = 1e-9

logger = logging.getLogger('bellbound.inequality')

Index = Tuple[Tuple[int, ...], Tuple[int, ...]]


class NormalizationUndefinedError(Exception):
    """Raised when alpha = 0, i.e. the functional is constant on every setting."""
    pass


class FunctionalFormatError(Exception):
    """Raised for malformed functional files or coefficients outside the scenario."""
    pass


@dataclass(frozen=True)
class BellFunctional:
    """beta(P) = sum alpha_{a|m} p(a|m), with an optional declared classical bound."""

    scenario: Scenario
    coefficients: Dict[Index, float]
    classical_bound: Optional[float] = None
    name: str = 'functional'

    def __post_init__(self):
        cleaned = {}
        for (setting, outcome), alpha in self.coefficients.items():
            key = (tuple(int(m) for m in setting), tuple(int(a) for a in outcome))
            try:
                self.scenario.index(*key)
            except BehaviorStructureError as e:
                raise FunctionalFormatError(f"coefficient m={key[0]} a={key[1]}: {e}") from e
            if float(alpha) != 0.0:
                cleaned[key] = float(alpha)
        object.__setattr__(self, 'coefficients', dict(sorted(cleaned.items())))

    __hash__ = None

    @cached_property
    def _dense_vector(self) -> np.ndarray:
        vector = np.zeros(self.scenario.size)
        for key, alpha in self.coefficients.items():
            vector[self.scenario.index(*key)] = alpha
        vector.setflags(write=False)
        return vector

    def dense(self) -> np.ndarray:
        """Coefficients laid out like a behavior table (read-only)."""
        return self._dense_vector

    def by_setting(self) -> Dict[Tuple[int, ...], List[float]]:
        grouped: Dict[Tuple[int, ...], List[float]] = {}
        for (setting, _), alpha in self.coefficients.items():
            grouped.setdefault(setting, []).append(alpha)
        return grouped


@dataclass(frozen=True)
class ViolationReport:
    beta: float
    c_used: float
    alpha: float
    beta_alpha: float
    c_source: str  # 'computed', 'declared' or 'override'
    functional: str = ''

    def to_dict(self) -> Dict:
        return {
            'functional': self.functional,
            'beta': self.beta,
            'c_used': self.c_used,
            'c_source': self.c_source,
            'alpha': self.alpha,
            'beta_alpha': self.beta_alpha,
        }


def evaluate(f: BellFunctional, b: Behavior) -> float:
    """Sparse dot product of the coefficients with the behavior table."""
    if f.scenario != b.scenario:
        raise ScenarioMismatchError(f"functional {f.name!r} and behavior use different scenarios")
    s = f.scenario
    return math.fsum(alpha * b.table[s.index(*key)] for key, alpha in f.coefficients.items())


def classical_bound(f: BellFunctional, cap: int = DEFAULT_VERTEX_CAP) -> float:
    """Maximum of the functional over the deterministic vertices."""
    vertices = enumerate_vertices(f.scenario, cap)
    values = f.dense()[vertices.entry_index].sum(axis=1)
    return float(values.max())


def alpha_normalizer(f: BellFunctional) -> float:
    """Sum over joint settings of (max - min) of the coefficients there.

    Outcomes without a coefficient at a listed setting count as 0.
    """
    s = f.scenario
    total = 0.0
    for setting, values in f.by_setting().items():
        block_size = int(np.prod(s.outcome_shape(setting)))
        if len(values) < block_size:
            values = values + [0.0]
        total += max(values) - min(values)
    if total <= 0.0:
        raise NormalizationUndefinedError(f"functional {f.name!r} is constant on every setting (alpha = 0)")
    return total


def normalized_violation(f: BellFunctional, b: Behavior, c_override: Optional[float] = None,
                         cap: int = DEFAULT_VERTEX_CAP) -> ViolationReport:
    """(beta - c) / alpha, floored at 0."""
    alpha = alpha_normalizer(f)
    beta = evaluate(f, b)
    if c_override is not None:
        c_used, source = float(c_override), 'override'
    elif f.classical_bound is not None:
        c_used, source = f.classical_bound, 'declared'
    else:
        c_used, source = classical_bound(f, cap), 'computed'
    return ViolationReport(
        beta=beta,
        c_used=c_used,
        alpha=alpha,
        beta_alpha=max(0.0, (beta - c_used) / alpha),
        c_source=source,
        functional=f.name,
    )


def verify_classical_bound(f: BellFunctional, cap: int = DEFAULT_VERTEX_CAP) -> Optional[str]:
    """Compare the declared bound with a recomputation; returns a warning or None."""
    if f.classical_bound is None:
        return None
    recomputed = classical_bound(f, cap)
    if abs(recomputed - f.classical_bound) > BOUND_TOL:
        message = (f"functional {f.name!r} declares classical bound {f.classical_bound:g}, "
                   f"vertex recomputation gives {recomputed:g}")
        logger.warning(message)
        return message
    return None


def chsh() -> BellFunctional:
    """CHSH: coefficients (-1)^(a+b+xy) on two parties, two settings, two outcomes."""
    coefficients = {
        ((x, y), (a, b)): float((-1) ** (a + b + x * y))
        for x, y, a, b in itertools.product(range(2), repeat=4)
    }
    return BellFunctional(Scenario.uniform(2, 2, 2), coefficients, 2.0, 'chsh')


def mabk_gamma(setting) -> int:
    """Sum over pairs j > k of m_j m_k."""
    ones = sum(setting)
    return ones * (ones - 1) // 2


def mabk(n: int) -> BellFunctional:
    """MABK functional for an odd number of parties; nonzero only on odd-parity settings."""
    if n < 3 or n % 2 == 0:
        raise ValueError(f"MABK needs an odd party count >= 3, got {n}")
    coefficients = {}
    for setting in itertools.product(range(2), repeat=n):
        if sum(setting) % 2 == 0:
            continue
        gamma = mabk_gamma(setting)
        for outcome in itertools.product(range(2), repeat=n):
            coefficients[(setting, outcome)] = float((-1) ** (gamma + sum(outcome)))
    return BellFunctional(Scenario.uniform(n, 2, 2), coefficients, 2.0 ** ((n - 1) / 2), f'mabk{n}')


def yu_oh(d: int) -> BellFunctional:
    """Yu-Oh functional; both of Bob's settings carry d outcomes."""
    if d < 2:
        raise ValueError(f"Yu-Oh needs d >= 2, got {d}")
    scenario = Scenario((tuple([2] * d), (d, d)))
    coefficients = {((0, 1), (0, 0)): 1.0}
    for k in range(d):
        coefficients[((k, 0), (0, k))] = -1.0
    for k in range(1, d):
        coefficients[((k, 1), (1, 0))] = -1.0
    return BellFunctional(scenario, coefficients, 0.0, f'yu_oh{d}')


def builtin_functional(name: str, n: Optional[int] = None) -> BellFunctional:
    if name == 'chsh':
        return chsh()
    if name == 'mabk':
        return mabk(n if n is not None else 3)
    if name in ('yu-oh', 'yu_oh', 'yuoh'):
        return yu_oh(n if n is not None else 3)
    raise ValueError(f"unknown built-in functional {name!r}")


def functional_to_dict(f: BellFunctional) -> Dict:
    data = {
        'name': f.name,
        'scenario': f.scenario.to_dict(),
        'coefficients': [
            {'m': list(setting), 'a': list(outcome), 'alpha': alpha}
            for (setting, outcome), alpha in f.coefficients.items()
        ],
    }
    if f.classical_bound is not None:
        data['classical_bound'] = f.classical_bound
    return data


def functional_from_dict(data: Dict) -> BellFunctional:
    try:
        scenario = Scenario.from_dict(data['scenario'])
        entries = data['coefficients']
    except (KeyError, TypeError, BehaviorStructureError) as e:
        raise FunctionalFormatError(f"malformed functional description: {e}") from e
    coefficients = {}
    for k, entry in enumerate(entries):
        try:
            key = (tuple(int(m) for m in entry['m']), tuple(int(a) for a in entry['a']))
            alpha = float(entry['alpha'])
        except (KeyError, TypeError, ValueError) as e:
            raise FunctionalFormatError(f"coefficient entry {k} is malformed: {e}") from e
        if key in coefficients:
            raise FunctionalFormatError(f"coefficient entry {k} repeats m={key[0]} a={key[1]}")
        coefficients[key] = alpha
    bound = data.get('classical_bound')
    return BellFunctional(
        scenario,
        coefficients,
        None if bound is None else float(bound),
        str(data.get('name', 'functional')),
    )


def save_functional(f: BellFunctional, path: str):
    with open(path, 'w') as fh:
        json.dump(functional_to_dict(f), fh, indent=2)


def load_functional(path: str, verify: bool = True, cap: int = DEFAULT_VERTEX_CAP) -> BellFunctional:
    """Load a functional file; a declared classical bound is checked against the vertices."""
    try:
        with open(path, 'r') as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise FunctionalFormatError(f"{path} is not valid JSON: {e}") from e
    f = functional_from_dict(data)
    if verify:
        verify_classical_bound(f, cap)
    logger.info(f"Loaded functional {f.name!r} with {len(f.coefficients)} coefficients from {path}")
    return f
