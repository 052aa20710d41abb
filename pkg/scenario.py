#!/usr/bin/env python3
"""
Scenario - Bell scenarios, behaviors and the deterministic vertices of the local polytope

A behavior is stored as one flat probability vector. Joint settings are laid
out lexicographically by party (party 0 most significant), and inside every
joint setting the joint outcomes are laid out the same way. This order is the
one used by the JSON file format and by every solver in the project.
"""

import itertools
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np


NORMALIZATION_TOL = 1e-9
CLAMP_TOL = 1e-12
DEFAULT_VERTEX_CAP = 2 ** 20

logger = logging.getLogger('bellbound.scenario')


class BehaviorStructureError(Exception):
    """Raised when a table does not cover the index space of its scenario."""
    pass


class BehaviorValidationError(Exception):
    """Raised when a behavior breaks normalization or nonnegativity."""

    def __init__(self, violations: List['Violation']):
        self.violations = violations
        lines = '; '.join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ''
        super().__init__(f"{len(violations)} violation(s): {lines}{more}")


class VertexCapacityError(Exception):
    """Raised when a scenario has more deterministic vertices than the cap allows."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"scenario has {count} deterministic vertices, cap is {cap}")


class ScenarioMismatchError(Exception):
    """Raised when two objects that must share a scenario do not."""
    pass


@dataclass(frozen=True)
class Scenario:
    """Party count, settings per party and outcome counts per (party, setting)."""

    outcomes: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        outcomes = tuple(tuple(int(k) for k in party) for party in self.outcomes)
        object.__setattr__(self, 'outcomes', outcomes)
        if len(outcomes) < 1:
            raise BehaviorStructureError("a scenario needs at least one party")
        for i, party in enumerate(outcomes):
            if len(party) < 1:
                raise BehaviorStructureError(f"party {i} has no settings")
            for m, k in enumerate(party):
                if k < 2:
                    raise BehaviorStructureError(
                        f"party {i} setting {m} has {k} outcome(s), need at least 2"
                    )

    @classmethod
    def uniform(cls, parties: int, settings: int, outcomes: int) -> 'Scenario':
        """Scenario where every party has the same settings and outcome counts."""
        return cls(tuple(tuple([outcomes] * settings) for _ in range(parties)))

    @property
    def parties(self) -> int:
        return len(self.outcomes)

    @property
    def settings(self) -> Tuple[int, ...]:
        return tuple(len(party) for party in self.outcomes)

    @property
    def tau(self) -> int:
        """Number of joint setting tuples."""
        return int(np.prod(self.settings))

    @cached_property
    def joint_settings(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(itertools.product(*(range(m) for m in self.settings)))

    def outcome_shape(self, setting: Sequence[int]) -> Tuple[int, ...]:
        return tuple(self.outcomes[i][m] for i, m in enumerate(setting))

    @cached_property
    def offsets(self) -> Tuple[int, ...]:
        """Start index of every joint setting block; the last entry is the total size."""
        starts = [0]
        for setting in self.joint_settings:
            starts.append(starts[-1] + int(np.prod(self.outcome_shape(setting))))
        return tuple(starts)

    @cached_property
    def setting_position(self) -> Dict[Tuple[int, ...], int]:
        return {setting: pos for pos, setting in enumerate(self.joint_settings)}

    @property
    def size(self) -> int:
        return self.offsets[-1]

    @property
    def vertex_count(self) -> int:
        return int(np.prod([k for party in self.outcomes for k in party], dtype=object))

    def check_setting(self, setting: Sequence[int]) -> Tuple[int, ...]:
        setting = tuple(int(m) for m in setting)
        if setting not in self.setting_position:
            raise BehaviorStructureError(f"setting {setting} is not part of scenario {self.outcomes}")
        return setting

    def index(self, setting: Sequence[int], outcome: Sequence[int]) -> int:
        """Flat position of p(outcome|setting)."""
        setting = self.check_setting(setting)
        shape = self.outcome_shape(setting)
        outcome = tuple(int(a) for a in outcome)
        if len(outcome) != len(shape) or any(a < 0 or a >= k for a, k in zip(outcome, shape)):
            raise BehaviorStructureError(
                f"outcome {outcome} out of range for setting {setting} (outcome counts {shape})"
            )
        return self.offsets[self.setting_position[setting]] + int(np.ravel_multi_index(outcome, shape))

    def block_slice(self, position: int) -> slice:
        return slice(self.offsets[position], self.offsets[position + 1])

    def entries(self) -> Iterator[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
        """Yield every (setting, outcome) pair in canonical order."""
        for setting in self.joint_settings:
            for outcome in itertools.product(*(range(k) for k in self.outcome_shape(setting))):
                yield setting, outcome

    def to_dict(self) -> Dict:
        return {
            'parties': self.parties,
            'settings': list(self.settings),
            'outcomes': [list(party) for party in self.outcomes],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'Scenario':
        try:
            parties = int(data['parties'])
            settings = [int(m) for m in data['settings']]
            outcomes = [[int(k) for k in party] for party in data['outcomes']]
        except (KeyError, TypeError, ValueError) as e:
            raise BehaviorStructureError(f"malformed scenario description: {e}") from e
        if len(settings) != parties or len(outcomes) != parties:
            raise BehaviorStructureError(
                f"scenario lists {len(settings)} setting counts and {len(outcomes)} outcome rows "
                f"for {parties} parties"
            )
        for i, (m, row) in enumerate(zip(settings, outcomes)):
            if len(row) != m:
                raise BehaviorStructureError(f"party {i} declares {m} settings but {len(row)} outcome counts")
        return cls(tuple(tuple(row) for row in outcomes))


@dataclass(frozen=True)
class Violation:
    setting: Tuple[int, ...]
    kind: str  # 'normalization' or 'negativity'
    residual: float
    outcome: Optional[Tuple[int, ...]] = None

    def __str__(self):
        where = f"m={self.setting}" + (f" a={self.outcome}" if self.outcome is not None else '')
        return f"{self.kind} at {where}, residual {self.residual:.3g}"


@dataclass(frozen=True, eq=False)
class Behavior:
    """Probability table p(a|m) over a scenario, immutable after construction."""

    scenario: Scenario
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float).reshape(-1)
        if table.shape[0] != self.scenario.size:
            raise BehaviorStructureError(
                f"table has {table.shape[0]} entries, scenario needs {self.scenario.size}"
            )
        # float noise from quantum generation
        table[(table < 0) & (table >= -CLAMP_TOL)] = 0.0
        table.setflags(write=False)
        object.__setattr__(self, 'table', table)

    def block(self, position: int) -> np.ndarray:
        """Distribution over joint outcomes for the joint setting at this position."""
        return self.table[self.scenario.block_slice(position)]

    def blocks(self) -> Iterator[np.ndarray]:
        for position in range(self.scenario.tau):
            yield self.block(position)

    def probability(self, setting: Sequence[int], outcome: Sequence[int]) -> float:
        return float(self.table[self.scenario.index(setting, outcome)])

    def allclose(self, other: 'Behavior', atol: float = 1e-12) -> bool:
        return self.scenario == other.scenario and bool(np.allclose(self.table, other.table, atol=atol, rtol=0))


@dataclass(frozen=True)
class DeterministicStrategy:
    """Fixed outcome o(i, m) for every party i and setting m."""

    scenario: Scenario
    outputs: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        outputs = tuple(tuple(int(o) for o in party) for party in self.outputs)
        object.__setattr__(self, 'outputs', outputs)
        if len(outputs) != self.scenario.parties:
            raise BehaviorStructureError(f"strategy covers {len(outputs)} parties, scenario has {self.scenario.parties}")
        for i, (party, counts) in enumerate(zip(outputs, self.scenario.outcomes)):
            if len(party) != len(counts):
                raise BehaviorStructureError(f"strategy for party {i} is not defined for every setting")
            for m, (o, k) in enumerate(zip(party, counts)):
                if not 0 <= o < k:
                    raise BehaviorStructureError(f"strategy outcome {o} out of range at party {i} setting {m}")


@dataclass(frozen=True, eq=False)
class VertexSet:
    """All deterministic strategies of a scenario in canonical order."""

    scenario: Scenario
    codes: np.ndarray  # one row per vertex, columns ordered (party, setting)

    def __len__(self):
        return self.codes.shape[0]

    def __getitem__(self, k: int) -> DeterministicStrategy:
        row = self.codes[k]
        outputs, start = [], 0
        for party in self.scenario.outcomes:
            outputs.append(tuple(int(o) for o in row[start:start + len(party)]))
            start += len(party)
        return DeterministicStrategy(self.scenario, tuple(outputs))

    def __iter__(self) -> Iterator[DeterministicStrategy]:
        for k in range(len(self)):
            yield self[k]

    @cached_property
    def entry_index(self) -> np.ndarray:
        """Flat table index hit by each vertex in each joint setting (vertices x tau)."""
        s = self.scenario
        column_of = np.cumsum([0] + [len(party) for party in s.outcomes[:-1]])
        index = np.empty((len(self), s.tau), dtype=np.int64)
        for position, setting in enumerate(s.joint_settings):
            shape = s.outcome_shape(setting)
            strides = np.array([int(np.prod(shape[i + 1:])) for i in range(len(shape))], dtype=np.int64)
            picked = self.codes[:, [column_of[i] + m for i, m in enumerate(setting)]]
            index[:, position] = s.offsets[position] + picked @ strides
        index.setflags(write=False)
        return index

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense 0/1 matrix with one column per vertex behavior."""
        matrix = np.zeros((self.scenario.size, len(self)))
        columns = np.repeat(np.arange(len(self)), self.scenario.tau)
        matrix[self.entry_index.reshape(-1), columns] = 1.0
        matrix.setflags(write=False)
        return matrix


def enumerate_vertices(s: Scenario, cap: int = DEFAULT_VERTEX_CAP) -> VertexSet:
    """Every deterministic strategy, ordered lexicographically by (party, setting, outcome)."""
    count = s.vertex_count
    if count > cap:
        raise VertexCapacityError(count, cap)
    ranges = [range(k) for party in s.outcomes for k in party]
    codes = np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(count, len(ranges))
    logger.debug(f"Enumerated {count} vertices for scenario {s.outcomes}")
    return VertexSet(s, codes)


def vertex_behavior(v: DeterministicStrategy) -> Behavior:
    """Deterministic point: p(a|m) = 1 iff every a_i = o(i, m_i)."""
    s = v.scenario
    table = np.zeros(s.size)
    for setting in s.joint_settings:
        outcome = tuple(v.outputs[i][m] for i, m in enumerate(setting))
        table[s.index(setting, outcome)] = 1.0
    return Behavior(s, table)


def uniform_behavior(s: Scenario) -> Behavior:
    table = np.empty(s.size)
    for position in range(s.tau):
        block = s.block_slice(position)
        table[block] = 1.0 / (block.stop - block.start)
    return Behavior(s, table)


def mix_behaviors(behaviors: Sequence[Behavior], weights: Sequence[float]) -> Behavior:
    """Convex combination of behaviors on one scenario."""
    if len(behaviors) != len(weights) or not behaviors:
        raise ValueError("need one weight per behavior")
    s = behaviors[0].scenario
    for b in behaviors[1:]:
        if b.scenario != s:
            raise ScenarioMismatchError("cannot mix behaviors from different scenarios")
    table = sum(float(w) * b.table for w, b in zip(weights, behaviors))
    return Behavior(s, table)


def behavior_from_weights(vertices: VertexSet, weights: np.ndarray) -> Behavior:
    return Behavior(vertices.scenario, vertices.matrix @ np.asarray(weights, dtype=float))


def validate_behavior(b: Behavior, tol: float = NORMALIZATION_TOL) -> List[Violation]:
    """List normalization and nonnegativity violations; empty when the behavior is valid."""
    s = b.scenario
    violations = []
    for position, setting in enumerate(s.joint_settings):
        block = b.block(position)
        residual = float(block.sum()) - 1.0
        if abs(residual) > tol:
            violations.append(Violation(setting, 'normalization', residual))
        for flat in np.flatnonzero(block < 0):
            outcome = tuple(int(a) for a in np.unravel_index(int(flat), s.outcome_shape(setting)))
            violations.append(Violation(setting, 'negativity', float(block[flat]), outcome))
    return violations


def is_no_signaling(b: Behavior, tol: float = 1e-9) -> Tuple[bool, float]:
    """Check that each party's marginal ignores the other parties' settings."""
    s = b.scenario
    worst = 0.0
    for party in range(s.parties):
        reference: Dict[int, np.ndarray] = {}
        for position, setting in enumerate(s.joint_settings):
            block = b.block(position).reshape(s.outcome_shape(setting))
            others = tuple(j for j in range(s.parties) if j != party)
            marginal = block.sum(axis=others) if others else block
            local = setting[party]
            if local not in reference:
                reference[local] = marginal
            else:
                worst = max(worst, float(np.max(np.abs(marginal - reference[local]))))
    return worst <= tol, worst


def random_local_behavior(s: Scenario, seed: int, support_size: int,
                          cap: int = DEFAULT_VERTEX_CAP) -> Tuple[Behavior, np.ndarray]:
    """Random mixture of vertices; the returned weight vector certifies locality."""
    vertices = enumerate_vertices(s, cap)
    if not 1 <= support_size <= len(vertices):
        raise ValueError(f"support_size must be between 1 and {len(vertices)}")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(len(vertices), size=support_size, replace=False))
    weights = np.zeros(len(vertices))
    weights[support] = rng.dirichlet(np.ones(support_size))
    return behavior_from_weights(vertices, weights), weights


def behavior_to_dict(b: Behavior) -> Dict:
    """Serialize to the JSON layout; zero entries are omitted."""
    probabilities = {}
    for k, (setting, outcome) in enumerate(b.scenario.entries()):
        value = float(b.table[k])
        if value != 0.0:
            key = ','.join(map(str, setting)) + '|' + ','.join(map(str, outcome))
            probabilities[key] = value
    data = b.scenario.to_dict()
    data['probabilities'] = probabilities
    return data


def behavior_from_dict(data: Dict, validate: bool = True) -> Behavior:
    s = Scenario.from_dict(data)
    table = np.zeros(s.size)
    for key, value in data.get('probabilities', {}).items():
        try:
            setting_text, outcome_text = key.split('|')
            setting = tuple(int(x) for x in setting_text.split(','))
            outcome = tuple(int(x) for x in outcome_text.split(','))
            value = float(value)
        except (ValueError, AttributeError, TypeError) as e:
            raise BehaviorStructureError(f"malformed probability entry {key!r}: {e}") from e
        if len(setting) != s.parties:
            raise BehaviorStructureError(f"entry {key!r} names {len(setting)} settings for {s.parties} parties")
        table[s.index(setting, outcome)] = value
    b = Behavior(s, table)
    if validate:
        violations = validate_behavior(b)
        if violations:
            raise BehaviorValidationError(violations)
    return b


def load_behavior(path: str, validate: bool = True) -> Behavior:
    """Load a behavior file and run validate_behavior on it."""
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise BehaviorStructureError(f"{path} is not valid JSON: {e}") from e
    b = behavior_from_dict(data, validate=validate)
    logger.info(f"Loaded behavior from {path} ({b.scenario.tau} joint settings)")
    return b


def save_behavior(b: Behavior, path: str):
    with open(path, 'w') as f:
        json.dump(behavior_to_dict(b), f, indent=2)
