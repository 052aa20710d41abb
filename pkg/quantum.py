#!/usr/bin/env python3
"""
Quantum - states, measurements and the behaviors they generate

Dense matrices only. Also holds the entanglement and distance oracles used to
check the device-independent bounds against known states.
"""

import itertools
import json
import logging
import math
import string
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import unitary_group

from scenario import Behavior, Scenario, ScenarioMismatchError


HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIGEN_TOL = 1e-9
POVM_TOL = 1e-9
MAX_DIMENSION = 2 ** 10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

logger = logging.getLogger('bellbound.quantum')


class QuantumInputError(Exception):
    """Raised for invalid states, invalid measurements or inconsistent dimensions."""
    pass


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(matrix)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.conj().T


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    dims: Tuple[int, ...]

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        dims = tuple(int(d) for d in self.dims)
        d = int(np.prod(dims))
        if d > MAX_DIMENSION:
            raise QuantumInputError(f"total dimension {d} exceeds {MAX_DIMENSION}")
        if matrix.shape != (d, d):
            raise QuantumInputError(f"state has shape {matrix.shape}, party dimensions {dims} need ({d}, {d})")
        if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOL:
            raise QuantumInputError("state is not Hermitian")
        trace = np.trace(matrix).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise QuantumInputError(f"state has trace {trace:.12g}")
        lowest = float(np.linalg.eigvalsh(matrix).min())
        if lowest < -EIGEN_TOL:
            raise QuantumInputError(f"state has negative eigenvalue {lowest:.3g}")
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'dims', dims)

    @classmethod
    def from_vector(cls, psi, dims: Sequence[int]) -> 'DensityMatrix':
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), tuple(dims))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class MeasurementAssemblage:
    """operators[i][m][a] is the POVM element of outcome a for setting m of party i."""

    operators: Tuple[Tuple[Tuple[np.ndarray, ...], ...], ...]

    def __post_init__(self):
        parties = []
        for i, party in enumerate(self.operators):
            settings = []
            for m, povm in enumerate(party):
                povm = tuple(np.array(op, dtype=complex) for op in povm)
                if len(povm) < 2:
                    raise QuantumInputError(f"party {i} setting {m} has fewer than two outcomes")
                d = povm[0].shape[0]
                for a, op in enumerate(povm):
                    if op.shape != (d, d):
                        raise QuantumInputError(f"party {i} setting {m} outcome {a} has shape {op.shape}")
                    if np.max(np.abs(op - op.conj().T)) > POVM_TOL:
                        raise QuantumInputError(f"party {i} setting {m} outcome {a} is not Hermitian")
                    if np.linalg.eigvalsh(op).min() < -POVM_TOL:
                        raise QuantumInputError(f"party {i} setting {m} outcome {a} is not positive")
                if np.max(np.abs(sum(povm) - np.eye(d))) > POVM_TOL:
                    raise QuantumInputError(f"party {i} setting {m} does not sum to the identity")
                settings.append(povm)
            dims = {povm[0].shape[0] for povm in settings}
            if len(dims) != 1:
                raise QuantumInputError(f"party {i} uses operators of different dimensions {sorted(dims)}")
            parties.append(tuple(settings))
        if not parties:
            raise QuantumInputError("assemblage has no parties")
        object.__setattr__(self, 'operators', tuple(parties))

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(party[0][0].shape[0] for party in self.operators)

    @property
    def scenario(self) -> Scenario:
        return Scenario(tuple(tuple(len(povm) for povm in party) for party in self.operators))


def behavior_from_quantum(rho: DensityMatrix, assemblage: MeasurementAssemblage,
                          scenario: Optional[Scenario] = None) -> Behavior:
    """p(a|m) = Tr(rho . Pi_{a_1|m_1} x ... x Pi_{a_n|m_n})."""
    if scenario is None:
        scenario = assemblage.scenario
    elif scenario != assemblage.scenario:
        raise ScenarioMismatchError(f"assemblage shape {assemblage.scenario.outcomes} "
                                    f"does not match scenario {scenario.outcomes}")
    if tuple(rho.dims) != assemblage.dims:
        raise QuantumInputError(f"state dimensions {rho.dims} do not match measurement dimensions {assemblage.dims}")

    n = len(rho.dims)
    letters = string.ascii_letters
    rows, cols, outs = letters[:n], letters[n:2 * n], letters[2 * n:3 * n]
    subscripts = rows + cols + ''.join(f",{outs[i]}{cols[i]}{rows[i]}" for i in range(n)) + '->' + outs
    tensor = rho.matrix.reshape(rho.dims + rho.dims)

    table = np.empty(scenario.size)
    for position, setting in enumerate(scenario.joint_settings):
        stacks = [np.stack(assemblage.operators[i][m]) for i, m in enumerate(setting)]
        block = np.einsum(subscripts, tensor, *stacks, optimize=True)
        table[scenario.block_slice(position)] = block.real.reshape(-1)
    return Behavior(scenario, table)


def ghz_mabk_behavior(n: int) -> Behavior:
    """Closed-form GHZ statistics under the MABK measurements, n odd."""
    if n < 1 or n % 2 == 0 or n > 9:
        raise ValueError(f"need an odd party count up to 9, got {n}")
    s = Scenario.uniform(n, 2, 2)
    table = np.empty(s.size)
    for k, (setting, outcome) in enumerate(s.entries()):
        ones = sum(setting)
        if ones % 2 == 0:
            table[k] = 1.0 / 2 ** n
        else:
            gamma = ones * (ones - 1) // 2
            table[k] = (1 + (-1) ** (sum(outcome) + gamma)) / 2 ** n
    return Behavior(s, table)


def wootters_concurrence(rho: DensityMatrix) -> float:
    if rho.dimension != 4:
        raise QuantumInputError(f"concurrence needs a two-qubit state, got dimension {rho.dimension}")
    flip = np.kron(PAULI_Y, PAULI_Y)
    r = rho.matrix @ flip @ rho.matrix.conj() @ flip
    lambdas = np.sort(np.sqrt(np.clip(np.linalg.eigvals(r).real, 0.0, None)))[::-1]
    return float(max(0.0, lambdas[0] - lambdas[1:].sum()))


def state_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Tr sqrt(sqrt(sigma) rho sqrt(sigma))."""
    if rho.dimension != sigma.dimension:
        raise QuantumInputError(f"dimension mismatch: {rho.dimension} vs {sigma.dimension}")
    root = _psd_sqrt(sigma.matrix)
    inner = root @ rho.matrix @ root
    values = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(min(1.0, np.sqrt(np.clip(values, 0.0, None)).sum()))


def state_trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.dimension != sigma.dimension:
        raise QuantumInputError(f"dimension mismatch: {rho.dimension} vs {sigma.dimension}")
    return float(min(1.0, 0.5 * np.abs(np.linalg.eigvalsh(rho.matrix - sigma.matrix)).sum()))


def projective_measurement(observable: np.ndarray, tol: float = 1e-9) -> Tuple[np.ndarray, ...]:
    """Eigenprojectors of an observable, largest eigenvalue first (outcome 0)."""
    observable = np.asarray(observable, dtype=complex)
    values, vectors = np.linalg.eigh(observable)
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]
    projectors, start = [], 0
    while start < len(values):
        stop = start + 1
        while stop < len(values) and abs(values[stop] - values[start]) <= tol:
            stop += 1
        v = vectors[:, start:stop]
        projectors.append(v @ v.conj().T)
        start = stop
    return tuple(projectors)


def bell_state_phi_plus() -> DensityMatrix:
    return DensityMatrix.from_vector([1, 0, 0, 1], (2, 2))


def werner_state(p: float) -> DensityMatrix:
    """p |Phi+><Phi+| + (1 - p) I/4."""
    if not 0.0 <= p <= 1.0:
        raise QuantumInputError(f"Werner weight must lie in [0, 1], got {p}")
    return DensityMatrix(p * bell_state_phi_plus().matrix + (1 - p) * np.eye(4) / 4, (2, 2))


def ghz_graph_state(n: int) -> DensityMatrix:
    """Complete-graph state, locally equivalent to GHZ: sum_x (-1)^C(|x|, 2) |x> / 2^(n/2)."""
    if 2 ** n > MAX_DIMENSION:
        raise QuantumInputError(f"{n} qubits exceed the dimension cap {MAX_DIMENSION}")
    psi = np.empty(2 ** n, dtype=complex)
    for x, bits in enumerate(itertools.product(range(2), repeat=n)):
        weight = sum(bits)
        psi[x] = (-1) ** (weight * (weight - 1) // 2)
    return DensityMatrix.from_vector(psi, (2,) * n)


def chsh_optimal_assemblage() -> MeasurementAssemblage:
    """A0 = Z, A1 = X, B0 = (Z + X)/sqrt2, B1 = (Z - X)/sqrt2."""
    r = 1.0 / math.sqrt(2.0)
    alice = (projective_measurement(PAULI_Z), projective_measurement(PAULI_X))
    bob = (projective_measurement(r * (PAULI_Z + PAULI_X)), projective_measurement(r * (PAULI_Z - PAULI_X)))
    return MeasurementAssemblage((alice, bob))


def ghz_mabk_assemblage(n: int) -> MeasurementAssemblage:
    """Setting 0 measures Z, setting 1 measures X, on every party."""
    party = (projective_measurement(PAULI_Z), projective_measurement(PAULI_X))
    return MeasurementAssemblage(tuple(party for _ in range(n)))


def random_density_matrix(dims: Sequence[int], seed: int, rank: Optional[int] = None) -> DensityMatrix:
    """Ginibre-distributed state of the given rank (full rank by default)."""
    rng = np.random.default_rng(seed)
    d = int(np.prod(dims))
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho / np.trace(rho).real, tuple(dims))


def random_projective_assemblage(dims: Sequence[int], settings: int, seed: int) -> MeasurementAssemblage:
    """Each setting measures in a Haar-random orthonormal basis."""
    rng = np.random.default_rng(seed)
    parties = []
    for d in dims:
        povms = []
        for _ in range(settings):
            u = unitary_group.rvs(d, random_state=rng)
            povms.append(tuple(np.outer(u[:, k], u[:, k].conj()) for k in range(d)))
        parties.append(tuple(povms))
    return MeasurementAssemblage(tuple(parties))


def _complex_matrix(rows) -> np.ndarray:
    try:
        array = np.array(rows, dtype=float)
    except (TypeError, ValueError) as e:
        raise QuantumInputError(f"matrix entries must be [re, im] pairs: {e}") from e
    if array.ndim != 3 or array.shape[-1] != 2:
        raise QuantumInputError(f"matrix entries must be [re, im] pairs, got array of shape {array.shape}")
    return array[..., 0] + 1j * array[..., 1]


def load_quantum_setup(path: str) -> Tuple[DensityMatrix, MeasurementAssemblage]:
    """Read {"dims": [...], "state": matrix, "measurements": [[[matrix per outcome] per setting] per party]}."""
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise QuantumInputError(f"{path} is not valid JSON: {e}") from e
    try:
        dims = tuple(int(d) for d in data['dims'])
        rho = DensityMatrix(_complex_matrix(data['state']), dims)
        operators = tuple(
            tuple(tuple(_complex_matrix(op) for op in povm) for povm in party)
            for party in data['measurements']
        )
    except (KeyError, TypeError) as e:
        raise QuantumInputError(f"malformed quantum setup in {path}: {e}") from e
    assemblage = MeasurementAssemblage(operators)
    logger.info(f"Loaded {len(dims)}-party quantum setup from {path} (dimension {rho.dimension})")
    return rho, assemblage


def _matrix_to_pairs(matrix: np.ndarray) -> List:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(matrix, dtype=complex)]


def save_quantum_setup(rho: DensityMatrix, assemblage: MeasurementAssemblage, path: str):
    data = {
        'dims': list(rho.dims),
        'state': _matrix_to_pairs(rho.matrix),
        'measurements': [
            [[_matrix_to_pairs(op) for op in povm] for povm in party]
            for party in assemblage.operators
        ],
    }
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)
