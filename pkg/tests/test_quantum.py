import math

import numpy as np
import pytest

from divergence import DivergenceKind, aggregate_distance, divergence
from quantum import (
    PAULI_X,
    PAULI_Z,
    DensityMatrix,
    MeasurementAssemblage,
    QuantumInputError,
    behavior_from_quantum,
    bell_state_phi_plus,
    chsh_optimal_assemblage,
    ghz_graph_state,
    ghz_mabk_assemblage,
    ghz_mabk_behavior,
    load_quantum_setup,
    projective_measurement,
    random_density_matrix,
    random_projective_assemblage,
    save_quantum_setup,
    state_fidelity,
    state_trace_distance,
    werner_state,
    wootters_concurrence,
)
from scenario import Scenario, ScenarioMismatchError, is_no_signaling, uniform_behavior, validate_behavior


class TestDensityMatrix:
    def test_non_hermitian_rejected(self):
        with pytest.raises(QuantumInputError):
            DensityMatrix([[0.5, 0.1], [0.0, 0.5]], (2,))

    def test_trace_checked(self):
        with pytest.raises(QuantumInputError):
            DensityMatrix(np.eye(2), (2,))

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(QuantumInputError):
            DensityMatrix([[1.2, 0.0], [0.0, -0.2]], (2,))

    def test_dimension_mismatch(self):
        with pytest.raises(QuantumInputError):
            DensityMatrix(np.eye(4) / 4, (2, 3))

    def test_dimension_cap(self):
        with pytest.raises(QuantumInputError):
            ghz_graph_state(11)


class TestMeasurementAssemblage:
    def test_incomplete_povm_rejected(self):
        half = np.diag([1.0, 0.0])
        with pytest.raises(QuantumInputError):
            MeasurementAssemblage((((half, half),),))

    def test_non_positive_rejected(self):
        bad = np.diag([1.5, 0.0])
        with pytest.raises(QuantumInputError):
            MeasurementAssemblage((((bad, np.eye(2) - bad),),))

    def test_scenario_shape(self):
        assert chsh_optimal_assemblage().scenario == Scenario.uniform(2, 2, 2)

    def test_projectors_ordered_by_eigenvalue(self):
        plus, minus = projective_measurement(PAULI_Z)
        np.testing.assert_allclose(plus, np.diag([1, 0]), atol=1e-15)
        np.testing.assert_allclose(minus, np.diag([0, 1]), atol=1e-15)

    def test_degenerate_eigenvalues_grouped(self):
        projectors = projective_measurement(np.kron(PAULI_Z, PAULI_Z))
        assert len(projectors) == 2
        np.testing.assert_allclose(sum(projectors), np.eye(4), atol=1e-12)


class TestBehaviorFromQuantum:
    def test_maximally_mixed_gives_uniform(self):
        rho = DensityMatrix(np.eye(4) / 4, (2, 2))
        b = behavior_from_quantum(rho, random_projective_assemblage((2, 2), 3, seed=2))
        np.testing.assert_allclose(b.table, uniform_behavior(b.scenario).table, atol=1e-12)

    def test_tsirelson_table(self, tsirelson):
        b = behavior_from_quantum(bell_state_phi_plus(), chsh_optimal_assemblage())
        np.testing.assert_allclose(b.table, tsirelson.table, atol=1e-10)

    @pytest.mark.parametrize('n', [3, 5])
    def test_ghz_closed_form(self, n):
        b = behavior_from_quantum(ghz_graph_state(n), ghz_mabk_assemblage(n))
        np.testing.assert_allclose(b.table, ghz_mabk_behavior(n).table, atol=1e-12)

    def test_random_behaviors_are_valid_and_no_signaling(self):
        for seed in range(20):
            rho = random_density_matrix((2, 3), seed)
            b = behavior_from_quantum(rho, random_projective_assemblage((2, 3), 2, seed + 50))
            assert validate_behavior(b) == []
            ok, worst = is_no_signaling(b, 1e-8)
            assert ok, worst

    def test_dimension_mismatch(self):
        with pytest.raises(QuantumInputError):
            behavior_from_quantum(random_density_matrix((2, 3), 0), chsh_optimal_assemblage())

    def test_scenario_mismatch(self):
        with pytest.raises(ScenarioMismatchError):
            behavior_from_quantum(bell_state_phi_plus(), chsh_optimal_assemblage(), Scenario.uniform(2, 2, 3))


class TestGhzClosedForm:
    def test_even_parity_setting_uniform(self):
        b = ghz_mabk_behavior(3)
        np.testing.assert_array_equal(b.block(0), np.full(8, 1 / 8))

    def test_odd_parity_setting(self):
        b = ghz_mabk_behavior(3)
        s = b.scenario
        for outcome in [(0, 0, 0), (0, 1, 1), (1, 1, 0)]:
            assert b.probability((1, 0, 0), outcome) == 0.25
        for outcome in [(1, 0, 0), (1, 1, 1)]:
            assert b.probability((1, 0, 0), outcome) == 0.0
        assert validate_behavior(b) == []
        assert s.tau == 8

    def test_even_party_count_rejected(self):
        with pytest.raises(ValueError):
            ghz_mabk_behavior(4)


class TestOracles:
    def test_concurrence(self):
        assert wootters_concurrence(bell_state_phi_plus()) == pytest.approx(1.0, abs=1e-9)
        assert wootters_concurrence(DensityMatrix.from_vector([1, 0, 0, 0], (2, 2))) == pytest.approx(0.0, abs=1e-9)
        assert wootters_concurrence(werner_state(0.8)) == pytest.approx(0.7, abs=1e-9)
        assert wootters_concurrence(werner_state(0.3)) == pytest.approx(0.0, abs=1e-9)

    def test_concurrence_needs_two_qubits(self):
        with pytest.raises(QuantumInputError):
            wootters_concurrence(ghz_graph_state(3))

    def test_fidelity_and_trace_distance_extremes(self):
        rho = random_density_matrix((2, 2), 9)
        assert state_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-7)
        assert state_trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)
        zero = DensityMatrix.from_vector([1, 0], (2,))
        one = DensityMatrix.from_vector([0, 1], (2,))
        assert state_fidelity(zero, one) == pytest.approx(0.0, abs=1e-12)
        assert state_trace_distance(zero, one) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(QuantumInputError):
            state_fidelity(bell_state_phi_plus(), DensityMatrix.from_vector([1, 0], (2,)))

    def test_data_processing(self):
        for seed in range(100):
            rho = random_density_matrix((2, 2), seed)
            sigma = random_density_matrix((2, 2), seed + 500)
            assemblage = random_projective_assemblage((2, 2), 2, seed + 1000)
            p = behavior_from_quantum(rho, assemblage)
            q = behavior_from_quantum(sigma, assemblage)
            assert aggregate_distance(DivergenceKind.TV, p, q) <= state_trace_distance(rho, sigma) + 1e-9
            quantum_fidelity = state_fidelity(rho, sigma)
            for pm, qm in zip(p.blocks(), q.blocks()):
                classical = math.sqrt(1 - divergence(DivergenceKind.INFIDELITY, pm, qm) ** 2)
                assert classical >= quantum_fidelity - 1e-8


class TestSetupFiles:
    def test_round_trip(self, tmp_path, tsirelson):
        path = tmp_path / 'setup.json'
        save_quantum_setup(bell_state_phi_plus(), chsh_optimal_assemblage(), str(path))
        rho, assemblage = load_quantum_setup(str(path))
        assert rho.dims == (2, 2)
        np.testing.assert_allclose(behavior_from_quantum(rho, assemblage).table, tsirelson.table, atol=1e-10)

    def test_malformed_setup(self, tmp_path):
        path = tmp_path / 'setup.json'
        path.write_text('{"dims": [2], "state": [[1, 0], [0, 0]], "measurements": []}')
        with pytest.raises(QuantumInputError):
            load_quantum_setup(str(path))

    def test_pauli_x_measurement(self):
        plus, minus = projective_measurement(PAULI_X)
        np.testing.assert_allclose(plus, np.full((2, 2), 0.5), atol=1e-12)
