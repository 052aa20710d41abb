import json
import logging
import math

import numpy as np
import pytest

from inequality import (
    BellFunctional,
    FunctionalFormatError,
    NormalizationUndefinedError,
    alpha_normalizer,
    builtin_functional,
    chsh,
    classical_bound,
    evaluate,
    functional_to_dict,
    load_functional,
    mabk,
    normalized_violation,
    save_functional,
    verify_classical_bound,
    yu_oh,
)
from quantum import ghz_mabk_behavior
from recipe_runner import yu_oh_violating_behavior
from scenario import Scenario, ScenarioMismatchError, random_local_behavior, uniform_behavior


class TestEvaluate:
    def test_chsh_at_tsirelson(self, tsirelson, chsh_functional):
        assert evaluate(chsh_functional, tsirelson) == pytest.approx(2 * math.sqrt(2), abs=1e-12)

    def test_chsh_on_uniform(self, chsh_functional):
        assert evaluate(chsh_functional, uniform_behavior(chsh_functional.scenario)) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize('n', [3, 5, 7])
    def test_mabk_on_ghz(self, n):
        assert evaluate(mabk(n), ghz_mabk_behavior(n)) == 2 ** (n - 1)

    def test_scenario_mismatch(self, chsh_functional):
        with pytest.raises(ScenarioMismatchError):
            evaluate(chsh_functional, uniform_behavior(Scenario.uniform(2, 2, 3)))

    def test_local_behaviors_respect_bound(self):
        f = mabk(3)
        for seed in range(20):
            b, _ = random_local_behavior(f.scenario, seed=seed, support_size=6)
            assert evaluate(f, b) <= classical_bound(f) + 1e-9


class TestClassicalBound:
    def test_chsh(self, chsh_functional):
        assert classical_bound(chsh_functional) == 2.0

    @pytest.mark.parametrize('n', [3, 5])
    def test_mabk(self, n):
        assert classical_bound(mabk(n)) == 2 ** ((n - 1) / 2)

    @pytest.mark.parametrize('d', [2, 3, 4])
    def test_yu_oh(self, d):
        assert classical_bound(yu_oh(d)) == 0.0

    def test_builtins_declare_recomputed_bound(self):
        for f in (chsh(), mabk(3), mabk(5), yu_oh(2), yu_oh(3)):
            assert verify_classical_bound(f) is None


class TestAlpha:
    def test_chsh(self, chsh_functional):
        assert alpha_normalizer(chsh_functional) == 8.0

    @pytest.mark.parametrize('n', [3, 5, 7])
    def test_mabk(self, n):
        assert alpha_normalizer(mabk(n)) == 2 ** n

    @pytest.mark.parametrize('d', [2, 3, 4])
    def test_yu_oh(self, d):
        assert alpha_normalizer(yu_oh(d)) == 2 * d

    def test_omitted_outcomes_count_as_zero(self):
        f = BellFunctional(Scenario.uniform(2, 2, 2), {((0, 0), (0, 0)): 1.0})
        assert alpha_normalizer(f) == 1.0

    def test_constant_setting_undefined(self):
        coefficients = {((0, 0), (a, b)): 1.0 for a in range(2) for b in range(2)}
        f = BellFunctional(Scenario.uniform(2, 2, 2), coefficients)
        with pytest.raises(NormalizationUndefinedError):
            alpha_normalizer(f)


class TestNormalizedViolation:
    def test_tsirelson(self, tsirelson, chsh_functional):
        report = normalized_violation(chsh_functional, tsirelson)
        assert report.beta_alpha == pytest.approx((2 * math.sqrt(2) - 2) / 8, abs=1e-12)
        assert report.c_source == 'declared'
        assert report.alpha == 8.0

    def test_separable_override(self, tsirelson, chsh_functional):
        report = normalized_violation(chsh_functional, tsirelson, c_override=math.sqrt(2))
        assert report.beta_alpha == pytest.approx(0.1767766953, abs=1e-9)
        assert report.c_source == 'override'

    def test_computed_bound(self, tsirelson):
        f = BellFunctional(chsh().scenario, chsh().coefficients, None, 'chsh-undeclared')
        report = normalized_violation(f, tsirelson)
        assert report.c_source == 'computed'
        assert report.c_used == 2.0

    def test_no_violation_floors_at_zero(self, chsh_functional):
        b, _ = random_local_behavior(chsh_functional.scenario, seed=1, support_size=3)
        assert normalized_violation(chsh_functional, b).beta_alpha == 0.0

    def test_yu_oh_synthetic(self):
        for d in (2, 3, 4):
            report = normalized_violation(yu_oh(d), yu_oh_violating_behavior(d))
            assert report.beta == 1.0
            assert report.beta_alpha == pytest.approx(1 / (2 * d))


class TestBuiltins:
    def test_coefficient_counts(self):
        assert len(chsh().coefficients) == 16
        assert len(mabk(3).coefficients) == 32
        assert len(yu_oh(3).coefficients) == 6

    def test_chsh_signs(self):
        f = chsh()
        assert f.coefficients[((1, 1), (0, 0))] == -1.0
        assert f.coefficients[((1, 0), (1, 0))] == -1.0
        assert set(f.coefficients.values()) == {1.0, -1.0}

    def test_mabk_needs_odd_party_count(self):
        with pytest.raises(ValueError):
            mabk(4)
        with pytest.raises(ValueError):
            mabk(1)

    def test_yu_oh_scenario(self):
        f = yu_oh(3)
        assert f.scenario.outcomes == ((2, 2, 2), (3, 3))
        assert f.coefficients[((0, 1), (0, 0))] == 1.0
        assert f.coefficients[((2, 0), (0, 2))] == -1.0
        assert f.coefficients[((2, 1), (1, 0))] == -1.0

    def test_zero_coefficients_dropped(self):
        f = BellFunctional(Scenario.uniform(1, 1, 2), {((0,), (0,)): 1.0, ((0,), (1,)): 0.0})
        assert list(f.coefficients) == [((0,), (0,))]

    def test_invalid_index_rejected(self):
        with pytest.raises(FunctionalFormatError):
            BellFunctional(Scenario.uniform(2, 2, 2), {((0, 0), (0, 2)): 1.0})

    def test_builtin_lookup(self):
        assert builtin_functional('chsh') == chsh()
        assert builtin_functional('mabk', 5) == mabk(5)
        with pytest.raises(ValueError):
            builtin_functional('i3322')

    def test_dense_layout(self, chsh_functional):
        dense = chsh_functional.dense()
        assert dense.shape == (16,)
        assert dense[chsh_functional.scenario.index((1, 1), (0, 1))] == 1.0


class TestFunctionalFiles:
    def test_round_trip(self, tmp_path):
        for f in (chsh(), mabk(3), yu_oh(3)):
            path = tmp_path / f'{f.name}.json'
            save_functional(f, str(path))
            assert load_functional(str(path)) == f

    def test_out_of_range_entry_named(self, tmp_path):
        data = functional_to_dict(chsh())
        data['coefficients'][3]['a'] = [0, 5]
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps(data))
        with pytest.raises(FunctionalFormatError, match=r'a=\(0, 5\)'):
            load_functional(str(path))

    def test_malformed_entry(self, tmp_path):
        data = functional_to_dict(chsh())
        del data['coefficients'][0]['alpha']
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps(data))
        with pytest.raises(FunctionalFormatError, match='entry 0'):
            load_functional(str(path))

    def test_wrong_declared_bound_warns(self, tmp_path, caplog):
        data = functional_to_dict(chsh())
        data['classical_bound'] = 3.0
        path = tmp_path / 'chsh3.json'
        path.write_text(json.dumps(data))
        with caplog.at_level(logging.WARNING, logger='bellbound.inequality'):
            f = load_functional(str(path))
        assert f.classical_bound == 3.0
        assert 'recomputation gives 2' in caplog.text
