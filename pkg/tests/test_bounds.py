import math

import numpy as np
import pytest

from bounds import (
    BoundInputError,
    MeasureKind,
    chsh_refined_bounds,
    theorem1_bounds,
    theorem2_bounds,
    two_qubit_concurrence_bound,
)
from divergence import DistanceResult, DivergenceKind, distance_to_local
from inequality import ViolationReport, chsh, mabk, normalized_violation
from quantum import behavior_from_quantum, chsh_optimal_assemblage, ghz_mabk_behavior, werner_state, wootters_concurrence

SQRT2 = math.sqrt(2.0)


def violation(beta_alpha, c_source='declared'):
    return ViolationReport(beta=0.0, c_used=2.0, alpha=8.0, beta_alpha=beta_alpha, c_source=c_source)


def distances(tv, kl, inf, region='local'):
    return (
        DistanceResult(DivergenceKind.TV, tv, tv, 0.0, 1, region=region),
        DistanceResult(DivergenceKind.KL_BITS, kl, kl, 0.0, 1, region=region),
        DistanceResult(DivergenceKind.INFIDELITY, inf, inf, 0.0, 1, region=region),
    )


@pytest.fixture(scope='module')
def chsh_theorem1():
    b = behavior_from_quantum(werner_state(1.0), chsh_optimal_assemblage())
    tv = distance_to_local(b, DivergenceKind.TV)
    kl = distance_to_local(b, DivergenceKind.KL_BITS)
    inf = distance_to_local(b, DivergenceKind.INFIDELITY, tv_floor=tv, warm_start=kl)
    return theorem1_bounds(tv, kl, inf)


class TestTheorem2:
    def test_chsh_tsirelson(self, tsirelson, chsh_functional):
        report = theorem2_bounds(normalized_violation(chsh_functional, tsirelson))
        x = (2 * SQRT2 - 2) / 8
        assert report.value(MeasureKind.E_TR) == pytest.approx(x, abs=1e-12)
        assert report.value(MeasureKind.E_G) == pytest.approx(0.010723, abs=1e-6)
        assert report.value(MeasureKind.E_C) == pytest.approx(0.146447, abs=1e-6)
        assert report.value(MeasureKind.E_RE) == pytest.approx(0.030941, abs=1e-6)
        assert report.value(MeasureKind.E_F) == report.value(MeasureKind.E_RE)
        assert report.value(MeasureKind.E_ROB) == pytest.approx(x / (1 - x))

    @pytest.mark.parametrize('n, expected', [(3, 0.25), (5, 0.375)])
    def test_mabk_ghz(self, n, expected):
        report = theorem2_bounds(normalized_violation(mabk(n), ghz_mabk_behavior(n)))
        assert report.value(MeasureKind.E_TR) == expected
        assert expected == 0.5 - 2 ** (-(n + 1) / 2)

    def test_mabk_trend_toward_half(self):
        report = theorem2_bounds(normalized_violation(mabk(7), ghz_mabk_behavior(7)))
        assert report.value(MeasureKind.E_TR) == pytest.approx(0.4375)

    def test_zero_violation(self):
        report = theorem2_bounds(violation(0.0))
        assert all(report.value(m) == 0.0 for m in MeasureKind)

    def test_robustness_omitted_at_one(self):
        report = theorem2_bounds(violation(1.0))
        assert report.value(MeasureKind.E_ROB) is None
        assert any('E_Rob omitted' in note for note in report.notes)

    def test_monotone_in_beta_alpha(self):
        previous = None
        for x in np.linspace(0.0, 0.99, 50):
            report = theorem2_bounds(violation(float(x)))
            values = [report.value(m) for m in MeasureKind]
            if previous is not None:
                assert all(v >= p for v, p in zip(values, previous))
            previous = values

    def test_override_noted(self):
        report = theorem2_bounds(violation(0.1767, c_source='override'))
        assert any('c = 2' in note for note in report.notes)
        assert not any('0.125' in note for note in report.notes)

    def test_separable_bound_override_flags_printed_figure(self, tsirelson, chsh_functional):
        report = theorem2_bounds(normalized_violation(chsh_functional, tsirelson, SQRT2))
        assert report.value(MeasureKind.E_TR) == pytest.approx(0.176777, abs=1e-6)
        flagged = [note for note in report.notes if '0.125' in note]
        assert len(flagged) == 1
        assert 'not reproduced' in flagged[0]
        assert '0.176777' in flagged[0]


class TestTheorem1:
    def test_zero_distances(self):
        report = theorem1_bounds(*distances(0.0, 0.0, 0.0))
        assert all(report.value(m) == 0.0 for m in MeasureKind)

    def test_robustness_at_half(self):
        assert theorem1_bounds(*distances(0.5, 0.0, 0.0)).value(MeasureKind.E_ROB) == 1.0

    def test_robustness_omitted(self):
        report = theorem1_bounds(*distances(1.0, 0.0, 0.0))
        assert report.value(MeasureKind.E_ROB) is None

    def test_measure_mapping(self):
        report = theorem1_bounds(*distances(0.1, 0.05, 0.2))
        assert report.value(MeasureKind.E_TR) == 0.1
        assert report.value(MeasureKind.E_RE) == 0.05
        assert report.value(MeasureKind.E_F) == 0.05
        assert report.value(MeasureKind.E_C) == 0.2
        assert report.value(MeasureKind.E_G) == pytest.approx(0.04)
        assert 'sqrt(2)*IF = 0.282843' in report.entries[MeasureKind.E_C].notes[0]
        for measure in MeasureKind:
            assert measure.divergence in DivergenceKind

    def test_kind_order_enforced(self):
        tv, kl, inf = distances(0.1, 0.1, 0.1)
        with pytest.raises(BoundInputError):
            theorem1_bounds(kl, tv, inf)

    def test_mixed_regions_rejected(self):
        tv, kl, _ = distances(0.1, 0.1, 0.1)
        _, _, inf = distances(0.1, 0.1, 0.1, region='beta<=1.41421356237')
        with pytest.raises(BoundInputError):
            theorem1_bounds(tv, kl, inf)

    def test_chsh_values(self, chsh_theorem1):
        report = chsh_theorem1
        assert report.value(MeasureKind.E_TR) == pytest.approx((SQRT2 - 1) / 4, abs=1e-5)
        assert 0.0309 <= report.value(MeasureKind.E_RE) <= 0.0463 + 1e-4
        assert 0.0100 <= report.value(MeasureKind.E_G) <= 0.01704 + 1e-4
        assert report.value(MeasureKind.E_ROB) == pytest.approx(0.11551, abs=1e-3)
        assert report.inputs['region'] == 'local'

    def test_relaxation_ordering(self, chsh_theorem1, tsirelson, chsh_functional):
        relaxed = theorem2_bounds(normalized_violation(chsh_functional, tsirelson))
        assert relaxed.value(MeasureKind.E_TR) <= chsh_theorem1.value(MeasureKind.E_TR) + 1e-6

    def test_render_and_dict(self, chsh_theorem1):
        text = chsh_theorem1.render()
        for measure in MeasureKind:
            assert measure.value in text
        data = chsh_theorem1.to_dict()
        assert data['method'] == 'theorem1'
        assert [entry['measure'] for entry in data['bounds']] == [m.value for m in MeasureKind]


class TestMinimalScenario:
    def test_endpoints(self):
        top = chsh_refined_bounds(2 * SQRT2)
        assert top[MeasureKind.E_C] == pytest.approx(1.0)
        assert top[MeasureKind.E_G] == pytest.approx(0.5)
        bottom = chsh_refined_bounds(2.0)
        assert bottom[MeasureKind.E_C] == 0.0
        assert bottom[MeasureKind.E_G] == 0.0

    def test_interior_value(self):
        refined = chsh_refined_bounds(2.5)
        concurrence = 0.5 / (2 * SQRT2 - 2)
        assert refined[MeasureKind.E_C] == pytest.approx(0.603553, abs=1e-6)
        assert refined[MeasureKind.E_G] == pytest.approx(0.5 * (1 - math.sqrt(1 - concurrence ** 2)), abs=1e-12)

    def test_super_quantum_rejected(self):
        with pytest.raises(BoundInputError):
            chsh_refined_bounds(3.0)

    def test_ranges_and_monotonicity(self):
        previous = (0.0, 0.0)
        for beta in np.linspace(1.5, 2 * SQRT2, 60):
            refined = chsh_refined_bounds(float(beta))
            c, g = refined[MeasureKind.E_C], refined[MeasureKind.E_G]
            assert 0.0 <= c <= 1.0
            assert 0.0 <= g <= 0.5
            assert c >= previous[0] and g >= previous[1]
            previous = (c, g)

    @pytest.mark.parametrize('beta, expected', [
        (2.0, 0.0), (2 * SQRT2, 1.0), (2.5, 0.75), (2.2, 0.458258), (1.0, 0.0),
    ])
    def test_two_qubit_concurrence(self, beta, expected):
        assert two_qubit_concurrence_bound(beta) == pytest.approx(expected, abs=1e-6)


class TestWernerOracle:
    @pytest.mark.parametrize('p', [0.75, 0.8, 0.9, 1.0])
    def test_bounds_below_concurrence(self, p):
        rho = werner_state(p)
        b = behavior_from_quantum(rho, chsh_optimal_assemblage())
        concurrence = wootters_concurrence(rho)
        assert concurrence == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-9)

        relaxed = theorem2_bounds(normalized_violation(chsh(), b))
        assert relaxed.value(MeasureKind.E_C) <= concurrence + 1e-6

        tv = distance_to_local(b, DivergenceKind.TV)
        kl = distance_to_local(b, DivergenceKind.KL_BITS)
        inf = distance_to_local(b, DivergenceKind.INFIDELITY, tv_floor=tv, warm_start=kl)
        report = theorem1_bounds(tv, kl, inf)
        assert report.value(MeasureKind.E_C) <= concurrence + 1e-6
        assert report.value(MeasureKind.E_TR) <= 1.0
