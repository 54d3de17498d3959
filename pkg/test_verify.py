import math

import numpy as np
import pytest

from construct import (Example, Policy, construct_family, construct_pair, example_setting, recompute_certificates,
                       sqrt_split)
from errors import CheckFailure, HorizonError
from hypernum import Hypernum
from schema import dump_family, dump_report, load_family
from targets import GrowthFunction, TargetDistribution, is_long_tailed_evidence
from verify import (check_minimum_distribution, component_bound, divergence_certificate, evaluation_grid,
                    hazard_bound, hazard_ratio_diagnostic, ks_critical, ks_statistic, ks_test, require,
                    sample_family, verify_family)

E1 = TargetDistribution.exponential(1)
EXP_HALF = GrowthFunction.exp(0.5)
SETTINGS = [(Example.EXPONENTIAL, 2, 1), (Example.POLYNOMIAL, 3, 1), (Example.WEIBULL, 0.5, 0.25)]


@pytest.fixture(scope='module')
def four_three():
    return construct_family(E1, EXP_HALF, 4, 3, Policy.PAPER_MINIMAL, horizon=60)


@pytest.fixture(scope='module')
def four_three_samples(four_three):
    return sample_family(four_three, 100_000, seed=99, workers=2)


class TestKS:
    def test_two_sided_critical_value(self):
        assert ks_critical(10_000, 0.01) == pytest.approx(1.628 / 100, rel=1e-3)

    def test_one_sided_critical_value(self):
        assert ks_critical(10_000, 0.01, two_sided=False) == pytest.approx(math.sqrt(math.log(100) / 2) / 100)

    def test_bad_significance(self):
        with pytest.raises(ValueError):
            ks_critical(10, 1.0)

    def test_statistic_of_a_perfect_grid(self):
        n = 1000
        u = (np.arange(n) + 0.5) / n
        x = -np.log1p(-u)
        assert ks_statistic(x, E1) == pytest.approx(0.5 / n, rel=1e-6)

    def test_accepts_true_exponential_samples(self):
        rng = np.random.default_rng(12345)
        accepted = sum(ks_test(rng.exponential(1.0, 10_000), E1).passed for _ in range(100))
        assert accepted >= 95

    def test_rejects_the_wrong_rate(self):
        rng = np.random.default_rng(7)
        assert not ks_test(rng.exponential(1.0 / 1.2, 10_000), E1).passed


class TestSampling:
    def test_short_horizon_is_rejected(self):
        fam = construct_pair(E1, EXP_HALF, horizon=2)
        with pytest.raises(HorizonError, match='extend the plan'):
            sample_family(fam, 100_000, seed=1)

    def test_samples_do_not_depend_on_workers(self):
        fam = construct_pair(E1, EXP_HALF, horizon=12)
        one = sample_family(fam, 2000, seed=3, workers=1)
        two = sample_family(fam, 2000, seed=3, workers=2)
        assert one.shape == (2, 2000)
        assert np.array_equal(one, two)

    def test_sqrt_split_samples_have_the_target_minimum(self):
        fam = sqrt_split(TargetDistribution.exponential(2))
        x = sample_family(fam, 100_000, seed=11)
        assert ks_test(x.min(axis=0), fam.target, significance=0.01).passed


class TestPairs:
    @pytest.mark.parametrize('example, alpha, beta', SETTINGS)
    def test_minimum_is_exactly_the_target(self, example, alpha, beta):
        F, g = example_setting(example, alpha, beta)
        fam = construct_pair(F, g, horizon=32)
        check = check_minimum_distribution(fam, (1, 2), evaluation_grid(fam, 2000))
        assert check.kind == 'exactness'
        assert check.value <= 1e-12
        assert check.passed

    @pytest.mark.parametrize('example, alpha, beta', SETTINGS)
    def test_sampled_minimum_passes_two_sided_ks(self, example, alpha, beta):
        F, g = example_setting(example, alpha, beta)
        fam = construct_pair(F, g, horizon=32)
        x = sample_family(fam, 100_000, seed=2024)
        assert ks_test(x.min(axis=0), F, significance=0.01).passed

    def test_components_never_exceed_the_target(self):
        fam = construct_pair(E1, GrowthFunction.identity_plus(), Policy.PAPER_MINIMAL, horizon=24)
        assert component_bound(fam, evaluation_grid(fam, 1000)) <= 1e-12

    def test_divergence_bound_per_component(self):
        fam = construct_pair(E1, GrowthFunction.identity_plus(), horizon=32)
        for subset in [(1,), (2,)]:
            d = divergence_certificate(fam, subset, 32)
            assert d.count == 16
            assert d.passed

    def test_subset_of_size_k_minus_one_is_not_a_minimum_check(self):
        fam = construct_pair(E1, EXP_HALF, horizon=6)
        with pytest.raises(ValueError, match='divergence_certificate'):
            check_minimum_distribution(fam, (1,))

    def test_divergence_needs_a_frozen_set_and_a_valid_length(self):
        fam = construct_pair(E1, EXP_HALF, horizon=6)
        with pytest.raises(ValueError):
            divergence_certificate(fam, (1, 2), 6)
        with pytest.raises(HorizonError):
            divergence_certificate(fam, (1,), 7)

    def test_components_are_not_long_tailed(self):
        fam = construct_pair(E1, GrowthFunction.identity_plus(), Policy.PAPER_MINIMAL, horizon=8)
        probes = [fam.plan.breakpoints[l] for l in range(3, 8, 2)]
        assert not is_long_tailed_evidence(fam.risks[0], probes=probes)


class TestFamilies:
    def test_any_three_of_four_dominate_the_target(self, four_three):
        grid = evaluation_grid(four_three, 2000)
        for subset in [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)]:
            check = check_minimum_distribution(four_three, subset, grid, workers=2)
            assert check.kind == 'dominance'
            assert check.value >= -1e-12

    def test_divergence_bounds_of_frozen_pairs(self, four_three):
        for subset in four_three.plan.subsets:
            d = divergence_certificate(four_three, subset, 60)
            assert d.count == 10
            assert d.bound >= 10 * (1 - 1e-12)

    @pytest.mark.parametrize('subset', [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)])
    def test_one_sided_ks_of_every_three_minimum(self, four_three_samples, subset):
        x = four_three_samples
        result = ks_test(x[[i - 1 for i in subset]].min(axis=0), E1, significance=0.01, two_sided=False)
        assert not result.two_sided
        assert result.n == 100_000
        assert result.passed

    def test_hazard_diagnostic_needs_two_probes(self):
        with pytest.raises(ValueError):
            hazard_ratio_diagnostic(construct_pair(E1, EXP_HALF, horizon=2).risks[0], probes=[Hypernum(1.0)])


class TestReports:
    def test_report_of_a_sound_pair_passes(self):
        fam = construct_pair(E1, GrowthFunction.identity_plus(), horizon=16)
        report = verify_family(fam, samples=5000, seed=5, significance=0.001, grid_points=500)
        assert report.passed, report.failures()
        assert set(report.divergence) == {'1', '2'}
        assert set(report.ks) == {'1,2'}
        assert report.ks['1,2'].two_sided
        assert require(report) is report

    def test_tampered_certificate_is_named(self):
        fam = construct_pair(E1, EXP_HALF, horizon=8)
        doc = dump_family(fam)
        doc['certificates'][3] = '0.5'
        report = verify_family(load_family(doc), grid_points=200)
        assert not report.passed
        assert any(f.startswith('interval 3: certificate 0.5') for f in report.failures())
        with pytest.raises(CheckFailure) as e:
            require(report)
        assert 'interval 3' in str(e.value)

    def test_edited_breakpoint_fails_the_recomputed_certificate(self):
        fam = construct_pair(E1, EXP_HALF, Policy.PAPER_MINIMAL, horizon=8)
        doc = dump_family(fam)
        assert float(Hypernum.from_token(doc['breakpoints'][4]['value'])) == pytest.approx(42)
        doc['breakpoints'][4]['value'] = '8.0'
        report = verify_family(load_family(doc), grid_points=200)
        # component 2 sits at 2 ln 6 - 1 when interval 3 starts
        assert float(report.certificates[3]) == pytest.approx(math.e)
        assert float(report.recomputed[3]) == pytest.approx(2 * math.e / 36)
        assert not report.passed
        failures = report.failures()
        assert any(f.startswith('interval 3: stored certificate') for f in failures)
        assert any(f.startswith('interval 3: recomputed certificate') for f in failures)
        assert float(report.certificate_min['2']) == pytest.approx(2 * math.e / 36)

    def test_recomputed_certificates_match_a_fresh_build(self):
        fam = construct_family(E1, EXP_HALF, 3, 2, Policy.PAPER_MINIMAL, horizon=12)
        assert recompute_certificates(fam) == fam.plan.certificates
        assert recompute_certificates(load_family(dump_family(fam))) == fam.plan.certificates

    def test_reloaded_plan_verifies_identically(self):
        fam = construct_family(E1, EXP_HALF, 3, 2, Policy.EXACT_MINIMAL, horizon=12)
        first = verify_family(fam, grid_points=300)
        second = verify_family(load_family(dump_family(fam)), grid_points=300)
        assert dump_report(first) == dump_report(second)
        assert first.passed

    def test_sqrt_split_report_has_no_certificates(self):
        fam = sqrt_split(TargetDistribution.exponential(2), GrowthFunction.exp(1.5))
        report = verify_family(fam, grid_points=200)
        assert report.certificates == ()
        assert report.exactness_sup_error <= 1e-12
        assert report.passed


class TestHazardPlans:
    @pytest.fixture(scope='class')
    def hazard_pair(self):
        return construct_pair(E1, GrowthFunction.identity_plus(), Policy.HAZARD, horizon=40)

    def test_round_scaled_ratio_stays_below_one(self, hazard_pair):
        for residue, subset in enumerate([(1,), (2,)]):
            bound = hazard_bound(hazard_pair, subset)
            assert bound.residue == residue
            assert bound.rounds == 19
            assert bound.worst > 0
            assert bound.passed

    def test_frozen_ratio_falls_like_one_over_the_round(self, hazard_pair):
        diag = hazard_ratio_diagnostic(hazard_pair.risks[0])
        assert diag.min_ratio <= (1 / 19) * (1 + 1e-12)

    def test_report_uses_the_hazard_bound_instead_of_certificates(self, hazard_pair):
        report = verify_family(hazard_pair, grid_points=500)
        assert not report.gauge_certified
        assert min(report.recomputed) < 1
        assert report.divergence == {}
        assert set(report.hazard_bounds) == {'1', '2'}
        assert report.exactness_sup_error <= 1e-12
        assert report.passed, report.failures()
        doc = dump_report(report)
        assert doc['gauge_certified'] is False
        assert doc['hazard_bounds']['1']['rounds'] == 19

    def test_one_round_gives_no_hazard_bound(self):
        fam = construct_pair(E1, GrowthFunction.identity_plus(), Policy.HAZARD, horizon=3)
        with pytest.raises(ValueError):
            hazard_bound(fam, (1,))
        assert verify_family(fam, grid_points=100).hazard_bounds == {}
