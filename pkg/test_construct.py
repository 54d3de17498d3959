import math

import pytest

from construct import (Example, Horizon, Policy, check_example, construct_family, construct_pair,
                       example_exponent_sums, example_sequence, example_setting, extend, frozen_subsets,
                       minimal_sequence, replay_plan, sqrt_split, sqrt_split_shortcut,
                       validate_explicit_sequence)
from errors import HorizonError, HypothesisViolation
from hypernum import Hypernum
from risk import quantile_from_risk
from targets import GrowthFunction, TargetDistribution
from verify import hazard_ratio_diagnostic

E1 = TargetDistribution.exponential(1)
IDENTITY = GrowthFunction.identity_plus()


def floats(values):
    return [float(v) for v in values]


class TestMinimalSequence:
    def test_exponential_target_with_exp_gauge(self):
        seq = minimal_sequence(E1, GrowthFunction.exp(0.5), 6)
        assert floats(seq) == pytest.approx([0, 1, 2, 6, 42, 1806], rel=1e-12)

    def test_polynomial_target_with_power_gauge(self):
        seq = minimal_sequence(TargetDistribution.polynomial(3), GrowthFunction.power(1), 5)
        assert floats(seq) == pytest.approx([0, 1, 9, 1009, 1030302009], rel=1e-12)

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError):
            minimal_sequence(E1, IDENTITY, 0)
        assert minimal_sequence(E1, IDENTITY, 1) == [Hypernum(0.0)]


class TestPair:
    def test_paper_minimal_pair_follows_the_minimal_sequence(self):
        fam = construct_pair(E1, GrowthFunction.exp(0.5), Policy.PAPER_MINIMAL, horizon=5)
        assert floats(fam.plan.breakpoints) == pytest.approx([0, 1, 2, 6, 42, 1806], rel=1e-12)
        assert fam.plan.frozen_sets == ((1,), (2,), (1,), (2,), (1,))

    def test_identity_gauge_breakpoints(self):
        fam = construct_pair(E1, IDENTITY, Policy.PAPER_MINIMAL, horizon=6)
        a = floats(fam.plan.breakpoints[:4])
        assert a[:3] == pytest.approx([0.0, 1.0, 1 + math.e], rel=1e-15)
        assert a[3] == pytest.approx(1 + math.e + math.exp(1 + math.e), rel=1e-12)
        assert fam.plan.breakpoints[-1].pt >= 1

    @pytest.mark.parametrize('policy', list(Policy)[:2])
    def test_certificates_are_at_least_one(self, policy):
        fam = construct_pair(E1, IDENTITY, policy, horizon=24)
        assert all(c >= 1 - 1e-12 for c in fam.plan.certificates)
        assert all(g >= 1 for g in fam.plan.gaps)

    def test_components_alternate_between_frozen_and_tracking(self):
        fam = construct_pair(E1, IDENTITY, Policy.PAPER_MINIMAL, horizon=6)
        R1, R2 = fam.risks
        a = fam.plan.breakpoints
        assert R1(a[1]).is_zero()
        assert float(R2(a[1])) == 1.0
        assert R2(a[2]) == R2(a[1])
        assert float(R1(a[2])) == pytest.approx(math.e, rel=1e-15)

    def test_hazard_ratio_of_a_component_keeps_falling(self):
        fam = construct_pair(E1, IDENTITY, Policy.PAPER_MINIMAL, horizon=24)
        diag = hazard_ratio_diagnostic(fam.risks[0])
        assert len(diag.trace) >= 10
        assert diag.strictly_decreasing
        assert diag.min_ratio < 0.1

    def test_quantile_jumps_over_frozen_intervals(self):
        fam = construct_pair(E1, IDENTITY, Policy.PAPER_MINIMAL, horizon=8)
        R1, a = fam.risks[0], fam.plan.breakpoints
        v = R1(a[2])
        assert float(R1.inverse(v)) == pytest.approx(float(a[2]), rel=1e-12)
        assert R1.inverse(v * (1 + 1e-9)) >= a[3]
        u = -math.expm1(-float(v) * (1 + 1e-9))
        assert quantile_from_risk(R1, u) >= a[3]

    def test_paper_minimal_steps_are_not_clamped_to_the_gauge_inverse(self):
        F, g = TargetDistribution.polynomial(0.5), GrowthFunction.power(0.25)
        fam = construct_pair(F, g, Policy.PAPER_MINIMAL, horizon=4)
        a = fam.plan.breakpoints
        s = 1 + math.sqrt(2)
        assert floats(a[:4]) == pytest.approx([0, 1, s, s + math.sqrt(1 + s ** 4)], rel=1e-12)
        assert floats(a) == pytest.approx(floats(minimal_sequence(F, g, 5)), rel=1e-12)
        assert a[3] < g.inverse(a[2])

    @pytest.mark.parametrize('example, alpha, beta', [
        (Example.EXPONENTIAL, 1, 0.5), (Example.POLYNOMIAL, 3, 1), (Example.WEIBULL, 0.5, 0.25)])
    def test_exact_minimal_never_outruns_paper_minimal(self, example, alpha, beta):
        F, g = example_setting(example, alpha, beta)
        exact = construct_pair(F, g, Policy.EXACT_MINIMAL, horizon=6).plan.breakpoints
        paper = construct_pair(F, g, Policy.PAPER_MINIMAL, horizon=6).plan.breakpoints
        for e, p in zip(exact, paper):
            assert e <= p * (1 + 1e-12)

    def test_exact_minimal_pair_for_the_weibull_example_is_clamped(self):
        F, g = example_setting(Example.WEIBULL, 0.5, 0.25)
        fam = construct_pair(F, g, Policy.EXACT_MINIMAL, horizon=12)
        for a, b in zip(fam.plan.breakpoints, fam.plan.breakpoints[1:]):
            assert b >= g.inverse(a)
        assert all(c >= 1 - 1e-12 for c in fam.plan.certificates)

    def test_tower_limit_stops_the_plan(self):
        fam = construct_pair(E1, IDENTITY, Policy.PAPER_MINIMAL, horizon=32, max_level=8)
        assert fam.plan.overflow
        assert fam.plan.intervals < 32
        assert all(a.pt <= 8 for a in fam.plan.breakpoints)

    def test_x_bound_horizon(self):
        fam = construct_pair(E1, GrowthFunction.exp(0.5), Policy.PAPER_MINIMAL, horizon=Horizon(x_bound=100.0))
        assert floats(fam.plan.breakpoints) == pytest.approx([0, 1, 2, 6, 42, 1806], rel=1e-12)


class TestFamily:
    def test_frozen_subsets_are_lexicographic(self):
        assert frozen_subsets(4, 3) == ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))
        assert frozen_subsets(3, 2) == ((1,), (2,), (3,))

    def test_frozen_sets_cycle(self):
        fam = construct_family(E1, GrowthFunction.exp(0.5), 4, 3, Policy.PAPER_MINIMAL, horizon=14)
        plan = fam.plan
        assert plan.M == 6
        assert plan.frozen_sets[:6] == plan.subsets
        assert plan.frozen_sets[6:12] == plan.subsets
        assert plan.residue((3, 2)) == 3

    def test_frozen_components_keep_their_risk(self):
        fam = construct_family(E1, GrowthFunction.exp(0.5), 4, 3, Policy.PAPER_MINIMAL, horizon=8)
        a = fam.plan.breakpoints
        for l, frozen in enumerate(fam.plan.frozen_sets):
            for i in range(1, 5):
                left, right = fam.risks[i - 1](a[l]), fam.risks[i - 1](a[l + 1])
                assert (left == right) == (i in frozen)

    def test_pair_and_two_of_two_family_serialize_alike(self):
        from schema import dump_family, dumps
        pair = construct_pair(E1, IDENTITY, Policy.EXACT_MINIMAL, horizon=10)
        fam = construct_family(E1, IDENTITY, 2, 2, Policy.EXACT_MINIMAL, horizon=10)
        assert dumps(dump_family(pair)) == dumps(dump_family(fam))

    def test_exact_minimal_never_stalls(self):
        fam = construct_family(E1, GrowthFunction.exp(0.5), 4, 3, Policy.EXACT_MINIMAL, horizon=40)
        assert fam.plan.intervals == 40
        assert all(b > a for a, b in zip(fam.plan.breakpoints, fam.plan.breakpoints[1:]))

    @pytest.mark.parametrize('n, k', [(2, 1), (3, 4), (1, 1)])
    def test_k_must_lie_in_range(self, n, k):
        with pytest.raises(HypothesisViolation, match='1 < k <= n'):
            construct_family(E1, IDENTITY, n, k)

    def test_target_must_start_at_zero(self):
        F = TargetDistribution.tabulated([-1.0, 0.0, 1.0], [0.0, 1.0, 2.0])
        with pytest.raises(HypothesisViolation):
            construct_pair(F, IDENTITY)


class TestHazardPolicy:
    def test_first_round_steps_by_one_then_scales_with_the_round(self):
        fam = construct_pair(E1, IDENTITY, Policy.HAZARD, horizon=10)
        assert floats(fam.plan.breakpoints) == [0, 1, 2, 3, 4, 5, 6, 9, 18, 48, 144]
        assert all(g >= 1 for g in fam.plan.gaps)

    def test_frozen_risk_over_the_next_breakpoint_is_one_over_the_round(self):
        fam = construct_family(E1, IDENTITY, 3, 2, Policy.HAZARD, horizon=30)
        plan, a = fam.plan, fam.plan.breakpoints
        for l, frozen in enumerate(plan.frozen_sets):
            r = l // plan.M
            if r == 0:
                continue
            ratio = float(fam.subset_risk(frozen)(a[l + 1])) / float(a[l + 1])
            assert ratio <= (1 / r) * (1 + 1e-12)

    def test_hazard_plans_extend(self):
        fam = construct_pair(E1, IDENTITY, Policy.HAZARD, horizon=6)
        longer = extend(fam, 12)
        assert longer.plan.policy is Policy.HAZARD
        assert longer.plan.breakpoints[:7] == fam.plan.breakpoints


class TestExtendAndReplay:
    def test_extend_keeps_the_prefix(self):
        fam = construct_pair(E1, GrowthFunction.exp(0.5), Policy.EXACT_MINIMAL, horizon=6)
        longer = extend(fam, 10)
        assert longer.plan.intervals == 10
        assert longer.plan.breakpoints[:7] == fam.plan.breakpoints
        assert longer.plan.certificates[:6] == fam.plan.certificates

    def test_extend_cannot_shrink(self):
        fam = construct_pair(E1, IDENTITY, horizon=6)
        with pytest.raises(ValueError):
            extend(fam, 3)

    def test_replay_rebuilds_identical_risks(self):
        fam = construct_family(E1, GrowthFunction.exp(0.5), 3, 2, Policy.PAPER_MINIMAL, horizon=12)
        plan = fam.plan
        replay = replay_plan(E1, fam.gauge, plan.policy, 3, 2, plan.breakpoints, plan.frozen_sets,
                             plan.certificates)
        assert replay.risks == fam.risks
        assert replay.plan == plan

    def test_replay_rejects_foreign_frozen_sets(self):
        fam = construct_pair(E1, IDENTITY, horizon=3)
        plan = fam.plan
        with pytest.raises(ValueError, match='not a'):
            replay_plan(E1, IDENTITY, plan.policy, 2, 2, plan.breakpoints, [(1,), (3,), (1,)],
                        plan.certificates)


class TestExplicitSequences:
    def test_exponential_example_sequence(self):
        seq = example_sequence(Example.EXPONENTIAL, 2, 1, 3)
        assert floats(seq) == pytest.approx([4, 64, 16384], rel=1e-12)

    def test_weibull_exponent_sums(self):
        assert floats(example_exponent_sums(0.5, 0.25, 2)) == pytest.approx([2, 6])

    def test_polynomial_example_sequence(self):
        assert float(example_sequence(Example.POLYNOMIAL, 3, 1, 1)[0]) == pytest.approx(8)

    @pytest.mark.parametrize('example, alpha, beta', [
        ('exponential', 1, 2), ('exponential', 1, 0),
        ('polynomial', 2, 1.5), ('weibull', 1.5, 0.5), ('weibull', 0.5, 0.5),
    ])
    def test_example_hypotheses(self, example, alpha, beta):
        with pytest.raises(HypothesisViolation):
            check_example(example, alpha, beta)

    @pytest.mark.parametrize('example, alpha, beta', [
        (Example.EXPONENTIAL, 2, 1), (Example.POLYNOMIAL, 3, 1), (Example.WEIBULL, 0.5, 0.25),
    ])
    def test_example_sequences_validate(self, example, alpha, beta):
        F, g = example_setting(example, alpha, beta)
        seq = [Hypernum(0.0)] + example_sequence(example, alpha, beta, 12)
        report = validate_explicit_sequence(F, g, seq)
        assert report.passed, report.failures()
        assert len(report.rows) == 12

    def test_a_sequence_that_grows_too_slowly_fails(self):
        report = validate_explicit_sequence(E1, IDENTITY, [0, 1, 2, 3, 4])
        assert not report.passed
        assert any('certificate' in f for f in report.failures())

    def test_explicit_sequences_must_start_at_zero_and_increase(self):
        with pytest.raises(ValueError, match='start at 0'):
            validate_explicit_sequence(E1, IDENTITY, [1, 2, 3])
        with pytest.raises(ValueError, match='strictly increasing'):
            validate_explicit_sequence(E1, IDENTITY, [0, 2, 2])

    def test_explicit_plan_cannot_be_extended(self):
        fam = construct_pair(E1, IDENTITY, Policy.EXPLICIT, horizon=3, sequence=[0, 1, 5, 200])
        assert fam.plan.intervals == 3
        with pytest.raises(ValueError):
            extend(fam, 5)


class TestSqrtSplit:
    def test_halves_have_half_the_risk(self):
        fam = sqrt_split(TargetDistribution.exponential(3))
        assert fam.plan is None
        assert float(fam.risks[0](2.0)) == 3.0
        assert float(fam.subset_risk((1, 2))(2.0)) == 6.0
        assert 'not g-heavy' in fam.note

    def test_weibull_halves_use_a_scaled_term(self):
        fam = sqrt_split(TargetDistribution.weibull(0.5))
        assert float(fam.risks[0](4.0)) == 1.0

    def test_exponential_shortcut(self):
        assert sqrt_split_shortcut(TargetDistribution.exponential(2), GrowthFunction.exp(1.5))
        assert sqrt_split_shortcut(TargetDistribution.exponential(2), GrowthFunction.exp(0.5)) is False
        assert sqrt_split_shortcut(TargetDistribution.polynomial(2), GrowthFunction.exp(1.5)) is None
        fam = sqrt_split(TargetDistribution.exponential(2), GrowthFunction.exp(1.5))
        assert fam.note.startswith('exponential shortcut')


def test_no_interval_within_range():
    with pytest.raises(HorizonError):
        construct_pair(E1, IDENTITY, Policy.PAPER_MINIMAL, horizon=4, max_level=-1)
