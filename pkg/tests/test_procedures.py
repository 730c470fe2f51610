import copy
import math

import numpy as np
import pytest

from layerfdr.core import HypothesisEvent, StreamHalted
from layerfdr.procedures import (
    AlphaInvesting,
    BetaSequence,
    Lond,
    Lord,
    beta_eval,
    constant_policy,
    make_procedure,
    make_single_layer,
    replay,
    simple_choice,
    validate_policy,
)

ALPHA = 0.1
PHI = ALPHA / (1.0 - ALPHA)  # 0.111111...
PSI = PHI + ALPHA  # 0.211111...
BETA_1 = 0.6 / math.pi ** 2  # 0.0607927...
BETA_2 = BETA_1 / 4.0
BETA_3 = BETA_1 / 9.0


def event(t, p, groups):
    return HypothesisEvent(t=t, p=p, group_index=tuple(groups))


class TestValidatePolicy:
    def test_simple_choice_sits_exactly_on_the_bound(self):
        report = validate_policy(simple_choice(ALPHA), ALPHA, horizon=500)
        assert report.ok

    def test_excess_reward_flagged_at_first_step(self):
        policy = constant_policy(ALPHA, PHI, PHI / 1.0 + ALPHA + 0.01, 1.0)
        report = validate_policy(policy, ALPHA, horizon=100)
        assert not report.ok
        assert report.t == 1
        assert report.reward == pytest.approx(0.2211111111, abs=1e-9)
        assert report.power_cap == pytest.approx(PHI + ALPHA, abs=1e-12)
        assert report.level_cap == pytest.approx(PHI / ALPHA + ALPHA + 1.0, abs=1e-12)

    def test_zero_reward_is_admissible(self):
        policy = constant_policy(ALPHA, PHI, 0.0, 1.0)
        assert validate_policy(policy, ALPHA, horizon=100).ok

    @pytest.mark.parametrize("rho", [0.0, -0.5, 1.5])
    def test_bad_power_bound_raises(self, rho):
        policy = constant_policy(ALPHA, PHI, PSI, rho)
        with pytest.raises(ValueError, match="invalid power bound"):
            validate_policy(policy, ALPHA, horizon=10)

    def test_horizon_must_be_positive(self):
        with pytest.raises(ValueError):
            validate_policy(simple_choice(ALPHA), ALPHA, horizon=0)


class TestBetaSequence:
    def test_default_family_closed_form(self):
        seq = BetaSequence(ALPHA)
        assert beta_eval(seq, 1) == pytest.approx(0.0607927, abs=1e-7)
        assert beta_eval(seq, 2) == pytest.approx(0.0151982, abs=1e-7)
        assert beta_eval(seq, 3) == pytest.approx(0.0067547, abs=1e-7)

    def test_index_starts_at_one(self):
        with pytest.raises(IndexError):
            beta_eval(BetaSequence(ALPHA), 0)

    @pytest.mark.parametrize("alpha", [0.05, 0.1, 0.2])
    def test_partial_sums_stay_below_level(self, alpha):
        js = np.arange(1, 10 ** 6 + 1, dtype=float)
        total = float((alpha * 6.0 / (math.pi ** 2 * js * js)).sum())
        assert total <= alpha
        assert total >= 0.9999 * alpha

    def test_geometric_family_sums_to_level(self):
        seq = BetaSequence(ALPHA, kind="geometric", ratio=0.7)
        total = sum(seq.value(j) for j in range(1, 400))
        assert total == pytest.approx(ALPHA, abs=1e-12)
        assert all(seq.value(j) > 0 for j in range(1, 50))

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            BetaSequence(ALPHA, kind="harmonic")


class TestAlphaInvesting:
    def test_two_layer_rejection_pays_both_layers(self):
        proc = AlphaInvesting(2, ALPHA, 1.0)
        record = proc.step(event(1, 0.05, (1, 1)))
        assert record.rejected
        for outcome in record.layers:
            assert outcome.tested and outcome.newly_rejected
            assert outcome.threshold == pytest.approx(0.1)
            assert outcome.wealth == pytest.approx(0.2, abs=1e-12)
            assert outcome.rejections == 1
        assert not record.halted

    def test_decided_layer_is_not_tested_or_charged(self):
        proc = AlphaInvesting(2, ALPHA, 1.0)
        proc.step(event(1, 0.05, (1, 1)))
        record = proc.step(event(2, 0.5, (2, 1)))
        assert not record.rejected
        first, second = record.layers
        assert first.tested and not second.tested
        assert first.wealth == pytest.approx(0.2 - PHI, abs=1e-12)  # 0.088889
        assert second.wealth == pytest.approx(0.2, abs=1e-12)
        assert second.threshold is None

    def test_final_charge_may_cross_zero_then_halt(self):
        proc = AlphaInvesting(1, ALPHA, 1.0)
        record = proc.step(event(1, 0.5, (1,)))
        assert not record.rejected
        assert record.layers[0].wealth == pytest.approx(0.1 - PHI, abs=1e-12)
        assert record.halted
        with pytest.raises(StreamHalted, match="wealth exhausted"):
            proc.step(event(2, 0.5, (2,)))

    def test_skip_records_after_halt(self):
        proc = AlphaInvesting(1, ALPHA, 1.0)
        records = replay(proc, [event(1, 0.5, (1,)), event(2, 0.01, (2,))])
        assert records[1].halted
        assert not records[1].rejected
        assert not records[1].layers[0].tested
        assert records[1].t == 2

    def test_wealth_ledger_identity_on_random_streams(self):
        # with the constant schedule: W = alpha*eta - phi * tests + (phi+alpha) * R
        rng = np.random.default_rng(99)
        for trial in range(5):
            proc = AlphaInvesting(2, ALPHA, 2.0)
            tests = [0, 0]
            for i in range(1, 300):
                if proc.halted:
                    break
                gids = (i, int(rng.integers(1, 7)))
                record = proc.step(event(i, float(rng.random() ** 2), gids))
                for m, outcome in enumerate(record.layers):
                    if outcome.tested:
                        tests[m] += 1
                    expected = (
                        ALPHA * 2.0 - PHI * tests[m] + PSI * outcome.rejections
                    )
                    assert outcome.wealth == pytest.approx(expected, abs=1e-9)


class TestLond:
    def test_first_two_thresholds(self):
        proc = Lond(1, ALPHA)
        r1 = proc.step(event(1, 0.05, (1,)))
        assert r1.rejected
        assert r1.layers[0].threshold == pytest.approx(BETA_1, abs=1e-9)
        r2 = proc.step(event(2, 0.05, (2,)))
        assert not r2.rejected  # 0.05 >= beta_2 * 2
        assert r2.layers[0].threshold == pytest.approx(2 * BETA_2, abs=1e-9)

    def test_modified_indexing_recovers_collapsed_tests(self):
        proc = Lond(1, ALPHA, modified=True)
        replay(
            proc,
            [event(1, 0.5, (7,)), event(2, 0.5, (7,)), event(3, 1e-5, (7,))],
        )
        # three arrivals in one group, rejected on the third: one effective test
        assert proc.states[0].effective_tests(3) == 1
        record = proc.step(event(4, 0.5, (8,)))
        # the fourth arrival is effectively the second test: index 2, R = 1
        assert record.layers[0].threshold == pytest.approx(2 * BETA_2, abs=1e-9)
        assert record.layers[0].effective_tests == 2

    def test_plain_indexing_uses_raw_time(self):
        proc = Lond(1, ALPHA, modified=False)
        replay(
            proc,
            [event(1, 0.5, (7,)), event(2, 0.5, (7,)), event(3, 1e-5, (7,))],
        )
        record = proc.step(event(4, 0.5, (8,)))
        assert record.layers[0].threshold == pytest.approx(
            2 * BETA_1 / 16.0, abs=1e-9
        )

    def test_threshold_monotone_in_discoveries(self):
        seq = BetaSequence(ALPHA)
        previous = 0.0
        for discoveries in range(0, 40):
            threshold = min(1.0, seq.value(5) * (discoveries + 1))
            assert threshold >= previous
            previous = threshold

    def test_threshold_clamped_at_one(self):
        proc = Lond(1, ALPHA)
        proc.states[0].rejections = 10 ** 6
        record = proc.step(event(1, 0.9999, (1,)))
        assert record.layers[0].threshold == 1.0
        assert record.rejected
        proc = Lond(1, ALPHA)
        proc.states[0].rejections = 10 ** 6
        tie = proc.step(event(1, 1.0, (1,)))
        assert tie.layers[0].threshold == 1.0
        assert not tie.rejected  # strict inequality: ties are accepts


class TestLord:
    def test_counter_advances_on_miss(self):
        proc = Lord(1, ALPHA)
        r1 = proc.step(event(1, 0.2, (1,)))
        assert not r1.rejected
        assert r1.layers[0].threshold == pytest.approx(BETA_1, abs=1e-9)
        assert r1.layers[0].since_last_discovery == 2
        r2 = proc.step(event(2, 0.2, (2,)))
        assert r2.layers[0].threshold == pytest.approx(BETA_2, abs=1e-9)

    def test_counter_resets_on_discovery(self):
        proc = Lord(1, ALPHA)
        for i in range(1, 5):
            proc.step(event(i, 0.9, (i,)))
        assert proc.states[0].since_last_discovery == 5
        record = proc.step(event(5, 1e-6, (5,)))
        assert record.rejected
        assert record.layers[0].since_last_discovery == 1
        after = proc.step(event(6, 0.5, (6,)))
        assert after.layers[0].threshold == pytest.approx(BETA_1, abs=1e-9)

    def test_decided_layer_is_frozen(self):
        proc = Lord(2, ALPHA)
        proc.step(event(1, 1e-7, (1, 1)))
        before = copy.deepcopy(proc.states[1])
        record = proc.step(event(2, 0.5, (2, 1)))
        after = proc.states[1]
        assert after.since_last_discovery == before.since_last_discovery == 1
        assert after.rejections == before.rejections
        assert after.rejected_groups == before.rejected_groups
        assert record.layers[1].since_last_discovery == 1
        assert proc.states[0].since_last_discovery == 2


class TestUntestedPolicy:
    def exhaust_both_layers(self, untested):
        proc = Lond(2, ALPHA, untested=untested)
        proc.step(event(1, 1e-7, (1, 1)))
        return proc, proc.step(event(2, 0.5, (1, 1)))

    def test_literal_mode_keeps_the_default_rejection(self):
        proc, record = self.exhaust_both_layers("literal")
        assert record.rejected
        assert not any(outcome.tested for outcome in record.layers)
        assert [s.rejections for s in proc.states] == [1, 1]

    def test_accept_mode_flips_to_accept(self):
        proc, record = self.exhaust_both_layers("accept")
        assert not record.rejected
        assert [s.rejections for s in proc.states] == [1, 1]

    def test_group_level_outputs_agree_between_modes(self):
        literal, _ = self.exhaust_both_layers("literal")
        accept, _ = self.exhaust_both_layers("accept")
        for a, b in zip(literal.states, accept.states):
            assert a.rejected_groups == b.rejected_groups
            assert a.rejections == b.rejections


class TestSingleLayerFactory:
    def test_lond_walkthrough(self):
        proc = make_single_layer("LOND", ALPHA)
        records = proc.run_pvalues([0.01, 0.9, 0.9])
        assert [r.rejected for r in records] == [True, False, False]
        thresholds = [r.layers[0].threshold for r in records]
        assert thresholds == pytest.approx(
            [BETA_1, 2 * BETA_2, 2 * BETA_3], abs=1e-9
        )

    def test_gai_all_ones_halts_after_budget(self):
        proc = make_single_layer("GAI", ALPHA)
        records = proc.run_pvalues([1.0] * 6)
        tested = sum(r.layers[0].tested for r in records)
        assert tested == math.ceil(ALPHA * 1.0 / PHI)  # one paid test
        assert not any(r.rejected for r in records)
        assert records[0].halted and records[-1].halted

    def test_gai_budget_scales_with_eta(self):
        proc = make_single_layer("GAI", ALPHA, eta=2.0)
        records = proc.run_pvalues([1.0] * 6)
        assert sum(r.layers[0].tested for r in records) == 2

    def test_lord_rejects_every_zero_pvalue(self):
        proc = make_single_layer("LORD", ALPHA)
        records = proc.run_pvalues([0.0] * 10)
        assert all(r.rejected for r in records)

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="unknown method name"):
            make_single_layer("BONF", ALPHA)


@pytest.mark.parametrize("method", ["ml-GAI", "ml-LOND", "ml-LOND_m", "ml-LORD"])
def test_issued_thresholds_live_in_unit_interval(method):
    rng = np.random.default_rng(7)
    proc = make_procedure(method, 2, ALPHA)
    for i in range(1, 200):
        if proc.halted:
            break
        gids = (i, int(rng.integers(1, 5)))
        record = proc.step(event(i, float(rng.random() ** 3), gids))
        for outcome in record.layers:
            if outcome.tested:
                assert 0.0 < outcome.threshold <= 1.0


@pytest.mark.parametrize("method", ["ml-GAI", "ml-LOND", "ml-LOND_m", "ml-LORD"])
def test_pending_only_mutation(method):
    rng = np.random.default_rng(17)
    proc = make_procedure(method, 2, ALPHA)
    for i in range(1, 150):
        if proc.halted:
            break
        gids = (i, int(rng.integers(1, 4)))
        frozen = {
            m: copy.deepcopy(proc.states[m])
            for m in range(2)
            if gids[m] in proc.states[m].rejected_groups
        }
        proc.step(event(i, float(rng.random() ** 2), gids))
        for m, before in frozen.items():
            after = proc.states[m]
            # arrival bookkeeping aside, the decision state is untouched
            assert after.rejected_groups == before.rejected_groups
            assert after.rejections == before.rejections
            assert after.wealth == before.wealth
            assert after.since_last_discovery == before.since_last_discovery
            assert after.last_discovery_time == before.last_discovery_time
            # the collapsed test count does not advance either
            assert after.effective_tests(i) == before.effective_tests(i - 1)


def test_rejection_requires_every_pending_layer():
    # layer statistics differ via the transform hook: layer 1 never passes
    proc = Lond(2, ALPHA, statistics=(None, lambda e: 1.0))
    record = proc.step(event(1, 0.0, (1, 1)))
    assert not record.rejected
    assert record.layers[0].tested and record.layers[1].tested


def test_statistic_transform_must_produce_probability():
    proc = Lond(1, ALPHA, statistics=(lambda e: 1.7,))
    with pytest.raises(ValueError, match="outside"):
        proc.step(event(1, 0.5, (1,)))


def test_event_layer_count_is_checked():
    proc = Lond(2, ALPHA)
    with pytest.raises(ValueError, match="expected 2"):
        proc.step(event(1, 0.5, (1,)))


def test_make_procedure_unknown_method():
    with pytest.raises(ValueError, match="unknown method name"):
        make_procedure("ml-BH", 2, ALPHA)


class TestLayerConfigs:
    def test_per_layer_beta_sequences(self):
        from layerfdr.core import LayerConfig

        configs = [
            LayerConfig(layer_id=0),
            LayerConfig(layer_id=1, beta_sequence=BetaSequence(ALPHA, kind="geometric")),
        ]
        proc = make_procedure("ml-LORD", 2, ALPHA, layer_configs=configs)
        record = proc.step(event(1, 0.5, (1, 1)))
        assert record.layers[0].threshold == pytest.approx(BETA_1, abs=1e-9)
        assert record.layers[1].threshold == pytest.approx(ALPHA * 0.5, abs=1e-12)

    def test_per_layer_spending_policies(self):
        from layerfdr.core import LayerConfig

        strict = constant_policy(0.01, PHI, PSI, 1.0)
        configs = [LayerConfig(layer_id=0), LayerConfig(layer_id=1, spending_policy=strict)]
        proc = make_procedure("ml-GAI", 2, ALPHA, layer_configs=configs)
        record = proc.step(event(1, 0.05, (1, 1)))
        assert record.layers[0].threshold == pytest.approx(ALPHA)
        assert record.layers[1].threshold == pytest.approx(0.01)
        assert not record.rejected  # 0.05 fails the strict layer

    def test_per_layer_statistic_transform(self):
        from layerfdr.core import LayerConfig

        configs = [
            LayerConfig(layer_id=0),
            LayerConfig(layer_id=1, statistic=lambda e: min(1.0, 2.0 * e.p)),
        ]
        proc = make_procedure("ml-LOND", 2, ALPHA, layer_configs=configs)
        # p itself clears beta_1 but the doubled layer statistic does not
        record = proc.step(event(1, 0.04, (1, 1)))
        assert not record.rejected

    def test_config_count_must_match_layers(self):
        from layerfdr.core import LayerConfig

        with pytest.raises(ValueError, match="one layer config"):
            make_procedure("ml-LORD", 2, ALPHA, layer_configs=[LayerConfig(layer_id=0)])
