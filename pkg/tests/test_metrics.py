import math

import pytest

from ltedlsim import metrics
from ltedlsim.metrics import FlowCounters, aggregate, finalize_run, jain_index
from ltedlsim.traffic import BEST_EFFORT, VIDEO, VOIP


def counters(ue=0, cls=VIDEO, arrived_p=0, arrived_b=0, delivered_p=0,
             delivered_b=0, dropped_p=0, dropped_b=0, queued_p=0, queued_b=0,
             delay_sum=0.0, budget=0.1):
    return FlowCounters(ue, cls, arrived_p, arrived_b, delivered_p, delivered_b,
                        dropped_p, dropped_b, queued_p, queued_b, delay_sum, budget)


class TestJainIndex:
    def test_equal_shares(self):
        assert jain_index([1, 1, 1, 1]) == 1.0

    def test_single_winner(self):
        assert jain_index([1, 0, 0, 0]) == 0.25

    def test_two_unequal(self):
        assert jain_index([2, 4]) == 0.9

    def test_all_zero_treated_fair(self):
        assert jain_index([0.0, 0.0, 0.0]) == 1.0

    def test_scale_invariance(self):
        values = [3.0, 7.5, 1.2, 0.0, 9.9]
        assert jain_index([10.0 * v for v in values]) == pytest.approx(
            jain_index(values), rel=1e-12)

    def test_bounds(self):
        import random
        rng = random.Random(2)
        for _ in range(200):
            n = rng.randint(1, 40)
            values = [rng.random() for _ in range(n)]
            j = jain_index(values)
            assert 1.0 / n - 1e-12 <= j <= 1.0 + 1e-12

    def test_maximal_iff_equal(self):
        assert jain_index([5, 5, 5]) == pytest.approx(1.0)
        assert jain_index([5, 5, 5.001]) < 1.0

    def test_rejects_empty_and_negative(self):
        with pytest.raises(ValueError):
            jain_index([])
        with pytest.raises(ValueError):
            jain_index([1.0, -0.1])


class TestFinalizeRun:
    def test_peak_rate_run(self):
        # one full-buffer flow served a 33328-bit transport block every TTI
        n_ttis = 100_000
        c = counters(cls=BEST_EFFORT, delivered_b=33_328 * n_ttis,
                     arrived_b=33_328 * n_ttis, budget=math.inf)
        report = finalize_run([c], 100.0, 10e6, scheduler="PF", n_ues=1, seed=1)
        kpi = report.per_class[BEST_EFFORT]
        assert kpi.throughput_bps == pytest.approx(33_328_000.0)
        assert kpi.spectral_eff_bps_hz == pytest.approx(3.3328)
        assert report.spectral_efficiency == pytest.approx(3.3328)

    def test_spectral_efficiency_times_bandwidth_is_throughput(self):
        c = counters(delivered_p=7, delivered_b=123_456, arrived_p=7,
                     arrived_b=123_456, delay_sum=0.21)
        report = finalize_run([c], 10.0, 10e6, scheduler="PF", n_ues=1, seed=1)
        for kpi in report.per_class.values():
            assert kpi.spectral_eff_bps_hz * 10e6 == pytest.approx(
                kpi.throughput_bps, rel=1e-12)

    def test_plr_ratio(self):
        c = counters(arrived_p=5, arrived_b=5000, delivered_p=4,
                     delivered_b=4000, dropped_p=1, dropped_b=1000)
        report = finalize_run([c], 1.0, 10e6, scheduler="PF", n_ues=1, seed=1)
        assert report.per_class[VIDEO].plr == pytest.approx(0.2)

    def test_nothing_dropped_is_zero_plr(self):
        c = counters(arrived_p=9, delivered_p=9)
        report = finalize_run([c], 1.0, 10e6, scheduler="PF", n_ues=1, seed=1)
        assert report.per_class[VIDEO].plr == 0.0

    def test_packet_fractions_partition(self):
        c = counters(arrived_p=10, arrived_b=10_000, delivered_p=6,
                     delivered_b=6000, dropped_p=3, dropped_b=3000,
                     queued_p=1, queued_b=1000, delay_sum=0.3)
        report = finalize_run([c], 1.0, 10e6, scheduler="PF", n_ues=1, seed=1)
        kpi = report.per_class[VIDEO]
        queued_fraction = 1.0 / 10.0
        assert kpi.plr + kpi.delivered_packets / 10.0 + queued_fraction == pytest.approx(1.0)

    def test_zero_delivered_flags_budget_delay(self):
        c = counters(arrived_p=4, arrived_b=4000, dropped_p=4, dropped_b=4000)
        report = finalize_run([c], 1.0, 10e6, scheduler="PF", n_ues=1, seed=1)
        assert report.per_class[VIDEO].avg_delay_s == 0.1
        assert report.per_class[VIDEO].delay_flagged

    def test_average_delay_over_delivered_only(self):
        c = counters(arrived_p=3, arrived_b=3000, delivered_p=2,
                     delivered_b=2000, dropped_p=1, dropped_b=1000,
                     delay_sum=0.08)
        report = finalize_run([c], 1.0, 10e6, scheduler="PF", n_ues=1, seed=1)
        assert report.per_class[VIDEO].avg_delay_s == pytest.approx(0.04)

    def test_headline_fairness_is_video_jain(self):
        per_ue = [counters(ue=0, delivered_b=4000, arrived_b=4000),
                  counters(ue=1, delivered_b=2000, arrived_b=2000)]
        report = finalize_run(per_ue, 1.0, 10e6, scheduler="PF", n_ues=2, seed=1)
        assert report.fairness == pytest.approx(jain_index([4000, 2000]))

    def test_duration_must_be_positive(self):
        with pytest.raises(ValueError):
            finalize_run([counters()], 0.0, 10e6, scheduler="PF", n_ues=1, seed=1)


class TestAggregate:
    def _report(self, tput, plr=0.0, seed=1):
        c = counters(arrived_p=100, arrived_b=int(tput), delivered_p=100,
                     delivered_b=int(tput), delay_sum=1.0)
        return finalize_run([c], 1.0, 10e6, scheduler="FLS", n_ues=1, seed=seed)

    def test_mean_of_equal_reports(self):
        reports = [self._report(1e6, seed=s) for s in (1, 2, 3)]
        agg = aggregate(reports)
        assert agg.per_class[VIDEO].throughput_bps == pytest.approx(1e6)
        assert agg.seeds == 3
        assert agg.seed is None

    def test_mean_throughput(self):
        agg = aggregate([self._report(10e6, seed=1), self._report(20e6, seed=2)])
        assert agg.per_class[VIDEO].throughput_bps == pytest.approx(15e6)

    def test_five_run_plr_mean(self):
        reports = []
        for seed, plr_pair in enumerate(((100, 0), (98, 2), (99, 1), (99, 1), (99, 1))):
            delivered, dropped = plr_pair
            c = counters(arrived_p=100, arrived_b=100_000,
                         delivered_p=delivered, delivered_b=delivered * 1000,
                         dropped_p=dropped, dropped_b=dropped * 1000,
                         delay_sum=float(delivered) * 0.01)
            reports.append(finalize_run([c], 1.0, 10e6, scheduler="FLS",
                                        n_ues=1, seed=seed))
        agg = aggregate(reports)
        assert agg.per_class[VIDEO].plr == pytest.approx(0.01)

    def test_mixed_configuration_rejected(self):
        a = self._report(1e6)
        b = finalize_run([counters(arrived_p=1, arrived_b=10, delivered_p=1,
                                   delivered_b=10)], 1.0, 10e6,
                         scheduler="PF", n_ues=1, seed=2)
        with pytest.raises(ValueError, match="mixed configurations"):
            aggregate([a, b])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])
