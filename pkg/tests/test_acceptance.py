"""Desk-scale verification gate.

Criteria 1-6 reproduce the reference scheduler-comparison orderings on a
20-second, 5-seed sweep over {10, 30, 50} UEs with the default scenario.
Criterion 7 re-checks the simulator's invariants on every one of those runs,
criterion 8 replays the allocator against a brute-force oracle, and criterion
9 pins the hand-derived unit values.  One PASS line is printed per criterion
(visible with `pytest -s` or in the captured output).
"""
import copy
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
import pytest

from ltedlsim import checks, engine, metrics, radio, sched
from ltedlsim.engine import SimConfig
from ltedlsim.sched import ExpRuleParams, FlsState, LogRuleParams, allocate_subframe
from ltedlsim.traffic import BEST_EFFORT, VIDEO, VOIP

from _reference import replay_allocate
from conftest import make_flow

SCHEDULERS = ("FLS", "EXP", "LOG")
UE_COUNTS = (10, 30, 50)
SEEDS = (1, 2, 3, 4, 5)
DURATION_S = 20.0
JOBS = 2


def _report(message):
    print(f"ACCEPTANCE {message}")


@pytest.fixture(scope="module")
def sweep():
    """All 45 verified runs of the acceptance sweep, aggregated per point.

    Every run executes under the invariant-checking wrapper; the checker
    outcomes feed criterion 7.
    """
    base = SimConfig(duration_s=DURATION_S)
    configs = [replace(base, scheduler=s, n_ues=n, seed=seed)
               for s in SCHEDULERS for n in UE_COUNTS for seed in SEEDS]
    with ProcessPoolExecutor(max_workers=JOBS) as pool:
        outcomes = list(pool.map(checks.run_verified, configs, chunksize=1))
    by_point = {}
    run_checks = []
    for cfg, (report, rc) in zip(configs, outcomes):
        by_point.setdefault((cfg.scheduler, cfg.n_ues), []).append(report)
        run_checks.append((cfg, rc))
    table = {key: metrics.aggregate(reports) for key, reports in by_point.items()}
    return table, run_checks


def _video(table, scheduler, n_ues, field):
    return getattr(table[(scheduler, n_ues)].per_class["video"], field)


class TestCriterion1:
    def test_throughput_ordering_at_high_load(self, sweep):
        table, _ = sweep
        tput = {s: _video(table, s, 50, "throughput_bps") for s in SCHEDULERS}
        assert tput["FLS"] >= tput["EXP"] >= tput["LOG"]
        assert tput["FLS"] > tput["LOG"]
        _report(f"1 PASS: video throughput @50 UEs "
                f"FLS {tput['FLS'] / 1e6:.4f} >= EXP {tput['EXP'] / 1e6:.4f} "
                f">= LOG {tput['LOG'] / 1e6:.4f} Mbps, FLS > LOG strictly")


class TestCriterion2:
    def test_per_ue_throughput_strictly_decreasing(self, sweep):
        table, _ = sweep
        for s in SCHEDULERS:
            per_ue = [_video(table, s, n, "throughput_bps") / n for n in UE_COUNTS]
            assert per_ue[0] > per_ue[1] > per_ue[2], (s, per_ue)
        _report("2 PASS: per-UE video throughput strictly decreasing "
                "10 -> 30 -> 50 UEs for FLS, EXP, and LOG")


class TestCriterion3:
    def test_delay_ordering_and_band(self, sweep):
        table, _ = sweep
        delay = {s: _video(table, s, 50, "avg_delay_s") for s in SCHEDULERS}
        assert delay["FLS"] == min(delay.values())
        gap = abs(delay["EXP"] - delay["LOG"])
        mean = (delay["EXP"] + delay["LOG"]) / 2.0
        assert gap <= 0.30 * mean
        _report(f"3 PASS: delay @50 UEs FLS {delay['FLS'] * 1e3:.2f} ms is minimal; "
                f"|EXP-LOG| = {gap / mean * 100:.1f}% of their mean (<= 30%)")


class TestCriterion4:
    def test_plr_ordering(self, sweep):
        table, _ = sweep
        plr = {s: _video(table, s, 50, "plr") for s in SCHEDULERS}
        assert plr["FLS"] <= plr["EXP"] <= plr["LOG"]
        _report(f"4a PASS: PLR @50 UEs FLS {plr['FLS'] * 100:.3f}% <= "
                f"EXP {plr['EXP'] * 100:.3f}% <= LOG {plr['LOG'] * 100:.3f}%")

    def test_fls_plr_below_one_percent_at_light_load(self, sweep):
        table, _ = sweep
        plr10 = _video(table, "FLS", 10, "plr")
        plr30 = _video(table, "FLS", 30, "plr")
        assert plr10 < 0.01
        assert plr30 < 0.01
        _report(f"4b PASS: FLS video PLR {plr10 * 100:.3f}% @10 UEs and "
                f"{plr30 * 100:.3f}% @30 UEs, both < 1%")


class TestCriterion5:
    def test_fairness_band(self, sweep):
        table, _ = sweep
        worst = 0.0
        for n in UE_COUNTS:
            values = [_video(table, s, n, "fairness") for s in SCHEDULERS]
            worst = max(worst, max(values) - min(values))
        assert worst <= 0.15
        _report(f"5 PASS: max pairwise Jain-index difference {worst:.4f} <= 0.15 "
                "at every tested user count")


class TestCriterion6:
    def test_spectral_efficiency_band(self, sweep):
        table, _ = sweep
        worst = 0.0
        for n in UE_COUNTS:
            for a, b in itertools.combinations(SCHEDULERS, 2):
                sa = table[(a, n)].spectral_efficiency
                sb = table[(b, n)].spectral_efficiency
                worst = max(worst, abs(sa - sb) / ((sa + sb) / 2.0))
        assert worst <= 0.20
        _report(f"6 PASS: max pairwise spectral-efficiency difference "
                f"{worst * 100:.1f}% <= 20% at every tested user count")


class TestCriterion7:
    def test_invariants_hold_on_every_acceptance_run(self, sweep):
        _, run_checks = sweep
        bad = [(cfg.scheduler, cfg.n_ues, cfg.seed, rc.violations[:3])
               for cfg, rc in run_checks if not rc.ok]
        assert not bad, bad
        total = sum(rc.ttis_checked for _, rc in run_checks)
        _report(f"7a PASS: conservation, PRB uniqueness, delay-budget, FLS "
                f"frame-quota, and containment checks clean over "
                f"{len(run_checks)} runs / {total} TTIs")

    def test_jain_bounds_on_all_reports(self, sweep):
        table, _ = sweep
        for report in table.values():
            for kpi in report.per_class.values():
                assert 1.0 / report.n_ues - 1e-9 <= kpi.fairness <= 1.0 + 1e-9
        _report("7b PASS: Jain index within [1/N, 1] for every class of "
                "every aggregated report")

    def test_determinism_bit_identical_reports(self):
        for scheduler in SCHEDULERS:
            cfg = SimConfig(duration_s=3.0, n_ues=10, scheduler=scheduler, seed=7)
            assert engine.run(cfg) == engine.run(cfg)
        _report("7c PASS: identical seed gives bit-identical KPI reports "
                "for FLS, EXP, and LOG")

    def test_metric_scale_invariance(self):
        flows = [make_flow(i, VIDEO, queue_bits=25_000, hol=0.02 * i, cqi=5 + i,
                           pf_avg=400.0 * (i + 1)) for i in range(3)]
        scaled_pf = [replace(f, pf_avg_rate=f.pf_avg_rate * 13.0) for f in flows]
        assert (allocate_subframe(flows, "PF", 12).prb_flow
                == allocate_subframe(scaled_pf, "PF", 12).prb_flow)
        gamma = {f.flow_id: 1.0 + f.flow_id for f in flows}
        gamma_scaled = {fid: 5.0 * g for fid, g in gamma.items()}
        assert (allocate_subframe(flows, "EXP", 12,
                                  exp_params=ExpRuleParams(gamma=gamma)).prb_flow
                == allocate_subframe(flows, "EXP", 12,
                                     exp_params=ExpRuleParams(gamma=gamma_scaled)).prb_flow)
        b = {f.flow_id: 0.5 + f.flow_id for f in flows}
        b_scaled = {fid: 3.0 * x for fid, x in b.items()}
        assert (allocate_subframe(flows, "LOG", 12,
                                  log_params=LogRuleParams(b=b)).prb_flow
                == allocate_subframe(flows, "LOG", 12,
                                     log_params=LogRuleParams(b=b_scaled)).prb_flow)
        _report("7d PASS: PRB assignments invariant under uniform scaling of "
                "PF averages, EXP gammas, and LOG weights")


class TestCriterion8:
    def test_allocator_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(2024)
        trials = 0
        for _ in range(1000):
            n_flows = int(rng.integers(1, 4))
            flows = []
            for i in range(n_flows):
                cls = str(rng.choice([VIDEO, VOIP, BEST_EFFORT]))
                flows.append(make_flow(
                    i, cls,
                    queue_bits=None if cls == BEST_EFFORT else int(rng.integers(0, 3000)),
                    hol=float(rng.uniform(0.0, 0.12)),
                    cqi=int(rng.integers(1, 16)),
                    pf_avg=float(rng.uniform(1.0, 5000.0))))
            n_prb = int(rng.integers(1, 5))
            policy = str(rng.choice(["PF", "EXP", "LOG", "FLS"]))
            exp_params = ExpRuleParams(
                variant=str(rng.choice(["waiting_time", "queue_length"])))
            fls = FlsState()
            residuals = {}
            if policy == "FLS":
                for f in flows:
                    if f.flow_class != BEST_EFFORT:
                        st = fls.ensure(f.flow_id, f.delay_budget_s)
                        st.residual = float(rng.integers(0, 2500))
                        residuals[f.flow_id] = st.residual
            got = allocate_subframe(flows, policy, n_prb,
                                    fls_state=copy.deepcopy(fls),
                                    exp_params=exp_params)
            want_flow, want_granted = replay_allocate(
                flows, policy, n_prb, fls_residual=residuals, exp_params=exp_params)
            assert got.prb_flow == want_flow
            assert got.granted_bits == want_granted
            trials += 1
        _report(f"8 PASS: allocate_subframe matches the per-PRB brute-force "
                f"replay on {trials} randomized small instances")


class TestCriterion9:
    def test_unit_level_numeric_checks(self):
        assert radio.transport_block_bits(15, 50) == 33_328

        assert metrics.jain_index([2, 4]) == 0.9

        exp_flows = [make_flow(1, VIDEO, queue_bits=10.0, mu=1.0),
                     make_flow(2, VIDEO, queue_bits=0.0, mu=2.0)]
        params = ExpRuleParams(variant="queue_length", beta=0.5, eta=0.5,
                               a={1: 1.0, 2: 1.0}, gamma={1: 1.0, 2: 1.0})
        m = [sched.exp_rule_metric(f, exp_flows, params) for f in exp_flows]
        assert m[0] > m[1]  # the backlogged flow wins
        assert m[0] == pytest.approx(38.66, abs=0.01)

        log_flows = [make_flow(1, VIDEO, hol=0.0, mu=2.0),
                     make_flow(2, VIDEO, hol=5.0, mu=1.0)]
        lparams = LogRuleParams(c_log=1.1, a={1: 1.0, 2: 1.0}, b={1: 1.0, 2: 1.0})
        lm = [sched.log_rule_metric(f, lparams) for f in log_flows]
        assert lm[1] > lm[0]  # the delayed flow wins
        assert lm[0] == pytest.approx(2.0 * math.log(1.1))
        assert lm[1] == pytest.approx(math.log(6.1))

        st = sched.FlsFlowState(drain=0.5)
        first = sched.fls_quota_update(st, 100.0)
        second = sched.fls_quota_update(st, 100.0)
        assert (first, second) == (50.0, 75.0)

        _report("9 PASS: transport block 33328 bits; Jain(2,4) = 0.9; EXP "
                "example selects flow 1 (38.66); LOG example selects flow 2; "
                "FLS recursion yields (50, 75)")
