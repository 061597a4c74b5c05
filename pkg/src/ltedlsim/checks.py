"""Self-checking run wrapper: enforces the simulator's invariants while running.

Used by the verification suite, and handy for vetting new configurations.
Violations are collected rather than raised so a report can list all of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import engine, metrics, traffic

_EPS = 1e-9


@dataclass
class RunChecks:
    """Outcome of the per-TTI and end-of-run invariant checks for one run."""

    violations: list[str] = field(default_factory=list)
    max_delivered_delay_s: float = 0.0
    ttis_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def fail(self, message: str):
        if len(self.violations) < 50:  # cap noise on systematic breakage
            self.violations.append(message)


def _check_tti(state: engine.RunState, checks: RunChecks):
    cfg = state.config
    tti = state.clock.tti_index - 1  # advance_tti already ticked the clock

    radius = max(m.position.radius for m in state.mobility)
    if radius > cfg.cell_radius_m + _EPS:
        checks.fail(f"tti {tti}: UE escaped the cell, radius {radius:.3f} m")

    decision = state.last_decision
    if decision is not None:
        counts: dict[int, int] = {}
        for fid in decision.prb_flow:
            if fid >= 0:
                counts[fid] = counts.get(fid, 0) + 1
        if counts != decision.prb_counts:
            checks.fail(f"tti {tti}: PRB map and per-flow counts disagree")
        for fid, served in state.last_served_bits.items():
            granted = decision.granted_bits.get(fid, 0)
            if served > granted:
                checks.fail(
                    f"tti {tti}: flow {fid} delivered {served} of {granted} granted bits")

    if cfg.scheduler == "FLS":
        for fid, served in state.frame_served_bits.items():
            # one PRB of slack; the +1 covers integer flooring of the
            # per-PRB transport block contribution
            bound = (state.frame_quota_bits.get(fid, 0.0)
                     + state.frame_granule_max.get(fid, 0) + 1 + _EPS)
            if served > bound:
                checks.fail(
                    f"tti {tti}: flow {fid} served {served} bits against "
                    f"frame quota bound {bound:.1f}")


def _check_final(state: engine.RunState, report: metrics.KpiReport, checks: RunChecks):
    for fid, q in enumerate(state.queues):
        bits_in = q.delivered_bits + q.dropped_bits + q.queued_bits
        if q.arrived_bits != bits_in:
            checks.fail(
                f"flow {fid}: bit conservation broken, "
                f"{q.arrived_bits} arrived vs {bits_in} accounted")
        pkts_in = q.delivered_packets + q.dropped_packets + len(q.packets)
        if q.arrived_packets != pkts_in:
            checks.fail(
                f"flow {fid}: packet conservation broken, "
                f"{q.arrived_packets} arrived vs {pkts_in} accounted")
        if q.flow_class != traffic.BEST_EFFORT:
            if q.max_delivered_delay_s > q.delay_budget_s + _EPS:
                checks.fail(
                    f"flow {fid}: delivered a packet {q.max_delivered_delay_s:.6f} s "
                    f"old against a {q.delay_budget_s} s budget")
            if q.delivered_packets and q.min_delivered_delay_s < -_EPS:
                checks.fail(f"flow {fid}: negative delivery delay")
        checks.max_delivered_delay_s = max(checks.max_delivered_delay_s,
                                           q.max_delivered_delay_s)

    n = max(report.n_ues, 1)
    for key, kpi in report.per_class.items():
        if not (1.0 / n - _EPS <= kpi.fairness <= 1.0 + _EPS):
            checks.fail(f"class {key}: Jain index {kpi.fairness} outside [1/N, 1]")
        if not 0.0 <= kpi.plr <= 1.0:
            checks.fail(f"class {key}: PLR {kpi.plr} outside [0, 1]")
    overall = report.per_class["all"]
    if not math.isclose(overall.spectral_eff_bps_hz * report.bandwidth_hz,
                        overall.throughput_bps, rel_tol=1e-12, abs_tol=1e-9):
        checks.fail("spectral efficiency times bandwidth != overall throughput")


def run_verified(config: engine.SimConfig) -> tuple[metrics.KpiReport, RunChecks]:
    """Run one simulation with every invariant checked along the way."""
    checks = RunChecks()
    state = engine.init_state(config)
    n_ttis = config.n_ttis
    if n_ttis == 0:
        report = metrics.empty_report(scheduler=config.scheduler, n_ues=config.n_ues,
                                      seed=config.seed, bandwidth_hz=config.bandwidth_hz)
        return report, checks
    for _ in range(n_ttis):
        engine.advance_tti(state, config)
        _check_tti(state, checks)
        checks.ttis_checked += 1
    report = metrics.finalize_run(
        engine.flow_counters(state), n_ttis * config.tti_s, config.bandwidth_hz,
        scheduler=config.scheduler, n_ues=config.n_ues, seed=config.seed)
    _check_final(state, report, checks)
    return report, checks
