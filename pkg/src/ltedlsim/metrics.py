"""Run-level KPIs: throughput, delay, packet loss, fairness, spectral efficiency."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .traffic import BEST_EFFORT, FLOW_CLASSES

CLASS_KEYS = FLOW_CLASSES + ("all",)


@dataclass(frozen=True)
class FlowCounters:
    """End-of-run counters for one flow, as accumulated by its queue."""

    ue_id: int
    flow_class: str
    arrived_packets: int
    arrived_bits: int
    delivered_packets: int
    delivered_bits: int
    dropped_packets: int
    dropped_bits: int
    queued_packets: int
    queued_bits: int
    delay_sum_s: float
    delay_budget_s: float


@dataclass
class ClassKpi:
    throughput_bps: float = 0.0
    avg_delay_s: float = 0.0
    plr: float = 0.0
    fairness: float = 1.0
    spectral_eff_bps_hz: float = 0.0
    arrived_packets: float = 0.0
    delivered_packets: float = 0.0
    dropped_packets: float = 0.0
    delivered_bits: float = 0.0
    delay_flagged: bool = False


@dataclass
class KpiReport:
    """KPIs of one run, or the seed-average of several identical runs."""

    scheduler: str
    n_ues: int
    seed: int | None
    seeds: int
    duration_s: float
    bandwidth_hz: float
    per_class: dict[str, ClassKpi]
    fairness: float               # Jain index over per-UE video throughput
    spectral_efficiency: float    # overall delivered bits / (duration x bandwidth)


def jain_index(values: Sequence[float]) -> float:
    """Jain's fairness index (sum x)^2 / (N sum x^2), in [1/N, 1].

    An all-zero vector is treated as perfectly fair and maps to 1.
    """
    vals = list(values)
    if not vals:
        raise ValueError("jain_index needs at least one value")
    if any(v < 0 for v in vals):
        raise ValueError("jain_index inputs must be non-negative")
    total = sum(vals)
    if total == 0:
        return 1.0
    return total * total / (len(vals) * sum(v * v for v in vals))


def _class_kpi(counters: Sequence[FlowCounters], duration_s: float,
               bandwidth_hz: float, flow_class: str) -> ClassKpi:
    arrived = sum(c.arrived_packets for c in counters)
    delivered = sum(c.delivered_packets for c in counters)
    dropped = sum(c.dropped_packets for c in counters)
    bits = sum(c.delivered_bits for c in counters)
    delay_sum = sum(c.delay_sum_s for c in counters)

    throughput = bits / duration_s
    plr = dropped / arrived if arrived else 0.0
    budgets = [c.delay_budget_s for c in counters if not math.isinf(c.delay_budget_s)]
    flagged = False
    if delivered:
        avg_delay = delay_sum / delivered
    elif arrived and budgets:
        # nothing came through; report the budget itself and flag it
        avg_delay = min(budgets)
        flagged = True
    else:
        avg_delay = 0.0

    per_ue: dict[int, float] = {}
    for c in counters:
        per_ue[c.ue_id] = per_ue.get(c.ue_id, 0.0) + c.delivered_bits
    fairness = jain_index(list(per_ue.values())) if per_ue else 1.0

    return ClassKpi(
        throughput_bps=throughput,
        avg_delay_s=avg_delay,
        plr=plr,
        fairness=fairness,
        spectral_eff_bps_hz=throughput / bandwidth_hz,
        arrived_packets=float(arrived),
        delivered_packets=float(delivered),
        dropped_packets=float(dropped),
        delivered_bits=float(bits),
        delay_flagged=flagged,
    )


def finalize_run(counters: Sequence[FlowCounters], duration_s: float,
                 bandwidth_hz: float, *, scheduler: str, n_ues: int,
                 seed: int | None) -> KpiReport:
    """Reduce per-flow counters to a KPI report for one run."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    per_class = {}
    for key in CLASS_KEYS:
        group = [c for c in counters if key == "all" or c.flow_class == key]
        per_class[key] = _class_kpi(group, duration_s, bandwidth_hz, key)
    return KpiReport(
        scheduler=scheduler,
        n_ues=n_ues,
        seed=seed,
        seeds=1,
        duration_s=duration_s,
        bandwidth_hz=bandwidth_hz,
        per_class=per_class,
        fairness=per_class["video"].fairness,
        spectral_efficiency=per_class["all"].spectral_eff_bps_hz,
    )


def empty_report(*, scheduler: str, n_ues: int, seed: int | None,
                 bandwidth_hz: float) -> KpiReport:
    """Zero-duration report: every counter and KPI at its neutral value."""
    return KpiReport(
        scheduler=scheduler,
        n_ues=n_ues,
        seed=seed,
        seeds=1,
        duration_s=0.0,
        bandwidth_hz=bandwidth_hz,
        per_class={key: ClassKpi() for key in CLASS_KEYS},
        fairness=1.0,
        spectral_efficiency=0.0,
    )


def aggregate(reports: Sequence[KpiReport]) -> KpiReport:
    """Arithmetic mean of each KPI across runs of one configuration."""
    if not reports:
        raise ValueError("nothing to aggregate")
    head = reports[0]
    for r in reports[1:]:
        if (r.scheduler, r.n_ues, r.duration_s, r.bandwidth_hz) != (
                head.scheduler, head.n_ues, head.duration_s, head.bandwidth_hz):
            raise ValueError(
                "mixed configurations: aggregation requires identical "
                "scheduler, UE count, duration, and bandwidth")
    n = len(reports)
    per_class = {}
    for key in CLASS_KEYS:
        kpis = [r.per_class[key] for r in reports]
        per_class[key] = ClassKpi(
            throughput_bps=sum(k.throughput_bps for k in kpis) / n,
            avg_delay_s=sum(k.avg_delay_s for k in kpis) / n,
            plr=sum(k.plr for k in kpis) / n,
            fairness=sum(k.fairness for k in kpis) / n,
            spectral_eff_bps_hz=sum(k.spectral_eff_bps_hz for k in kpis) / n,
            arrived_packets=sum(k.arrived_packets for k in kpis) / n,
            delivered_packets=sum(k.delivered_packets for k in kpis) / n,
            dropped_packets=sum(k.dropped_packets for k in kpis) / n,
            delivered_bits=sum(k.delivered_bits for k in kpis) / n,
            delay_flagged=any(k.delay_flagged for k in kpis),
        )
    return KpiReport(
        scheduler=head.scheduler,
        n_ues=head.n_ues,
        seed=None,
        seeds=sum(r.seeds for r in reports),
        duration_s=head.duration_s,
        bandwidth_hz=head.bandwidth_hz,
        per_class=per_class,
        fairness=sum(r.fairness for r in reports) / n,
        spectral_efficiency=sum(r.spectral_efficiency for r in reports) / n,
    )
