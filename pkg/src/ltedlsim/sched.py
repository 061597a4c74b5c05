"""Scheduler kernel: per-TTI PRB allocation under PF, EXP, LOG, and FLS.

All policies work on immutable per-flow snapshots taken at the start of the
TTI.  Each PRB goes to the flow maximizing the policy metric among flows with
pending data (ties to the lowest flow id); after a grant the winning flow's
pending bits shrink by that PRB's transport-block contribution and only its
own metric is re-evaluated.  The FLS policy serves real-time flows first,
bounded by per-frame quotas from a first-order queue filter, with PF ordering
inside each phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import radio
from .traffic import BEST_EFFORT

SCHEDULERS = ("PF", "EXP", "LOG", "FLS")

EPS_RATE = 1.0    # bits/TTI floor on the PF average; avoids cold-start division by zero
EXP_CLAMP = 50.0  # cap on the EXP rule exponent, for numerical safety
DEFAULT_PF_WINDOW = 1000
DEFAULT_EXP_A_FACTOR = 6.0   # a_i = factor / delay budget
DEFAULT_LOG_A_FACTOR = 5.0
DEFAULT_LOG_C = 1.1
FRAME_S = radio.FRAME_TTIS * radio.TTI_S
FLS_DECAY_TARGET = 0.01      # quota filter impulse response decays to 1%
                             # within the delay budget


@dataclass
class FlowSnapshot:
    """Scheduler-visible state of one flow for one TTI."""

    flow_id: int
    ue_id: int
    flow_class: str
    queue_bits: float        # pending backlog; math.inf for full-buffer flows
    hol_delay_s: float
    cqi: int
    rate_per_prb: float      # feasible bits per PRB per TTI at the current CQI
    pf_avg_rate: float       # smoothed served rate, bits/TTI
    delay_budget_s: float    # math.inf for best effort


@dataclass
class ExpRuleParams:
    """EXP rule constants: metric = gamma_i * mu_i * exp(a_i X_i / (beta + mean^eta)).

    X_i is the head-of-line delay (waiting-time variant) or the queue length
    in bits (queue-length variant); the normalizing mean is (1/N) sum a_j X_j
    over real-time flows.  Defaults couple the rule to PF fairness
    (gamma_i = 1 / avg rate) and to the deadline (a_i = a_factor / budget).
    """

    variant: str = "waiting_time"
    beta: float = 0.5
    eta: float = 0.5
    a_factor: float = DEFAULT_EXP_A_FACTOR
    a: Mapping[int, float] | None = None       # explicit per-flow override
    gamma: Mapping[int, float] | None = None

    def __post_init__(self):
        if self.variant not in ("waiting_time", "queue_length"):
            raise ValueError(f"unknown EXP variant {self.variant!r}")
        if not 0.0 < self.beta < 1.0 or not 0.0 < self.eta < 1.0:
            raise ValueError("beta and eta must lie in (0, 1)")

    def a_for(self, flow: FlowSnapshot) -> float:
        if self.a is not None:
            return self.a[flow.flow_id]
        if math.isinf(flow.delay_budget_s):
            return 0.0
        return self.a_factor / flow.delay_budget_s

    def gamma_for(self, flow: FlowSnapshot) -> float:
        if self.gamma is not None:
            return self.gamma[flow.flow_id]
        return 1.0 / max(flow.pf_avg_rate, EPS_RATE)


@dataclass
class LogRuleParams:
    """LOG rule constants: metric = b_i * mu_i * ln(c + a_i * W_i)."""

    c_log: float = DEFAULT_LOG_C
    a_factor: float = DEFAULT_LOG_A_FACTOR
    a: Mapping[int, float] | None = None
    b: Mapping[int, float] | None = None

    def __post_init__(self):
        if self.c_log <= 1.0:
            raise ValueError("c_log must exceed 1")

    def a_for(self, flow: FlowSnapshot) -> float:
        if self.a is not None:
            return self.a[flow.flow_id]
        if math.isinf(flow.delay_budget_s):
            return 0.0
        return self.a_factor / flow.delay_budget_s

    def b_for(self, flow: FlowSnapshot) -> float:
        if self.b is not None:
            return self.b[flow.flow_id]
        return 1.0 / max(flow.pf_avg_rate, EPS_RATE)


def pf_metric(rate_per_prb: float, avg_rate: float) -> float:
    """Proportional-fair metric: instantaneous over smoothed rate."""
    return rate_per_prb / max(avg_rate, EPS_RATE)


def pf_average_update(avg_rate: float, served_bits: float,
                      window_ttis: int = DEFAULT_PF_WINDOW) -> float:
    """Exponential moving average of the served rate, floored at EPS_RATE."""
    if window_ttis < 1:
        raise ValueError("PF window must be at least one TTI")
    w = float(window_ttis)
    return max((1.0 - 1.0 / w) * avg_rate + served_bits / w, EPS_RATE)


def _exp_x(flow: FlowSnapshot, variant: str) -> float:
    # Best-effort flows carry no deadline pressure regardless of variant.
    if flow.flow_class == BEST_EFFORT:
        return 0.0
    return flow.queue_bits if variant == "queue_length" else flow.hol_delay_s


def exp_mean(flows: Sequence[FlowSnapshot], params: ExpRuleParams) -> float:
    """Normalizing mean (1/N) sum a_j X_j over real-time flows."""
    rt = [f for f in flows if f.flow_class != BEST_EFFORT]
    if not rt:
        return 0.0
    return sum(params.a_for(f) * _exp_x(f, params.variant) for f in rt) / len(rt)


def exp_rule_metric(flow: FlowSnapshot, flows: Sequence[FlowSnapshot],
                    params: ExpRuleParams | None = None,
                    mean_x: float | None = None) -> float:
    """EXP rule metric; `mean_x` may be precomputed once per decision instant."""
    params = params if params is not None else ExpRuleParams()
    if mean_x is None:
        mean_x = exp_mean(flows, params)
    denom = params.beta + mean_x ** params.eta
    exponent = min(params.a_for(flow) * _exp_x(flow, params.variant) / denom, EXP_CLAMP)
    return params.gamma_for(flow) * flow.rate_per_prb * math.exp(exponent)


def log_rule_metric(flow: FlowSnapshot, params: LogRuleParams | None = None) -> float:
    params = params if params is not None else LogRuleParams()
    hol = 0.0 if flow.flow_class == BEST_EFFORT else flow.hol_delay_s
    return (params.b_for(flow) * flow.rate_per_prb
            * math.log(params.c_log + params.a_for(flow) * hol))


def fls_drain_coefficient(delay_budget_s: float, frame_s: float = FRAME_S,
                          decay_target: float = FLS_DECAY_TARGET) -> float:
    """First-order filter coefficient draining a queue within its budget."""
    frames = max(1, round(delay_budget_s / frame_s))
    return 1.0 - decay_target ** (1.0 / frames)


@dataclass
class FlsFlowState:
    drain: float            # filter coefficient c in (0, 1]
    u_prev: float = 0.0     # previous frame quota
    residual: float = 0.0   # unspent quota in the current frame


def fls_quota_update(state: FlsFlowState, queue_bits: float) -> float:
    """Frame-boundary quota: u(k) = c q(k) + (1-c) u(k-1), clamped to [0, q(k)]."""
    u = min(max(state.drain * queue_bits + (1.0 - state.drain) * state.u_prev, 0.0),
            float(queue_bits))
    state.u_prev = u
    state.residual = u
    return u


class FlsState:
    """Per-flow quota filters for the frame-level scheduler."""

    def __init__(self):
        self.flows: dict[int, FlsFlowState] = {}

    def ensure(self, flow_id: int, drain_horizon_s: float) -> FlsFlowState:
        """State for one flow; the filter drains a queue within the horizon."""
        st = self.flows.get(flow_id)
        if st is None:
            st = FlsFlowState(drain=fls_drain_coefficient(drain_horizon_s))
            self.flows[flow_id] = st
        return st

    def update_frame(self, flow_id: int, queue_bits: float, drain_horizon_s: float) -> float:
        return fls_quota_update(self.ensure(flow_id, drain_horizon_s), queue_bits)

    def residual(self, flow_id: int) -> float:
        st = self.flows.get(flow_id)
        return st.residual if st is not None else 0.0

    def consume(self, flow_id: int, bits: float):
        st = self.flows.get(flow_id)
        if st is not None:
            st.residual = max(st.residual - bits, 0.0)


@dataclass
class SchedulerDecision:
    """Per-TTI allocation: PRB index -> (UE, flow), plus per-flow grants."""

    n_prb: int
    prb_flow: list[int] = field(default_factory=list)   # flow id per PRB, -1 unassigned
    prb_ue: list[int] = field(default_factory=list)
    granted_bits: dict[int, int] = field(default_factory=dict)
    prb_counts: dict[int, int] = field(default_factory=dict)
    ue_cqi: dict[int, int] = field(default_factory=dict)  # MCS of each scheduled UE
    exp_clamped: int = 0

    @property
    def assigned_prbs(self) -> int:
        return sum(1 for f in self.prb_flow if f >= 0)


def _ordered(indices, metric, flows):
    rows = sorted((-metric[i], flows[i].flow_id, i) for i in indices)
    return [i for _, _, i in rows]


def _fill(decision: SchedulerDecision, flows, order, pending, cursor,
          fls_state: FlsState | None = None) -> int:
    """Grant contiguous PRB blocks in metric order until PRBs or demand run out.

    Equivalent to the per-PRB greedy argmax when metrics do not change within
    the TTI: the top flow keeps winning until its pending bits (or quota) are
    exhausted, then the next one does.
    """
    n_prb = decision.n_prb
    for i in order:
        if cursor >= n_prb:
            break
        f = flows[i]
        if pending[i] <= 0:
            continue
        if math.isinf(pending[i]):
            k_need = n_prb - cursor
        else:
            k_need = radio.prbs_needed(f.cqi, pending[i])
        if fls_state is not None:
            k_need = min(k_need, radio.prbs_needed(f.cqi, fls_state.residual(f.flow_id)))
        k = min(k_need, n_prb - cursor)
        if k <= 0:
            continue
        grant = radio.transport_block_bits(f.cqi, k)
        for p in range(cursor, cursor + k):
            decision.prb_flow[p] = f.flow_id
            decision.prb_ue[p] = f.ue_id
        decision.granted_bits[f.flow_id] = grant
        decision.prb_counts[f.flow_id] = k
        decision.ue_cqi[f.ue_id] = f.cqi
        pending[i] -= grant
        if fls_state is not None:
            fls_state.consume(f.flow_id, grant)
        cursor += k
    return cursor


def _allocate_exp_q(flows, n_prb, params: ExpRuleParams,
                    decision: SchedulerDecision) -> SchedulerDecision:
    """Exact per-PRB loop for the queue-length EXP variant.

    The queue term shrinks as grants accumulate, so the winning flow's metric
    must be re-evaluated after every PRB.  The normalizing mean stays at its
    decision-instant value.
    """
    n = len(flows)
    mean_x = exp_mean(flows, params)
    denom = params.beta + mean_x ** params.eta
    gamma = [params.gamma_for(f) for f in flows]
    a = [params.a_for(f) for f in flows]
    pending = [f.queue_bits for f in flows]
    counts = [0] * n

    def metric_of(i: int, backlog: float) -> float:
        f = flows[i]
        x = 0.0 if f.flow_class == BEST_EFFORT else max(backlog, 0.0)
        raw = a[i] * x / denom
        if raw > EXP_CLAMP:
            decision.exp_clamped += 1
            raw = EXP_CLAMP
        return gamma[i] * f.rate_per_prb * math.exp(raw)

    metric = [metric_of(i, flows[i].queue_bits) for i in range(n)]
    for prb in range(n_prb):
        best = -1
        best_key = None
        for i in range(n):
            if pending[i] <= 0:
                continue
            key = (-metric[i], flows[i].flow_id)
            if best_key is None or key < best_key:
                best_key = key
                best = i
        if best < 0:
            break
        f = flows[best]
        marginal = (radio.transport_block_bits(f.cqi, counts[best] + 1)
                    - radio.transport_block_bits(f.cqi, counts[best]))
        decision.prb_flow[prb] = f.flow_id
        decision.prb_ue[prb] = f.ue_id
        decision.ue_cqi[f.ue_id] = f.cqi
        counts[best] += 1
        pending[best] -= marginal
        metric[best] = metric_of(best, pending[best])
    for i in range(n):
        if counts[i]:
            decision.prb_counts[flows[i].flow_id] = counts[i]
            decision.granted_bits[flows[i].flow_id] = radio.transport_block_bits(
                flows[i].cqi, counts[i])
    return decision


def allocate_subframe(flows: Sequence[FlowSnapshot], policy: str, n_prb: int, *,
                      fls_state: FlsState | None = None,
                      exp_params: ExpRuleParams | None = None,
                      log_params: LogRuleParams | None = None) -> SchedulerDecision:
    """Allocate the TTI's PRB grid under the named policy."""
    if policy not in SCHEDULERS:
        raise ValueError(f"unknown scheduler {policy!r}; choose from {'|'.join(SCHEDULERS)}")
    decision = SchedulerDecision(
        n_prb=max(n_prb, 0),
        prb_flow=[-1] * max(n_prb, 0),
        prb_ue=[-1] * max(n_prb, 0),
    )
    if not flows or n_prb <= 0:
        return decision

    if policy == "EXP":
        params = exp_params if exp_params is not None else ExpRuleParams()
        if params.variant == "queue_length":
            return _allocate_exp_q(flows, n_prb, params, decision)
        mean_x = exp_mean(flows, params)
        denom = params.beta + mean_x ** params.eta
        metric = []
        for f in flows:
            raw = params.a_for(f) * _exp_x(f, params.variant) / denom
            if raw > EXP_CLAMP:
                decision.exp_clamped += 1
                raw = EXP_CLAMP
            metric.append(params.gamma_for(f) * f.rate_per_prb * math.exp(raw))
    elif policy == "LOG":
        params = log_params if log_params is not None else LogRuleParams()
        metric = [log_rule_metric(f, params) for f in flows]
    else:  # PF, and the PF lower level of FLS
        metric = [pf_metric(f.rate_per_prb, f.pf_avg_rate) for f in flows]

    pending = [f.queue_bits for f in flows]
    if policy == "FLS":
        if fls_state is None:
            fls_state = FlsState()
        rt = [i for i, f in enumerate(flows)
              if f.flow_class != BEST_EFFORT and pending[i] > 0
              and fls_state.residual(f.flow_id) > 0]
        be = [i for i, f in enumerate(flows) if f.flow_class == BEST_EFFORT]
        cursor = _fill(decision, flows, _ordered(rt, metric, flows), pending, 0, fls_state)
        _fill(decision, flows, _ordered(be, metric, flows), pending, cursor)
    else:
        eligible = [i for i in range(len(flows)) if pending[i] > 0]
        _fill(decision, flows, _ordered(eligible, metric, flows), pending, 0)
    return decision
