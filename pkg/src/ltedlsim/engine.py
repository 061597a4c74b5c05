"""TTI-by-TTI simulation loop binding mobility, channel, traffic, and scheduling.

Each TTI processes, in order: mobility step, SINR and CQI update, traffic
arrivals, deadline expiry drops, FLS quota refresh at frame boundaries, PRB
allocation, FIFO delivery of the granted bits, and counter / PF-average
updates.  Drops run before scheduling so no PRB is spent on expired packets.
One run is strictly sequential; distinct runs share nothing mutable and may
execute in parallel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channel, metrics, radio, sched, traffic
from .errors import ConfigError

# Named substreams so toggling one stochastic subsystem (say, fading) leaves
# the draws of every other subsystem untouched across A/B comparisons.
RNG_STREAMS = ("placement", "shadowing", "mobility", "fading", "traffic",
               "interference")

PLACEMENTS = ("uniform", "center")


@dataclass
class SimConfig:
    """Full scenario parameterization; defaults reproduce the reference setup."""

    duration_s: float = 100.0
    bandwidth_hz: float = 10e6
    cell_radius_m: float = 1000.0
    ue_speed_kmph: float = 120.0
    n_ues: int = 10
    scheduler: str = "PF"
    seed: int = 1

    # traffic
    flows_per_ue: tuple[str, ...] = traffic.FLOW_CLASSES
    video_trace_path: str | None = None
    video_bitrate_kbps: float = traffic.DEFAULT_VIDEO_KBPS
    video_fps: int = traffic.DEFAULT_VIDEO_FPS
    video_trace_frames: int = traffic.DEFAULT_VIDEO_FRAMES
    delay_budget_s: float = 0.1
    voip_on_mean_s: float = traffic.DEFAULT_VOIP_ON_MEAN_S
    voip_off_mean_s: float = traffic.DEFAULT_VOIP_OFF_MEAN_S
    voip_packet_bytes: int = traffic.DEFAULT_VOIP_PACKET_BYTES
    voip_interval_s: float = traffic.DEFAULT_VOIP_INTERVAL_S

    # radio and channel
    tti_s: float = radio.TTI_S
    frame_ttis: int = radio.FRAME_TTIS
    tx_power_dbm: float = channel.DEFAULT_TX_POWER_DBM
    noise_figure_db: float = channel.DEFAULT_NOISE_FIGURE_DB
    shadowing_sigma_db: float = channel.DEFAULT_SHADOW_SIGMA_DB
    fading_enabled: bool = True
    interference_enabled: bool = True
    interferer_load: float = 1.0
    neighbor_activity: float = 1.0    # fraction of time a neighbour cell transmits
    neighbor_cycle_s: float = 0.1     # mean ON + mean OFF dwell of that process
    turn_epoch_mean_s: float = channel.DEFAULT_TURN_EPOCH_MEAN_S
    placement: str = "uniform"

    # scheduler knobs
    t_pf: int = sched.DEFAULT_PF_WINDOW
    exp_variant: str = "waiting_time"
    exp_beta: float = 0.5
    exp_eta: float = 0.5
    exp_a_factor: float = sched.DEFAULT_EXP_A_FACTOR
    log_c: float = sched.DEFAULT_LOG_C
    log_a_factor: float = sched.DEFAULT_LOG_A_FACTOR
    # fraction of the delay budget the FLS quota filter drains a queue in;
    # the remainder is slack for PRB contention in the lower level
    fls_budget_fraction: float = 0.5

    @property
    def speed_mps(self) -> float:
        return self.ue_speed_kmph / 3.6

    @property
    def n_prb(self) -> int:
        return radio.prb_count(self.bandwidth_hz)

    @property
    def n_ttis(self) -> int:
        return round(self.duration_s / self.tti_s)

    def validate(self):
        radio.prb_count(self.bandwidth_hz)  # raises for unsupported bandwidths
        checks = [
            (self.duration_s >= 0, "duration_s must be >= 0"),
            (self.n_ues >= 1, "n_ues must be >= 1"),
            (self.scheduler in sched.SCHEDULERS,
             f"scheduler must be one of {'|'.join(sched.SCHEDULERS)}"),
            (self.cell_radius_m > 0, "cell_radius_m must be > 0"),
            (self.ue_speed_kmph >= 0, "ue_speed_kmph must be >= 0"),
            (self.delay_budget_s > 0, "delay_budget_s must be > 0"),
            (self.video_bitrate_kbps > 0, "video_bitrate_kbps must be > 0"),
            (self.video_fps > 0, "video_fps must be > 0"),
            (self.video_trace_frames >= 1, "video_trace_frames must be >= 1"),
            (self.voip_on_mean_s > 0, "voip_on_mean_s must be > 0"),
            (self.voip_off_mean_s > 0, "voip_off_mean_s must be > 0"),
            (self.voip_interval_s > 0, "voip_interval_s must be > 0"),
            (self.t_pf >= 1, "t_pf must be >= 1 TTI"),
            (0.0 < self.exp_beta < 1.0, "exp_beta must lie in (0, 1)"),
            (0.0 < self.exp_eta < 1.0, "exp_eta must lie in (0, 1)"),
            (self.exp_variant in ("waiting_time", "queue_length"),
             "exp_variant must be waiting_time or queue_length"),
            (self.log_c > 1.0, "log_c must exceed 1"),
            (0.0 < self.fls_budget_fraction <= 1.0,
             "fls_budget_fraction must lie in (0, 1]"),
            (0.0 < self.interferer_load <= 1.0, "interferer_load must lie in (0, 1]"),
            (0.0 < self.neighbor_activity <= 1.0,
             "neighbor_activity must lie in (0, 1]"),
            (self.neighbor_cycle_s > 0, "neighbor_cycle_s must be > 0"),
            (self.placement in PLACEMENTS,
             f"placement must be one of {'|'.join(PLACEMENTS)}"),
            (len(set(self.flows_per_ue)) == len(self.flows_per_ue)
             and all(f in traffic.FLOW_CLASSES for f in self.flows_per_ue),
             f"flows_per_ue must be distinct members of {traffic.FLOW_CLASSES}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def exp_params(self) -> sched.ExpRuleParams:
        return sched.ExpRuleParams(variant=self.exp_variant, beta=self.exp_beta,
                                   eta=self.exp_eta, a_factor=self.exp_a_factor)

    def log_params(self) -> sched.LogRuleParams:
        return sched.LogRuleParams(c_log=self.log_c, a_factor=self.log_a_factor)


def make_rngs(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(RNG_STREAMS))
    return {name: np.random.Generator(np.random.PCG64(child))
            for name, child in zip(RNG_STREAMS, children)}


@dataclass
class RunState:
    """Everything one simulation run owns; advanced one TTI at a time."""

    config: SimConfig
    clock: radio.TtiClock
    layout: channel.CellLayout
    site_xy: np.ndarray
    tx_prb_dbm: float
    noise_prb_dbm: float
    mobility: list[channel.MobilityState]
    shadow_db: np.ndarray                 # (n_ues, n_sites), fixed for the run
    sinr_db: np.ndarray
    cqi: np.ndarray
    queues: list[traffic.FlowQueue]       # flow id = ue * len(flows) + class slot
    sources: list
    pf_avg: list[float]
    fls: sched.FlsState
    rngs: dict[str, np.random.Generator]
    exp_params: sched.ExpRuleParams
    log_params: sched.LogRuleParams
    interferer_on: np.ndarray | None = None       # bool per interferer
    interferer_toggle_s: np.ndarray | None = None  # next state flip per interferer
    # per-TTI and per-frame records kept for invariant checking
    last_decision: sched.SchedulerDecision | None = None
    last_served_bits: dict[int, int] = field(default_factory=dict)
    frame_quota_bits: dict[int, float] = field(default_factory=dict)
    frame_served_bits: dict[int, int] = field(default_factory=dict)
    frame_granule_max: dict[int, int] = field(default_factory=dict)
    exp_clamped_total: int = 0

    @property
    def n_flows(self) -> int:
        return len(self.queues)

    @property
    def classes(self) -> tuple[str, ...]:
        return self.config.flows_per_ue

    def flow_class(self, flow_id: int) -> str:
        return self.classes[flow_id % len(self.classes)]

    def flow_ue(self, flow_id: int) -> int:
        return flow_id // len(self.classes)


_EFF_ARRAY = np.asarray(radio.EFFICIENCIES)


def _cqi_from_sinr(sinr_db: np.ndarray) -> np.ndarray:
    attainable = radio.CAPACITY_FRACTION * np.log2(1.0 + 10.0 ** (sinr_db / 10.0))
    return np.clip(np.searchsorted(_EFF_ARRAY, attainable, side="right"),
                   radio.MIN_CQI, radio.MAX_CQI).astype(np.int64)


def _load_video_trace(config: SimConfig) -> traffic.VideoTrace:
    if config.video_trace_path is not None:
        return traffic.load_trace(Path(config.video_trace_path).read_text())
    return traffic.synth_trace(config.video_bitrate_kbps, config.video_fps,
                               config.video_trace_frames)


def init_state(config: SimConfig) -> RunState:
    config.validate()
    rngs = make_rngs(config.seed)
    n = config.n_ues

    if config.interference_enabled:
        layout = channel.CellLayout.hexagonal(config.cell_radius_m, config.tx_power_dbm)
    else:
        layout = channel.CellLayout.isolated(config.tx_power_dbm)
    site_xy = np.array([[s.x, s.y] for s in layout.sites])
    n_sites = len(layout.sites)

    if config.placement == "center":
        positions = np.zeros((n, 2))
    else:
        r = config.cell_radius_m * np.sqrt(rngs["placement"].random(n))
        theta = rngs["placement"].uniform(0.0, 2.0 * math.pi, n)
        positions = np.column_stack((r * np.cos(theta), r * np.sin(theta)))
    headings = rngs["mobility"].uniform(0.0, 2.0 * math.pi, n)
    turn_in = rngs["mobility"].exponential(config.turn_epoch_mean_s, n)
    mobility = [
        channel.MobilityState(channel.Position(positions[i, 0], positions[i, 1]),
                              headings[i], config.speed_mps, turn_in[i])
        for i in range(n)
    ]

    if config.shadowing_sigma_db > 0:
        shadow = rngs["shadowing"].normal(0.0, config.shadowing_sigma_db, (n, n_sites))
    else:
        shadow = np.zeros((n, n_sites))

    trace = _load_video_trace(config)
    queues: list[traffic.FlowQueue] = []
    sources: list = []
    rng_t = rngs["traffic"]
    for _ in range(n):
        for cls in config.flows_per_ue:
            if cls == traffic.VIDEO:
                # random start frame staggers I-frames across users; frame
                # instants stay on the 1/fps grid so arrival totals over whole
                # trace cycles are exact
                start = int(rng_t.integers(len(trace.frames)))
                queues.append(traffic.FlowQueue(cls, config.delay_budget_s))
                sources.append(traffic.VideoSource(trace, start))
            elif cls == traffic.VOIP:
                queues.append(traffic.FlowQueue(cls, config.delay_budget_s))
                sources.append(traffic.VoipSource(
                    rng_t, config.voip_on_mean_s, config.voip_off_mean_s,
                    config.voip_packet_bytes, config.voip_interval_s))
            else:
                queues.append(traffic.FlowQueue(cls, math.inf))
                sources.append(None)

    n_interferers = len(layout.interferer_sites)
    rng_i = rngs["interference"]
    if config.neighbor_activity >= 1.0 or n_interferers == 0:
        interferer_on = np.ones(n_interferers, dtype=bool)
        interferer_toggle = np.full(n_interferers, math.inf)
    else:
        interferer_on = rng_i.random(n_interferers) < config.neighbor_activity
        on_mean = config.neighbor_activity * config.neighbor_cycle_s
        off_mean = (1.0 - config.neighbor_activity) * config.neighbor_cycle_s
        dwell = np.where(interferer_on, on_mean, off_mean)
        interferer_toggle = rng_i.exponential(dwell)

    state = RunState(
        config=config,
        clock=radio.TtiClock(tti_duration_s=config.tti_s,
                             slot_duration_s=config.tti_s / 2.0,
                             frame_length_ttis=config.frame_ttis),
        layout=layout,
        site_xy=site_xy,
        tx_prb_dbm=channel.tx_dbm_per_prb(config.tx_power_dbm, config.n_prb),
        noise_prb_dbm=channel.noise_dbm_per_prb(config.noise_figure_db),
        mobility=mobility,
        shadow_db=shadow,
        sinr_db=np.zeros(n),
        cqi=np.ones(n, dtype=np.int64),
        queues=queues,
        sources=sources,
        pf_avg=[sched.EPS_RATE] * len(queues),
        fls=sched.FlsState(),
        rngs=rngs,
        exp_params=config.exp_params(),
        log_params=config.log_params(),
        interferer_on=interferer_on,
        interferer_toggle_s=interferer_toggle,
    )
    return state


def _build_snapshots(state: RunState, now_s: float) -> list[sched.FlowSnapshot]:
    cfg = state.config
    snapshots = []
    n_classes = len(cfg.flows_per_ue)
    for fid, queue in enumerate(state.queues):
        ue = fid // n_classes
        cqi = int(state.cqi[ue])
        mu = radio.transport_block_bits(cqi, 1)
        if queue.flow_class == traffic.BEST_EFFORT:
            backlog: float = math.inf
            hol = 0.0
        else:
            backlog = queue.queued_bits
            hol = queue.hol_delay_s(now_s)
        snapshots.append(sched.FlowSnapshot(
            flow_id=fid, ue_id=ue, flow_class=queue.flow_class,
            queue_bits=backlog, hol_delay_s=hol, cqi=cqi, rate_per_prb=mu,
            pf_avg_rate=state.pf_avg[fid], delay_budget_s=queue.delay_budget_s,
        ))
    return snapshots


def advance_tti(state: RunState, config: SimConfig) -> RunState:
    """Process one TTI in place and return the advanced state.

    With a fixed seed the state sequence is fully deterministic.
    """
    n = config.n_ues
    dt = config.tti_s
    t0 = state.clock.time_s
    now = t0 + dt  # packets delivered this TTI leave at its end

    # 1. mobility
    rng_mob = state.rngs["mobility"]
    for i in range(n):
        state.mobility[i] = channel.step_position(
            state.mobility[i], dt, rng_mob, config.cell_radius_m,
            config.turn_epoch_mean_s)

    # 2. per-PRB SINR and wideband CQI, zero feedback delay
    positions = np.array([[m.position.x, m.position.y] for m in state.mobility])
    n_sites = state.site_xy.shape[0]
    if config.fading_enabled:
        fade_db = channel.rayleigh_fade_db(state.rngs["fading"], (n, n_sites))
    else:
        fade_db = np.zeros((n, n_sites))
    if config.neighbor_activity < 1.0 and n_sites > 1:
        rng_i = state.rngs["interference"]
        on_mean = config.neighbor_activity * config.neighbor_cycle_s
        off_mean = (1.0 - config.neighbor_activity) * config.neighbor_cycle_s
        due = state.interferer_toggle_s <= now
        while due.any():
            for k in np.flatnonzero(due):
                state.interferer_on[k] = not state.interferer_on[k]
                dwell = on_mean if state.interferer_on[k] else off_mean
                state.interferer_toggle_s[k] += rng_i.exponential(dwell)
            due = state.interferer_toggle_s <= now
        load = config.interferer_load * state.interferer_on.astype(float)
    else:
        load = config.interferer_load
    state.sinr_db = channel.sinr_field(
        positions, state.site_xy, state.tx_prb_dbm, state.noise_prb_dbm,
        state.shadow_db, fade_db, load)
    state.cqi = _cqi_from_sinr(state.sinr_db)

    # 3. traffic arrivals for [t0, t0 + dt)
    rng_tr = state.rngs["traffic"]
    for fid, source in enumerate(state.sources):
        if source is None:
            continue
        for pkt in source.arrivals(t0, dt, rng_tr):
            state.queues[fid].push(pkt)

    # 4. deadline expiry, before scheduling
    for queue in state.queues:
        if queue.flow_class != traffic.BEST_EFFORT:
            queue.drop_expired(now)

    # 5. FLS frame-boundary quota refresh
    if config.scheduler == "FLS" and state.clock.at_frame_boundary:
        state.frame_quota_bits.clear()
        state.frame_served_bits.clear()
        state.frame_granule_max.clear()
        for fid, queue in enumerate(state.queues):
            if queue.flow_class != traffic.BEST_EFFORT:
                quota = state.fls.update_frame(
                    fid, queue.queued_bits,
                    queue.delay_budget_s * config.fls_budget_fraction)
                state.frame_quota_bits[fid] = quota

    # 6. PRB allocation
    snapshots = _build_snapshots(state, now)
    decision = sched.allocate_subframe(
        snapshots, config.scheduler, config.n_prb,
        fls_state=state.fls, exp_params=state.exp_params,
        log_params=state.log_params)
    state.last_decision = decision
    state.exp_clamped_total += decision.exp_clamped

    # 7. FIFO delivery of granted bits
    state.last_served_bits = {}
    for fid, bits in decision.granted_bits.items():
        queue = state.queues[fid]
        if queue.flow_class == traffic.BEST_EFFORT:
            queue.credit_backlog(bits)
            served = bits
        else:
            served = queue.serve(bits, now)
            if config.scheduler == "FLS":
                state.frame_served_bits[fid] = (
                    state.frame_served_bits.get(fid, 0) + served)
                granule = radio.transport_block_bits(int(state.cqi[fid // len(config.flows_per_ue)]), 1)
                if granule > state.frame_granule_max.get(fid, 0):
                    state.frame_granule_max[fid] = granule
        state.last_served_bits[fid] = served

    # 8. PF averages
    for fid in range(state.n_flows):
        state.pf_avg[fid] = sched.pf_average_update(
            state.pf_avg[fid], state.last_served_bits.get(fid, 0), config.t_pf)

    state.clock.advance()
    return state


def flow_counters(state: RunState) -> list[metrics.FlowCounters]:
    n_classes = len(state.config.flows_per_ue)
    return [
        metrics.FlowCounters(
            ue_id=fid // n_classes,
            flow_class=q.flow_class,
            arrived_packets=q.arrived_packets,
            arrived_bits=q.arrived_bits,
            delivered_packets=q.delivered_packets,
            delivered_bits=q.delivered_bits,
            dropped_packets=q.dropped_packets,
            dropped_bits=q.dropped_bits,
            queued_packets=len(q.packets),
            queued_bits=q.queued_bits,
            delay_sum_s=q.delay_sum_s,
            delay_budget_s=q.delay_budget_s,
        )
        for fid, q in enumerate(state.queues)
    ]


def run_with_state(config: SimConfig) -> tuple[metrics.KpiReport, RunState]:
    """Run to completion, returning the report and the final state."""
    state = init_state(config)
    n_ttis = config.n_ttis
    if n_ttis == 0:
        return (metrics.empty_report(scheduler=config.scheduler, n_ues=config.n_ues,
                                     seed=config.seed, bandwidth_hz=config.bandwidth_hz),
                state)
    for _ in range(n_ttis):
        advance_tti(state, config)
    report = metrics.finalize_run(
        flow_counters(state), n_ttis * config.tti_s, config.bandwidth_hz,
        scheduler=config.scheduler, n_ues=config.n_ues, seed=config.seed)
    return report, state


def run(config: SimConfig) -> metrics.KpiReport:
    """Simulate one seeded scenario and return its KPI report."""
    report, _ = run_with_state(config)
    return report
