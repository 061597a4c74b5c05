"""Vehicular mobility and downlink propagation up to wideband CQI feedback.

Mobility follows the random direction model: constant speed, straight
segments, heading re-drawn on boundary hits and at exponentially distributed
turn epochs.  Propagation is urban-macro path loss plus log-normal shadowing
and per-TTI Rayleigh block fading; the downlink SINR accounts for first-tier
inter-cell interference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import radio

PATHLOSS_FIXED_DB = 128.1      # urban macro at 1 km carrier distance
PATHLOSS_SLOPE_DB = 37.6       # per decade of km
MIN_LINK_DISTANCE_M = 10.0
NOISE_DENSITY_DBM_HZ = -174.0
DEFAULT_NOISE_FIGURE_DB = 9.0
DEFAULT_SHADOW_SIGMA_DB = 8.0
DEFAULT_TX_POWER_DBM = 43.0
DEFAULT_TURN_EPOCH_MEAN_S = 5.0
HEX_ISD_FACTOR = math.sqrt(3.0)  # inter-site distance over cell radius

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    @property
    def radius(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass
class MobilityState:
    position: Position
    heading: float          # radians
    speed_mps: float
    next_turn_in_s: float   # countdown until the next heading re-draw


@dataclass(frozen=True)
class CellLayout:
    """Serving site at the origin plus first-tier interferers."""

    serving_site: Position
    interferer_sites: tuple[Position, ...]
    tx_power_dbm: float
    inter_site_distance_m: float

    @property
    def sites(self) -> tuple[Position, ...]:
        return (self.serving_site,) + self.interferer_sites

    @classmethod
    def hexagonal(cls, cell_radius_m: float,
                  tx_power_dbm: float = DEFAULT_TX_POWER_DBM,
                  isd_factor: float = HEX_ISD_FACTOR) -> "CellLayout":
        isd = isd_factor * cell_radius_m
        interferers = tuple(
            Position(isd * math.cos(k * math.pi / 3.0), isd * math.sin(k * math.pi / 3.0))
            for k in range(6)
        )
        return cls(Position(0.0, 0.0), interferers, tx_power_dbm, isd)

    @classmethod
    def isolated(cls, tx_power_dbm: float = DEFAULT_TX_POWER_DBM) -> "CellLayout":
        return cls(Position(0.0, 0.0), (), tx_power_dbm, 0.0)


def step_position(state: MobilityState, dt: float, rng: np.random.Generator,
                  cell_radius_m: float = 1000.0,
                  turn_epoch_mean_s: float = DEFAULT_TURN_EPOCH_MEAN_S) -> MobilityState:
    """Advance one random-direction step; the UE never leaves the cell disk."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = state.position.x + state.speed_mps * dt * math.cos(state.heading)
    y = state.position.y + state.speed_mps * dt * math.sin(state.heading)
    heading = state.heading
    next_turn = state.next_turn_in_s - dt
    if next_turn <= 0.0:
        heading = rng.uniform(0.0, _TWO_PI)
        next_turn = rng.exponential(turn_epoch_mean_s)
    r = math.hypot(x, y)
    if r > cell_radius_m:
        # fold the radial overshoot back inside and pick a fresh direction
        folded = min(max(2.0 * cell_radius_m - r, 0.0), cell_radius_m)
        x *= folded / r
        y *= folded / r
        heading = rng.uniform(0.0, _TWO_PI)
    return MobilityState(Position(x, y), heading, state.speed_mps, next_turn)


def link_gain_db(distance_m: float, shadow_db: float = 0.0, fade_db: float = 0.0) -> float:
    """Channel gain of one link: path loss plus shadowing plus fast fading."""
    d = max(distance_m, MIN_LINK_DISTANCE_M)
    path_loss = PATHLOSS_FIXED_DB + PATHLOSS_SLOPE_DB * math.log10(d / 1000.0)
    return -path_loss + shadow_db + fade_db


def tx_dbm_per_prb(tx_power_dbm: float, prb_count: int) -> float:
    return tx_power_dbm - 10.0 * math.log10(prb_count)


def noise_dbm_per_prb(noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB) -> float:
    return (NOISE_DENSITY_DBM_HZ + noise_figure_db
            + 10.0 * math.log10(radio.PRB_BANDWIDTH_HZ))


def compute_sinr(position: Position, layout: CellLayout, prb_count: int,
                 noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB,
                 shadow_db: Sequence[float] | None = None,
                 fade_db: Sequence[float] | None = None,
                 interferer_load: float | Sequence[float] = 1.0) -> float:
    """Per-PRB downlink SINR in dB at `position`.

    `shadow_db` and `fade_db` hold one entry per site, serving site first;
    omitted terms default to zero.  `interferer_load` scales interferer
    transmit power (1.0 = fully loaded neighbours), either uniformly or
    per interferer.
    """
    sites = layout.sites
    n = len(sites)
    shadow = shadow_db if shadow_db is not None else (0.0,) * n
    fade = fade_db if fade_db is not None else (0.0,) * n
    loads = np.broadcast_to(np.asarray(interferer_load, dtype=float), (n - 1,))
    tx_prb = tx_dbm_per_prb(layout.tx_power_dbm, prb_count)

    signal_mw = 0.0
    interference_mw = 0.0
    for i, site in enumerate(sites):
        gain = link_gain_db(position.distance_to(site), shadow[i], fade[i])
        if i == 0:
            signal_mw = 10.0 ** ((tx_prb + gain) / 10.0)
        else:
            interference_mw += loads[i - 1] * 10.0 ** ((tx_prb + gain) / 10.0)
    noise_mw = 10.0 ** (noise_dbm_per_prb(noise_figure_db) / 10.0)
    return 10.0 * math.log10(signal_mw / (noise_mw + interference_mw))


def sinr_field(positions: np.ndarray, site_xy: np.ndarray, tx_prb_dbm: float,
               noise_prb_dbm: float, shadow_db: np.ndarray, fade_db: np.ndarray,
               interferer_load: float | np.ndarray = 1.0) -> np.ndarray:
    """Vectorized `compute_sinr` for N UEs against M sites (serving first).

    positions: (N, 2); site_xy: (M, 2); shadow_db, fade_db: (N, M).
    `interferer_load` may be a scalar or a per-interferer vector (M-1,).
    Returns per-PRB SINR in dB, shape (N,).
    """
    delta = positions[:, None, :] - site_xy[None, :, :]
    dist = np.maximum(np.hypot(delta[..., 0], delta[..., 1]), MIN_LINK_DISTANCE_M)
    gain = (-(PATHLOSS_FIXED_DB + PATHLOSS_SLOPE_DB * np.log10(dist / 1000.0))
            + shadow_db + fade_db)
    prx_mw = 10.0 ** ((tx_prb_dbm + gain) / 10.0)
    signal = prx_mw[:, 0]
    interference = (prx_mw[:, 1:] * np.asarray(interferer_load)).sum(axis=1)
    noise = 10.0 ** (noise_prb_dbm / 10.0)
    return 10.0 * np.log10(signal / (noise + interference))


def rayleigh_fade_db(rng: np.random.Generator, shape) -> np.ndarray:
    """Per-TTI block-fading power gains for a Rayleigh channel, in dB.

    Unit-mean exponential power gain; independent across links and TTIs.
    """
    power = rng.standard_exponential(shape)
    return 10.0 * np.log10(np.maximum(power, 1e-30))


def wideband_cqi(sinr_db: float) -> int:
    """Wideband CQI feedback with zero reporting delay."""
    return radio.sinr_to_cqi(sinr_db)
