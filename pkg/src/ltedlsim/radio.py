"""Static LTE downlink abstractions: PRB grid, CQI table, link adaptation.

Everything here is a pure function of its arguments, so it is safe to call
from any number of concurrent simulation runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

SUBCARRIER_SPACING_HZ = 15_000
PRB_BANDWIDTH_HZ = 180_000  # 12 subcarriers x 15 kHz
TTI_S = 1e-3
SLOT_S = 0.5e-3
FRAME_TTIS = 10

# Usable resource elements per PRB pair per TTI, out of 168 gross.  The
# missing 48 model a flat control + reference-signal overhead, which keeps
# transport block sizes deterministic.
USABLE_RE_PER_PRB = 120

# Downlink PRB grid per channel bandwidth (36.101 Table 5.6-1).
PRB_PER_BANDWIDTH_HZ = {
    1_400_000: 6,
    3_000_000: 15,
    5_000_000: 25,
    10_000_000: 50,
    15_000_000: 75,
    20_000_000: 100,
}

# CQI spectral efficiency in bits per resource element (36.213 Table 7.2.3-1),
# scaled by 1e4 so transport block sizes can be computed in exact integer
# arithmetic.
_EFF_E4 = (
    1523,   # CQI 1   QPSK  78/1024
    2344,   # CQI 2   QPSK  120/1024
    3770,   # CQI 3   QPSK  193/1024
    6016,   # CQI 4   QPSK  308/1024
    8770,   # CQI 5   QPSK  449/1024
    11758,  # CQI 6   QPSK  602/1024
    14766,  # CQI 7   16QAM 378/1024
    19141,  # CQI 8   16QAM 490/1024
    24063,  # CQI 9   16QAM 616/1024
    27305,  # CQI 10  64QAM 466/1024
    33223,  # CQI 11  64QAM 567/1024
    39023,  # CQI 12  64QAM 666/1024
    45234,  # CQI 13  64QAM 772/1024
    51152,  # CQI 14  64QAM 873/1024
    55547,  # CQI 15  64QAM 948/1024
)

MIN_CQI = 1
MAX_CQI = 15

# Attenuation applied to Shannon capacity before quantizing onto the CQI
# table; a common system-level stand-in for full BLER-curve link adaptation.
CAPACITY_FRACTION = 0.6


@dataclass(frozen=True)
class CqiEntry:
    cqi: int
    efficiency_bits_per_re: float


CQI_TABLE: tuple[CqiEntry, ...] = tuple(
    CqiEntry(i + 1, e / 1e4) for i, e in enumerate(_EFF_E4)
)

EFFICIENCIES: tuple[float, ...] = tuple(e.efficiency_bits_per_re for e in CQI_TABLE)


@dataclass(frozen=True)
class BandwidthProfile:
    """PRB grid dimensioning for one of the standard channel bandwidths."""

    bandwidth_hz: float
    prb_count: int
    subcarrier_spacing_hz: int = SUBCARRIER_SPACING_HZ
    prb_bandwidth_hz: int = PRB_BANDWIDTH_HZ

    def __post_init__(self):
        if self.prb_count * self.prb_bandwidth_hz > self.bandwidth_hz:
            raise ConfigError(
                f"{self.prb_count} PRBs of {self.prb_bandwidth_hz} Hz do not fit "
                f"in {self.bandwidth_hz} Hz"
            )

    @classmethod
    def for_bandwidth(cls, bandwidth_hz: float) -> "BandwidthProfile":
        return cls(bandwidth_hz=float(bandwidth_hz), prb_count=prb_count(bandwidth_hz))


@dataclass
class TtiClock:
    """1 ms scheduling clock; a radio frame is 10 TTIs."""

    tti_index: int = 0
    tti_duration_s: float = TTI_S
    slot_duration_s: float = SLOT_S
    frame_length_ttis: int = FRAME_TTIS

    def __post_init__(self):
        if abs(self.tti_duration_s - 2.0 * self.slot_duration_s) > 1e-12:
            raise ConfigError("TTI duration must equal two slot durations")

    @property
    def time_s(self) -> float:
        """Start time of the current TTI."""
        return self.tti_index * self.tti_duration_s

    @property
    def at_frame_boundary(self) -> bool:
        return self.tti_index % self.frame_length_ttis == 0

    def advance(self):
        self.tti_index += 1


def prb_count(bandwidth_hz: float) -> int:
    """Number of PRBs in the downlink grid for a standard channel bandwidth."""
    key = int(round(bandwidth_hz))
    try:
        return PRB_PER_BANDWIDTH_HZ[key]
    except KeyError:
        supported = ", ".join(f"{b / 1e6:g}" for b in sorted(PRB_PER_BANDWIDTH_HZ))
        raise ConfigError(
            f"unsupported bandwidth {bandwidth_hz / 1e6:g} MHz "
            f"(supported: {supported} MHz)"
        ) from None


def sinr_to_cqi(sinr_db: float) -> int:
    """Quantize an SINR onto the CQI table.

    Returns the largest CQI whose tabulated efficiency does not exceed
    0.6 x log2(1 + SINR), clamped to [1, 15].
    """
    attainable = CAPACITY_FRACTION * math.log2(1.0 + 10.0 ** (sinr_db / 10.0))
    cqi = MIN_CQI
    for entry in CQI_TABLE:
        if entry.efficiency_bits_per_re <= attainable:
            cqi = entry.cqi
        else:
            break
    return cqi


def transport_block_bits(cqi: int, n_prb: int) -> int:
    """Bits deliverable in one TTI at `cqi` over `n_prb` PRBs."""
    if not MIN_CQI <= cqi <= MAX_CQI:
        raise ValueError(f"CQI {cqi} outside [{MIN_CQI}, {MAX_CQI}]")
    if n_prb < 0:
        raise ValueError(f"negative PRB count {n_prb}")
    return _EFF_E4[cqi - 1] * USABLE_RE_PER_PRB * n_prb // 10_000


def prbs_needed(cqi: int, bits: float) -> int:
    """Smallest PRB count whose transport block covers `bits`."""
    if bits <= 0:
        return 0
    per_prb = EFFICIENCIES[cqi - 1] * USABLE_RE_PER_PRB
    k = max(1, math.ceil(bits / per_prb) - 1)
    while transport_block_bits(cqi, k) < bits:
        k += 1
    return k
