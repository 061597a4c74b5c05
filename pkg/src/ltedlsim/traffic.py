"""Traffic sources and per-flow FIFO queues with deadline bookkeeping.

Three flow classes: trace-driven H.264 video, ON/OFF VoIP, and a full-buffer
best-effort flow.  All payload accounting is in bits; a packet counts as
delivered only when its last bit is, and partially transmitted residue is
carried across TTIs.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

VIDEO = "video"
VOIP = "voip"
BEST_EFFORT = "best_effort"
FLOW_CLASSES = (VIDEO, VOIP, BEST_EFFORT)
REAL_TIME_CLASSES = (VIDEO, VOIP)

MAX_PACKET_BYTES = 1500  # segmentation cap, no header overhead modelled

DEFAULT_VIDEO_KBPS = 242.0
DEFAULT_VIDEO_FPS = 30
DEFAULT_VIDEO_FRAMES = 300
DEFAULT_VOIP_ON_MEAN_S = 3.0
DEFAULT_VOIP_OFF_MEAN_S = 3.0
DEFAULT_VOIP_PACKET_BYTES = 32
DEFAULT_VOIP_INTERVAL_S = 0.02

# GoP layout for the synthetic trace generator, with relative frame weights.
GOP_PATTERN = "IBBPBBPBB"
FRAME_WEIGHTS = {"I": 5, "P": 2, "B": 1}


class Packet:
    __slots__ = ("id", "size_bits", "arrival_time_s", "flow_class", "remaining_bits")

    def __init__(self, pid: int, size_bits: int, arrival_time_s: float, flow_class: str):
        if size_bits <= 0:
            raise ValueError("packet size must be positive")
        self.id = pid
        self.size_bits = size_bits
        self.arrival_time_s = arrival_time_s
        self.flow_class = flow_class
        self.remaining_bits = size_bits

    def __repr__(self):
        return (f"Packet(id={self.id}, size={self.size_bits}b, "
                f"t={self.arrival_time_s:.4f}, {self.flow_class})")


class FlowQueue:
    """FIFO packet queue with arrival / delivery / drop counters.

    Maintains the conservation identity
    arrived = delivered + dropped + queued, in packets and in bits.
    """

    def __init__(self, flow_class: str, delay_budget_s: float):
        self.flow_class = flow_class
        self.delay_budget_s = delay_budget_s
        self.packets: deque[Packet] = deque()
        self.queued_bits = 0
        self.arrived_packets = 0
        self.arrived_bits = 0
        self.delivered_packets = 0
        self.delivered_bits = 0
        self.dropped_packets = 0
        self.dropped_bits = 0
        self.delay_sum_s = 0.0
        self.max_delivered_delay_s = 0.0
        self.min_delivered_delay_s = math.inf

    def push(self, packet: Packet):
        self.packets.append(packet)
        self.arrived_packets += 1
        self.arrived_bits += packet.size_bits
        self.queued_bits += packet.size_bits

    def hol_delay_s(self, now_s: float) -> float:
        if not self.packets:
            return 0.0
        return now_s - self.packets[0].arrival_time_s

    def drop_expired(self, now_s: float) -> int:
        """Drop every packet older than the delay budget; returns the count."""
        if math.isinf(self.delay_budget_s):
            return 0
        dropped = 0
        while self.packets and now_s - self.packets[0].arrival_time_s > self.delay_budget_s:
            pkt = self.packets.popleft()
            self.queued_bits -= pkt.remaining_bits
            self.dropped_packets += 1
            self.dropped_bits += pkt.remaining_bits
            dropped += 1
        return dropped

    def serve(self, budget_bits: int, now_s: float) -> int:
        """Transmit up to `budget_bits` FIFO; returns bits actually sent."""
        sent = 0
        while budget_bits > 0 and self.packets:
            head = self.packets[0]
            take = min(head.remaining_bits, budget_bits)
            head.remaining_bits -= take
            budget_bits -= take
            sent += take
            if head.remaining_bits == 0:
                self.packets.popleft()
                self.delivered_packets += 1
                delay = now_s - head.arrival_time_s
                self.delay_sum_s += delay
                if delay > self.max_delivered_delay_s:
                    self.max_delivered_delay_s = delay
                if delay < self.min_delivered_delay_s:
                    self.min_delivered_delay_s = delay
        self.queued_bits -= sent
        self.delivered_bits += sent
        return sent

    def credit_backlog(self, bits: int):
        """Account service on a full-buffer flow that has no explicit packets."""
        self.arrived_bits += bits
        self.delivered_bits += bits


@dataclass(frozen=True)
class TraceFrame:
    index: int
    frame_type: str
    size_bytes: int


@dataclass(frozen=True)
class VideoTrace:
    fps: int
    frames: tuple[TraceFrame, ...]

    @property
    def total_bytes(self) -> int:
        return sum(f.size_bytes for f in self.frames)

    @property
    def mean_rate_bps(self) -> float:
        return self.total_bytes * 8.0 * self.fps / len(self.frames)


def load_trace(text: str) -> VideoTrace:
    """Parse a video trace file.

    Format: optional `#` comment lines, a first `fps=<int>` line, then one
    frame per line as `<index> <I|P|B> <size_bytes>`.
    """
    fps = None
    frames = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if fps is None:
            if not line.startswith("fps="):
                raise ConfigError(f"expected 'fps=<int>' header at line {lineno}")
            try:
                fps = int(line[4:])
            except ValueError:
                raise ConfigError(f"malformed fps value at line {lineno}") from None
            if fps <= 0:
                raise ConfigError(f"fps must be positive, got {fps} at line {lineno}")
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ConfigError(f"malformed trace line {lineno}: {raw.strip()!r}")
        idx_s, ftype, size_s = parts
        if ftype not in FRAME_WEIGHTS:
            raise ConfigError(f"unknown frame type at line {lineno}")
        try:
            idx = int(idx_s)
            size = int(size_s)
        except ValueError:
            raise ConfigError(f"malformed trace line {lineno}: {raw.strip()!r}") from None
        if size <= 0:
            raise ConfigError(f"non-positive frame size at line {lineno}")
        frames.append(TraceFrame(idx, ftype, size))
    if fps is None:
        raise ConfigError("trace has no fps header")
    if not frames:
        raise ConfigError("trace has no frames")
    return VideoTrace(fps, tuple(frames))


def synth_trace(target_kbps: float, fps: int, n_frames: int, rng=None) -> VideoTrace:
    """Synthesize an IBBPBBPBB trace whose mean rate hits `target_kbps`.

    Frame sizes follow the 5:2:1 I:P:B weight ratio; integer rounding is
    absorbed into the final frame so the total is exact.  Sizes are fully
    determined by the arguments (`rng` is accepted for interface uniformity).
    """
    if target_kbps <= 0 or fps <= 0 or n_frames <= 0:
        raise ConfigError("synth_trace arguments must be positive")
    total_bytes = round(target_kbps * 1000.0 * n_frames / fps / 8.0)
    types = [GOP_PATTERN[i % len(GOP_PATTERN)] for i in range(n_frames)]
    weights = [FRAME_WEIGHTS[t] for t in types]
    weight_sum = sum(weights)
    if total_bytes < weight_sum:
        raise ConfigError(
            f"target rate too low: {total_bytes} bytes cannot cover {n_frames} frames"
        )
    sizes = [total_bytes * w // weight_sum for w in weights]
    sizes[-1] = total_bytes - sum(sizes[:-1])
    frames = tuple(
        TraceFrame(i, types[i], sizes[i]) for i in range(n_frames)
    )
    return VideoTrace(fps, frames)


def segment_frame(size_bytes: int) -> list[int]:
    """Split a frame into packet payloads of at most MAX_PACKET_BYTES."""
    full, rest = divmod(size_bytes, MAX_PACKET_BYTES)
    sizes = [MAX_PACKET_BYTES] * full
    if rest:
        sizes.append(rest)
    return sizes


class VideoSource:
    """Replays a trace cyclically, one frame every 1/fps seconds.

    `start_frame` and `phase_s` stagger sources so the I-frames of different
    users do not land on the same TTI.
    """

    def __init__(self, trace: VideoTrace, start_frame: int = 0, phase_s: float = 0.0):
        self.trace = trace
        self.start_frame = start_frame
        self.phase_s = phase_s
        self._next = 0   # frames emitted so far
        self._seq = 0    # packet ids

    def arrivals(self, t_s: float, dt_s: float, rng=None) -> list[Packet]:
        out = []
        t_end = t_s + dt_s
        frames = self.trace.frames
        fps = self.trace.fps
        while True:
            t_frame = self.phase_s + self._next / fps
            if t_frame >= t_end:
                break
            frame = frames[(self.start_frame + self._next) % len(frames)]
            for size in segment_frame(frame.size_bytes):
                out.append(Packet(self._seq, size * 8, t_frame, VIDEO))
                self._seq += 1
            self._next += 1
        return out


class VoipSource:
    """Exponential ON/OFF talk-spurt model, fixed-size packets while ON."""

    def __init__(self, rng: np.random.Generator,
                 on_mean_s: float = DEFAULT_VOIP_ON_MEAN_S,
                 off_mean_s: float = DEFAULT_VOIP_OFF_MEAN_S,
                 packet_bytes: int = DEFAULT_VOIP_PACKET_BYTES,
                 interval_s: float = DEFAULT_VOIP_INTERVAL_S,
                 start_time_s: float = 0.0,
                 initial_on: bool | None = None):
        self.on_mean_s = on_mean_s
        self.off_mean_s = off_mean_s
        self.packet_bits = packet_bytes * 8
        self.interval_s = interval_s
        self._seq = 0
        self.on = bool(rng.random() < 0.5) if initial_on is None else initial_on
        mean = on_mean_s if self.on else off_mean_s
        self._state_end = start_time_s + rng.exponential(mean)
        self._next_pkt = start_time_s if self.on else math.inf

    def arrivals(self, t_s: float, dt_s: float, rng: np.random.Generator) -> list[Packet]:
        out = []
        t_end = t_s + dt_s
        while True:
            if self.on:
                if self._next_pkt <= self._state_end and self._next_pkt < t_end:
                    out.append(Packet(self._seq, self.packet_bits, self._next_pkt, VOIP))
                    self._seq += 1
                    self._next_pkt += self.interval_s
                elif self._state_end < t_end:
                    self.on = False
                    self._state_end += rng.exponential(self.off_mean_s)
                    self._next_pkt = math.inf
                else:
                    break
            else:
                if self._state_end < t_end:
                    self.on = True
                    self._next_pkt = self._state_end
                    self._state_end += rng.exponential(self.on_mean_s)
                else:
                    break
        return out
