"""PHY/MAC constants, rate classes and channel-event durations.

All times are in seconds, rates in bits/second, sizes in bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

US = 1e-6


@dataclass(frozen=True)
class PhyMacParams:
    """802.11b DCF constants (long PLCP preamble, 2 Mb/s control frames)."""

    slot_time: float = 20 * US
    sifs: float = 10 * US
    difs: float = 50 * US
    plcp_overhead: float = 192 * US
    cw_min: int = 31
    cw_max: int = 1023
    backoff_stages: int = 5
    control_rate: float = 2e6
    mac_header_bytes: int = 34
    rts_bytes: int = 20
    cts_bytes: int = 14
    mac_ack_bytes: int = 14
    tcp_ip_header_bytes: int = 40
    tcp_payload_bytes: int = 1460
    tcp_ack_segment_bytes: int = 40

    def __post_init__(self):
        for name in ("slot_time", "sifs", "difs", "plcp_overhead", "control_rate"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidParameterError(f"{name} must be positive, got {v!r}")
        if not self.difs > self.sifs:
            raise InvalidParameterError("difs must exceed sifs")
        if not 1 <= self.cw_min <= self.cw_max:
            raise InvalidParameterError("need 1 <= cw_min <= cw_max")
        if self.backoff_stages < 0:
            raise InvalidParameterError("backoff_stages must be >= 0")
        for name in ("mac_header_bytes", "rts_bytes", "cts_bytes", "mac_ack_bytes",
                     "tcp_ip_header_bytes", "tcp_ack_segment_bytes"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.tcp_payload_bytes < 0:
            raise InvalidParameterError("tcp_payload_bytes must be >= 0")

    @property
    def data_frame_bytes(self) -> int:
        return self.tcp_payload_bytes + self.tcp_ip_header_bytes + self.mac_header_bytes

    @property
    def ack_frame_bytes(self) -> int:
        return self.tcp_ack_segment_bytes + self.mac_header_bytes


@dataclass(frozen=True)
class RateClass:
    rate: float
    count: int
    hol_probability: float


@dataclass(frozen=True)
class RateClassConfig:
    """Rate classes sorted fastest first.

    Use :meth:`from_counts` to build one; it sorts and fills the default
    head-of-line probabilities ``m_i / M``.
    """

    classes: tuple[RateClass, ...]

    def __post_init__(self):
        if not self.classes:
            raise InvalidParameterError("at least one rate class is required")
        rates = [c.rate for c in self.classes]
        if any(not (r > 0 and math.isfinite(r)) for r in rates):
            raise InvalidParameterError("rates must be positive and finite")
        if any(a < b for a, b in zip(rates, rates[1:])):
            raise InvalidParameterError("classes must be ordered by nonincreasing rate")
        if any(c.count < 0 for c in self.classes) or self.total == 0:
            raise InvalidParameterError("counts must be >= 0 with at least one STA")
        probs = [c.hol_probability for c in self.classes]
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise InvalidParameterError(f"head-of-line probabilities must sum to 1, got {sum(probs)!r}")

    @classmethod
    def from_counts(cls, rates, counts, hol_probabilities=None) -> "RateClassConfig":
        rates = [float(r) for r in rates]
        counts = [int(m) for m in counts]
        if len(rates) != len(counts):
            raise InvalidParameterError("rates and counts differ in length")
        if hol_probabilities is None:
            total = sum(counts)
            if total <= 0:
                raise InvalidParameterError("at least one STA is required")
            hol_probabilities = [m / total for m in counts]
        elif len(hol_probabilities) != len(rates):
            raise InvalidParameterError("hol_probabilities length mismatch")
        order = sorted(range(len(rates)), key=lambda i: -rates[i])
        return cls(tuple(RateClass(rates[i], counts[i], float(hol_probabilities[i])) for i in order))

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(c.rate for c in self.classes)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(c.count for c in self.classes)

    @property
    def probs(self) -> tuple[float, ...]:
        return tuple(c.hol_probability for c in self.classes)

    @property
    def total(self) -> int:
        return sum(c.count for c in self.classes)


@dataclass(frozen=True)
class EventDurations:
    """Channel-holding times per event kind, indexed by rate class.

    Collision entries are indexed by the slowest colliding STA class.
    """

    t_success_ap: np.ndarray
    t_success_sta: np.ndarray
    t_collision_ap: np.ndarray
    t_collision_sta: np.ndarray
    slot: float

    def scaled(self, c: float) -> "EventDurations":
        return EventDurations(self.t_success_ap * c, self.t_success_sta * c,
                              self.t_collision_ap * c, self.t_collision_sta * c, self.slot * c)


def frame_duration(nbytes: int, rate: float, params: PhyMacParams) -> float:
    """Airtime of a frame: PLCP preamble/header plus the MPDU bits at ``rate``."""
    if nbytes <= 0 or not rate > 0:
        raise InvalidParameterError(f"frame_duration needs bytes > 0 and rate > 0 (got {nbytes}, {rate})")
    return params.plcp_overhead + 8.0 * nbytes / rate


def event_durations(cfg: RateClassConfig, params: PhyMacParams) -> EventDurations:
    p = params
    t_rts = frame_duration(p.rts_bytes, p.control_rate, p)
    t_cts = frame_duration(p.cts_bytes, p.control_rate, p)
    t_mack = frame_duration(p.mac_ack_bytes, p.control_rate, p)
    sap, ssta, cap, csta = [], [], [], []
    for r in cfg.rates:
        data = frame_duration(p.data_frame_bytes, r, p)
        tack = frame_duration(p.ack_frame_bytes, r, p)
        sap.append(t_rts + p.sifs + t_cts + p.sifs + data + p.sifs + t_mack + p.difs)
        ssta.append(tack + p.sifs + t_mack + p.difs)
        csta.append(tack + p.difs)
        cap.append(max(t_rts, tack) + p.difs)
    return EventDurations(np.array(sap), np.array(ssta), np.array(cap), np.array(csta), p.slot_time)
