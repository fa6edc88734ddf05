"""Event-driven slotted CSMA/CA simulator of TCP downloads through an AP.

The AP sends RTS/CTS-protected TCP data frames; each STA answers every data
packet with a TCP-ACK sent by basic access. An ACK that leaves the WLAN
re-enters the AP queue as a fresh data packet exactly ``t_rtpd`` later, so
every connection keeps ``w_conn`` packets in the loop at all times.
"""
from __future__ import annotations

import math
import os
import random
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .errors import InvalidParameterError
from .params import PhyMacParams, RateClassConfig, event_durations

RETRY_LIMIT = 7


@dataclass(frozen=True)
class SimConfig:
    classes: RateClassConfig
    params: PhyMacParams = PhyMacParams()
    w_conn: int = 60
    t_rtpd: float = 0.01
    duration: float = 200.0
    warmup: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if not self.duration > self.warmup >= 0:
            raise InvalidParameterError("need duration > warmup >= 0")
        if self.w_conn < 1:
            raise InvalidParameterError("w_conn must be >= 1")
        if not self.t_rtpd >= 0:
            raise InvalidParameterError("t_rtpd must be >= 0")

    @property
    def total_packets(self) -> int:
        return self.w_conn * self.classes.total


@dataclass
class SimStats:
    """Measurements of one run over the window ``[warmup, duration]``."""

    seed: int
    ap_queue_mean: float
    sta_queue_mean: np.ndarray  # per STA, STAs grouped by class fastest first
    sta_class: np.ndarray
    inflight_mean: float
    ap_throughput: float
    sta_throughput: np.ndarray  # ACKs/s per rate class
    collision_fraction: float
    delivered: int
    acked: np.ndarray
    window: float
    successes: int
    collisions: int
    data_received: np.ndarray = field(repr=False)
    acks_sent: np.ndarray = field(repr=False)

    def sta_queue_by_class(self) -> np.ndarray:
        k = int(self.sta_class.max()) + 1
        return np.array([self.sta_queue_mean[self.sta_class == j].mean() if np.any(self.sta_class == j)
                         else np.nan for j in range(k)])


def run(cfg: SimConfig, trace=None) -> SimStats:
    """Simulate one seed. ``trace(t, ap, sta_total, inflight)`` is called after every event."""
    p = cfg.params
    rcfg = cfg.classes
    durs = event_durations(rcfg, p)
    sap, ssta = durs.t_success_ap.tolist(), durs.t_success_sta.tolist()
    cap, csta = durs.t_collision_ap.tolist(), durs.t_collision_sta.tolist()
    slot = p.slot_time
    cw_of = [min((p.cw_min + 1) * 2 ** s - 1, p.cw_max) for s in range(p.backoff_stages + 1)]
    max_stage = p.backoff_stages
    cw0 = cw_of[0]

    cls = [-1]  # node 0 is the AP
    for j, c in enumerate(rcfg.classes):
        cls += [j] * c.count
    n_nodes = len(cls)
    M = n_nodes - 1
    W = cfg.total_packets
    rtpd = cfg.t_rtpd
    warm, end = cfg.warmup, cfg.duration
    rng = random.Random(cfg.seed)
    rand = rng.random

    ap_q: deque = deque()
    sta_q = [0] * n_nodes
    counter = [-1] * n_nodes
    stage = [0] * n_nodes
    retries = [0] * n_nodes
    pipe: deque = deque()
    # interleave connections so the initial pipe is evenly mixed
    for k in range(W):
        pipe.append(((k + 0.5) / W * rtpd if rtpd > 0 else 0.0, 1 + k % M))

    data_rx = [0] * n_nodes
    ack_tx = [0] * n_nodes
    delivered = 0
    acked = [0] * len(rcfg.classes)
    successes = collisions = 0

    # time integrals over [warm, end]
    area_ap = area_pipe = 0.0
    area_sta = [0.0] * n_nodes
    last_ap = last_pipe = 0.0
    last_sta = [0.0] * n_nodes
    sta_total = 0

    def seg(a, b):
        lo = a if a > warm else warm
        hi = b if b < end else end
        return hi - lo if hi > lo else 0.0

    t = 0.0
    while t < end:
        while pipe and pipe[0][0] <= t:
            ta, s = pipe.popleft()
            area_pipe += (len(pipe) + 1) * seg(last_pipe, ta)
            last_pipe = ta
            area_ap += len(ap_q) * seg(last_ap, ta)
            last_ap = ta
            ap_q.append(s)
            if counter[0] < 0:
                counter[0] = int(rand() * (cw0 + 1))
                stage[0] = retries[0] = 0

        kmin = -1
        for i in range(n_nodes):
            c = counter[i]
            if c >= 0 and (kmin < 0 or c < kmin):
                kmin = c
        if kmin < 0:
            if not pipe:
                raise RuntimeError("all packets vanished")
            t = pipe[0][0]
            continue
        t_tx = t + kmin * slot
        if counter[0] < 0 and pipe and pipe[0][0] < t_tx:
            # AP wakes mid-countdown; it joins at the next slot boundary
            j = math.ceil((pipe[0][0] - t) / slot)
            for i in range(n_nodes):
                if counter[i] >= 0:
                    counter[i] -= j
            t += j * slot
            continue

        tx = []
        for i in range(n_nodes):
            if counter[i] >= 0:
                counter[i] -= kmin
                if counter[i] == 0:
                    tx.append(i)

        if len(tx) == 1:
            i = tx[0]
            if i == 0:
                dest = ap_q[0]
                t_end = t_tx + sap[cls[dest]]
            else:
                t_end = t_tx + ssta[cls[i]]
        else:
            slowest = max(cls[i] for i in tx)
            if tx[0] == 0:
                t_end = t_tx + cap[slowest]
            else:
                t_end = t_tx + csta[slowest]

        # arrivals during the busy period
        while pipe and pipe[0][0] <= t_end:
            ta, s = pipe.popleft()
            area_pipe += (len(pipe) + 1) * seg(last_pipe, ta)
            last_pipe = ta
            area_ap += len(ap_q) * seg(last_ap, ta)
            last_ap = ta
            ap_q.append(s)
            if counter[0] < 0:
                counter[0] = int(rand() * (cw0 + 1))
                stage[0] = retries[0] = 0

        counted = warm < t_end <= end
        if len(tx) == 1:
            successes += 1
            i = tx[0]
            if i == 0:
                area_ap += len(ap_q) * seg(last_ap, t_end)
                last_ap = t_end
                dest = ap_q.popleft()
                area_sta[dest] += sta_q[dest] * seg(last_sta[dest], t_end)
                last_sta[dest] = t_end
                sta_q[dest] += 1
                sta_total += 1
                data_rx[dest] += 1
                if counted:
                    delivered += 1
                if counter[dest] < 0:
                    counter[dest] = int(rand() * (cw0 + 1))
                    stage[dest] = retries[dest] = 0
                more = len(ap_q) > 0
            else:
                area_sta[i] += sta_q[i] * seg(last_sta[i], t_end)
                last_sta[i] = t_end
                sta_q[i] -= 1
                sta_total -= 1
                ack_tx[i] += 1
                if ack_tx[i] > data_rx[i]:
                    raise RuntimeError(f"STA {i} acknowledged more packets than it received")
                area_pipe += len(pipe) * seg(last_pipe, t_end)
                last_pipe = t_end
                pipe.append((t_end + rtpd, i))
                if counted:
                    acked[cls[i]] += 1
                more = sta_q[i] > 0
            stage[i] = retries[i] = 0
            counter[i] = int(rand() * (cw0 + 1)) if more else -1
        else:
            collisions += 1
            for i in tx:
                retries[i] += 1
                if retries[i] >= RETRY_LIMIT:
                    retries[i] = 0
                    stage[i] = 0
                elif stage[i] < max_stage:
                    stage[i] += 1
                counter[i] = int(rand() * (cw_of[stage[i]] + 1))

        if len(ap_q) + sta_total + len(pipe) != W:
            raise RuntimeError(f"packet conservation violated at t={t_end}")
        if trace is not None:
            trace(t_end, len(ap_q), sta_total, len(pipe))
        t = t_end

    area_ap += len(ap_q) * seg(last_ap, end)
    area_pipe += len(pipe) * seg(last_pipe, end)
    for s in range(1, n_nodes):
        area_sta[s] += sta_q[s] * seg(last_sta[s], end)
    window = end - warm
    events = successes + collisions
    return SimStats(
        seed=cfg.seed,
        ap_queue_mean=area_ap / window,
        sta_queue_mean=np.array(area_sta[1:]) / window,
        sta_class=np.array(cls[1:]),
        inflight_mean=area_pipe / window,
        ap_throughput=delivered / window,
        sta_throughput=np.array(acked, dtype=float) / window,
        collision_fraction=collisions / events if events else 0.0,
        delivered=delivered,
        acked=np.array(acked),
        window=window,
        successes=successes,
        collisions=collisions,
        data_received=np.array(data_rx[1:]),
        acks_sent=np.array(ack_tx[1:]),
    )


@dataclass(frozen=True)
class Summary:
    mean: float
    min: float
    max: float
    ci: float  # 95% Student-t half-width; NaN for a single run


def summarize(values) -> Summary:
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n > 1:
        half = float(stats.t.ppf(0.975, n - 1) * x.std(ddof=1) / math.sqrt(n))
    else:
        half = math.nan
    return Summary(float(x.mean()), float(x.min()), float(x.max()), half)


@dataclass
class BatchStats:
    runs: list[SimStats]

    @property
    def seeds(self) -> list[int]:
        return [r.seed for r in self.runs]

    def metric(self, name: str) -> Summary:
        return summarize([getattr(r, name) for r in self.runs])

    def per_class(self, name: str) -> list[Summary]:
        vals = np.array([getattr(r, name)() if callable(getattr(r, name)) else getattr(r, name)
                         for r in self.runs])
        return [summarize(vals[:, j]) for j in range(vals.shape[1])]


def default_workers() -> int:
    env = os.environ.get("WLANTCP_WORKERS")
    return max(1, int(env)) if env else 1


def run_batch(cfg: SimConfig, seeds, workers: int | None = None) -> BatchStats:
    seeds = sorted(int(s) for s in seeds)
    if not seeds:
        raise InvalidParameterError("at least one seed is required")
    cfgs = [replace(cfg, seed=s) for s in seeds]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            runs = list(ex.map(run, cfgs))
    else:
        runs = [run(c) for c in cfgs]
    return BatchStats(runs)
