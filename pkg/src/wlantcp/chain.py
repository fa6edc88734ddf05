"""Embedded Markov chain of backlogged STAs and renewal-reward throughputs.

The chain state ``n = (n_1, ..., n_k)`` counts STAs of each rate class that
hold a TCP-ACK, observed at the ends of successful transmissions. The AP is
always backlogged, so ``N + 1`` nodes contend in state ``n``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaln

from .attempt import AttemptCurve, attempt_curve
from .errors import NumericalFailureError
from .params import EventDurations, PhyMacParams, RateClassConfig, event_durations

DEFAULT_N_MAX = 30
TWO_E = 2.0 * math.e


def lattice(k: int, n_max: int) -> np.ndarray:
    """All k-tuples of nonnegative integers with sum <= n_max, lexicographic."""
    rows = [s for s in itertools.product(range(n_max + 1), repeat=k) if sum(s) <= n_max]
    return np.array(rows, dtype=np.int64).reshape(-1, k)


def tail_mass(n_max: int) -> float:
    """Stationary mass outside ``N <= n_max``: sum_{N>n_max} (N+1) / (2e N!)."""
    # sum_{N>n} 1/N! = e P(n+1, 1) and sum_{N>n} N/N! = e P(n, 1)
    if n_max < 0:
        return 1.0
    return 0.5 * (float(gammainc(n_max, 1.0)) if n_max > 0 else 1.0) + 0.5 * float(gammainc(n_max + 1, 1.0))


@dataclass(frozen=True)
class StationaryDistribution:
    states: np.ndarray  # (S, k) int
    mass: np.ndarray  # (S,)
    n_max: int
    tail_bound: float

    def __getitem__(self, state) -> float:
        return self.as_dict()[tuple(int(x) for x in state)]

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(x) for x in s): float(m) for s, m in zip(self.states, self.mass)}

    @property
    def totals(self) -> np.ndarray:
        return self.states.sum(axis=1)


def stationary_pi(cfg: RateClassConfig, n_max: int = DEFAULT_N_MAX) -> StationaryDistribution:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    states = lattice(cfg.k, n_max)
    p = np.array(cfg.probs)
    # states needing a class with p_i = 0 are unreachable
    feasible = ~np.any((states > 0) & (p == 0), axis=1)
    states = states[feasible]
    N = states.sum(axis=1)
    with np.errstate(divide="ignore"):
        logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
    logm = np.log(N + 1.0) + (states * logp).sum(axis=1) - gammaln(states + 1.0).sum(axis=1) - math.log(TWO_E)
    return StationaryDistribution(states, np.exp(logm), n_max, tail_mass(n_max))


def check_detailed_balance(dist: StationaryDistribution, cfg: RateClassConfig) -> float:
    """Largest violation of pi(n) p_i/(N+1) = pi(n+e_i) (n_i+1)/(N+2) inside the truncation."""
    lookup = dist.as_dict()
    worst = 0.0
    for state, m in lookup.items():
        N = sum(state)
        for i, pi_ in enumerate(cfg.probs):
            up = list(state)
            up[i] += 1
            m_up = lookup.get(tuple(up))
            if m_up is None:
                if N + 1 <= dist.n_max and pi_ > 0:
                    worst = max(worst, m * pi_ / (N + 1))
                continue
            worst = max(worst, abs(m * pi_ / (N + 1) - m_up * (state[i] + 1) / (N + 2)))
    return worst


@dataclass(frozen=True)
class SlotEventProbs:
    p_idle: float
    p_success_ap: np.ndarray
    p_success_sta: np.ndarray
    p_collision_ap: np.ndarray
    p_collision_sta: np.ndarray

    def total(self) -> float:
        return math.fsum([self.p_idle, *self.p_success_ap, *self.p_success_sta,
                          *self.p_collision_ap, *self.p_collision_sta])

    @property
    def p_success(self) -> float:
        return float(self.p_success_ap.sum() + self.p_success_sta.sum())


def _event_arrays(states: np.ndarray, probs, beta: np.ndarray):
    """Vectorised slot-event probabilities; rows are states, columns classes."""
    n = states.astype(float)
    N = n.sum(axis=1)
    b = beta[:, None]
    q = 1.0 - beta
    qN = q ** N
    p_idle = q * qN
    s_ap = np.asarray(probs)[None, :] * (beta * qN)[:, None]
    s_sta = n * (beta * qN)[:, None]
    # STAs slower than class s, and faster than class s
    slower = np.cumsum(n[:, ::-1], axis=1)[:, ::-1] - n
    faster = np.cumsum(n, axis=1) - n
    qcol = q[:, None]
    lq = np.log1p(-beta)[:, None]
    some_s = -np.expm1(n * lq)
    one_s = n * b * qcol ** np.maximum(n - 1.0, 0.0)
    two_s = np.where(n >= 2, np.maximum(some_s - one_s, 0.0), 0.0)
    c_ap = b * qcol ** slower * some_s
    # AP silent, nobody slower than s, and either >= 2 in s or one in s plus a faster STA
    c_sta = qcol * qcol ** slower * (two_s + one_s * -np.expm1(faster * lq))
    return p_idle, s_ap, s_sta, c_ap, c_sta


def slot_event_probs(state, cfg: RateClassConfig, beta: float) -> SlotEventProbs:
    s = np.asarray(state, dtype=np.int64).reshape(1, -1)
    idle, s_ap, s_sta, c_ap, c_sta = _event_arrays(s, cfg.probs, np.array([beta]))
    return SlotEventProbs(float(idle[0]), s_ap[0], s_sta[0], c_ap[0], c_sta[0])


def mean_sojourn(state, probs: SlotEventProbs, durs: EventDurations) -> float:
    """Mean time from entering ``state`` until the next successful transmission ends."""
    ps = probs.p_success
    if not ps > 0:
        raise NumericalFailureError(f"zero success probability in state {tuple(state)}")
    busy = (probs.p_idle * durs.slot
            + probs.p_success_ap @ durs.t_success_ap
            + probs.p_success_sta @ durs.t_success_sta
            + probs.p_collision_ap @ durs.t_collision_ap
            + probs.p_collision_sta @ durs.t_collision_sta)
    return float(busy / ps)


def _mean_sojourn_all(dist: StationaryDistribution, cfg: RateClassConfig, curve: AttemptCurve,
                      durs: EventDurations) -> np.ndarray:
    N = dist.totals
    beta = curve.beta[N + 1]
    idle, s_ap, s_sta, c_ap, c_sta = _event_arrays(dist.states, cfg.probs, beta)
    ps = s_ap.sum(axis=1) + s_sta.sum(axis=1)
    if np.any(ps <= 0):
        raise NumericalFailureError("zero success probability in some state")
    busy = (idle * durs.slot + s_ap @ durs.t_success_ap + s_sta @ durs.t_success_sta
            + c_ap @ durs.t_collision_ap + c_sta @ durs.t_collision_sta)
    return busy / ps


@dataclass(frozen=True)
class WlanThroughputs:
    """Renewal-reward service rates of the WLAN, in packets/second.

    ``sta_service_rate[i]`` is the ACK completion rate of one class-i STA
    while it is backlogged (class throughput over the time-average number
    of backlogged class-i STAs).
    """

    phi_ap: float
    phi_sta: np.ndarray
    sta_service_rate: np.ndarray
    mean_cycle: float
    mean_cycle_by_state: dict
    tail_bound: float


def _check_curve(dist: StationaryDistribution, curve: AttemptCurve):
    if curve.n_max < dist.n_max + 1:
        raise ValueError("attempt curve must cover n = 1 .. n_max + 1")


def ap_throughput(dist: StationaryDistribution, cfg: RateClassConfig, beta_curve: AttemptCurve,
                  durs: EventDurations) -> float:
    _check_curve(dist, beta_curve)
    ex = _mean_sojourn_all(dist, cfg, beta_curve, durs)
    reward = dist.mass / (dist.totals + 1.0)
    return math.fsum(reward) / math.fsum(dist.mass * ex)


def sta_throughput(dist: StationaryDistribution, cfg: RateClassConfig, beta_curve: AttemptCurve,
                   durs: EventDurations) -> np.ndarray:
    _check_curve(dist, beta_curve)
    ex = _mean_sojourn_all(dist, cfg, beta_curve, durs)
    den = math.fsum(dist.mass * ex)
    w = dist.mass / (dist.totals + 1.0)
    return np.array([math.fsum(w * dist.states[:, i]) / den for i in range(cfg.k)])


def wlan_throughputs(cfg: RateClassConfig, params: PhyMacParams | None = None,
                     n_max: int = DEFAULT_N_MAX, durs: EventDurations | None = None) -> WlanThroughputs:
    params = params or PhyMacParams()
    durs = durs if durs is not None else event_durations(cfg, params)
    dist = stationary_pi(cfg, n_max)
    curve = attempt_curve(n_max + 1, params)
    ex = _mean_sojourn_all(dist, cfg, curve, durs)
    den = math.fsum(dist.mass * ex)
    w = dist.mass / (dist.totals + 1.0)
    phi_ap = math.fsum(w) / den
    phi_sta = np.array([math.fsum(w * dist.states[:, i]) / den for i in range(cfg.k)])
    busy_time = np.array([math.fsum(dist.mass * ex * dist.states[:, i]) for i in range(cfg.k)])
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(busy_time > 0, phi_sta * den / np.where(busy_time > 0, busy_time, 1.0), 0.0)
    by_state = {tuple(int(x) for x in s): float(e) for s, e in zip(dist.states, ex)}
    return WlanThroughputs(phi_ap, phi_sta, rate, den / math.fsum(dist.mass), by_state, dist.tail_bound)
