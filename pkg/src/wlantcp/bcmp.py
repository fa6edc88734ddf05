"""Closed multiclass BCMP network of AP, STAs and the round-trip delay pipe.

Packets are customers; each TCP connection's rate class is a customer
class. FCFS centers have class-blind exponential service, the pipe is an
infinite-server center. Solved by exact MVA over the population lattice,
with a brute-force product-form evaluator kept as a small-instance oracle.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .chain import WlanThroughputs
from .errors import InvalidParameterError, LatticeBudgetError, NumericalFailureError
from .params import RateClassConfig

FCFS = "fcfs"
DELAY = "delay"
DEFAULT_LATTICE_BUDGET = 10_000_000


@dataclass(frozen=True)
class Center:
    name: str
    kind: str
    rate: float = math.inf  # FCFS service rate, packets/s
    delay: float = 0.0  # infinite-server mean holding time, s


@dataclass
class QueueingNetwork:
    """Centers, class populations and per-cycle visit ratios ``visits[c, j]``.

    ``routing[j]`` (optional) is the class-j center-to-center transition
    matrix the visit ratios were derived from.
    """

    centers: list[Center]
    populations: tuple[int, ...]
    visits: np.ndarray
    routing: np.ndarray | None = None
    class_labels: tuple[str, ...] = ()
    throughput_center: int = 0
    sta_class: tuple[int, ...] = ()  # class index of each STA center, in center order

    def __post_init__(self):
        self.visits = np.asarray(self.visits, dtype=float)
        C, J = len(self.centers), len(self.populations)
        if self.visits.shape != (C, J):
            raise InvalidParameterError(f"visits shape {self.visits.shape} != ({C}, {J})")
        if sum(c.kind == DELAY for c in self.centers) != 1:
            raise InvalidParameterError("network needs exactly one delay center")
        for c in self.centers:
            if c.kind == FCFS and not c.rate > 0:
                raise InvalidParameterError(f"center {c.name}: service rate must be > 0")
            if c.kind == DELAY and not c.delay >= 0:
                raise InvalidParameterError(f"center {c.name}: delay must be >= 0")
        if any(w < 0 for w in self.populations):
            raise InvalidParameterError("populations must be >= 0")
        if np.any(self.visits < 0):
            raise InvalidParameterError("visit ratios must be >= 0")

    @property
    def delay_index(self) -> int:
        return next(i for i, c in enumerate(self.centers) if c.kind == DELAY)

    @property
    def fcfs_mask(self) -> np.ndarray:
        return np.array([c.kind == FCFS for c in self.centers])

    def demands(self) -> np.ndarray:
        """Per-cycle service demand ``visits / rate`` (FCFS) or ``visits * delay`` (pipe)."""
        d = np.empty_like(self.visits)
        for i, c in enumerate(self.centers):
            d[i] = self.visits[i] / c.rate if c.kind == FCFS else self.visits[i] * c.delay
        return d


@dataclass(frozen=True)
class MvaResult:
    queue: np.ndarray  # mean customers per center (incl. in service)
    lam: np.ndarray  # class cycle throughputs, cycles/s
    response: np.ndarray  # (C, J) residence time per visit
    t_h: float
    cycle_time: np.ndarray
    approximate: bool = False
    net: QueueingNetwork | None = field(default=None, repr=False, compare=False)

    def center_throughput(self) -> np.ndarray:
        return self.net.visits @ self.lam

    @property
    def n_ap(self) -> float:
        return float(self.queue[self.net.throughput_center])

    @property
    def n_rtpd(self) -> float:
        return float(self.queue[self.net.delay_index])

    @property
    def n_sta(self) -> np.ndarray:
        idx = [i for i, c in enumerate(self.net.centers) if c.name.startswith("sta")]
        return self.queue[idx]

    def n_sta_by_class(self) -> np.ndarray:
        """Mean queue of one STA, averaged over the STAs of each class."""
        q = self.n_sta
        cls = np.array(self.net.sta_class)
        return np.array([q[cls == j].mean() for j in range(len(self.net.populations))])


def build_network(cfg: RateClassConfig, thr: WlanThroughputs, w_conn: int, t_rtpd: float) -> QueueingNetwork:
    """AP -> STA (uniform within class) -> pipe -> AP, one customer class per rate class."""
    if w_conn < 1:
        raise InvalidParameterError("w_conn must be >= 1")
    if not t_rtpd >= 0:
        raise InvalidParameterError("t_rtpd must be >= 0")
    if not thr.phi_ap > 0:
        raise InvalidParameterError("AP service rate must be positive")
    for c in cfg.classes:
        if c.count == 0 and c.hol_probability > 0:
            raise InvalidParameterError(f"class at {c.rate} b/s has no STAs but receives traffic")
    active = [j for j, c in enumerate(cfg.classes) if c.count > 0]
    centers = [Center("ap", FCFS, rate=thr.phi_ap)]
    sta_class = []
    for jj, j in enumerate(active):
        mu = float(thr.sta_service_rate[j])
        if not mu > 0:
            raise InvalidParameterError(f"STA service rate for class {j} must be positive")
        for s in range(cfg.classes[j].count):
            centers.append(Center(f"sta{jj}.{s}", FCFS, rate=mu))
            sta_class.append(jj)
    centers.append(Center("rtpd", DELAY, delay=float(t_rtpd)))
    C, J = len(centers), len(active)
    d = C - 1
    routing = np.zeros((J, C, C))
    for jj, j in enumerate(active):
        members = [1 + i for i, cl in enumerate(sta_class) if cl == jj]
        routing[jj, d, 0] = 1.0
        routing[jj, 0, members] = 1.0 / len(members)
        routing[jj, members, d] = 1.0
    pops = tuple(cfg.classes[j].count * int(w_conn) for j in active)
    labels = tuple(_rate_label(cfg.classes[j].rate) for j in active)
    net = QueueingNetwork(centers, pops, np.zeros((C, J)), routing, labels, 0, tuple(sta_class))
    e = visit_ratios(net)
    net.visits = e / e[d][None, :]
    return net


def _rate_label(rate: float) -> str:
    return f"{rate / 1e6:g}"


def visit_ratios(net: QueueingNetwork) -> np.ndarray:
    """Fractions of all transitions that are arrivals at (center, class); sums to 1.

    Classes never switch, so each class chain is solved on its own and
    weighted by its population share.
    """
    if net.routing is None:
        raise InvalidParameterError("network has no routing matrices")
    C, J = net.visits.shape
    W = sum(net.populations)
    e = np.zeros((C, J))
    for j in range(J):
        P = net.routing[j]
        used = np.flatnonzero(P.sum(axis=1) > 0)
        Pu = P[np.ix_(used, used)]
        A = np.vstack([Pu.T - np.eye(len(used)), np.ones(len(used))])
        b = np.zeros(len(used) + 1)
        b[-1] = 1.0
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
        share = net.populations[j] / W if W else 1.0 / J
        e[used, j] = x * share
    return e


def traffic_residual(net: QueueingNetwork, e: np.ndarray) -> float:
    r = 0.0
    for j in range(e.shape[1]):
        r = max(r, float(np.abs(e[:, j] @ net.routing[j] - e[:, j]).max()))
    return r


def _lattice_layers(pops):
    """Group flat lattice indices by total population."""
    dims = tuple(w + 1 for w in pops)
    grid = np.indices(dims).reshape(len(dims), -1).T
    tot = grid.sum(axis=1)
    order = np.argsort(tot, kind="stable")
    bounds = np.searchsorted(tot[order], np.arange(sum(pops) + 2))
    strides = np.array([int(np.prod(dims[j + 1:])) for j in range(len(dims))], dtype=np.int64)
    return grid, order, bounds, strides


def solve_mva(net: QueueingNetwork, budget: int = DEFAULT_LATTICE_BUDGET) -> MvaResult:
    pops = net.populations
    size = math.prod(w + 1 for w in pops)
    if size > budget:
        raise LatticeBudgetError(
            f"exact MVA needs {size} lattice points (budget {budget}); use the approximate solver")
    C, J = net.visits.shape
    D = net.demands()
    fcfs = net.fcfs_mask.astype(float)
    grid, order, bounds, strides = _lattice_layers(pops)
    Q = np.zeros((size, C))
    lam = np.zeros(J)
    R = np.zeros((C, J))
    for n in range(1, sum(pops) + 1):
        idx = order[bounds[n]:bounds[n + 1]]
        w = grid[idx]
        Rj = np.empty((J, len(idx), C))
        lj = np.zeros((J, len(idx)))
        for j in range(J):
            has = w[:, j] > 0
            prev = np.where(has, idx - strides[j], idx)
            Rj[j] = D[:, j] * (1.0 + fcfs * Q[prev])
            cyc = Rj[j].sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                lj[j] = np.where(has, w[:, j] / cyc, 0.0)
        if not np.all(np.isfinite(lj)):
            raise NumericalFailureError("class with zero total demand")
        Q[idx] = np.einsum("jp,jpc->pc", lj, Rj)
        if n == sum(pops):
            lam = lj[:, 0]
            R = Rj[:, 0, :].T
    return _assemble(net, Q[-1] if size else np.zeros(C), lam, R, approximate=False)


def _assemble(net, q, lam, R, approximate):
    V = net.visits
    with np.errstate(divide="ignore", invalid="ignore"):
        resid = np.where(V > 0, R / np.where(V > 0, V, 1.0), 0.0)
    t_h = float(V[net.throughput_center] @ lam)
    cycle = R.sum(axis=0)
    return MvaResult(np.asarray(q, dtype=float), np.asarray(lam, dtype=float), resid, t_h, cycle,
                     approximate, net)


def solve_mva_approx(net: QueueingNetwork, tol: float = 1e-10, max_iter: int = 100_000) -> MvaResult:
    """Schweitzer-Bard fixed point; the result is flagged approximate."""
    C, J = net.visits.shape
    W = np.array(net.populations, dtype=float)
    D = net.demands()
    fcfs = net.fcfs_mask.astype(float)[:, None]
    visited = D > 0
    nvis = np.maximum(visited.sum(axis=0), 1)
    Qcj = np.where(visited, W[None, :] / nvis[None, :], 0.0)
    for _ in range(max_iter):
        Qc = Qcj.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            own = np.where(W > 0, Qcj / np.where(W > 0, W, 1.0)[None, :], 0.0)
        R = D * (1.0 + fcfs * (Qc - own))
        cyc = R.sum(axis=0)
        lam = np.where(W > 0, W / np.where(cyc > 0, cyc, 1.0), 0.0)
        new = lam[None, :] * R
        if np.abs(new - Qcj).max() < tol:
            Qcj = new
            return _assemble(net, Qcj.sum(axis=1), lam, R, approximate=True)
        Qcj = new
    raise NumericalFailureError("Schweitzer iteration did not converge")


def _compositions(total: int, parts: int):
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield out


def product_form_distribution(net: QueueingNetwork, pops=None, budget: int = 200_000):
    """Unnormalised product-form weights over all feasible population splits.

    Returns ``(states, weights)`` where ``states[s, c, j]`` counts class-j
    customers at center ``c``.
    """
    pops = tuple(net.populations if pops is None else pops)
    C, J = net.visits.shape
    members = [np.flatnonzero(net.visits[:, j] > 0) for j in range(J)]
    count = math.prod(math.comb(w + len(m) - 1, len(m) - 1) if len(m) else (1 if w == 0 else 0)
                      for w, m in zip(pops, members))
    if count > budget:
        raise LatticeBudgetError(f"product-form enumeration needs {count} states (budget {budget})")
    per_class = []
    for j in range(J):
        opts = []
        for comp in _compositions(pops[j], len(members[j])) if len(members[j]) else [[]]:
            col = np.zeros(C, dtype=np.int64)
            col[members[j]] = comp
            opts.append(col)
        per_class.append(opts)
    states = np.array([np.stack(combo, axis=1) for combo in itertools.product(*per_class)],
                      dtype=np.int64).reshape(-1, C, J)
    # per-customer factor: visits/rate at FCFS centers, visits*delay at the pipe
    a = net.demands()
    with np.errstate(divide="ignore"):
        loga = np.log(a)
    terms = np.where(states > 0, np.maximum(states, 1) * loga[None], 0.0) - gammaln(states + 1.0)
    logw = terms.sum(axis=(1, 2))
    fcfs = net.fcfs_mask
    # FCFS orderings of a mixed queue: n_c! / prod_j n_cj!
    logw += gammaln(states[:, fcfs, :].sum(axis=2) + 1.0).sum(axis=1)
    return states, np.exp(logw)


def solve_product_form(net: QueueingNetwork, budget: int = 200_000) -> MvaResult:
    """Exact means by enumerating the product-form distribution (small networks only)."""
    states, wts = product_form_distribution(net, budget=budget)
    G = wts.sum()
    if not G > 0:
        raise NumericalFailureError("product-form normalisation constant is zero")
    prob = wts / G
    qcj = np.einsum("s,scj->cj", prob, states)
    J = len(net.populations)
    lam = np.zeros(J)
    for j in range(J):
        if net.populations[j] == 0:
            continue
        less = list(net.populations)
        less[j] -= 1
        _, w_less = product_form_distribution(net, less, budget=budget)
        lam[j] = w_less.sum() / G
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(lam[None, :] > 0, qcj / np.where(lam > 0, lam, 1.0)[None, :], 0.0)
    return _assemble(net, qcj.sum(axis=1), lam, R, approximate=False)
