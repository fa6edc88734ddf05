"""Acceptance gate. Each test records one PASS/FAIL line in the terminal summary."""
import json
import math
import time

import numpy as np
import pytest

from conftest import GOLDEN, ROOT, SCENARIOS
from test_bcmp import random_network
from wlantcp.attempt import attempt_curve
from wlantcp.bcmp import build_network, solve_mva, solve_product_form
from wlantcp.chain import (check_detailed_balance, slot_event_probs, stationary_pi, wlan_throughputs)
from wlantcp.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, analyze, main, simulate
from wlantcp.params import PhyMacParams, RateClassConfig
from wlantcp.scenario import load_scenario
from wlantcp.sim import SimConfig, run

RTPD_MS = list(range(10, 100, 10))
TABLE_AP_QUEUE = [297.9, 295.2, 292.5, 289.8, 287.0, 284.3, 281.5, 278.7, 276.6]
TABLE_IN_FLIGHT = {10: 2.58, 50: 13.18, 90: 23.59}
TABLE_AP_THROUGHPUT = {10: 274.8, 90: 263.4}


@pytest.fixture(scope="module")
def scn():
    return load_scenario(SCENARIOS / "mixed5.json")


@pytest.fixture(scope="module")
def analysis(scn):
    t0 = time.perf_counter()
    pts, _ = analyze(scn)
    return {int(p.rtpd_ms): p for p in pts}, time.perf_counter() - t0


def test_c1_analytical_identities(criterion):
    t0 = time.perf_counter()
    cfg = RateClassConfig.from_counts([5.5e6, 11e6], [2, 3])
    d = stationary_pi(cfg, 30)
    deficit = d.tail_bound
    closure = abs(math.fsum(d.mass) + d.tail_bound - 1.0)
    balance = check_detailed_balance(stationary_pi(cfg, 12), cfg)
    curve = attempt_curve(31, PhyMacParams())
    completeness = max(abs(slot_event_probs(s, cfg, curve[int(s.sum()) + 1]).total() - 1.0) for s in d.states)
    ap_reward = math.fsum(d.mass / (d.totals + 1.0))
    thr = wlan_throughputs(cfg)
    split = abs(thr.phi_sta.sum() - thr.phi_ap) / thr.phi_ap
    elapsed = time.perf_counter() - t0
    ok = (deficit < 1e-25 and closure < 1e-13 and balance < 1e-12 and completeness < 1e-12
          and abs(ap_reward - 0.5) <= 1e-9 and split < 1e-6 and elapsed < 1.0)
    criterion("C1 analytical identities", ok,
              f"deficit={deficit:.2e} balance={balance:.1e} completeness={completeness:.1e} "
              f"ap_reward-0.5={ap_reward - 0.5:.1e} sta_split={split:.1e} time={elapsed:.2f}s")
    assert ok


def test_c2_queueing_solver(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(120):
        net = random_network(np.random.default_rng(1000 + seed), max_pop=12)
        a, b = solve_mva(net), solve_product_form(net)
        worst = max(worst, float(np.max(np.abs(a.queue - b.queue))),
                    float(np.max(np.abs(a.lam - b.lam) / np.maximum(b.lam, 1e-300))))
    cfg = RateClassConfig.from_counts([5.5e6, 11e6], [2, 3])
    thr = wlan_throughputs(cfg)
    scale = 0.0
    for ms in (0, 10, 50, 90):
        net = build_network(cfg, thr, 60, ms / 1000)
        r = solve_mva(net)
        scale = max(scale, abs(r.queue.sum() - 300),
                    float(np.max(np.abs(r.queue - (net.visits * r.response) @ r.lam))),
                    abs(r.n_rtpd - r.t_h * ms / 1000))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and scale < 1e-9 and elapsed < 10.0
    criterion("C2 queueing solver", ok,
              f"mva-vs-product-form={worst:.1e} over 120 nets, W=300 residual={scale:.1e}, time={elapsed:.2f}s")
    assert ok


def test_c3_ap_queue_table(criterion, analysis):
    pts, elapsed = analysis
    n_ap = np.array([pts[ms].n_ap for ms in RTPD_MS])
    dec = -np.diff(n_ap)
    rel = np.abs(n_ap - TABLE_AP_QUEUE) / TABLE_AP_QUEUE
    ok = bool(np.all(dec > 0) and np.all((dec >= 2.3) & (dec <= 3.3)) and np.all(rel < 0.02) and elapsed < 5.0)
    criterion("C3 AP queue vs table", ok,
              f"n_ap {n_ap[0]:.1f}..{n_ap[-1]:.1f}, max err {100 * rel.max():.2f}%, "
              f"decrement {dec.min():.2f}..{dec.max():.2f}, time={elapsed:.2f}s")
    assert ok


def test_c4_in_flight_table(criterion, analysis):
    pts, _ = analysis
    errs = {ms: abs(pts[ms].n_rtpd - v) for ms, v in TABLE_IN_FLIGHT.items()}
    ok = all(errs[ms] <= max(0.1 * v, 0.5) for ms, v in TABLE_IN_FLIGHT.items())
    criterion("C4 in-flight vs table", ok,
              ", ".join(f"{ms}ms {pts[ms].n_rtpd:.2f} vs {v}" for ms, v in TABLE_IN_FLIGHT.items()))
    assert ok


def test_c5_ap_throughput_table(criterion, analysis):
    pts, _ = analysis
    t_h = np.array([pts[ms].t_h for ms in RTPD_MS])
    rel = {ms: (pts[ms].t_h - v) / v for ms, v in TABLE_AP_THROUGHPUT.items()}
    monotone = bool(np.all(np.diff(t_h) <= 1e-9 * t_h[0]))
    ok = monotone and all(abs(e) <= 0.05 for e in rel.values())
    criterion("C5 AP throughput vs table", ok,
              ", ".join(f"{ms}ms {pts[ms].t_h:.1f} vs {v} ({100 * rel[ms]:+.1f}%)"
                        for ms, v in TABLE_AP_THROUGHPUT.items()) + f", nonincreasing={monotone}")
    assert ok


def test_c6_analysis_vs_simulation(criterion, scn, analysis):
    pts, _ = analysis
    t0 = time.perf_counter()
    results = dict(simulate(scn))
    elapsed = time.perf_counter() - t0
    worst = {"throughput": 0.0, "ap_queue": 0.0}
    inflight_ok = True
    for ms in RTPD_MS:
        b, p = results[float(ms)], pts[ms]
        assert len(b.runs) == 30 and b.runs[0].window == 180.0
        worst["throughput"] = max(worst["throughput"], abs(b.metric("ap_throughput").mean - p.t_h) / p.t_h)
        worst["ap_queue"] = max(worst["ap_queue"], abs(b.metric("ap_queue_mean").mean - p.n_ap) / p.n_ap)
        inflight_ok &= abs(b.metric("inflight_mean").mean - p.n_rtpd) <= max(0.1 * p.n_rtpd, 0.5)
    ok = worst["throughput"] < 0.03 and worst["ap_queue"] < 0.02 and inflight_ok
    criterion("C6 analysis vs simulation", ok,
              f"throughput {100 * worst['throughput']:.2f}%, AP queue {100 * worst['ap_queue']:.2f}%, "
              f"in-flight ok={inflight_ok}, 270 runs in {elapsed:.0f}s")
    assert ok


def test_c7_simulator_properties(criterion):
    cfg = SimConfig(RateClassConfig.from_counts([5.5e6, 11e6], [2, 3]), duration=30.0, warmup=5.0,
                    t_rtpd=0.05, seed=7)
    a, b = run(cfg), run(cfg)
    same = all(np.array_equal(getattr(a, f), getattr(b, f)) for f in vars(a))
    W = cfg.total_packets
    bad = []
    run(cfg, trace=lambda t, ap, sta, fl: bad.append(t) if ap + sta + fl != W else None)
    # one packet in the loop: exactly one node ever holds a frame
    solo = run(SimConfig(RateClassConfig.from_counts([11e6], [1]), w_conn=1, t_rtpd=0.0,
                         duration=60.0, warmup=1.0, seed=3))
    little = abs(a.inflight_mean / a.ap_throughput - cfg.t_rtpd) / cfg.t_rtpd
    ok = same and not bad and solo.collisions == 0 and solo.successes > 0 and little < 0.02
    criterion("C7 simulator properties", ok,
              f"deterministic={same}, conservation violations={len(bad)}, "
              f"single-contender collisions={solo.collisions}, Little err={100 * little:.2f}%")
    assert ok


def test_c8_cli(criterion, tmp_path):
    out = tmp_path / "out"
    checks = {}
    checks["analyze golden"] = (
        main(["analyze", "--scenario", str(SCENARIOS / "mixed5.json"), "--out", str(out / "a")]) == EXIT_OK
        and (out / "a" / "analyze.csv").read_bytes() == (GOLDEN / "analyze" / "analyze.csv").read_bytes())
    checks["simulate golden"] = (
        main(["simulate", "--scenario", str(ROOT / "tests" / "data" / "mixed5_short.json"),
              "--out", str(out / "s")]) == EXIT_OK
        and (out / "s" / "simulate.csv").read_bytes() == (GOLDEN / "simulate" / "simulate.csv").read_bytes())
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"classes": [{"rate_mbps": 11, "count": 1}], "rtpd_ms": []}))
    checks["exit 2"] = main(["analyze", "--scenario", str(empty)]) == EXIT_USAGE
    big = tmp_path / "big.json"
    big.write_text(json.dumps({"classes": [{"rate_mbps": r, "count": 1} for r in (1, 2, 5.5, 11)],
                               "w_conn": 100, "rtpd_ms": [10]}))
    checks["exit 3"] = main(["analyze", "--scenario", str(big), "--nmax", "8"]) == EXIT_NUMERIC
    ok = all(checks.values())
    criterion("C8 CLI", ok, ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items()))
    assert ok
