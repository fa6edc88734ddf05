import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import batch_mean_se, cycle_lengths, sample_slot_events, semi_markov
from wlantcp.attempt import attempt_curve, attempt_probability
from wlantcp.chain import (ap_throughput, check_detailed_balance, mean_sojourn, slot_event_probs,
                           sta_throughput, stationary_pi, tail_mass, wlan_throughputs)
from wlantcp.params import PhyMacParams, RateClassConfig, event_durations

TWO_E = 2 * math.e


@st.composite
def rate_configs(draw, max_k=3):
    k = draw(st.integers(1, max_k))
    rates = draw(st.lists(st.sampled_from([54e6, 24e6, 11e6, 5.5e6, 2e6, 1e6]), min_size=k, max_size=k,
                          unique=True))
    counts = draw(st.lists(st.integers(1, 6), min_size=k, max_size=k))
    return RateClassConfig.from_counts(rates, counts)


def test_empty_state_mass():
    d = stationary_pi(RateClassConfig.from_counts([11e6, 5.5e6], [3, 2]), 10)
    assert d[(0, 0)] == pytest.approx(1 / TWO_E, rel=1e-14)
    assert d[(0, 0)] == pytest.approx(0.1839397205857212, rel=1e-14)


def test_single_class_specialisation():
    d = stationary_pi(RateClassConfig.from_counts([11e6], [4]), 20)
    assert d[(1,)] == pytest.approx(0.36787944117144233, rel=1e-14)
    for n in range(21):
        assert d[(n,)] == pytest.approx((n + 1) / (TWO_E * math.factorial(n)), rel=1e-12)


def test_tail_bound_matches_direct_sum():
    mpmath.mp.dps = 60
    for n_max in (1, 5, 12, 30):
        direct = mpmath.nsum(lambda N: (N + 1) / (2 * mpmath.e * mpmath.factorial(N)), [n_max + 1, mpmath.inf])
        assert tail_mass(n_max) == pytest.approx(float(direct), rel=1e-10)
    assert tail_mass(30) < 1e-25


@given(rate_configs())
def test_normalisation(cfg):
    d = stationary_pi(cfg, 30)
    assert d.tail_bound < 1e-25
    assert abs(math.fsum(d.mass) + d.tail_bound - 1.0) < 1e-13
    assert np.all(d.mass > 0)


@given(rate_configs())
def test_detailed_balance_holds(cfg):
    assert check_detailed_balance(stationary_pi(cfg, 10), cfg) < 1e-15


def test_detailed_balance_detects_perturbation(mixed5):
    d = stationary_pi(mixed5, 10)
    i = int(np.flatnonzero((d.states == [1, 0]).all(axis=1))[0])
    d.mass[i] += 1e-6
    assert check_detailed_balance(d, mixed5) > 1e-7


def test_first_transition_balances_exactly():
    cfg = RateClassConfig.from_counts([11e6, 5.5e6], [1, 1], [0.5, 0.5])
    d = stationary_pi(cfg, 5)
    assert d[(0, 0)] * 0.5 / 1 == pytest.approx(d[(1, 0)] * 1 / 2, rel=1e-15)


def test_slot_events_empty_network():
    cfg = RateClassConfig.from_counts([11e6, 5.5e6], [3, 2])
    b = 0.0625
    pr = slot_event_probs((0, 0), cfg, b)
    assert pr.p_idle == pytest.approx(1 - b)
    np.testing.assert_allclose(pr.p_success_ap, np.array(cfg.probs) * b)
    assert not pr.p_collision_ap.any() and not pr.p_collision_sta.any() and not pr.p_success_sta.any()


def test_slot_events_hand_case():
    cfg = RateClassConfig.from_counts([11e6], [1])
    pr = slot_event_probs((1,), cfg, 0.1)
    assert pr.p_idle == pytest.approx(0.81)
    assert pr.p_success_ap[0] == pytest.approx(0.09)
    assert pr.p_success_sta[0] == pytest.approx(0.09)
    assert pr.p_collision_ap[0] == pytest.approx(0.01)
    assert pr.p_collision_sta[0] == pytest.approx(0.0, abs=1e-17)


@given(st.lists(st.integers(0, 6), min_size=3, max_size=3), st.floats(0.001, 0.999))
def test_slot_events_complete(state, beta):
    cfg = RateClassConfig.from_counts([11e6, 5.5e6, 2e6], [2, 3, 4])
    pr = slot_event_probs(state, cfg, beta)
    assert abs(pr.total() - 1.0) < 1e-12
    for arr in (pr.p_success_ap, pr.p_success_sta, pr.p_collision_ap, pr.p_collision_sta):
        assert np.all(arr >= -1e-15) and np.all(arr <= 1)


def test_slot_events_match_node_sampling(params):
    cfg = RateClassConfig.from_counts([11e6, 5.5e6, 2e6], [2, 3, 4])
    state, beta = (1, 2, 1), 0.2
    pr = slot_event_probs(state, cfg, beta)
    rng = np.random.default_rng(7)
    d = event_durations(cfg, params)
    dur, succ = sample_slot_events(1_000_000, state, cfg.probs, beta, d, rng)
    se = math.sqrt(pr.p_success * (1 - pr.p_success) / len(succ))
    assert abs(succ.mean() - pr.p_success) < 4 * se


def test_sojourn_empty_network(mixed5, params):
    d = event_durations(mixed5, params)
    b = attempt_probability(1, params)
    pr = slot_event_probs((0, 0), mixed5, b)
    expect = ((1 - b) * d.slot + b * np.dot(mixed5.probs, d.t_success_ap)) / b
    assert mean_sojourn((0, 0), pr, d) == pytest.approx(expect, rel=1e-13)


def test_sojourn_geometric_degenerate():
    cfg = RateClassConfig.from_counts([11e6], [1])
    d = event_durations(cfg, PhyMacParams())
    flat = type(d)(np.array([1.0]), np.array([1.0]), np.array([1.0]), np.array([1.0]), 1.0)
    pr = slot_event_probs((0,), cfg, 0.3)
    assert mean_sojourn((0,), pr, flat) == pytest.approx(1.0 / 0.3, rel=1e-14)
    assert flat.slot == 1.0 and d.slot > 0


@pytest.mark.parametrize("state", [(0, 0, 0), (1, 0, 2), (2, 3, 1)])
def test_sojourn_monte_carlo(params, state):
    cfg = RateClassConfig.from_counts([11e6, 5.5e6, 2e6], [3, 3, 3])
    d = event_durations(cfg, params)
    beta = attempt_probability(sum(state) + 1, params)
    pr = slot_event_probs(state, cfg, beta)
    rng = np.random.default_rng(sum(state) + 11)
    dur, succ = sample_slot_events(10_000_000, state, cfg.probs, beta, d, rng)
    cyc = cycle_lengths(dur, succ)
    se = cyc.std(ddof=1) / math.sqrt(len(cyc))
    assert abs(cyc.mean() - mean_sojourn(state, pr, d)) < 3 * se


def test_reward_identities(mixed5, params):
    d = stationary_pi(mixed5, 30)
    ap_reward = math.fsum(d.mass / (d.totals + 1))
    sta_reward = math.fsum(d.mass * d.totals / (d.totals + 1))
    assert ap_reward == pytest.approx(0.5, abs=1e-9)
    assert sta_reward == pytest.approx(0.5, abs=1e-9)


def test_sta_throughputs_sum_to_ap(mixed5, params):
    d = stationary_pi(mixed5, 30)
    curve = attempt_curve(31, params)
    dur = event_durations(mixed5, params)
    phi = ap_throughput(d, mixed5, curve, dur)
    sta = sta_throughput(d, mixed5, curve, dur)
    assert abs(sta.sum() - phi) / phi < 1e-6


def test_single_class_sta_equals_ap(params):
    cfg = RateClassConfig.from_counts([11e6], [4])
    t = wlan_throughputs(cfg, params)
    assert t.phi_sta[0] == pytest.approx(t.phi_ap, rel=1e-9)


def test_symmetric_classes_share_equally(params):
    cfg = RateClassConfig.from_counts([11e6, 11e6], [2, 2])
    t = wlan_throughputs(cfg, params)
    assert t.phi_sta[0] == pytest.approx(t.phi_sta[1], rel=1e-12)


def test_duration_scaling(mixed5, params):
    d = stationary_pi(mixed5, 30)
    curve = attempt_curve(31, params)
    dur = event_durations(mixed5, params)
    phi = ap_throughput(d, mixed5, curve, dur)
    sta = sta_throughput(d, mixed5, curve, dur)
    for c in (0.5, 2.0, 3.7):
        assert ap_throughput(d, mixed5, curve, dur.scaled(c)) == pytest.approx(phi / c, rel=1e-13)
        np.testing.assert_allclose(sta_throughput(d, mixed5, curve, dur.scaled(c)), sta / c, rtol=1e-13)


def test_mixed5_ap_service_rate(mixed5, params):
    t = wlan_throughputs(mixed5, params)
    # a saturated-AP rate a little above the measured end-to-end 274.8 pkt/s
    assert 276.0 <= t.phi_ap <= 284.0


def test_semi_markov_monte_carlo(params):
    cfg = RateClassConfig.from_counts([11e6, 5.5e6], [3, 2])
    dur = event_durations(cfg, params)
    curve = attempt_curve(64, params)
    rng = np.random.default_rng(2024)
    states, kind, times = semi_markov(cfg, lambda n: curve[n], dur, 1_000_000, rng)
    t = wlan_throughputs(cfg, params)
    k = cfg.k
    est, se = batch_mean_se((kind < k).astype(float), times)
    assert abs(est - t.phi_ap) < 3 * se
    for i in range(k):
        est, se = batch_mean_se((kind == k + i).astype(float), times)
        assert abs(est - t.phi_sta[i]) < 3 * se
    dist = stationary_pi(cfg, 30)
    for s in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0)]:
        hit = (states == s).all(axis=1).astype(float)
        est, se = batch_mean_se(hit, np.ones_like(hit))
        assert abs(est - dist[s]) < 3 * se
