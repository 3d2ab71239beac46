import math

import numpy as np
import pytest

from rismux import SystemConfig, brute_force_allocate, check_decision_invariants
from rismux.urllc_alloc import (MiniSlotState, StrategyWeights, UrllcBatch, UrllcPacket,
                                heuristic_allocate, max_puncturable, optimization_allocate,
                                power_for_rbs, puncture_caps, residual_threshold,
                                solve_admission, solve_allocation, strategy_weights)
from conftest import make_mini_slot_instance


def state_of(baseline, r_prime, m=1, cum=None):
    baseline = np.asarray(baseline, float)
    cum = np.zeros_like(baseline) if cum is None else np.asarray(cum, float)
    return MiniSlotState(m=m, cum_rate=cum, baseline_rate=baseline,
                         r_prime=np.asarray(r_prime, float),
                         punctured_so_far=np.zeros((0, baseline.size)))


def test_residual_threshold_first_mini_slot():
    cfg = SystemConfig(E=2, U=1, N=0, B=8, M=5, r_th=1.2e6)
    base = np.array([0.9e6, 1.4e6])
    st = state_of(base, np.zeros(2), m=1)
    got = residual_threshold(st, cfg)
    expect = cfg.M * cfg.r_th / cfg.b - (cfg.M - 1) * base
    assert np.allclose(got, expect, rtol=1e-12)


def test_residual_threshold_exact_floor_identity():
    cfg = SystemConfig(E=1, U=1, N=0, B=4, M=6, r_th=2e6)
    r_e = cfg.r_th / cfg.b
    cum = 0.0
    for m in range(1, cfg.M + 1):
        st = state_of([r_e], [0.0], m=m, cum=[cum])
        assert residual_threshold(st, cfg)[0] == pytest.approx(r_e, rel=1e-12)
        cum += r_e           # never punctured


def test_residual_threshold_single_mini_slot():
    cfg = SystemConfig(E=1, U=1, N=0, B=4, M=1, r_th=2e6)
    st = state_of([5e6], [0.0], m=1)
    assert residual_threshold(st, cfg)[0] == pytest.approx(cfg.r_th / cfg.b)


def test_max_puncturable_cases():
    cfg = SystemConfig(E=1, U=1, N=0, B=12, M=2)
    assert max_puncturable(state_of([1e6], [-1.0]), 0, cfg) == 12
    assert max_puncturable(state_of([1e6], [1e6]), 0, cfg) == 0
    assert max_puncturable(state_of([1e6], [0.5e6]), 0, cfg) == 6


def test_puncture_caps_zero_rate():
    caps = puncture_caps(np.array([0.0, 0.0]), np.array([-1.0, 1.0]), 5)
    assert caps.tolist() == [5, 0]


def test_strategy_weights_symmetric():
    st = state_of([2e6, 2e6, 2e6], [1e6, 1e6, 1e6])
    merl = strategy_weights("MeRL", st)
    pf = strategy_weights("PF", st)
    assert np.allclose(merl.beta, 1 / 3)
    assert np.allclose(pf.beta, 2 / 3)
    assert merl.beta.sum() == pytest.approx(1.0)
    assert np.allclose(pf.beta, 1.0 - merl.beta)


def test_strategy_weights_ratio():
    st = state_of([2e6, 4e6], [1e6, 1e6])   # R_hat = (1e6, 3e6)
    assert np.allclose(strategy_weights("MeRL", st).beta, [0.25, 0.75])
    assert np.allclose(strategy_weights("PF", st).beta, [0.75, 0.25])


def test_strategy_weights_degenerate():
    st = state_of([1e6, 1e6], [1e6, 1e6])   # R_hat = 0
    assert np.allclose(strategy_weights("MeRL", st).beta, 0.5)
    with pytest.raises(ValueError):
        strategy_weights("random", st)


def test_power_for_rbs_values():
    cfg = SystemConfig(E=1, U=1, N=0, B=4)
    assert power_for_rbs(3, 0.0, 2.0, cfg) == 0.0
    assert power_for_rbs(2, 2 * cfg.W, 4.0, cfg) == pytest.approx(0.25)   # 2**1 - 1
    assert math.isinf(power_for_rbs(0, 1e6, 2.0, cfg))


def test_power_for_rbs_round_trip():
    rng = np.random.default_rng(0)
    cfg = SystemConfig(E=1, U=1, N=0, B=4)
    for _ in range(20):
        i_l = int(rng.integers(1, 20))
        alpha = rng.uniform(0.01, 50.0)
        c_th = rng.uniform(1e5, 5e6)
        p = power_for_rbs(i_l, c_th, alpha, cfg)
        rate = i_l * cfg.W * math.log2(1.0 + alpha * p)
        assert rate == pytest.approx(c_th, rel=1e-9)


def ample_instance():
    cfg = SystemConfig(E=2, U=2, N=0, B=8, M=2, r_th=0.0)
    st = state_of([2e6, 2e6], [-1e6, -1e6])
    caps = puncture_caps(st.baseline_rate, st.r_prime, cfg.b)
    batch = UrllcBatch([UrllcPacket(0, 0, cfg.packet_bits),
                        UrllcPacket(1, 1, cfg.packet_bits)], c_th=cfg.c_th)
    gains = np.array([50.0, 20.0]) * cfg.sigma2 * cfg.gamma_urllc
    p_embb = np.array([0.3, 0.4])
    w = StrategyWeights("PF", np.array([0.5, 0.5]))
    return cfg, st, batch, w, gains, caps, p_embb


def test_solve_admission_empty_batch():
    cfg, st, _, w, _, caps, p_embb = ample_instance()
    batch = UrllcBatch([], c_th=cfg.c_th)
    k, I_L, I_E = solve_admission(st, batch, w, np.zeros(0), cfg, embb_powers=p_embb)
    assert k.size == 0 and I_L.size == 0 and np.all(I_E == 0)


def test_solve_admission_ample_resources_matches_oracle():
    cfg, st, batch, w, gains, caps, p_embb = ample_instance()
    k, I_L, I_E = solve_admission(st, batch, w, gains, cfg, embb_powers=p_embb)
    assert k.tolist() == [1, 1]
    assert I_L.sum() == I_E.sum()
    bf = brute_force_allocate(st, batch, w, gains, cfg, caps, embb_powers=p_embb)
    assert int(bf.k.sum()) == int(k.sum())


def test_solve_admission_no_capacity():
    cfg, st, batch, w, gains, _, p_embb = ample_instance()
    blocked = state_of(st.baseline_rate, st.baseline_rate)   # r' = r_e -> caps 0
    k, I_L, I_E = solve_admission(blocked, batch, w, gains, cfg, embb_powers=p_embb)
    assert np.all(k == 0) and np.all(I_L == 0) and np.all(I_E == 0)


def test_solve_allocation_prefers_cheap_donor():
    cfg, st, batch, _, gains, caps, p_embb = ample_instance()
    w = StrategyWeights("PF", np.array([0.2, 0.8]))
    one = UrllcBatch([batch.packets[0]], c_th=cfg.c_th)
    k, _, _ = solve_admission(st, one, w, gains[:1], cfg, embb_powers=p_embb)
    I_E, I_L, assignment, p_L = solve_allocation(
        st, np.flatnonzero(k), w, gains[:1], cfg, embb_powers=p_embb)
    assert I_E[1] == 0 and I_E[0] == I_L[0] > 0
    assert assignment[0, 0] == I_L[0]
    rate = I_L[0] * cfg.W * math.log2(1 + gains[0] / (cfg.sigma2 * cfg.gamma_urllc) * p_L[0])
    assert rate == pytest.approx(cfg.c_th, rel=1e-9)


def test_solve_allocation_zero_admitted():
    cfg, st, batch, w, gains, _, p_embb = ample_instance()
    I_E, I_L, assignment, p_L = solve_allocation(st, np.zeros(0, np.int64), w, gains,
                                                 cfg, embb_powers=p_embb)
    assert np.all(I_E == 0) and np.all(I_L == 0) and np.all(assignment == 0)


def test_solve_allocation_equal_beta_matches_brute_force_loss():
    rng = np.random.default_rng(1)
    hits = 0
    for _ in range(60):
        cfg, st, batch, _, gains, caps, p_embb = make_mini_slot_instance(rng)
        if len(batch) == 0:
            continue
        w = StrategyWeights("PF", np.full(st.n_users, 0.5))
        bf = brute_force_allocate(st, batch, w, gains, cfg, caps, embb_powers=p_embb)
        opt = optimization_allocate(st, batch, w, gains, cfg, embb_powers=p_embb)
        if int(bf.k.sum()) == int(opt.k.sum()) and bf.k.sum() > 0:
            hits += 1
            assert opt.embb_loss == pytest.approx(bf.embb_loss, rel=1e-9, abs=1e-12)
    assert hits >= 10


def test_heuristic_single_packet_rb_count():
    cfg, st, _, w, gains, caps, p_embb = ample_instance()
    one = UrllcBatch([UrllcPacket(0, 0, cfg.packet_bits)], c_th=cfg.c_th)
    dec = heuristic_allocate(st, one, w, gains[:1], cfg, embb_powers=p_embb)
    alpha = gains[0] / (cfg.sigma2 * cfg.gamma_urllc)
    # cheapest donor by weight is user 0 (tie broken by index)
    need = math.ceil(cfg.c_th / (cfg.W * math.log2(1 + alpha * p_embb[0])))
    assert dec.k.tolist() == [1]
    assert dec.I_L[0] == need
    assert dec.p_L[0] == pytest.approx(p_embb[0])


def test_heuristic_no_capacity_drops_all():
    cfg, st, batch, w, gains, _, p_embb = ample_instance()
    blocked = state_of(st.baseline_rate, st.baseline_rate)
    dec = heuristic_allocate(blocked, batch, w, gains, cfg, embb_powers=p_embb)
    assert np.all(dec.k == 0) and np.all(dec.I_E == 0)


def test_brute_force_empty_and_refusal():
    cfg, st, batch, w, gains, caps, p_embb = ample_instance()
    empty = UrllcBatch([], c_th=cfg.c_th)
    dec = brute_force_allocate(st, empty, w, np.zeros(0), cfg, caps, embb_powers=p_embb)
    assert dec.k.size == 0
    big = UrllcBatch([UrllcPacket(i, 0, cfg.packet_bits) for i in range(5)], c_th=cfg.c_th)
    with pytest.raises(ValueError):
        brute_force_allocate(st, big, w, np.ones(5), cfg, caps, embb_powers=p_embb)


def test_brute_force_rejects_unservable_packet():
    cfg = SystemConfig(E=1, U=1, N=0, B=2, M=2, r_th=0.0)
    st = state_of([1e6], [-1e6])
    caps = puncture_caps(st.baseline_rate, st.r_prime, cfg.b)
    batch = UrllcBatch([UrllcPacket(0, 0, cfg.packet_bits)], c_th=cfg.c_th)
    gains = np.array([1e-3]) * cfg.sigma2 * cfg.gamma_urllc   # hopeless channel
    w = StrategyWeights("PF", np.array([1.0]))
    dec = brute_force_allocate(st, batch, w, gains, cfg, caps,
                               embb_powers=np.array([1e-4]))
    assert dec.k.tolist() == [0]


def test_solvers_against_brute_force_and_invariants():
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(200):
        cfg, st, batch, w, gains, caps, p_embb = make_mini_slot_instance(rng)
        bf = brute_force_allocate(st, batch, w, gains, cfg, caps, embb_powers=p_embb)
        opt = optimization_allocate(st, batch, w, gains, cfg, embb_powers=p_embb)
        heu = heuristic_allocate(st, batch, w, gains, cfg, embb_powers=p_embb)
        assert int(opt.k.sum()) == int(bf.k.sum())
        assert int(heu.k.sum()) <= int(bf.k.sum())
        for dec in (bf, opt, heu):
            errs = check_decision_invariants(dec, caps, p_embb, gains, cfg.c_th, cfg)
            assert not errs, errs
        checked += 1
    assert checked == 200


def test_heuristic_jensen_rate_guarantee():
    rng = np.random.default_rng(3)
    admitted_seen = 0
    for _ in range(100):
        cfg, st, batch, w, gains, caps, p_embb = make_mini_slot_instance(
            rng, alpha_lo=500.0, alpha_hi=20000.0)
        dec = heuristic_allocate(st, batch, w, gains, cfg, embb_powers=p_embb)
        alphas = np.asarray(gains) / (cfg.sigma2 * cfg.gamma_urllc)
        for l in np.flatnonzero(dec.k):
            admitted_seen += 1
            rate = dec.I_L[l] * cfg.W * math.log2(1 + alphas[l] * dec.p_L[l])
            donors = dec.assignment[:, l]
            per_donor = sum(int(donors[e]) * cfg.W * math.log2(1 + alphas[l] * p_embb[e])
                            for e in range(st.n_users))
            assert per_donor >= cfg.c_th * (1 - 1e-12)
            assert rate >= per_donor * (1 - 1e-12)   # power averaging only helps
    assert admitted_seen >= 20
