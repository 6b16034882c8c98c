import csv
import random

import numpy as np
import pytest

from relaycache import (CacheVector, ConfigurationError, DomainError,
                        NetworkConfig, SlotPolicy, Urp, init_state,
                        per_urp_coop, per_urp_coop_separate,
                        priority_probability, run, run_separate_rs, step)
from relaycache.sampler import PopularityModel, sample_batch


def _single_gateway_config(M=2, K=6, L=6, budget=None):
    budget = float(L) if budget is None else budget
    return NetworkConfig(M=M, K=K, L=L, file_sizes=(1.0,) * L,
                         cache_budget=budget, ownership=(1,) * L,
                         gamma=1.0, seed=0)


def test_policy_validation():
    SlotPolicy(mode="fair-coin", delta=0.5)
    with pytest.raises(ConfigurationError):
        SlotPolicy(mode="greedy", delta=0.5)
    with pytest.raises(ConfigurationError):
        SlotPolicy(mode="fair-coin", delta=0.0)
    with pytest.raises(ConfigurationError):
        SlotPolicy(mode="fair-coin", delta=1.5)


def test_init_state_parity_flags(example_config, example_pi, example_q):
    state = init_state(example_config, example_q, example_pi)
    assert len(state.eligible(1)) == 9
    assert len(state.eligible(2)) == 3
    zero = init_state(example_config, CacheVector(np.zeros(20)), example_pi)
    assert not zero.eligible(1) and not zero.eligible(2)
    ones = init_state(example_config,
                      CacheVector(np.ones(20), budget_exempt=True), example_pi)
    assert len(ones.eligible(1)) == 9 and len(ones.eligible(2)) == 3


def test_init_state_validates(example_config, example_q):
    with pytest.raises(DomainError):
        init_state(example_config, example_q, Urp(pi=(1, 2, 3)))
    with pytest.raises(DomainError):
        init_state(example_config, CacheVector(np.full(20, 0.9)),
                   Urp(pi=(1,) * 12))


def test_step_records_and_invariants(example_config, example_pi, example_q):
    state = init_state(example_config, example_q, example_pi)
    policy = SlotPolicy(mode="fair-coin", delta=1 / 16)
    rng = random.Random(1)
    M = example_config.M
    for _ in range(600):
        mode, b, users, bits = step(state, policy, rng)
        assert mode in ("coop", "bsonly")
        assert b in (1, 2)
        expected = 3 * M if mode == "coop" else M
        assert len(users) == expected
        assert len(set(users)) == expected
        side = state.k1 if b == 1 else state.k2
        assert set(users) <= set(side)
        assert 0 < bits <= expected * policy.delta + 1e-12
        for k in range(example_config.K):
            assert -1e-12 <= state.c[k] <= state.qf[k] + 1e-12
            assert state.c[k] + state.n[k] <= 1 + 1e-12


def test_bsonly_forced_to_large_side():
    # 11 users on BS1, 1 on BS2: with nothing cached every slot is BS-only
    # and only BS1 has enough users to transmit
    cfg = NetworkConfig(M=2, K=12, L=4, file_sizes=(1.0,) * 4,
                        cache_budget=2.0, ownership=(1, 1, 1, 2),
                        gamma=1.0, seed=0)
    pi = Urp(pi=(1,) * 11 + (4,))
    res = run(cfg, CacheVector(np.zeros(4)), pi,
              SlotPolicy(mode="fair-coin", delta=1 / 8), 2000, seed=3)
    assert res.coop_total == 0
    assert res.bsonly_slots == (2000, 0)
    assert res.dof_count == cfg.M


def test_uncached_fair_coin_splits_evenly(example_config, example_pi):
    res = run(example_config, CacheVector(np.zeros(20)), example_pi,
              SlotPolicy(mode="fair-coin", delta=1 / 8), 100000, seed=9)
    assert res.empirical_coop == 0.0
    share = res.bsonly_slots[0] / res.slots_total
    assert abs(share - 0.5) < 0.01
    assert res.idle_slots == 0
    assert res.coop_total + res.bsonly_total + res.idle_slots == res.slots_total


def test_fully_cached_single_gateway_always_cooperates():
    cfg = _single_gateway_config(M=2, K=6)
    pi = Urp(pi=(1, 2, 3, 4, 5, 6))
    q = CacheVector(np.ones(6))
    res = run(cfg, q, pi, SlotPolicy(mode="fair-coin", delta=1 / 32),
              5000, seed=4)
    assert res.empirical_coop == 1.0
    assert res.dof_count == 3 * cfg.M
    assert res.coop_slots == (5000, 0)


def test_run_determinism(example_config, example_pi, example_q):
    policy = SlotPolicy(mode="priority-2", delta=1 / 64)
    a = run(example_config, example_q, example_pi, policy, 20000, seed=77)
    b = run(example_config, example_q, example_pi, policy, 20000, seed=77)
    assert a == b
    c = run(example_config, example_q, example_pi, policy, 20000, seed=78)
    assert a != c


def test_throughput_accounting(example_config, example_pi, example_q):
    res = run(example_config, example_q, example_pi,
              SlotPolicy(mode="fair-coin", delta=1 / 8), 50000, seed=5)
    thr = np.array(res.per_user_throughput)
    assert np.all(thr > 0)
    # delivered bits cannot exceed one unit per completed segment plus the
    # in-flight one: slots * delta * scheduled <= ...; check via totals
    total_segments = thr.sum() * res.slots_total
    delivered_cap = (res.coop_total * 3 * example_config.M
                     + res.bsonly_total * example_config.M) * (1 / 8)
    assert total_segments <= delivered_cap + example_config.K


def test_trace_dump(tmp_path, example_config, example_pi, example_q):
    path = tmp_path / "trace.csv"
    run(example_config, example_q, example_pi,
        SlotPolicy(mode="fair-coin", delta=1 / 8), 50, seed=6,
        trace_path=path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["slot", "mode", "serving_bs", "scheduled_users",
                       "delivered_bits"]
    assert len(rows) == 51
    users = rows[1][3].split(";")
    assert len(users) in (example_config.M, 3 * example_config.M)


def test_priority_modes_prefer_their_bs():
    # both gateways fully cached with exactly 3M users each: both cache
    # states stay 1, so the priority BS serves every slot
    cfg = NetworkConfig(M=1, K=6, L=6, file_sizes=(1.0,) * 6,
                        cache_budget=6.0, ownership=(1, 1, 1, 2, 2, 2),
                        gamma=1.0, seed=0)
    pi = Urp(pi=(1, 2, 3, 4, 5, 6))
    q = CacheVector(np.ones(6))
    res1 = run(cfg, q, pi, SlotPolicy(mode="priority-1", delta=1 / 16),
               1000, seed=7)
    assert res1.coop_slots == (1000, 0)
    res2 = run(cfg, q, pi, SlotPolicy(mode="priority-2", delta=1 / 16),
               1000, seed=7)
    assert res2.coop_slots == (0, 1000)


def test_convergence_to_fixed_point_on_balanced_split():
    # a 6/6 request split keeps every packing slot at the gathered minimum,
    # where the closed form is the exact fluid limit; the empirical error
    # then shrinks as delta -> 0
    cfg = NetworkConfig(M=2, K=12, L=20, file_sizes=(1.0,) * 20,
                        cache_budget=4.0, ownership=(1,) * 10 + (2,) * 10,
                        gamma=2.0, seed=0)
    pi = Urp(pi=(1, 2, 3, 4, 5, 6, 11, 12, 13, 14, 15, 16))
    rng = np.random.default_rng(21)
    raw = rng.uniform(0.1, 0.5, 20)
    raw *= cfg.cache_budget / raw.sum()
    q = CacheVector(raw)
    st = per_urp_coop(cfg, q, pi)
    target = priority_probability(st.m1, st.m2, st.i1, st.i2, 1).p_total
    errs = []
    for delta, slots in ((1 / 64, 60000), (1 / 256, 240000), (1 / 1024, 960000)):
        res = run(cfg, q, pi, SlotPolicy(mode="priority-1", delta=delta),
                  slots, seed=100)
        errs.append(abs(res.empirical_coop - target))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 0.003


def test_worked_example_against_fixed_point(example_config, example_pi,
                                            example_q):
    st = per_urp_coop(example_config, example_q, example_pi)
    target = priority_probability(st.m1, st.m2, st.i1, st.i2, 1).p_total
    res = run(example_config, example_q, example_pi,
              SlotPolicy(mode="priority-1", delta=1 / 512), 200000, seed=11)
    assert abs(res.empirical_coop - target) < 0.012


# ----------------------------------------------------------- separate-RS

def test_separate_rs_uncached_matches_bs_only(example_config, example_pi):
    res = run_separate_rs(example_config, CacheVector(np.zeros(20)),
                          example_pi, 5000, seed=1)
    assert res.empirical_coop == 0.0
    assert res.dof_count == example_config.M


def test_separate_rs_saturation_ceiling():
    # full caching with >= 2M perpetually eligible users on each side keeps
    # every slot cooperative at the separate-relay ceiling of 2M streams
    cfg = NetworkConfig(M=2, K=8, L=8, file_sizes=(1.0,) * 8,
                        cache_budget=8.0, ownership=(1,) * 4 + (2,) * 4,
                        gamma=1.0, seed=0)
    pi = Urp(pi=(1, 2, 3, 4, 5, 6, 7, 8))
    q = CacheVector(np.ones(8))
    res = run_separate_rs(cfg, q, pi, 4000, seed=2)
    assert res.empirical_coop == 1.0
    assert res.dof_count == 2 * cfg.M


def test_separate_rs_budget_guard(example_config, example_pi):
    q = np.zeros(20)
    q[:5] = 0.9      # 4.5 on gateway 1 > half budget 2
    with pytest.raises(DomainError):
        run_separate_rs(example_config.with_budget(4.0), CacheVector(q),
                        example_pi, 100, seed=0)


def test_separate_rs_fixed_point_on_exact_split():
    # 4 = 2M users on gateway 1 with equal masses: the 2M-slot packing is
    # a pass-through and the reconstructed fixed point should be exact
    cfg = NetworkConfig(M=2, K=12, L=4, file_sizes=(1.0,) * 4,
                        cache_budget=4.0, ownership=(1, 1, 2, 2),
                        gamma=1.0, seed=0)
    pi = Urp(pi=(1, 1, 1, 1) + (3,) * 8)
    q = CacheVector(np.array([0.5, 0.0, 0.0, 0.0]))
    target = per_urp_coop_separate(cfg, q, pi)
    res = run_separate_rs(cfg, q, pi, 400000, seed=3, delta=1 / 512)
    assert abs(res.empirical_coop - target) < 0.01


def test_shared_beats_separate_in_paired_sweep():
    # figure-style comparison: each architecture runs its own optimized
    # placement; the shared relay's 3M-stream cooperation wins on average
    from relaycache.optimizer import (Polyhedron, separate_rs_placement,
                                      vertex_walk)
    cfg0 = NetworkConfig(M=2, K=12, L=20, file_sizes=(1.0,) * 20,
                         cache_budget=4.0, ownership=(1,) * 10 + (2,) * 10,
                         gamma=2.0, seed=0)
    model = PopularityModel.from_config(cfg0)
    train = sample_batch(model, 80, seed=22, stream=1)
    profiles = sample_batch(model, 12, seed=24, stream=6)
    # at cache budgets large enough for the shared system to assemble its
    # 3M-user cooperation groups, its 3M-stream slots beat the separate
    # relays' 2M ceiling; at very small budgets the separate baseline's
    # lower threshold lets it cooperate more often in simulation even
    # though the analytic contract curves keep the shared system on top
    cfg = cfg0.with_budget(4.0)
    q_shared, _, _ = vertex_walk(train, Polyhedron.from_config(cfg), cfg)
    q_sep, _, _ = separate_rs_placement(train, cfg)
    shared_mean = np.mean([
        run(cfg, q_shared, pi, SlotPolicy(mode="fair-coin", delta=1 / 64),
            30000, seed=200 + i).dof_count
        for i, pi in enumerate(profiles)])
    sep_mean = np.mean([
        run_separate_rs(cfg, q_sep, pi, 30000, seed=300 + i,
                        delta=1 / 64).dof_count
        for i, pi in enumerate(profiles)])
    assert shared_mean >= sep_mean + 0.3
    assert sep_mean <= 2 * cfg.M + 1e-12
