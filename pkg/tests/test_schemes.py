import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from lamm.core import ConfigError, EnvironmentSpec, NotInitializedError, derive_stream
from lamm.harness import ExperimentConfig, run_single
from lamm.schemes import (
    SchemeConfig,
    SchemeState,
    initial_state,
    lri_update,
    lrp_update,
    mam_update,
    mfm_select,
    mfm_update,
    pursuit_update,
    scheme_step,
)
from oracles import brute_force_select, lri_reference, lrp_reference


def state(p, attempts, rewards, **kw):
    return SchemeState(p=np.array(p, float), attempts=np.array(attempts, np.int64),
                       reward_counts=np.array(rewards, np.int64), **kw)


def simplex(r):
    return st.lists(st.floats(0.0, 1.0), min_size=r, max_size=r).filter(lambda v: sum(v) > 1e-6).map(
        lambda v: np.array(v) / sum(v))


def on_simplex(p):
    return p.min() >= 0.0 and p.max() <= 1.0 and abs(p.sum() - 1.0) <= 1e-9


# -- linear schemes ---------------------------------------------------------

def test_lri_penalty_is_inaction():
    assert lri_update((0.5, 0.5), 0, 0, 0.1).tolist() == [0.5, 0.5]


@pytest.mark.parametrize("p, i, a, expected", [
    ((0.5, 0.5), 0, 0.1, (0.55, 0.45)),
    ((0.2, 0.3, 0.5), 2, 0.5, (0.1, 0.15, 0.75)),
])
def test_lri_reward(p, i, a, expected):
    np.testing.assert_allclose(lri_update(p, i, 1, a), expected, atol=1e-15)


def test_lri_invalid_arguments():
    with pytest.raises(ConfigError):
        lri_update((0.5, 0.5), 0, 1, 1.0)
    with pytest.raises(IndexError):
        lri_update((0.5, 0.5), 2, 1, 0.1)


def test_lrp_b_zero_penalty_is_inaction():
    assert lrp_update((0.5, 0.5), 0, 0, 0.1, 0.0).tolist() == [0.5, 0.5]


@pytest.mark.parametrize("p, a, b, expected", [
    ((0.6, 0.4), 0.015, 0.005, (0.597, 0.403)),
    ((0.5, 0.3, 0.2), 0.1, 0.1, (0.45, 0.32, 0.23)),
])
def test_lrp_penalty(p, a, b, expected):
    np.testing.assert_allclose(lrp_update(p, 0, 0, a, b), expected, atol=1e-15)


def test_lrp_reward_equals_lri():
    assert lrp_update((0.2, 0.3, 0.5), 1, 1, 0.2, 0.05).tolist() == lri_update((0.2, 0.3, 0.5), 1, 1, 0.2).tolist()


def test_lrp_rejects_b():
    with pytest.raises(ConfigError, match="b"):
        lrp_update((0.5, 0.5), 0, 0, 0.1, 1.0)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([2, 3, 10]).flatmap(lambda r: st.tuples(simplex(r), st.integers(0, r - 1))),
       st.integers(0, 1), st.floats(1e-4, 0.999), st.floats(0.0, 0.999))
def test_linear_updates_match_reference_and_stay_on_simplex(pi, beta, a, b):
    p, i = pi
    out = lrp_update(p, i, beta, a, b)
    np.testing.assert_allclose(out, lrp_reference(p.tolist(), i, beta, a, b), atol=1e-12)
    assert on_simplex(out)
    out = lri_update(p, i, beta, a)
    np.testing.assert_allclose(out, lri_reference(p.tolist(), i, beta, a), atol=1e-12)
    assert on_simplex(out)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([2, 3, 10]).flatmap(lambda r: st.tuples(simplex(r), st.integers(0, r - 1))),
       st.floats(1e-4, 0.999))
def test_lri_never_moves_on_penalty(pi, a):
    p, i = pi
    assert lri_update(p, i, 0, a).tolist() == p.tolist()


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([2, 3, 10]).flatmap(lambda r: st.tuples(simplex(r), st.integers(0, r - 1))),
       st.integers(0, 1), st.floats(1e-4, 0.999))
def test_lrp_with_zero_b_is_bit_identical_to_lri(pi, beta, a):
    p, i = pi
    assert lrp_update(p, i, beta, a, 0.0).tolist() == lri_update(p, i, beta, a).tolist()


@pytest.mark.parametrize("r", [2, 3, 10])
def test_lri_unit_vectors_are_absorbing(r):
    for i in range(r):
        e = np.eye(r)[i]
        for beta in (0, 1):
            assert lri_update(e, i, beta, 0.3).tolist() == e.tolist()


# -- pursuit ----------------------------------------------------------------

def test_pursuit_step_towards_estimated_best():
    s = state((0.2, 0.8), (4, 4), (3, 1))
    out = pursuit_update(s, 0, 1, 0.1)
    np.testing.assert_allclose(out.p, (0.28, 0.72), atol=1e-15)
    assert out.attempts.tolist() == [5, 4]
    assert out.reward_counts.tolist() == [4, 1]
    # d-bar is (0.8, 0.25)
    assert out.reward_counts[0] / out.attempts[0] == 0.8


def test_pursuit_lambda_one_jumps_to_unit_vector():
    out = pursuit_update(state((0.2, 0.8), (4, 4), (3, 1)), 0, 1, 1.0)
    assert out.p.tolist() == [1.0, 0.0]


def test_pursuit_tie_goes_to_lowest_index():
    out = pursuit_update(state((0.3, 0.3, 0.4), (2, 2, 2), (0, 1, 1)), 0, 1, 0.5)
    # means (1/3, 1/2, 1/2): action 1 wins the tie with action 2
    assert np.argmax(out.p) == 1


def test_pursuit_requires_initialization():
    with pytest.raises(NotInitializedError):
        pursuit_update(state((0.5, 0.5), (3, 0), (1, 0)), 0, 1, 0.1)


def test_pursuit_does_not_mutate_input():
    s = state((0.2, 0.8), (4, 4), (3, 1))
    pursuit_update(s, 0, 1, 0.1)
    assert s.p.tolist() == [0.2, 0.8] and s.attempts.tolist() == [4, 4]


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([2, 3, 10]).flatmap(
    lambda r: st.tuples(simplex(r), st.lists(st.integers(1, 30), min_size=r, max_size=r),
                        st.integers(0, r - 1))),
    st.integers(0, 1), st.floats(0.001, 0.999))
def test_pursuit_contraction_and_order(args, beta, lam):
    p, attempts, i = args
    rewards = [a // 2 for a in attempts]
    s = state(p, attempts, rewards)
    out = pursuit_update(s, i, beta, lam)
    new_means = out.reward_counts / out.attempts
    t = int(np.argmax(new_means))
    assert out.p[t] - p[t] == pytest.approx(lam * (1 - p[t]), abs=1e-15)
    others = [j for j in range(len(p)) if j != t]
    # non-selected components scale by (1 - lam), so their order is kept
    np.testing.assert_allclose(out.p[others], (1 - lam) * p[others], atol=1e-15)
    for j in others:
        for k in others:
            if p[j] < p[k]:
                assert out.p[j] <= out.p[k]
    assert on_simplex(out.p)


# -- multiple fixed models --------------------------------------------------

def test_mfm_select_log_likelihood_example():
    # log-likelihoods: 9 ln 0.1 + ln 0.9 ~ -20.83, 10 ln 0.5 ~ -6.93, 9 ln 0.9 + ln 0.1 ~ -3.25
    assert 9 * math.log(0.1) + math.log(0.9) == pytest.approx(-20.83, abs=0.01)
    assert 10 * math.log(0.5) == pytest.approx(-6.93, abs=0.01)
    assert 9 * math.log(0.9) + math.log(0.1) == pytest.approx(-3.25, abs=0.01)
    q, sel = mfm_select([10, 10], [9, 1], (0.1, 0.5, 0.9))
    assert q[0] == 0.9 and sel == 0


def test_mfm_select_symmetric_counts_tie():
    q, sel = mfm_select([2, 2, 2], [1, 1, 1], (0.3, 0.7))
    assert len(set(q.tolist())) == 1
    assert sel == 0


def test_mfm_select_two_actions():
    q, sel = mfm_select([10, 10], [8, 2], (0.2, 0.8))
    assert q.tolist() == [0.8, 0.2] and sel == 0


def test_mfm_select_errors():
    with pytest.raises(NotInitializedError):
        mfm_select([0, 3], [0, 1], (0.2, 0.8))
    with pytest.raises(ConfigError):
        mfm_select([3, 3], [1, 1], (0.8, 0.2))
    with pytest.raises(ConfigError):
        mfm_select([3, 3], [1, 1], (0.0, 0.5))


def test_mfm_select_survives_large_counts():
    # raw likelihoods underflow here; the log-space comparison does not
    q, sel = mfm_select([5000, 5000], [3500, 2000], (0.3, 0.4, 0.7))
    assert q.tolist() == [0.7, 0.4] and sel == 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 99), min_size=1, max_size=6, unique=True).map(lambda v: sorted(x / 100 for x in v)),
       st.integers(1, 60))
def test_mfm_select_monotone_in_rewards(grid, n):
    chosen = [mfm_select([n], [n1], grid)[0][0] for n1 in range(n + 1)]
    assert all(x <= y for x, y in zip(chosen, chosen[1:]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 99), min_size=1, max_size=5, unique=True).map(lambda v: sorted(x / 100 for x in v)),
       st.lists(st.tuples(st.integers(1, 40), st.floats(0, 1)), min_size=2, max_size=6))
def test_mfm_select_matches_oracle_random(grid, counts):
    attempts = [n for n, _ in counts]
    rewards = [int(f * n) for n, f in counts]
    q, sel = mfm_select(attempts, rewards, grid)
    best, chosen = brute_force_select(attempts, rewards, grid)
    assert q.tolist() == [grid[k] for k in best]
    assert sel == chosen


def test_mfm_update_example():
    s = state((0.5, 0.5), (10, 10), (8, 2))
    out = mfm_update(s, 1, 0, 0.1, (0.2, 0.8))
    np.testing.assert_allclose(out.p, (0.55, 0.45), atol=1e-15)


def test_mfm_update_zero_step_keeps_p():
    s = state((0.3, 0.7), (10, 10), (8, 2))
    assert mfm_update(s, 0, 1, 0.0, (0.2, 0.8)).p.tolist() == [0.3, 0.7]


def test_mfm_update_geometric_approach():
    lam, p0 = 0.05, 0.2
    s = state((p0, 1 - p0), (50, 50), (45, 5))
    for k in range(1, 101):
        s = mfm_update(s, 0, 1, lam, (0.1, 0.5, 0.9))
        assert s.p[0] == pytest.approx(1 - (1 - lam) ** k * (1 - p0), abs=1e-12)


# -- multiple adaptive models -----------------------------------------------

def adaptive_state(r, est):
    est = np.array(est, float)
    return state(np.full(r, 1 / r), [1] * r, [0] * r, estimates=est, loglik=np.zeros_like(est))


def test_mam_unit_gain_tracks_last_response():
    s = adaptive_state(2, [[0.3], [0.6]])
    rng = np.random.default_rng(0)
    for beta in rng.integers(0, 2, size=50):
        s = mam_update(s, 0, int(beta), 0.1, (1.0,))
        assert s.estimates[0, 0] == float(beta)


def test_mam_half_gain_example():
    s = adaptive_state(2, [[0.5], [0.5]])
    s = mam_update(s, 0, 1, 0.1, (0.5,))
    assert s.estimates[0, 0] == 0.75
    s = mam_update(s, 0, 0, 0.1, (0.5,))
    assert s.estimates[0, 0] == 0.375


def _ewma_path(gain, d=0.7, steps=10**4):
    s = adaptive_state(2, [[0.5], [0.5]])
    rng = derive_stream(8, 0)
    values = []
    for _ in range(steps):
        beta = 1 if rng.uniform() < d else 0
        s = mam_update(s, 0, beta, 0.01, (gain,))
        values.append(s.estimates[0, 0])
    return np.array(values[100:])


@pytest.mark.xfail(strict=True, reason="a gain-0.1 EWMA of Bernoulli(0.7) has stationary sd ~0.105, "
                                       "so the [0.55, 0.85] band is only +-1.4 sd and is left routinely")
def test_mam_estimate_band_as_stated():
    tail = _ewma_path(0.1)
    assert tail.min() >= 0.55 and tail.max() <= 0.85


def test_mam_estimate_tracks_stationary_reward():
    gain, d = 0.1, 0.7
    tail = _ewma_path(gain, d)
    sd = math.sqrt(gain / (2 - gain) * d * (1 - d))
    assert abs(tail.mean() - d) < 0.03
    assert abs(tail.std() - sd) < 0.1 * sd
    assert tail.min() >= d - 5 * sd and tail.max() <= d + 5 * sd


def test_mam_prefers_best_scoring_model():
    # model 1 (0.9) predicts a run of rewards far better than model 0 (0.1)
    s = adaptive_state(2, [[0.1, 0.9], [0.5, 0.5]])
    for _ in range(5):
        s = mam_update(s, 0, 1, 0.2, (0.01, 0.01))
    assert s.loglik[0, 1] > s.loglik[0, 0]
    assert s.p[0] > 0.5


def test_mam_requires_initialization():
    s = adaptive_state(2, [[0.5], [0.5]])
    s.attempts[:] = 0
    with pytest.raises(NotInitializedError):
        mam_update(s, 0, 1, 0.1, (0.5,))


# -- scheme_step ------------------------------------------------------------

ENV = EnvironmentSpec((0.7, 0.4))


def test_scheme_step_lri_absorbing():
    cfg = SchemeConfig("LRI", a=0.1)
    s = initial_state(cfg, 2, p0=(1.0, 0.0))
    rng = derive_stream(0, 0)
    for _ in range(100):
        s, rec = scheme_step(s, cfg, ENV, rng)
        assert rec.action == 0
        assert s.p.tolist() == [1.0, 0.0]


ALL_CONFIGS = [
    SchemeConfig("LRI", a=0.05),
    SchemeConfig("LRP", a=0.05, b=0.02),
    SchemeConfig("LREP", a=0.05, b=0.005),
    SchemeConfig("Pursuit", lam=0.05),
    SchemeConfig("MultiFixed", lam=0.05),
    SchemeConfig("MultiAdaptive", lam=0.05),
]


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=lambda c: c.kind)
def test_scheme_step_deterministic(cfg):
    env = EnvironmentSpec((0.8, 0.6, 0.3))

    def path():
        s, rng, out = initial_state(cfg, 3), derive_stream(99, 4), []
        for _ in range(300):
            s, rec = scheme_step(s, cfg, env, rng)
            out.append((rec.step, rec.action, rec.response, rec.p_after.tolist()))
        return out

    assert path() == path()


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=lambda c: c.kind)
def test_scheme_step_matches_simulation_kernel(cfg):
    env = EnvironmentSpec((0.8, 0.6, 0.55, 0.3))
    exp = ExperimentConfig(env=env, scheme=cfg, steps=400, runs=1, master_seed=5, record_stride=1)
    trace = run_single(exp, 3)
    s, rng = initial_state(cfg, env.r), derive_stream(5, 3)
    for k in range(400):
        s, rec = scheme_step(s, cfg, env, rng)
        assert (rec.step, rec.action, rec.response) == (trace.step[k], trace.action[k], trace.response[k])
        assert rec.p_after.tolist() == trace.p[k].tolist()
    assert s.attempts.tolist() == trace.attempts.tolist()
    assert s.reward_counts.tolist() == trace.reward_counts.tolist()


def test_scheme_step_warmup_is_round_robin():
    cfg = SchemeConfig("Pursuit", lam=0.1, init_pulls=2)
    env = EnvironmentSpec((0.2, 0.5, 0.9))
    s, rng = initial_state(cfg, 3), derive_stream(1, 1)
    actions = []
    for _ in range(6):
        s, rec = scheme_step(s, cfg, env, rng)
        actions.append(rec.action)
        assert s.p.tolist() == [1 / 3] * 3
    assert actions == [0, 1, 2, 0, 1, 2]
    s, _ = scheme_step(s, cfg, env, rng)
    assert s.p.tolist() != [1 / 3] * 3


def test_state_invariants_hold_along_path():
    cfg = SchemeConfig("MultiFixed", lam=0.05)
    env = EnvironmentSpec((0.8, 0.6, 0.3))
    s, rng = initial_state(cfg, 3), derive_stream(2, 2)
    for n in range(500):
        s, _ = scheme_step(s, cfg, env, rng)
        assert s.step_index == n + 1 == s.attempts.sum()
        assert np.all(s.reward_counts <= s.attempts) and np.all(s.reward_counts >= 0)
        assert on_simplex(s.p)


def test_lri_regression_baseline():
    # frozen at first computation: 200 seeds, a=0.015, d=(0.7, 0.4), 5000 steps
    cfg = ExperimentConfig(env=ENV, scheme=SchemeConfig("LRI", a=0.015), steps=5000, runs=1,
                           record_stride=5000)
    final = [run_single(cfg.with_(master_seed=seed), 0).p[-1, 0] for seed in range(200)]
    assert np.mean(np.array(final) > 0.95) >= 0.90


@pytest.mark.parametrize("kwargs, key", [
    (dict(kind="LRI", a=0.0), "a"),
    (dict(kind="LRI", a=1.5), "a"),
    (dict(kind="LRP", a=0.1, b=1.0), "b"),
    (dict(kind="LREP", a=0.01, b=0.02), "b"),
    (dict(kind="Pursuit", lam=1.0), "lambda"),
    (dict(kind="MultiFixed", model_grid=(0.5, 0.5)), "model_grid"),
    (dict(kind="MultiAdaptive", gains=(0.0,)), "gains"),
    (dict(kind="Bogus"), "kind"),
])
def test_scheme_config_validation(kwargs, key):
    with pytest.raises(ConfigError) as err:
        SchemeConfig(**kwargs)
    assert err.value.key == key
