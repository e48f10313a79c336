import math

import numpy as np
import pytest

from kgbandits.errors import ConfigError, NumericError
from kgbandits.exact import (
    estimate_memory_mb,
    exact_value_bernoulli_k2,
    greedy_loss_percent,
)
from kgbandits.simulate import (
    RunConfig,
    RunResult,
    paired_gap,
    percentage_lost,
    sample_truths,
    simulate,
    truncation_horizon,
)


def bern_cfg(**kw):
    base = dict(
        family="bernoulli",
        k=2,
        prior=(1.0, 2.0),
        gamma=0.9,
        policies=("greedy", "kg"),
        n_runs=400,
        master_seed=7,
    )
    base.update(kw)
    return RunConfig(**base)


# -- truncation --------------------------------------------------------------


def test_truncation_horizon_formula():
    t = truncation_horizon(0.9, 1e-7, 1.0)
    assert t == 175
    assert 0.9**t / 0.1 < 1e-7 < 0.9 ** (t - 1) / 0.1


def test_truncation_horizon_boundaries():
    assert truncation_horizon(1e-9, 1e-7, 1.0) == 1
    assert truncation_horizon(0.5, 0.9999, 0.0001) == 1


# -- configuration -----------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        bern_cfg(policies=())
    with pytest.raises(ConfigError):
        bern_cfg(policies=("kg", "kg"))
    with pytest.raises(ConfigError):
        bern_cfg(policies=("ckg",))  # correlated-only policy
    with pytest.raises(ConfigError):
        bern_cfg(gamma=1.0)  # infinite undiscounted
    with pytest.raises(ConfigError):
        RunConfig(
            family="exponential",
            k=2,
            prior=(3.0, 1.0),
            gamma=0.9,
            policies=("gi",),
            n_runs=10,
            master_seed=0,
        )


# -- determinism and pairing -------------------------------------------------


def test_simulation_bitwise_deterministic():
    cfg = bern_cfg(n_runs=600)
    a = simulate(cfg)
    b = simulate(cfg)
    assert np.array_equal(a.returns, b.returns)
    assert np.array_equal(a.theta, b.theta)


def test_block_size_and_threads_do_not_change_results():
    cfg = bern_cfg(n_runs=700, block_size=128)
    base = simulate(cfg)
    for variant in (
        bern_cfg(n_runs=700, block_size=701),
        bern_cfg(n_runs=700, block_size=97, threads=3),
    ):
        out = simulate(variant)
        assert np.array_equal(out.returns, base.returns)


def test_adding_policy_never_perturbs_others():
    small = simulate(bern_cfg(policies=("greedy", "kg")))
    big = simulate(bern_cfg(policies=("greedy", "nkg", "kg", "pkg")))
    assert np.array_equal(
        small.returns[small.policies.index("kg")],
        big.returns[big.policies.index("kg")],
    )
    assert np.array_equal(
        small.returns[small.policies.index("greedy")],
        big.returns[big.policies.index("greedy")],
    )


def test_theta_paired_across_policies():
    cfg = bern_cfg()
    res = simulate(cfg)
    assert np.array_equal(res.theta, sample_truths(cfg, 0, cfg.n_runs))
    # truths depend on the master seed and run index only
    cfg2 = bern_cfg(policies=("pkg",))
    assert np.array_equal(sample_truths(cfg2, 0, cfg.n_runs), res.theta)


def test_truth_marginals_match_prior():
    cfg = bern_cfg(n_runs=40000)
    theta = sample_truths(cfg, 0, cfg.n_runs)
    # Beta(1,1) = uniform: mean 1/2, variance 1/12
    assert abs(theta.mean() - 0.5) < 4 * math.sqrt(1 / 12 / theta.size)
    assert abs(theta.var() - 1 / 12) < 3e-3


# -- degenerate setups -------------------------------------------------------


def test_near_degenerate_priors_make_policies_equal():
    cfg = RunConfig(
        family="gaussian",
        k=2,
        prior=(0.0, 1e12),
        gamma=0.9,
        policies=("greedy", "kg", "kgi", "thompson"),
        n_runs=50,
        master_seed=1,
        tau=1.0,
        truncation_eps=1e-4,
    )
    res = simulate(cfg)
    spread = res.returns.max(axis=0) - res.returns.min(axis=0)
    assert spread.max() < 1e-4


def test_single_step_horizon_reduces_to_greedy():
    cfg = RunConfig(
        family="bernoulli",
        k=2,
        prior=(1.0, 3.0),
        gamma=1.0,
        horizon=1,
        policies=("greedy", "kg", "pkg", "thompson"),
        n_runs=3000,
        master_seed=3,
    )
    res = simulate(cfg)
    for name in ("kg", "pkg"):
        assert np.array_equal(
            res.returns[res.policies.index(name)],
            res.returns[res.policies.index("greedy")],
        )
    # identical priors: every policy has the same Bayes mean at one step
    gap, se = paired_gap(res, "greedy", "thompson")
    assert abs(gap) < 3 * se + 1e-12


# -- percentage lost ---------------------------------------------------------


def _fake_result(returns, names):
    cfg = bern_cfg(n_runs=returns.shape[1], policies=names)
    return RunResult(
        config=cfg,
        policies=names,
        returns=returns,
        theta=np.zeros((returns.shape[1], 2)),
        wall_ms=0.0,
    )


def test_percentage_lost_identities():
    r = np.vstack([np.full(50, 4.0), np.full(50, 2.0)])
    res = _fake_result(r, ("greedy", "kg"))
    out = percentage_lost(res, "greedy")
    assert out["greedy"] == (0.0, 0.0)
    assert out["kg"][0] == pytest.approx(50.0)
    ext = percentage_lost(res, 4.0)
    assert ext["kg"][0] == pytest.approx(50.0)


def test_percentage_lost_rejects_nonpositive_reference():
    r = np.vstack([np.full(10, 0.0), np.full(10, -1.0)])
    res = _fake_result(r, ("greedy", "kg"))
    with pytest.raises(NumericError):
        percentage_lost(res, "greedy")
    out = percentage_lost(res, "greedy", absolute=True)
    assert out["kg"][0] == pytest.approx(1.0)


# -- exact value iteration ---------------------------------------------------


def test_exact_gamma_zero_is_max_prior_mean():
    v = exact_value_bernoulli_k2("optimal", 0.0, priors=((1, 3), (2, 3)))
    assert v == pytest.approx(2 / 3)
    assert exact_value_bernoulli_k2("greedy", 0.0, priors=((1, 3), (2, 3))) == v


def test_exact_optimum_dominates_heuristics():
    for gamma in (0.3, 0.6, 0.85):
        vals = {
            p: exact_value_bernoulli_k2(p, gamma, trunc=120)
            for p in ("optimal", "greedy", "kg", "nkg", "pkg", "kgi")
        }
        for p, v in vals.items():
            assert v <= vals["optimal"] + 1e-12, p


def test_exact_memory_guard():
    assert estimate_memory_mb(100) < 3
    with pytest.raises(ConfigError):
        exact_value_bernoulli_k2("greedy", 0.9, memory_budget_mb=0.001)


def test_simulated_matches_exact_value():
    gamma = 0.85
    for policy in ("greedy", "kg"):
        exact = exact_value_bernoulli_k2(policy, gamma)
        cfg = bern_cfg(gamma=gamma, policies=(policy,), n_runs=6000, master_seed=11)
        res = simulate(cfg)
        runs = res.returns[0]
        se = runs.std(ddof=1) / math.sqrt(runs.size)
        assert abs(runs.mean() - exact) < 3 * se


def test_greedy_loss_direction():
    # losses grow with the discount factor on uniform priors
    a = greedy_loss_percent(0.5, trunc=60)
    b = greedy_loss_percent(0.8, trunc=120)
    assert 0.0 <= a < b


# -- policy coverage in simulation -------------------------------------------


def test_gi_policy_runs_and_beats_kg_bernoulli():
    cfg = RunConfig(
        family="bernoulli",
        k=2,
        prior=(1.0, 11.0),
        gamma=0.95,
        policies=("gi", "kg", "greedy"),
        n_runs=4000,
        master_seed=5,
        gi_table_depth=150,
    )
    res = simulate(cfg)
    gap, se = paired_gap(res, "gi", "kg")
    assert gap > 0  # low-mean priors: dominated actions hurt KG


def test_exponential_policies_run():
    cfg = RunConfig(
        family="exponential",
        k=2,
        prior=(3.0, 1.0),
        gamma=0.9,
        policies=("kg", "pkg", "kgi", "greedy"),
        n_runs=500,
        master_seed=9,
        truncation_eps=1e-5,
    )
    res = simulate(cfg)
    assert np.isfinite(res.returns).all()


def test_gaussian_kgi_factor_matches_bisection():
    from kgbandits.families import gaussian
    from kgbandits.indices import kgi_index_arr
    from kgbandits.simulate import _gaussian_kgi_factor

    fam = gaussian(1.7)
    H = 9.0
    q = _gaussian_kgi_factor(H)
    S = np.array([0.4, -1.0, 3.0])
    N = np.array([1.0, 2.5, 7.0])
    sd = np.sqrt(1.0 / N - 1.0 / (N + fam.tau))
    fast = S / N + sd * q
    slow = kgi_index_arr(S, N, H, fam)
    assert np.abs(fast - slow).max() < 1e-8


def test_exponential_kgi_homogeneity():
    # KGI(S, n, H) = S * KGI(1, n, H): the engine's per-n root table must
    # agree with the direct bisection
    from kgbandits.families import exponential
    from kgbandits.indices import kgi_index_arr

    rng = np.random.default_rng(17)
    S = rng.uniform(0.2, 8.0, size=200)
    N = rng.uniform(0.5, 30.0, size=200)
    H = 9.0
    direct = kgi_index_arr(S, N, H, exponential())
    scaled = S * kgi_index_arr(np.ones_like(S), N, H, exponential())
    assert np.abs(direct / scaled - 1.0).max() < 1e-9


def test_correlated_simulation_smoke():
    cfg = RunConfig(
        family="gaussian",
        k=4,
        prior=(0.0, 1.0),
        gamma=0.9,
        policies=("ckg", "ikg", "greedy"),
        n_runs=200,
        master_seed=13,
        correlated=True,
        decay=0.5,
        truncation_eps=1e-3,
    )
    res = simulate(cfg)
    assert np.isfinite(res.returns).all()
    again = simulate(cfg)
    assert np.array_equal(res.returns, again.returns)
