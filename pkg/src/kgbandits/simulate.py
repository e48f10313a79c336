"""Truth-from-prior Monte-Carlo evaluation of bandit policies.

Each run draws one latent parameter vector from the prior, then every
policy plays the same truth from the same prior beliefs, accumulating the
discounted true mean of whatever arm it pulls.  Runs are paired: the
parameter draw for run r depends only on (master seed, r), and each
policy's reward stream is keyed by (master seed, policy name, step, run)
through counter-based Philox streams, so adding or removing a policy never
perturbs another policy's randomness and results are bitwise reproducible
at any worker count.

All state evolves in parallel numpy arrays across the runs of a block;
policies are evaluated through the vectorised kernels from ``policies``,
``indices`` and ``correlated``.
"""

from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import betaincinv, gammaincinv, ndtri

from .correlated import ckg_scores_batch, ikg_bonus_batch, mv_update_batch, power_exp_covariance
from .errors import ConfigError, NumericError
from .families import RewardFamily, gaussian
from .indices import (
    bernoulli_kgi_root,
    gibl_index,
    gicg_index,
    kgi_index_arr,
    normal_moment_args,
)
from .policies import (
    dominated_mask,
    fh_discount,
    kg_bonus_arr,
    pkg_bonus_arr,
)
from .tables import (
    bernoulli_gi_lookup,
    gaussian_bonus_lookup,
    get_bernoulli_gi_table,
    get_gaussian_bonus_table,
)

INDEPENDENT_POLICIES = (
    "greedy",
    "kg",
    "nkg",
    "pkg",
    "kgi",
    "gi",
    "gibl",
    "gicg",
    "thompson",
)
CORRELATED_POLICIES = ("ckg", "ikg", "gi", "kgi", "gibl", "gicg", "greedy")
NON_DOMINATED_POLICIES = ("nkg", "pkg", "kgi", "gi")


def truncation_horizon(gamma: float, eps: float, reward_scale: float = 1.0) -> int:
    """Smallest T with gamma^T * scale / (1-gamma) < eps (at least 1)."""
    if not (0.0 < gamma < 1.0):
        if gamma <= 0.0:
            return 1
        raise ConfigError("truncation is only defined for gamma < 1")
    if not (0.0 < eps < 1.0):
        raise ConfigError(f"truncation eps must lie in (0,1), got {eps}")
    bound = eps * (1.0 - gamma) / reward_scale
    if bound >= 1.0:
        return 1
    t = max(1, math.ceil(math.log(bound) / math.log(gamma)))
    while gamma**t * reward_scale / (1.0 - gamma) >= eps:  # guard rounding
        t += 1
    return t


@dataclass(frozen=True)
class RunConfig:
    """One simulation setup: family, priors, horizon and the policy list."""

    family: str
    k: int
    prior: tuple[float, float]
    gamma: float
    policies: tuple[str, ...]
    n_runs: int
    master_seed: int
    horizon: float = math.inf
    tau: float = 1.0
    correlated: bool = False
    decay: float = 0.5
    truncation_eps: float = 1e-7
    reward_scale: float | None = None
    gi_table_depth: int = 300
    block_size: int = 8192
    threads: int = 1

    def __post_init__(self):
        if self.family not in ("bernoulli", "exponential", "gaussian"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.correlated and self.family != "gaussian":
            raise ConfigError("correlated beliefs are Gaussian only")
        if self.k < 2 or self.n_runs < 1:
            raise ConfigError("need k >= 2 and n_runs >= 1")
        if not self.policies:
            raise ConfigError("empty policy list")
        pool = CORRELATED_POLICIES if self.correlated else INDEPENDENT_POLICIES
        for p in self.policies:
            if p not in pool:
                raise ConfigError(f"policy {p!r} not available for this setup")
        if len(set(self.policies)) != len(self.policies):
            raise ConfigError("duplicate policy names")
        if math.isinf(self.horizon):
            if not (0.0 < self.gamma < 1.0):
                raise ConfigError("infinite horizon needs gamma in (0,1)")
        elif not (0.0 < self.gamma <= 1.0) or int(self.horizon) != self.horizon:
            raise ConfigError("finite horizon needs integer T and gamma in (0,1]")
        if not (0.0 < self.truncation_eps < 1.0):
            raise ConfigError("truncation eps must lie in (0,1)")
        if "gi" in self.policies:
            if self.family == "exponential":
                raise ConfigError("the exact-GI policy supports Bernoulli and Gaussian arms")
            if not math.isinf(self.horizon):
                raise ConfigError("the exact-GI policy is implemented for infinite horizons")
        fam = self.family_obj()
        from .families import ArmBelief, validate_belief

        validate_belief(ArmBelief(*self.prior), fam)

    def family_obj(self) -> RewardFamily:
        if self.family == "gaussian":
            return gaussian(self.tau)
        return RewardFamily(self.family)

    def steps(self) -> int:
        if not math.isinf(self.horizon):
            return int(self.horizon)
        return truncation_horizon(self.gamma, self.truncation_eps, self.default_scale())

    def default_scale(self) -> float:
        if self.reward_scale is not None:
            return self.reward_scale
        mu0 = self.prior[0] / self.prior[1]
        if self.family == "bernoulli":
            return 1.0
        if self.family == "exponential":
            return 3.0 * mu0
        return abs(mu0) + 3.0 * (1.0 / math.sqrt(self.prior[1]) + 1.0 / math.sqrt(self.tau))


@dataclass(frozen=True)
class RunResult:
    """Per-(policy, run) discounted true-mean returns plus the paired truths."""

    config: RunConfig
    policies: tuple[str, ...]
    returns: np.ndarray  # (n_policies, n_runs)
    theta: np.ndarray  # (n_runs, k)
    wall_ms: float

    def mean_return(self, policy: str) -> float:
        return float(self.returns[self.policies.index(policy)].mean())


def percentage_lost(
    result: RunResult, reference: str | float, absolute: bool = False
) -> dict[str, tuple[float, float]]:
    """Mean percentage of reward lost versus the reference, with paired
    standard errors.  ``reference`` is a policy in the result set or an
    externally computed exact value."""
    R = result.returns.shape[1]
    if isinstance(reference, str):
        ref_runs = result.returns[result.policies.index(reference)]
        v_ref = float(ref_runs.mean())
    else:
        ref_runs = None
        v_ref = float(reference)
    out = {}
    for i, name in enumerate(result.policies):
        diff = (ref_runs - result.returns[i]) if ref_runs is not None else (
            v_ref - result.returns[i]
        )
        mean_diff = float(diff.mean())
        se_diff = float(diff.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
        if absolute:
            out[name] = (mean_diff, se_diff)
            continue
        if v_ref <= 0.0:
            raise NumericError(
                f"reference mean return {v_ref} is not positive; "
                "use absolute=True for zero-mean problems"
            )
        out[name] = (100.0 * mean_diff / v_ref, 100.0 * se_diff / v_ref)
    return out


def paired_gap(result: RunResult, better: str, worse: str) -> tuple[float, float]:
    """Mean per-run return difference (better - worse) and its paired SE."""
    a = result.returns[result.policies.index(better)]
    b = result.returns[result.policies.index(worse)]
    d = a - b
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size))


# ---------------------------------------------------------------------------
# Counter-based random streams.
# ---------------------------------------------------------------------------

_SLOT = 64  # uniform draws reserved per (run, step) in a stream


def _philox(*parts) -> np.random.Generator:
    blob = "\x1f".join(str(p) for p in parts).encode()
    key = np.frombuffer(hashlib.sha256(blob).digest()[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _pad4(x: int) -> int:
    return (x + 3) // 4 * 4


def _uniform_block(parts, offset: int, count: int) -> np.ndarray:
    # Philox advances its counter in blocks of four 64-bit outputs, so all
    # stream offsets are kept 4-aligned to make blocks position-addressable
    if offset % 4:
        raise AssertionError(f"stream offset {offset} is not 4-aligned")
    gen = _philox(*parts)
    gen.bit_generator.advance(offset // 4)
    return gen.random(count)


def sample_truths(cfg: RunConfig, r0: int, r1: int) -> np.ndarray:
    """Latent parameters for runs [r0, r1), independent of the policy list."""
    R = r1 - r0
    u = _uniform_block((cfg.master_seed, "truth"), r0 * _SLOT, R * _SLOT)
    u = u.reshape(R, _SLOT)[:, : cfg.k]
    u = np.clip(u, 1e-15, 1.0 - 1e-15)
    s0, n0 = cfg.prior
    if cfg.correlated:
        z = ndtri(u)
        cov = power_exp_covariance(cfg.k, cfg.decay)
        chol = np.linalg.cholesky(cov)
        mu0 = s0 / n0
        return mu0 + z @ chol.T
    if cfg.family == "bernoulli":
        return betaincinv(s0, n0 - s0, u)
    if cfg.family == "exponential":
        return gammaincinv(n0 + 1.0, u) * (1.0 / s0)
    return s0 / n0 + ndtri(u) / math.sqrt(n0)


def _true_means(cfg: RunConfig, theta: np.ndarray) -> np.ndarray:
    if cfg.family == "exponential":
        return 1.0 / theta
    return theta


def _rewards_from_uniform(cfg: RunConfig, theta_sel, u):
    u = np.clip(u, 1e-15, 1.0 - 1e-15)
    if cfg.family == "bernoulli":
        return (u < theta_sel).astype(float)
    if cfg.family == "exponential":
        return -np.log1p(-u) / theta_sel
    return theta_sel + ndtri(u) / math.sqrt(cfg.tau)


# ---------------------------------------------------------------------------
# Step context and policy implementations.
# ---------------------------------------------------------------------------


@dataclass
class StepCtx:
    family: RewardFamily
    H: float
    gamma_eff: float  # infinite-horizon-equivalent discount for static indices
    t: int
    cfg: RunConfig
    tables: dict
    kgi_gauss_factor: float | None = None


def _step_multiplier(cfg: RunConfig, t: int) -> float:
    if math.isinf(cfg.horizon):
        return cfg.gamma / (1.0 - cfg.gamma)
    s = cfg.horizon - t
    if cfg.gamma == 1.0:
        return s - 1.0
    return cfg.gamma * (1.0 - cfg.gamma ** (s - 1.0)) / (1.0 - cfg.gamma)


def _effective_gamma(cfg: RunConfig, t: int) -> float:
    """Discount handed to static infinite-horizon index policies; finite
    undiscounted horizons are adapted dynamically via fh_discount."""
    if math.isinf(cfg.horizon):
        return cfg.gamma
    if cfg.gamma == 1.0:
        return fh_discount(t, int(cfg.horizon))
    return cfg.gamma


def _gaussian_kgi_factor(H: float) -> float:
    """q solving q = H * f(-q): Gaussian KGI bonus is sd_tilde * q."""
    if H <= 0.0:
        return 0.0
    from scipy.special import ndtr

    f = lambda q: q - H * (-q * (1.0 - ndtr(q)) + math.exp(-0.5 * q * q) / math.sqrt(2 * math.pi))
    lo, hi = 0.0, 1.0
    while f(hi) < 0.0:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _indices_for(policy: str, S, N, ctx: StepCtx):
    fam, cfg = ctx.family, ctx.cfg
    if policy == "kgi":
        if fam.kind == "bernoulli":
            return bernoulli_kgi_root(S, N, ctx.H)
        if fam.kind == "gaussian":
            if ctx.kgi_gauss_factor is None:
                ctx.kgi_gauss_factor = _gaussian_kgi_factor(ctx.H)
            sd = np.sqrt(1.0 / N - 1.0 / (N + fam.tau))
            return S / N + sd * ctx.kgi_gauss_factor
        # Exponential beliefs are degree-1 homogeneous in (total, charge):
        # KGI(S, n, H) = S * KGI(1, n, H), so one root per distinct n serves
        # the whole block; n moves on the integer offset lattice of the prior
        key = ("exp_kgi_unit", ctx.H)
        roots = ctx.tables.get(key)
        if roots is None:
            ns = cfg.prior[1] + np.arange(cfg.steps() + 1, dtype=float)
            roots = kgi_index_arr(np.ones_like(ns), ns, ctx.H, fam)
            ctx.tables[key] = roots
        return S * roots[np.rint(N - cfg.prior[1]).astype(int)]
    if policy == "gi":
        if fam.kind == "bernoulli":
            table = ctx.tables["bern_gi"]
            depth = table.header["depth"]
            m = np.rint(N - table.header["base_n"]).astype(int)
            inside = m <= depth
            out = np.where(inside, _safe_tri_lookup(table, S, N, inside), 0.0)
            if (~inside).any():
                out = np.where(
                    inside, out, bernoulli_kgi_root(S, N, ctx.H)
                )  # deep-state fallback: learning bonuses are negligible there
            return out
        table = ctx.tables["gauss_bonus"]
        return S / N + gaussian_bonus_lookup(table, N / fam.tau) / math.sqrt(fam.tau)
    if policy in ("gibl", "gicg"):
        g = ctx.gamma_eff
        if g <= 0.0:
            return S / N  # final epoch of an undiscounted horizon: pure greedy
        mu, n_eff, tau_eff = normal_moment_args(S, N, fam)
        fn = gibl_index if policy == "gibl" else gicg_index
        return fn(mu, n_eff, tau_eff, g)
    raise ConfigError(f"{policy!r} is not an index policy")


def _safe_tri_lookup(table, S, N, inside):
    S = np.where(inside, S, table.header["base_total"])
    N = np.where(inside, N, table.header["base_n"])
    return bernoulli_gi_lookup(table, S, N)


def _decide_independent(policy: str, S, N, ctx: StepCtx, u_policy) -> np.ndarray:
    fam = ctx.family
    M = S / N
    if policy == "greedy":
        return np.argmax(M, axis=1)
    if policy == "kg":
        return np.argmax(M + ctx.H * kg_bonus_arr(S, N, fam), axis=1)
    if policy == "nkg":
        scores = M + ctx.H * kg_bonus_arr(S, N, fam)
        return np.argmax(np.where(dominated_mask(M, N), -np.inf, scores), axis=1)
    if policy == "pkg":
        return np.argmax(M + ctx.H * pkg_bonus_arr(S, N, fam), axis=1)
    if policy == "thompson":
        u = np.clip(u_policy, 1e-15, 1.0 - 1e-15)
        if fam.kind == "bernoulli":
            draws = betaincinv(S, N - S, u)
        elif fam.kind == "exponential":
            draws = 1.0 / (gammaincinv(N + 1.0, u) / S)  # true mean 1/theta
        else:
            draws = M + ndtri(u) / np.sqrt(N)
        return np.argmax(draws, axis=1)
    return np.argmax(_indices_for(policy, S, N, ctx), axis=1)


def _decide_correlated(policy: str, mean, cov, ctx: StepCtx) -> np.ndarray:
    cfg = ctx.cfg
    if policy == "greedy":
        return np.argmax(mean, axis=1)
    if policy == "ckg":
        return np.argmax(mean + ctx.H * ckg_scores_batch(mean, cov, cfg.tau), axis=1)
    if policy == "ikg":
        return np.argmax(mean + ctx.H * ikg_bonus_batch(mean, cov, cfg.tau), axis=1)
    var = np.einsum("rii->ri", cov)
    N = 1.0 / np.maximum(var, 1e-300)
    S = mean * N
    return np.argmax(_indices_for(policy, S, N, ctx), axis=1)


def _prepare_tables(cfg: RunConfig) -> dict:
    tables = {}
    if "gi" not in cfg.policies:
        return tables
    steps = cfg.steps()
    if cfg.family == "bernoulli" and not cfg.correlated:
        if not math.isinf(cfg.horizon):
            raise ConfigError("the exact-GI policy is implemented for infinite horizons")
        depth = min(steps, cfg.gi_table_depth)
        tables["bern_gi"] = get_bernoulli_gi_table(
            cfg.prior[0], cfg.prior[1], cfg.gamma, depth
        )
    elif cfg.family == "gaussian":
        if not math.isinf(cfg.horizon):
            raise ConfigError("the exact-GI policy is implemented for infinite horizons")
        n_min = cfg.prior[1] / cfg.tau * 0.999
        n_max = (cfg.prior[1] + cfg.tau * steps) / cfg.tau * 1.05 + 1.0
        tables["gauss_bonus"] = get_gaussian_bonus_table(cfg.gamma, n_min, n_max)
    else:
        raise ConfigError("the exact-GI policy supports Bernoulli and Gaussian arms")
    return tables


def _simulate_block(cfg: RunConfig, r0: int, r1: int, tables: dict) -> np.ndarray:
    R = r1 - r0
    k = cfg.k
    fam = cfg.family_obj()
    steps = cfg.steps()
    theta = sample_truths(cfg, r0, r1)
    tmeans = _true_means(cfg, theta)
    rows = np.arange(R)
    out = np.empty((len(cfg.policies), R))
    for ip, policy in enumerate(cfg.policies):
        s0, n0 = cfg.prior
        if cfg.correlated:
            mean = np.full((R, k), s0 / n0)
            cov = np.broadcast_to(power_exp_covariance(k, cfg.decay), (R, k, k)).copy()
        else:
            S = np.full((R, k), float(s0))
            N = np.full((R, k), float(n0))
        ret = np.zeros(R)
        disc = 1.0
        check_dom = policy in NON_DOMINATED_POLICIES and not cfg.correlated
        ctx = StepCtx(fam, 0.0, cfg.gamma, 0, cfg, tables)
        for t in range(steps):
            ctx.H = _step_multiplier(cfg, t)
            ctx.gamma_eff = _effective_gamma(cfg, t)
            ctx.t = t
            ctx.kgi_gauss_factor = None
            if cfg.correlated:
                a = _decide_correlated(policy, mean, cov, ctx)
            else:
                u_pol = None
                if policy == "thompson":
                    u_pol = _uniform_block(
                        (cfg.master_seed, "policy", policy),
                        (t * _pad4(cfg.n_runs) + r0) * k,
                        R * k,
                    ).reshape(R, k)
                a = _decide_independent(policy, S, N, ctx, u_pol)
                if check_dom:
                    dom = dominated_mask(S / N, N)
                    if dom[rows, a].any():
                        bad = int(np.argmax(dom[rows, a]))
                        raise NumericError(
                            f"policy {policy} chose a dominated arm at step {t}: "
                            f"S={S[bad]}, N={N[bad]}, a={a[bad]}"
                        )
            u = _uniform_block(
                (cfg.master_seed, "reward", policy), t * _pad4(cfg.n_runs) + r0, R
            )
            y = _rewards_from_uniform(cfg, theta[rows, a], u)
            if cfg.correlated:
                mean, cov = mv_update_batch(mean, cov, a, y, cfg.tau)
            elif fam.kind == "gaussian":
                S[rows, a] += fam.tau * y
                N[rows, a] += fam.tau
            else:
                S[rows, a] += y
                N[rows, a] += 1.0
            ret += disc * tmeans[rows, a]
            disc *= cfg.gamma
        out[ip] = ret
    return out


def simulate(cfg: RunConfig) -> RunResult:
    """Run the paired truth-from-prior experiment for every policy."""
    start = time.perf_counter()
    tables = _prepare_tables(cfg)
    bs = _pad4(cfg.block_size)  # 4-aligned block starts address the streams
    blocks = [(r0, min(r0 + bs, cfg.n_runs)) for r0 in range(0, cfg.n_runs, bs)]
    if cfg.threads > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(_block_worker, [(cfg, b) for b in blocks]))
    else:
        parts = [_simulate_block(cfg, r0, r1, tables) for r0, r1 in blocks]
    returns = np.concatenate(parts, axis=1)
    theta = np.concatenate([sample_truths(cfg, r0, r1) for r0, r1 in blocks], axis=0)
    wall_ms = (time.perf_counter() - start) * 1000.0
    return RunResult(
        config=cfg,
        policies=cfg.policies,
        returns=returns,
        theta=theta,
        wall_ms=wall_ms,
    )


def _block_worker(args):
    cfg, (r0, r1) = args
    tables = _prepare_tables(cfg)  # cache hit: built by the parent
    return _simulate_block(cfg, r0, r1, tables)
