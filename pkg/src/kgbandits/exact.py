"""Exact Bayes returns for two-armed Bernoulli problems by value iteration.

The reachable states after m observations split into layers (m1, m2) with
m1 + m2 = m; within a split the success counts form a small rectangle, so
each layer is a family of dense arrays and the backward induction runs in
vectorised blocks.  The infinite horizon is truncated at depth T* with
gamma^T* / (1 - gamma) below the requested tolerance (rewards are bounded
by 1), and the Bellman maximum doubles as the exact Gittins-policy return
by the index theorem.

Policy decisions reuse the same vectorised kernels as the simulator, with
the stationary infinite-horizon multiplier, so simulated and exact values
of one policy estimate the same quantity.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .families import RewardFamily
from .indices import bernoulli_kgi_root
from .policies import dominated_mask, kg_bonus_arr, pkg_bonus_arr
from .simulate import truncation_horizon

EXACT_POLICIES = ("optimal", "greedy", "kg", "nkg", "pkg", "kgi")

_FAM = RewardFamily("bernoulli")


def _pick_second(policy: str, S1, N1, S2, N2, H: float):
    """True where the policy pulls arm 2; ties go to arm 1."""
    mu1, mu2 = S1 / N1, S2 / N2
    if policy == "greedy":
        return mu2 > mu1
    if policy == "kgi":
        return bernoulli_kgi_root(S2, N2, H) > bernoulli_kgi_root(S1, N1, H)
    shape = np.broadcast_shapes(S1.shape, S2.shape)
    S = np.stack(
        [np.broadcast_to(S1, shape), np.broadcast_to(S2, shape)], axis=-1
    )
    N = np.stack(
        [np.broadcast_to(np.full_like(S1, N1), shape), np.broadcast_to(np.full_like(S2, N2), shape)],
        axis=-1,
    )
    M = S / N
    if policy == "kg":
        scores = M + H * kg_bonus_arr(S, N, _FAM)
    elif policy == "pkg":
        scores = M + H * pkg_bonus_arr(S, N, _FAM)
    elif policy == "nkg":
        scores = M + H * kg_bonus_arr(S, N, _FAM)
        scores = np.where(dominated_mask(M, N), -np.inf, scores)
    else:
        raise ConfigError(f"unknown exact policy {policy!r}")
    return scores[..., 1] > scores[..., 0]


def estimate_memory_mb(trunc: int) -> float:
    """Peak working-set estimate: two adjacent layers of the state lattice."""
    cells = (trunc + 1) * (trunc + 2) * (trunc + 3) / 6.0
    return 2.0 * cells * 8.0 / 1e6


def exact_value_bernoulli_k2(
    policy: str,
    gamma: float,
    priors=((1.0, 2.0), (1.0, 2.0)),
    *,
    trunc: int | None = None,
    eps: float = 1e-7,
    memory_budget_mb: float = 8192.0,
) -> float:
    """Exact (truncated) Bayes return of a stationary policy, or of the
    Bellman optimum when ``policy`` is "optimal"."""
    if policy not in EXACT_POLICIES:
        raise ConfigError(f"policy must be one of {EXACT_POLICIES}")
    if not (0.0 <= gamma < 1.0):
        raise ConfigError("exact evaluation needs gamma in [0,1)")
    (s10, n10), (s20, n20) = priors
    if not (0 < s10 < n10 and 0 < s20 < n20):
        raise ConfigError("invalid Bernoulli priors")
    T = trunc if trunc is not None else truncation_horizon(gamma, eps, 1.0)
    need = estimate_memory_mb(T)
    if need > memory_budget_mb:
        ok = int((memory_budget_mb * 1e6 / 16.0 * 6.0) ** (1.0 / 3.0)) - 2
        raise ConfigError(
            f"value iteration at depth {T} needs ~{need:.0f} MB; "
            f"raise memory_budget_mb or truncate at <= {ok}"
        )
    H = gamma / (1.0 - gamma) if gamma > 0 else 0.0

    v_next = [np.zeros((m1 + 1, T - m1 + 1)) for m1 in range(T + 1)]
    for m in range(T - 1, -1, -1):
        v_here = []
        for m1 in range(m + 1):
            m2 = m - m1
            N1, N2 = n10 + m1, n20 + m2
            S1 = s10 + np.arange(m1 + 1)[:, None]
            S2 = s20 + np.arange(m2 + 1)[None, :]
            mu1, mu2 = S1 / N1, S2 / N2
            up1 = v_next[m1 + 1]
            q1 = mu1 + gamma * (mu1 * up1[1:, :] + (1.0 - mu1) * up1[:-1, :])
            up2 = v_next[m1]
            q2 = mu2 + gamma * (mu2 * up2[:, 1:] + (1.0 - mu2) * up2[:, :-1])
            if policy == "optimal":
                v = np.maximum(q1, q2)
            else:
                v = np.where(_pick_second(policy, S1, N1, S2, N2, H), q2, q1)
            v_here.append(v)
        v_next = v_here
    return float(v_next[0][0, 0])


def greedy_loss_percent(
    gamma: float, priors=((1.0, 2.0), (1.0, 2.0)), *, eps: float = 1e-7, trunc: int | None = None
) -> float:
    """Percentage of the optimal Bayes return lost by the greedy policy."""
    v_opt = exact_value_bernoulli_k2("optimal", gamma, priors, eps=eps, trunc=trunc)
    v_gre = exact_value_bernoulli_k2("greedy", gamma, priors, eps=eps, trunc=trunc)
    return 100.0 * (v_opt - v_gre) / v_opt
