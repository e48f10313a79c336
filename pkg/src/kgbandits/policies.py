"""Decision policies over independent-arm beliefs.

A policy maps an :class:`InfoState` (per-arm beliefs plus horizon context)
to a chosen arm.  The knowledge-gradient family scores each arm as

    score(a) = mean(a) + H * bonus(a)

where ``H`` converts a one-step mean improvement into rest-of-horizon value
(:func:`horizon_multiplier`) and ``bonus`` is the expected improvement in
the best attainable mean from one more observation of arm ``a``.

The bonus kernels are written in positive-part form (see ``families``)
whose analytic zeros are exact floating-point zeros; this is what lets the
zero-score boundary conditions in ``dominance`` agree with the scores bit
for bit.

Vectorised kernels operate on parallel hyper-parameter arrays ``S`` and
``N`` of shape (..., k) and back both the scalar API and the simulation
engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .families import (
    ArmBelief,
    RewardFamily,
    excess_arr,
    sample_truth,
    shortfall_arr,
    true_mean,
    validate_belief,
)


@dataclass(frozen=True)
class HorizonSpec:
    """Discount factor, horizon length (math.inf for open-ended) and epoch."""

    gamma: float
    T: float = math.inf
    t: int = 0

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise DomainError(f"discount factor must lie in (0,1], got {self.gamma}")
        if math.isinf(self.T):
            if self.gamma >= 1.0:
                raise DomainError("undiscounted infinite horizons have no finite value")
        else:
            if int(self.T) != self.T or self.T < 1:
                raise DomainError(f"finite horizon must be a positive integer, got {self.T}")
            if not (0 <= self.t < self.T):
                raise DomainError(f"epoch {self.t} outside horizon {self.T}")

    @property
    def steps_left(self) -> float:
        return self.T - self.t


def horizon_multiplier(h: HorizonSpec) -> float:
    """Value of a one-step gain in best mean, summed over the rest of play.

    gamma<1, finite T: gamma*(1-gamma^(s-1))/(1-gamma) with s = T - t;
    gamma<1, T=inf:    gamma/(1-gamma);
    gamma=1, finite T: s - 1.
    """
    if math.isinf(h.T):
        return h.gamma / (1.0 - h.gamma)
    s = h.steps_left
    if h.gamma == 1.0:
        return s - 1.0
    return h.gamma * (1.0 - h.gamma ** (s - 1.0)) / (1.0 - h.gamma)


def _multiplier_for(gamma: float, steps: float) -> float:
    """horizon_multiplier for a remaining horizon given directly in steps."""
    if math.isinf(steps):
        if not (0.0 < gamma < 1.0):
            raise DomainError("infinite horizon needs gamma in (0,1)")
        return gamma / (1.0 - gamma)
    if steps < 1:
        raise DomainError(f"remaining horizon must be >= 1, got {steps}")
    if gamma == 1.0:
        return steps - 1.0
    return gamma * (1.0 - gamma ** (steps - 1.0)) / (1.0 - gamma)


def fh_discount(t: int, T: int) -> float:
    """Discount surrogate for undiscounted finite horizons: (T-t-1)/(T-t).

    Satisfies gamma/(1-gamma) = T-1-t, matching the remaining number of
    future plays, so infinite-horizon index policies adapt dynamically.
    """
    if not (0 <= t <= T - 1):
        raise DomainError(f"epoch {t} outside horizon {T}")
    r = T - t
    return (r - 1.0) / r


@dataclass(frozen=True)
class InfoState:
    """Joint belief over k >= 2 independent arms of one reward family."""

    arms: tuple[ArmBelief, ...]
    family: RewardFamily
    horizon: HorizonSpec

    def __post_init__(self):
        if len(self.arms) < 2:
            raise DomainError("an informational state needs at least two arms")
        for arm in self.arms:
            validate_belief(arm, self.family)

    @property
    def k(self) -> int:
        return len(self.arms)

    def hyper_arrays(self):
        S = np.array([a.total for a in self.arms], dtype=float)
        N = np.array([a.n for a in self.arms], dtype=float)
        return S, N


@dataclass(frozen=True)
class PolicyScore:
    """Per-arm means, learning bonuses and combined scores; chosen arm index.

    ``eligible`` marks the candidate set when the policy restricts it (NKG
    excludes dominated arms); the chosen arm attains the maximal score over
    that set, with ties broken by lowest index.
    """

    means: tuple[float, ...]
    bonuses: tuple[float, ...]
    scores: tuple[float, ...]
    chosen: int
    eligible: tuple[bool, ...] | None = None

    def __post_init__(self):
        if not all(map(math.isfinite, self.scores)):
            raise DomainError(f"non-finite policy scores {self.scores}")
        pool = [
            s
            for i, s in enumerate(self.scores)
            if self.eligible is None or self.eligible[i]
        ]
        if not (self.eligible is None or self.eligible[self.chosen]):
            raise DomainError("chosen arm is not in the candidate set")
        if self.scores[self.chosen] != max(pool):
            raise DomainError("chosen arm does not attain the maximal score")


# ---------------------------------------------------------------------------
# Vectorised kernels over hyper-parameter arrays of shape (..., k).
# ---------------------------------------------------------------------------


def rival_best(M):
    """C_a = max over b != a of M_b, per arm along the last axis."""
    order = np.sort(M, axis=-1)
    top = order[..., -1:]
    second = order[..., -2:-1]
    return np.where(M == top, second, top)


def kg_bonus_arr(S, N, family: RewardFamily):
    """nu^KG per arm: expected improvement of the best mean after one pull.

    Greedy arms use E[(C - new mean)^+], non-greedy arms E[(new mean - C)^+];
    both equal E[max(new mean, C)] - max_b mean_b and keep analytic zeros
    exact.
    """
    M = S / N
    top = M.max(axis=-1, keepdims=True)
    C = rival_best(M)
    return np.where(
        M == top,
        shortfall_arr(S, N, C, family),
        excess_arr(S, N, C, family),
    )


def pkg_bonus_arr(S, N, family: RewardFamily):
    """nu^PKG: greedy arms register positive moves via the reflected rival
    threshold C* = 2*mean - C; non-greedy arms keep their KG bonus."""
    M = S / N
    top = M.max(axis=-1, keepdims=True)
    C = rival_best(M)
    lam = np.where(M == top, 2.0 * M - C, C)
    return excess_arr(S, N, lam, family)


def dominated_mask(M, N):
    """True where some other arm has strictly higher mean and strictly
    lower effective sample size (worse for exploitation and exploration)."""
    better_mean = M[..., :, None] < M[..., None, :]
    more_data = N[..., :, None] > N[..., None, :]
    return (better_mean & more_data).any(axis=-1)


def greedy_choice_arr(S, N):
    return np.argmax(S / N, axis=-1)


def kg_choice_arr(S, N, family: RewardFamily, H):
    scores = S / N + np.asarray(H)[..., None] * kg_bonus_arr(S, N, family)
    return np.argmax(scores, axis=-1)


def nkg_choice_arr(S, N, family: RewardFamily, H):
    scores = S / N + np.asarray(H)[..., None] * kg_bonus_arr(S, N, family)
    scores = np.where(dominated_mask(S / N, N), -np.inf, scores)
    return np.argmax(scores, axis=-1)


def pkg_choice_arr(S, N, family: RewardFamily, H):
    scores = S / N + np.asarray(H)[..., None] * pkg_bonus_arr(S, N, family)
    return np.argmax(scores, axis=-1)


# ---------------------------------------------------------------------------
# Scalar policy API.
# ---------------------------------------------------------------------------


def _score_from(S, N, bonuses, H) -> PolicyScore:
    means = S / N
    scores = means + H * bonuses
    return PolicyScore(
        means=tuple(means.tolist()),
        bonuses=tuple(np.asarray(bonuses, dtype=float).tolist()),
        scores=tuple(scores.tolist()),
        chosen=int(np.argmax(scores)),
    )


def kg_score(state: InfoState, arm: int) -> float:
    """The KG learning bonus nu^KG of one arm (>= 0 always)."""
    S, N = state.hyper_arrays()
    return float(kg_bonus_arr(S, N, state.family)[arm])


def kg_action(state: InfoState) -> PolicyScore:
    S, N = state.hyper_arrays()
    H = horizon_multiplier(state.horizon)
    return _score_from(S, N, kg_bonus_arr(S, N, state.family), H)


def nkg_action(state: InfoState) -> PolicyScore:
    """KG restricted to non-dominated arms; a greedy arm always qualifies."""
    S, N = state.hyper_arrays()
    H = horizon_multiplier(state.horizon)
    bonuses = kg_bonus_arr(S, N, state.family)
    means = S / N
    scores = means + H * bonuses
    ok = ~dominated_mask(means, N)
    return PolicyScore(
        means=tuple(means.tolist()),
        bonuses=tuple(bonuses.tolist()),
        scores=tuple(scores.tolist()),
        chosen=int(np.argmax(np.where(ok, scores, -np.inf))),
        eligible=tuple(ok.tolist()),
    )


def pkg_action(state: InfoState) -> PolicyScore:
    S, N = state.hyper_arrays()
    H = horizon_multiplier(state.horizon)
    return _score_from(S, N, pkg_bonus_arr(S, N, state.family), H)


def greedy_action(state: InfoState) -> PolicyScore:
    S, N = state.hyper_arrays()
    return _score_from(S, N, np.zeros(state.k), 0.0)


def thompson_action(state: InfoState, rng: np.random.Generator) -> PolicyScore:
    """Sample a parameter per arm and play the best sampled true mean."""
    draws = [sample_truth(arm, state.family, rng) for arm in state.arms]
    values = np.array([true_mean(d) for d in draws])
    means = np.array([a.mean for a in state.arms])
    return PolicyScore(
        means=tuple(means.tolist()),
        bonuses=tuple((values - means).tolist()),
        scores=tuple(values.tolist()),
        chosen=int(np.argmax(values)),
    )
