"""Conjugate beliefs for Bernoulli, Exponential and Gaussian reward arms.

An arm's belief is the hyper-parameter pair ``(total, n)``: ``total`` is the
sufficient-statistic sum and ``n`` the effective sample size.  The predictive
mean of the next reward is ``total / n`` for every family:

* Bernoulli  -- theta ~ Beta(total, n - total), rewards in {0, 1};
* Exponential -- rate theta ~ Gamma(shape n + 1, rate total), rewards >= 0;
* Gaussian   -- mean theta ~ Normal(total / n, 1 / n), observation
  precision ``tau`` known, rewards unbounded.

Observing y maps (total, n) -> (total + y, n + 1), except the Gaussian case
which adds tau-weighted increments (total + tau*y, n + tau).

The module also provides the one-observation option values used by every
knowledge-gradient style score: ``excess_expectation`` is
E[max(posterior mean after one reward - threshold, 0)] and
``shortfall_expectation`` its mirror E[max(threshold - posterior mean, 0)].
Both are evaluated in positive-part form so that values which are
analytically zero come out as exact floating-point zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError

KINDS = ("bernoulli", "exponential", "gaussian")

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class RewardFamily:
    """Reward distribution family; ``tau`` is used by Gaussian arms only."""

    kind: str
    tau: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown reward family {self.kind!r}")
        if self.kind == "gaussian" and not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError(f"gaussian observation precision must be positive, got {self.tau}")

    @property
    def support_min(self) -> float:
        return {"bernoulli": 0.0, "exponential": 0.0, "gaussian": -math.inf}[self.kind]

    @property
    def support_max(self) -> float:
        return {"bernoulli": 1.0, "exponential": math.inf, "gaussian": math.inf}[self.kind]

    @property
    def bounded_below(self) -> bool:
        return self.kind != "gaussian"

    @property
    def bounded_above(self) -> bool:
        return self.kind == "bernoulli"


def bernoulli() -> RewardFamily:
    return RewardFamily("bernoulli")


def exponential() -> RewardFamily:
    return RewardFamily("exponential")


def gaussian(tau: float = 1.0) -> RewardFamily:
    return RewardFamily("gaussian", tau)


@dataclass(frozen=True)
class ArmBelief:
    """Conjugate hyper-parameters of one arm: sufficient sum and sample size."""

    total: float
    n: float

    def __post_init__(self):
        if not (self.n > 0 and math.isfinite(self.n) and math.isfinite(self.total)):
            raise DomainError(f"invalid belief (total={self.total}, n={self.n})")

    @property
    def mean(self) -> float:
        return self.total / self.n


@dataclass(frozen=True)
class TruthParam:
    """A realised latent parameter for one arm."""

    value: float
    family: RewardFamily

    def __post_init__(self):
        kind = self.family.kind
        ok = {
            "bernoulli": 0.0 < self.value < 1.0,
            "exponential": self.value > 0.0,
            "gaussian": math.isfinite(self.value),
        }[kind]
        if not ok:
            raise DomainError(f"theta={self.value} outside the {kind} parameter space")


def validate_belief(belief: ArmBelief, family: RewardFamily) -> None:
    """Reject beliefs that violate the family's hyper-parameter domain.

    Degenerate Bernoulli beliefs (total -> 0 or total -> n) are rejected
    rather than clamped: silent clamping would mask configuration bugs.
    """
    if family.kind == "bernoulli" and not (0.0 < belief.total < belief.n):
        raise DomainError(f"bernoulli belief needs 0 < total < n, got {belief}")
    if family.kind == "exponential" and not (belief.total > 0.0):
        raise DomainError(f"exponential belief needs total > 0, got {belief}")


def predictive_mean(belief: ArmBelief) -> float:
    """Mean of the next reward under the current belief: total / n."""
    return belief.total / belief.n


def posterior_update(belief: ArmBelief, y: float, family: RewardFamily) -> ArmBelief:
    """Bayes update of the belief after observing reward ``y``."""
    validate_belief(belief, family)
    kind = family.kind
    if kind == "bernoulli":
        if y != 0.0 and y != 1.0:
            raise DomainError(f"bernoulli reward must be 0 or 1, got {y}")
    elif kind == "exponential":
        if not (y >= 0.0 and math.isfinite(y)):
            raise DomainError(f"exponential reward must be finite and >= 0, got {y}")
    else:
        if not math.isfinite(y):
            raise DomainError(f"gaussian reward must be finite, got {y}")
    if kind == "gaussian":
        return ArmBelief(belief.total + family.tau * y, belief.n + family.tau)
    return ArmBelief(belief.total + y, belief.n + 1.0)


def sample_truth(belief: ArmBelief, family: RewardFamily, rng: np.random.Generator) -> TruthParam:
    """Draw one latent parameter from the belief."""
    validate_belief(belief, family)
    kind = family.kind
    if kind == "bernoulli":
        theta = rng.beta(belief.total, belief.n - belief.total)
    elif kind == "exponential":
        # Gamma(shape n+1, rate total): numpy's scale is 1/rate.
        theta = rng.gamma(belief.n + 1.0, 1.0 / belief.total)
    else:
        theta = rng.normal(belief.mean, math.sqrt(1.0 / belief.n))
    return TruthParam(float(theta), family)


def sample_reward(theta: TruthParam, rng: np.random.Generator) -> float:
    """Draw one reward from the arm's true distribution."""
    kind = theta.family.kind
    if kind == "bernoulli":
        return 1.0 if rng.random() < theta.value else 0.0
    if kind == "exponential":
        return float(rng.exponential(1.0 / theta.value))
    return float(rng.normal(theta.value, math.sqrt(1.0 / theta.family.tau)))


def true_mean(theta: TruthParam) -> float:
    """Expected reward given the latent parameter (1/theta for Exponential)."""
    if theta.family.kind == "exponential":
        return 1.0 / theta.value
    return theta.value


# ---------------------------------------------------------------------------
# One-observation option values.  All kernels accept numpy arrays and
# broadcast; scalars pass through unchanged.
# ---------------------------------------------------------------------------


def bernoulli_excess(total, n, lam):
    """E[(posterior mean - lam)^+] for a Bernoulli arm: two-point expectation."""
    up = (total + 1.0) / (n + 1.0)
    down = total / (n + 1.0)
    p = total / n
    return p * np.maximum(up - lam, 0.0) + (1.0 - p) * np.maximum(down - lam, 0.0)


def bernoulli_shortfall(total, n, lam):
    """E[(lam - posterior mean)^+] for a Bernoulli arm."""
    up = (total + 1.0) / (n + 1.0)
    down = total / (n + 1.0)
    p = total / n
    return p * np.maximum(lam - up, 0.0) + (1.0 - p) * np.maximum(lam - down, 0.0)


def gaussian_posterior_sd(n, tau):
    """Standard deviation of the one-step posterior-mean change."""
    return np.sqrt(1.0 / n - 1.0 / (n + tau))


def _normal_f(z):
    # f(z) = z*Phi(z) + phi(z): E[(Z - (-z))^+] for standard normal Z.
    return z * ndtr(z) + np.exp(-0.5 * z * z) / _SQRT2PI


def gaussian_excess(total, n, tau, lam):
    sd = gaussian_posterior_sd(n, tau)
    return sd * _normal_f((total / n - lam) / sd)


def gaussian_shortfall(total, n, tau, lam):
    sd = gaussian_posterior_sd(n, tau)
    return sd * _normal_f((lam - total / n) / sd)


def exponential_excess(total, n, lam):
    """E[(posterior mean - lam)^+] for an Exponential arm, in closed form.

    The predictive density of the next reward is
    g(y) = (n+1) * total^(n+1) * (total+y)^-(n+2) on y >= 0, derived from
    Gamma-Exponential conjugacy (marginalising theta ~ Gamma(n+1, total)).
    Integrating the positive part gives, with u* = max(total, lam*(n+1)):

        excess(lam) = (total/u*)^(n+1) * (u*/n - lam)
    """
    lam = np.asarray(lam, dtype=float)
    ustar = np.maximum(total, lam * (n + 1.0))
    t = total / ustar
    out = np.exp((n + 1.0) * np.log(t)) * (ustar / n - lam)
    return out if out.shape else float(out)


def exponential_shortfall(total, n, lam):
    """E[(lam - posterior mean)^+] for an Exponential arm.

    Branches on the same comparison as the zero-score condition
    (total/(n+1) >= lam) so that analytic zeros are exact in floating point.
    """
    lam = np.asarray(lam, dtype=float)
    total = np.asarray(total, dtype=float)
    n = np.asarray(n, dtype=float)
    low = total / (n + 1.0)
    zero = low >= lam
    ustar = np.where(zero, total, lam * (n + 1.0))
    t = total / ustar
    out = np.where(
        zero,
        0.0,
        lam * (1.0 - np.exp((n + 1.0) * np.log(t))) - (total / n) * (1.0 - np.exp(n * np.log(t))),
    )
    return out if out.shape else float(out)


def excess_expectation(belief: ArmBelief, family: RewardFamily, lam: float) -> float:
    """E over one observation of max(new posterior mean - lam, 0)."""
    validate_belief(belief, family)
    if not math.isfinite(lam):
        raise DomainError(f"threshold must be finite, got {lam}")
    kind = family.kind
    if kind == "bernoulli":
        return float(bernoulli_excess(belief.total, belief.n, lam))
    if kind == "exponential":
        return float(exponential_excess(belief.total, belief.n, lam))
    return float(gaussian_excess(belief.total, belief.n, family.tau, lam))


def shortfall_expectation(belief: ArmBelief, family: RewardFamily, lam: float) -> float:
    """E over one observation of max(lam - new posterior mean, 0)."""
    validate_belief(belief, family)
    if not math.isfinite(lam):
        raise DomainError(f"threshold must be finite, got {lam}")
    kind = family.kind
    if kind == "bernoulli":
        return float(bernoulli_shortfall(belief.total, belief.n, lam))
    if kind == "exponential":
        return float(exponential_shortfall(belief.total, belief.n, lam))
    return float(gaussian_shortfall(belief.total, belief.n, family.tau, lam))


def excess_arr(S, N, lam, family: RewardFamily):
    """Array form of excess_expectation over parallel belief arrays."""
    kind = family.kind
    if kind == "bernoulli":
        return bernoulli_excess(S, N, lam)
    if kind == "exponential":
        return exponential_excess(S, N, lam)
    return gaussian_excess(S, N, family.tau, lam)


def shortfall_arr(S, N, lam, family: RewardFamily):
    """Array form of shortfall_expectation over parallel belief arrays."""
    kind = family.kind
    if kind == "bernoulli":
        return bernoulli_shortfall(S, N, lam)
    if kind == "exponential":
        return exponential_shortfall(S, N, lam)
    return gaussian_shortfall(S, N, family.tau, lam)
