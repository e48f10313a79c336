"""Analysis instruments around dominated actions and learning bonuses.

An arm strictly dominates another when it has a strictly higher predictive
mean from strictly less data: the dominated arm is worse for exploitation
and exploration at once, and an optimal (Gittins) policy never plays it.
This module provides the dominance relation, the exact zero-score boundary
conditions for KG bonuses, constructive witnesses of dominated choices,
relative-learning-bonus (RLB) curves for two-arm Gaussian problems, and the
index-consistency probe that exhibits KG abandoning an arm whose Gittins
index just rose.

Witnesses are replayable: they store the states, context and decisions, and
``replay_witness`` recomputes every decision and compares exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MonotonicityError
from .families import ArmBelief, RewardFamily, gaussian
from .indices import gaussian_gi_bonus, gibl_index, gicg_index, kgi_index_arr
from .policies import (
    HorizonSpec,
    InfoState,
    greedy_action,
    kg_action,
    kg_score,
)


def dominates(
    b1: ArmBelief,
    b2: ArmBelief,
    family: RewardFamily | None = None,
    family2: RewardFamily | None = None,
) -> bool:
    """True iff b1 strictly dominates b2: higher mean from less data."""
    if family is not None and family2 is not None and family.kind != family2.kind:
        raise DomainError(f"cannot compare beliefs across families {family.kind} and {family2.kind}")
    return b1.mean > b2.mean and b1.n < b2.n


def dominated_arms(state: InfoState) -> tuple[bool, ...]:
    """Per-arm flags: True where some other arm strictly dominates."""
    out = []
    for a, arm in enumerate(state.arms):
        out.append(any(dominates(b, arm) for i, b in enumerate(state.arms) if i != a))
    return tuple(out)


def kg_zero_condition(state: InfoState, a: int) -> bool:
    """Boundary test for a zero KG bonus, evaluated in the same arithmetic
    as the score kernels so agreement with ``kg_score(a) == 0`` is exact.

    Greedy arm, support bounded below:  (total + min support)/(n+1) >= C_a.
    Non-greedy arm, support bounded above: (total + max support)/(n+1) <= C_a.
    Unbounded on the relevant side: the bonus is always positive.
    """
    S, N = state.hyper_arrays()
    M = S / N
    top = M.max()
    c_a = max(m for b, m in enumerate(M) if b != a)
    fam = state.family
    if M[a] == top:
        if not fam.bounded_below:
            return False
        return bool((S[a] + fam.support_min) / (N[a] + 1.0) >= c_a)
    if not fam.bounded_above:
        return False
    return bool((S[a] + fam.support_max) / (N[a] + 1.0) <= c_a)


# ---------------------------------------------------------------------------
# Witnesses.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    """A replayable record of policy decisions exhibiting (or failing to
    exhibit) a behaviour of interest."""

    kind: str  # dominated-action | consistency-violation | none
    family: str
    gamma: float
    state: tuple[tuple[float, float], ...]
    thresholds: dict
    trace: tuple[dict, ...] = ()
    notes: str = ""

    def to_text(self) -> str:
        lines = [
            f"kind: {self.kind}",
            f"family: {self.family}",
            f"gamma: {self.gamma!r}",
            "state: " + " ".join(f"({s!r},{n!r})" for s, n in self.state),
            "thresholds: "
            + " ".join(f"{k}={v!r}" for k, v in sorted(self.thresholds.items())),
        ]
        if self.trace:
            lines.append("trace:")
            for entry in self.trace:
                arms = " ".join(f"({s!r},{n!r})" for s, n in entry["arms"])
                lines.append(
                    f"  - policy={entry['policy']} gamma={entry['gamma']!r} "
                    f"arms={arms} chosen={entry['chosen']}"
                )
        if self.notes:
            lines.append(f"notes: {self.notes}")
        return "\n".join(lines) + "\n"


def _decide(policy: str, arms, family: RewardFamily, gamma: float) -> int:
    st = InfoState(tuple(ArmBelief(s, n) for s, n in arms), family, HorizonSpec(gamma))
    if policy == "kg":
        return kg_action(st).chosen
    if policy == "greedy":
        return greedy_action(st).chosen
    if policy in _GAUSSIAN_INDEX_POLICIES:
        return _gaussian_index_decision(policy, arms, family, gamma)
    raise DomainError(f"unknown policy {policy!r} in witness trace")


def replay_witness(w: Witness) -> bool:
    """Recompute every decision in the trace; True iff all match exactly."""
    fam = _family_from_name(w.family)
    for entry in w.trace:
        got = _decide(entry["policy"], entry["arms"], fam, entry["gamma"])
        if got != entry["chosen"]:
            return False
    return True


def _family_from_name(name: str) -> RewardFamily:
    if name == "gaussian":
        return gaussian()
    return RewardFamily(name)


def dominated_witness(family: RewardFamily, gamma: float, seed: int = 0) -> Witness:
    """Constructive state in which KG picks a strictly dominated arm, and the
    discount threshold beyond which it does so.

    Bounded-above support uses the canonical four-observation construction;
    the Exponential case searches for a state whose greedy arm has a zero
    bonus while dominating its rival.  Gaussian rewards admit no witness.
    """
    if family.kind == "gaussian":
        return Witness(
            kind="none",
            family="gaussian",
            gamma=gamma,
            state=(),
            thresholds={},
            notes="no witness exists: symmetric unbounded rewards never give a "
            "dominated arm the larger score",
        )
    if family.kind == "bernoulli":
        lo, hi = family.support_min, family.support_max
        arms = ((hi + 2 * lo, 3.0), (hi + 3 * lo, 4.0))
    else:
        rng = np.random.default_rng(seed)
        arms = None
        for _ in range(1000):
            n1 = float(rng.uniform(1.0, 4.0))
            s1 = float(rng.uniform(0.5, 3.0))
            n2 = n1 + float(rng.uniform(0.5, 3.0))
            mu2 = float(rng.uniform(0.3, 1.0)) * s1 / (n1 + 1.0)
            cand = ((s1, n1), (mu2 * n2, n2))
            st = InfoState(
                (ArmBelief(*cand[0]), ArmBelief(*cand[1])), family, HorizonSpec(0.5)
            )
            if (
                dominates(st.arms[0], st.arms[1])
                and kg_zero_condition(st, 0)
                and kg_score(st, 0) == 0.0
                and kg_score(st, 1) > 0.0
            ):
                arms = cand
                break
        if arms is None:  # pragma: no cover - the search space is huge
            raise MonotonicityError("no exponential witness found in search budget")

    st = InfoState(
        (ArmBelief(*arms[0]), ArmBelief(*arms[1])), family, HorizonSpec(0.5)
    )
    if not dominates(st.arms[0], st.arms[1]):
        raise DomainError("witness construction failed dominance")

    def picks_dominated(g: float) -> bool:
        return _decide("kg", arms, family, g) == 1

    lo_g, hi_g = 1e-6, 1.0 - 1e-12
    if not picks_dominated(hi_g) or picks_dominated(lo_g):
        raise MonotonicityError("discount endpoints do not bracket the flip")
    while hi_g - lo_g > 1e-9:
        mid = 0.5 * (lo_g + hi_g)
        if picks_dominated(mid):
            hi_g = mid
        else:
            lo_g = mid
    gamma_star = 0.5 * (lo_g + hi_g)

    probe_hi = min(max(gamma, gamma_star + 1e-6), 1.0 - 1e-9)
    probe_lo = gamma_star - 1e-6
    trace = (
        {"policy": "kg", "gamma": probe_hi, "arms": arms, "chosen": _decide("kg", arms, family, probe_hi)},
        {"policy": "kg", "gamma": probe_lo, "arms": arms, "chosen": _decide("kg", arms, family, probe_lo)},
    )
    w = Witness(
        kind="dominated-action",
        family=family.kind,
        gamma=gamma,
        state=arms,
        thresholds={"gamma_star": gamma_star},
        trace=trace,
        notes="arm 2 is strictly dominated by arm 1 yet KG selects it for all "
        "discount factors above gamma_star",
    )
    if not replay_witness(w) or trace[0]["chosen"] != 1 or trace[1]["chosen"] != 0:
        raise MonotonicityError("witness failed replay verification")
    return w


# ---------------------------------------------------------------------------
# Relative learning bonus.
# ---------------------------------------------------------------------------

_GAUSSIAN_INDEX_POLICIES = ("gi", "kgi", "gibl", "gicg")
RLB_POLICIES = ("greedy", "kg") + _GAUSSIAN_INDEX_POLICIES


@dataclass(frozen=True)
class RLBQuery:
    """Threshold query: at what mean difference does ``policy`` switch from
    arm 1 (precision n1, mean 0) to arm 2 (precision n2)?"""

    policy: str
    n1: float
    n2: float
    gamma: float
    tau: float = 1.0
    bracket: tuple[float, float] | None = None

    def __post_init__(self):
        if self.policy not in RLB_POLICIES:
            raise DomainError(
                f"RLB is defined for deterministic policies {RLB_POLICIES}, got {self.policy!r}"
            )
        if not (0.0 < self.gamma < 1.0):
            raise DomainError("RLB analysis uses discounted infinite horizons")


def _gaussian_index_decision(policy, arms, family, gamma) -> int:
    S = np.array([a[0] for a in arms])
    N = np.array([a[1] for a in arms])
    mu = S / N
    tau = family.tau
    if policy == "gi":
        bon = np.array(
            [gaussian_gi_bonus(float(n / tau), gamma) for n in N]
        ) / math.sqrt(tau)
        idx = mu + bon
    elif policy == "kgi":
        idx = kgi_index_arr(S, N, gamma / (1.0 - gamma), family)
    elif policy == "gibl":
        idx = gibl_index(mu, N, tau, gamma)
    else:
        idx = gicg_index(mu, N, tau, gamma)
    return int(np.argmax(idx))


def _two_arm_decision(q: RLBQuery, dmu: float) -> int:
    fam = gaussian(q.tau)
    arms = ((0.0, q.n1), (dmu * q.n2, q.n2))
    if q.policy == "greedy":
        return 0 if dmu <= 0 else 1
    if q.policy == "kg":
        st = InfoState((ArmBelief(*arms[0]), ArmBelief(*arms[1])), fam, HorizonSpec(q.gamma))
        return kg_action(st).chosen
    return _gaussian_index_decision(q.policy, arms, fam, q.gamma)


def rlb(q: RLBQuery, tol: float = 1e-8) -> float:
    """Binary search for the action-flip threshold in the mean difference."""
    sd2 = 1.0 / math.sqrt(q.n2)
    lo, hi = q.bracket if q.bracket else (-5.0 * sd2, 5.0 * sd2)
    if _two_arm_decision(q, lo) != 0 or _two_arm_decision(q, hi) != 1:
        raise MonotonicityError(
            f"bracket endpoints do not produce opposite actions for {q.policy}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _two_arm_decision(q, mid) == 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def gi_rlb(n1: float, n2: float, gamma: float, tau: float = 1.0) -> float:
    """R^GI(n1,n2) = l(n1) - l(n2): the optimal threshold, from the bonus
    decomposition of the Gaussian Gittins index."""
    return (
        gaussian_gi_bonus(n1 / tau, gamma) - gaussian_gi_bonus(n2 / tau, gamma)
    ) / math.sqrt(tau)


@dataclass(frozen=True)
class OverExplorationReport:
    policy: str
    gamma: float
    rows: tuple[dict, ...]
    violations: tuple[dict, ...]
    passed: bool

    def to_text(self) -> str:
        lines = [
            f"policy: {self.policy}",
            f"gamma: {self.gamma!r}",
            f"pairs checked: {len(self.rows)}",
            f"violations: {len(self.violations)}",
            f"passed: {self.passed}",
        ]
        for v in self.violations:
            lines.append(
                f"  n1={v['n1']} n2={v['n2']} rlb={v['rlb']!r} rlb_gi={v['rlb_gi']!r} ({v['reason']})"
            )
        return "\n".join(lines) + "\n"


def over_exploration_check(
    policy: str, gamma: float, n_grid, tau: float = 1.0, tol: float = 1e-6
) -> OverExplorationReport:
    """Check 0 <= R^policy <= R^GI over all n1 < n2 pairs: the sufficient
    condition for never over-exploring and for index consistency."""
    rows, violations = [], []
    grid = sorted(n_grid)
    for i, n1 in enumerate(grid):
        for n2 in grid[i + 1 :]:
            r_gi = gi_rlb(n1, n2, gamma, tau)
            r_pi = r_gi if policy == "gi" else rlb(RLBQuery(policy, n1, n2, gamma, tau))
            row = {"n1": n1, "n2": n2, "rlb": r_pi, "rlb_gi": r_gi}
            rows.append(row)
            if r_pi < -tol:
                violations.append({**row, "reason": "negative threshold"})
            elif r_pi > r_gi + tol:
                violations.append({**row, "reason": "over-explores"})
    return OverExplorationReport(
        policy=policy,
        gamma=gamma,
        rows=tuple(rows),
        violations=tuple(violations),
        passed=not violations,
    )


def index_consistency_probe(
    policy: str, gamma: float, tau: float = 1.0, y_step: float = 1e-3
) -> Witness:
    """Search the two-arm probe family (n1=1, n2=2, zero rival mean) for a
    state and reward after which the pulled arm's Gittins index rises yet
    the policy switches away; the optimal policy never does."""
    r_gi = gi_rlb(1.0, 2.0, gamma, tau)
    r_pi = r_gi if policy == "gi" else rlb(RLBQuery(policy, 1.0, 2.0, gamma, tau))
    base = {"rlb_policy": r_pi, "rlb_gi": r_gi}
    fam = gaussian(tau)
    if r_pi <= r_gi + 1e-9:
        return Witness(
            kind="none",
            family="gaussian",
            gamma=gamma,
            state=(),
            thresholds=base,
            notes="no violation found: the policy does not over-explore on the probe family",
        )
    mu2 = 0.5 * (r_pi + r_gi)
    arms0 = ((0.0, 1.0), (mu2 * 2.0, 2.0))
    first = _decide(policy, arms0, fam, gamma)
    if first != 0:
        return Witness(
            kind="none",
            family="gaussian",
            gamma=gamma,
            state=arms0,
            thresholds={**base, "mu2": mu2},
            notes="no violation found: the policy did not explore the low-precision arm",
        )
    y = 2.0 * r_gi + y_step
    while y < 2.0 * mu2:
        arms1 = ((y, 2.0), (mu2 * 2.0, 2.0))
        gi_before = gaussian_gi_bonus(1.0 / tau, gamma) / math.sqrt(tau)
        gi_after = y / 2.0 + gaussian_gi_bonus(2.0 / tau, gamma) / math.sqrt(tau)
        if gi_after > gi_before and _decide(policy, arms1, fam, gamma) == 1:
            w = Witness(
                kind="consistency-violation",
                family="gaussian",
                gamma=gamma,
                state=arms0,
                thresholds={**base, "mu2": mu2, "reward": y, "gi_before": gi_before, "gi_after": gi_after},
                trace=(
                    {"policy": policy, "gamma": gamma, "arms": arms0, "chosen": 0},
                    {"policy": policy, "gamma": gamma, "arms": arms1, "chosen": 1},
                ),
                notes="the pulled arm's Gittins index rose with the observed "
                "reward, yet the policy abandoned it",
            )
            if not replay_witness(w):
                raise MonotonicityError("consistency witness failed replay")
            return w
        y += y_step
    return Witness(
        kind="none",
        family="gaussian",
        gamma=gamma,
        state=arms0,
        thresholds={**base, "mu2": mu2},
        notes="no violation found over the probe reward grid",
    )
