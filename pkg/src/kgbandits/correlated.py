"""Correlated Gaussian arms: joint beliefs, exact conditioning updates, the
correlation-aware knowledge-gradient score, and its independence-assuming
counterpart.

Observing arm ``a`` moves the whole mean vector along sigma_tilde =
(C e_a)/sqrt(1/tau + C_aa) by a standard normal amount, so the one-step
improvement of the best mean is E[max_b(mean_b + sigma_tilde_b Z)] -
max_b mean_b.  That expectation over the upper envelope of affine lines is
evaluated exactly: a line contributes on the interval where it beats all
others, and the interval endpoints come from pairwise crossings (an O(k^2)
computation, exact for the problem sizes used here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, NumericError
from .policies import kg_bonus_arr

_SQRT2PI = math.sqrt(2.0 * math.pi)

# numerical floor for the predictive variance 1/tau + C_aa before division
MIN_PREDICTIVE_VAR = 1e-14


@dataclass(frozen=True)
class MvBelief:
    """Joint Gaussian belief over k arm means with known observation
    precision tau (shared by all arms)."""

    mean: np.ndarray
    cov: np.ndarray
    tau: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DomainError(f"shape mismatch: mean {mean.shape}, cov {cov.shape}")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise DomainError(f"observation precision must be positive, got {self.tau}")
        if np.abs(cov - cov.T).max() > 1e-12:
            raise DomainError("covariance must be symmetric within 1e-12")
        if (np.diag(cov) < 0.0).any():
            raise DomainError("covariance has a negative diagonal entry")

    @property
    def k(self) -> int:
        return self.mean.size


def power_exp_covariance(k: int, decay: float) -> np.ndarray:
    """Power-exponential prior covariance C_ij = exp(-decay * (i-j)^2)."""
    if k < 2:
        raise DomainError(f"need at least two arms, got {k}")
    if not (decay > 0.0):
        raise DomainError(f"decay must be positive, got {decay}")
    idx = np.arange(k)
    return np.exp(-decay * (idx[:, None] - idx[None, :]) ** 2)


def mv_update(belief: MvBelief, arm: int, y: float) -> MvBelief:
    """Exact conditioning on one observation of ``arm``."""
    v = belief.cov[:, arm]
    d = 1.0 / belief.tau + belief.cov[arm, arm]
    if d <= MIN_PREDICTIVE_VAR:
        raise NumericError(f"predictive variance {d} below the numerical floor")
    mean = belief.mean + ((y - belief.mean[arm]) / d) * v
    cov = belief.cov - np.outer(v, v) / d
    cov = 0.5 * (cov + cov.T)
    return MvBelief(mean=mean, cov=cov, tau=belief.tau)


def sample_truth_mv(belief: MvBelief, rng: np.random.Generator) -> np.ndarray:
    """One draw of the latent mean vector via a symmetric factorisation."""
    if np.allclose(belief.cov, 0.0):
        return belief.mean.copy()
    try:
        chol = np.linalg.cholesky(belief.cov + 1e-12 * np.eye(belief.k))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"covariance is not positive semi-definite: {exc}") from exc
    return belief.mean + chol @ rng.standard_normal(belief.k)


def expected_max_affine(intercepts, slopes) -> float:
    """E[max_i (a_i + b_i Z)] for standard normal Z, exactly.

    Ties in slope keep only the largest intercept (the lower line never
    attains the envelope).  Each surviving line contributes on
    [L_i, U_i] from pairwise crossings; empty intervals drop out.
    """
    a = np.asarray(intercepts, dtype=float)
    b = np.asarray(slopes, dtype=float)
    order = np.lexsort((a, b))
    a, b = a[order], b[order]
    # slope ties: keep the last (largest intercept after the lexsort)
    keep = np.append(b[1:] != b[:-1], True)
    a, b = a[keep], b[keep]
    k = a.size
    if k == 1:
        return float(a[0])
    diff_b = b[None, :] - b[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = (a[:, None] - a[None, :]) / diff_b
    lower = np.full(k, -np.inf)
    upper = np.full(k, np.inf)
    for i in range(k):
        if i > 0:
            lower[i] = cross[i, :i].max()
        if i < k - 1:
            upper[i] = cross[i, i + 1 :].min()
    live = lower < upper
    lo, hi, al, bl = lower[live], upper[live], a[live], b[live]
    phi = lambda z: np.where(np.isinf(z), 0.0, np.exp(-0.5 * np.minimum(z * z, 1500.0)) / _SQRT2PI)
    total = al * (ndtr(hi) - ndtr(lo)) + bl * (phi(lo) - phi(hi))
    return float(total.sum())


def ckg_score(belief: MvBelief, arm: int) -> float:
    """Expected one-step improvement of the best mean when pulling ``arm``,
    accounting for belief correlation."""
    d = 1.0 / belief.tau + belief.cov[arm, arm]
    if d <= MIN_PREDICTIVE_VAR:
        raise NumericError(f"predictive variance {d} below the numerical floor")
    slopes = belief.cov[:, arm] / math.sqrt(d)
    return expected_max_affine(belief.mean, slopes) - float(belief.mean.max())


def ckg_action(belief: MvBelief, H: float) -> tuple[int, np.ndarray]:
    """Correlation-aware KG decision: argmax of mean + H * ckg_score."""
    scores = np.array(
        [belief.mean[a] + H * ckg_score(belief, a) for a in range(belief.k)]
    )
    return int(np.argmax(scores)), scores


def ikg_action(belief: MvBelief, H: float) -> int:
    """KG decision that treats the arms as independent, reading only the
    diagonal of the covariance; updating remains fully correlated."""
    var = np.diag(belief.cov)
    if (var <= 0.0).any():
        return int(np.argmax(belief.mean))
    from .families import gaussian

    N = 1.0 / var
    S = belief.mean * N
    bonus = kg_bonus_arr(S[None, :], N[None, :], gaussian(belief.tau))[0]
    return int(np.argmax(belief.mean + H * bonus))


# ---------------------------------------------------------------------------
# Batched forms used by the simulation engine: states stacked along axis 0.
# ---------------------------------------------------------------------------


def mv_update_batch(mean, cov, arm, y, tau):
    """Conditioning update across R parallel states; ``arm`` and ``y`` are
    per-state vectors."""
    R, k = mean.shape
    rows = np.arange(R)
    v = cov[rows, :, arm]  # (R, k)
    d = 1.0 / tau + cov[rows, arm, arm]
    if (d <= MIN_PREDICTIVE_VAR).any():
        raise NumericError("predictive variance below the numerical floor")
    mean2 = mean + ((y - mean[rows, arm]) / d)[:, None] * v
    cov2 = cov - v[:, :, None] * v[:, None, :] / d[:, None, None]
    return mean2, cov2


def ckg_scores_batch(mean, cov, tau):
    """ckg_score for every (state, arm) pair: exact envelope computation
    vectorised over R states and k arms at once."""
    R, k = mean.shape
    d = 1.0 / tau + np.einsum("rii->ri", cov)  # (R, k) predictive variances
    if (d <= MIN_PREDICTIVE_VAR).any():
        raise NumericError("predictive variance below the numerical floor")
    # slopes[r, a, b] = cov[r, a, b] / sqrt(d[r, a]): cov is symmetric so the
    # row read along b is the column C e_a
    slopes = cov / np.sqrt(d)[:, :, None]
    flat_a = np.broadcast_to(mean[:, None, :], slopes.shape).reshape(-1, k)
    flat_b = slopes.reshape(-1, k)

    # sort lines by (slope, intercept) per instance
    order = np.lexsort((flat_a, flat_b), axis=-1)
    rows = np.arange(flat_a.shape[0])[:, None]
    sa = flat_a[rows, order]
    sb = flat_b[rows, order]

    diff_b = sb[:, None, :] - sb[:, :, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = (sa[:, :, None] - sa[:, None, :]) / diff_b
    # slope ties never cross: the -inf sentinel empties the lower-intercept
    # line's interval (its upper bound) and is vacuous as a lower bound
    cross = np.where(diff_b == 0.0, -np.inf, cross)
    tri_hi = np.triu(np.ones((k, k), dtype=bool), 1)
    lower = np.where(tri_hi.T, cross, -np.inf).max(axis=2)
    upper = np.where(tri_hi, cross, np.inf).min(axis=2)
    live = lower < upper
    z_lo = np.where(live, lower, 0.0)
    z_hi = np.where(live, upper, 0.0)
    phi = lambda z: np.exp(-0.5 * np.minimum(z * z, 1500.0)) / _SQRT2PI
    contrib = sa * (ndtr(z_hi) - ndtr(z_lo)) + sb * (
        np.where(np.isneginf(z_lo), 0.0, phi(z_lo)) - np.where(np.isinf(z_hi), 0.0, phi(z_hi))
    )
    emax = np.where(live, contrib, 0.0).sum(axis=1).reshape(R, k)
    return emax - mean.max(axis=1, keepdims=True)


def ikg_bonus_batch(mean, cov, tau):
    """Independent-marginal KG bonuses per (state, arm)."""
    from .families import gaussian

    var = np.einsum("rii->ri", cov)
    var = np.maximum(var, 1e-300)
    N = 1.0 / var
    S = mean * N
    return kg_bonus_arr(S, N, gaussian(tau))
