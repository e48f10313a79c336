"""Experiment registry and CSV emission.

Each registry entry expands into a list of runs over a parameter grid, at
full scale (the run counts of the original studies) or desk scale (runs
divided by eight and grids thinned).  Results are written to a stable CSV
schema:

    experiment, family, k, gamma, horizon, param_name, param_value,
    policy, mean_pct_lost, stderr, n_runs, master_seed, wall_ms

with fixed column order, 17-significant-digit floats and deterministic row
order.  ``wall_ms`` is telemetry; every other byte of the file is a pure
function of the configuration and seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .simulate import RunConfig, percentage_lost, simulate

CSV_COLUMNS = (
    "experiment",
    "family",
    "k",
    "gamma",
    "horizon",
    "param_name",
    "param_value",
    "policy",
    "mean_pct_lost",
    "stderr",
    "n_runs",
    "master_seed",
    "wall_ms",
)

BERN_POLICIES = ("gi", "greedy", "kg", "nkg", "pkg", "kgi", "gibl")


@dataclass(frozen=True)
class GridPoint:
    config: RunConfig
    param_name: str
    param_value: float
    reference: str


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    description: str
    points: tuple[GridPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise ConfigError(f"experiment {self.name} has an empty grid")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _bern_sweep(name, priors_and_params, gammas, ks, n_runs, seed, threads):
    pts = []
    for k in ks:
        for param_name, param_value, prior in priors_and_params:
            for gamma in gammas:
                pts.append(
                    GridPoint(
                        config=RunConfig(
                            family="bernoulli",
                            k=k,
                            prior=prior,
                            gamma=gamma,
                            policies=BERN_POLICIES,
                            n_runs=n_runs,
                            master_seed=seed,
                            threads=threads,
                        ),
                        param_name=param_name,
                        param_value=param_value if param_name != "gamma" else gamma,
                        reference="gi",
                    )
                )
    return pts


def build_experiment(name: str, desk: bool, seed: int, threads: int = 1) -> ExperimentSpec:
    """Instantiate a registry entry at full or desk scale."""
    runs_big = 20000 if desk else 160000
    runs_corr = 5000 if desk else 40000

    if name == "fig1-bernoulli-gamma-sweep":
        gammas = (
            [0.9, 0.95, 0.97, 0.975, 0.98]
            if desk
            else [0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97, 0.975, 0.98, 0.99]
        )
        pts = _bern_sweep(
            name,
            [("gamma", None, (1.0, 2.0))],
            gammas,
            (2, 10),
            runs_big,
            seed,
            threads,
        )
        return ExperimentSpec(
            name,
            "Bernoulli arms with uniform priors: mean % reward lost to the "
            "exact Gittins policy over a discount-factor sweep (k=2 and k=10)",
            tuple(pts),
        )

    if name == "fig2-bernoulli-beta-sweep":
        betas = [1.0, 4.0, 7.0, 10.0] if desk else [float(b) for b in range(1, 11)]
        pts = _bern_sweep(
            name,
            [("beta", b, (1.0, 1.0 + b)) for b in betas],
            [0.98],
            (2, 10),
            runs_big,
            seed,
            threads,
        )
        return ExperimentSpec(
            name,
            "Bernoulli arms with Beta(1, beta) priors at gamma=0.98: lower "
            "prior means make dominated actions frequent",
            tuple(pts),
        )

    if name == "fig3-bernoulli-alpha-sweep":
        alphas = [0.02, 0.1, 0.5] if desk else [0.02, 0.05, 0.1, 0.2, 0.35, 0.5]
        pts = _bern_sweep(
            name,
            [("alpha", a, (a, a + 1.0)) for a in alphas],
            [0.98],
            (2, 10),
            runs_big,
            seed,
            threads,
        )
        return ExperimentSpec(
            name,
            "Bernoulli arms with Beta(alpha, 1) priors at gamma=0.98",
            tuple(pts),
        )

    if name == "fig4-exponential-gamma-sweep":
        gammas = [0.9, 0.95, 0.99] if desk else [0.9, 0.92, 0.94, 0.96, 0.98, 0.99]
        pts = []
        for k in (2, 10):
            for gamma in gammas:
                pts.append(
                    GridPoint(
                        config=RunConfig(
                            family="exponential",
                            k=k,
                            prior=(3.0, 1.0),
                            gamma=gamma,
                            policies=("kg", "nkg", "pkg", "kgi"),
                            n_runs=runs_big,
                            master_seed=seed,
                            threads=threads,
                        ),
                        param_name="gamma",
                        param_value=gamma,
                        reference="kg",
                    )
                )
        return ExperimentSpec(
            name,
            "Exponential arms with Gamma(2,3) priors: mean % reward lost "
            "relative to KG (negative values beat KG)",
            tuple(pts),
        )

    if name == "fig5-gaussian-tau-sweep":
        taus = [0.01, 0.1, 1.0, 10.0, 100.0] if desk else list(np.logspace(-2, 2, 9))
        gammas = [0.9] if desk else [0.9, 0.99]
        pts = []
        for gamma in gammas:
            for tau in taus:
                pts.append(
                    GridPoint(
                        config=RunConfig(
                            family="gaussian",
                            k=10,
                            prior=(0.0, 1.0),
                            gamma=gamma,
                            policies=("gi", "kg", "kgi", "gibl", "gicg"),
                            n_runs=runs_big,
                            master_seed=seed,
                            tau=float(tau),
                            threads=threads,
                        ),
                        param_name="tau",
                        param_value=float(tau),
                        reference="gi",
                    )
                )
        return ExperimentSpec(
            name,
            "Independent Gaussian arms, N(0,1) priors, k=10: loss versus the "
            "optimal (Gittins) policy over the observation precision",
            tuple(pts),
        )

    if name == "fig6-fhnmab-sweep":
        taus = [0.01, 1.0, 100.0] if desk else list(np.logspace(-2, 2, 9))
        horizons = [50, 200] if desk else [50, 100, 200, 400]
        pts = []
        for tau in taus:
            pts.append(
                GridPoint(
                    config=RunConfig(
                        family="gaussian",
                        k=10,
                        prior=(0.0, 1.0),
                        gamma=1.0,
                        horizon=50,
                        policies=("kg", "kgi", "gibl"),
                        n_runs=runs_big,
                        master_seed=seed,
                        tau=float(tau),
                        threads=threads,
                    ),
                    param_name="tau",
                    param_value=float(tau),
                    reference="kg",
                )
            )
        for T in horizons:
            pts.append(
                GridPoint(
                    config=RunConfig(
                        family="gaussian",
                        k=10,
                        prior=(0.0, 1.0),
                        gamma=1.0,
                        horizon=T,
                        policies=("kg", "kgi", "gibl"),
                        n_runs=runs_big,
                        master_seed=seed,
                        tau=1.0,
                        threads=threads,
                    ),
                    param_name="T",
                    param_value=float(T),
                    reference="kg",
                )
            )
        return ExperimentSpec(
            name,
            "Finite-horizon undiscounted Gaussian arms: static index policies "
            "adapted with the dynamic finite-horizon discount surrogate",
            tuple(pts),
        )

    if name == "fig7-correlated":
        decays = [0.1, 0.5, 1.0] if desk else [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0]
        gammas = [0.9] if desk else [0.9, 0.99]
        pts = []
        for gamma in gammas:
            for decay in decays:
                pts.append(
                    GridPoint(
                        config=RunConfig(
                            family="gaussian",
                            k=10,
                            prior=(0.0, 1.0),
                            gamma=gamma,
                            policies=("gi", "ckg", "ikg", "kgi", "gibl"),
                            n_runs=runs_corr,
                            master_seed=seed,
                            tau=1.0,
                            correlated=True,
                            decay=float(decay),
                            threads=threads,
                        ),
                        param_name="decay",
                        param_value=float(decay),
                        reference="gi",
                    )
                )
        return ExperimentSpec(
            name,
            "Correlated Gaussian arms with power-exponential priors: "
            "correlation-aware KG against index policies on marginals",
            tuple(pts),
        )

    raise ConfigError(f"unknown experiment {name!r}; known: {', '.join(EXPERIMENT_NAMES)}")


EXPERIMENT_NAMES = (
    "fig1-bernoulli-gamma-sweep",
    "fig2-bernoulli-beta-sweep",
    "fig3-bernoulli-alpha-sweep",
    "fig4-exponential-gamma-sweep",
    "fig5-gaussian-tau-sweep",
    "fig6-fhnmab-sweep",
    "fig7-correlated",
)


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """Execute every grid point and collect one CSV row per (point, policy)."""
    rows = []
    for pt in spec.points:
        t0 = time.perf_counter()
        result = simulate(pt.config)
        losses = percentage_lost(result, pt.reference)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        cfg = pt.config
        for policy in cfg.policies:
            pct, se = losses[policy]
            rows.append(
                {
                    "experiment": spec.name,
                    "family": cfg.family,
                    "k": cfg.k,
                    "gamma": cfg.gamma,
                    "horizon": "inf" if math.isinf(cfg.horizon) else int(cfg.horizon),
                    "param_name": pt.param_name,
                    "param_value": pt.param_value,
                    "policy": policy,
                    "mean_pct_lost": pct,
                    "stderr": se,
                    "n_runs": cfg.n_runs,
                    "master_seed": cfg.master_seed,
                    "wall_ms": wall_ms,
                }
            )
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    out = [",".join(CSV_COLUMNS)]
    for row in rows:
        out.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
    return "\n".join(out) + "\n"
