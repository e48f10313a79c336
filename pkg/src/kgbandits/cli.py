"""Command-line front end.

Subcommands:
  run                  execute a registry experiment (or an INI config) and
                       write the results CSV
  precompute-indices   build and persist an index table
  analyze              dominance instruments: witness | rlb | consistency

Exit codes: 0 success, 1 configuration error, 2 numeric failure, 3 I/O
failure.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from pathlib import Path

from .dominance import (
    RLBQuery,
    dominated_witness,
    gi_rlb,
    index_consistency_probe,
    rlb,
)
from .errors import ConfigError, DomainError, NumericError
from .experiments import (
    EXPERIMENT_NAMES,
    ExperimentSpec,
    GridPoint,
    build_experiment,
    rows_to_csv,
    run_experiment,
)
from .families import bernoulli, exponential, gaussian
from .simulate import RunConfig
from .tables import (
    build_bernoulli_gi_table,
    build_gaussian_bonus_table,
    save_index_table,
)


def _write_text(path: Path, text: str, force: bool) -> None:
    if path.exists():
        if path.read_text() == text:
            return
        if not force:
            raise OSError(f"{path} exists with different contents; use --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _config_from_ini(path: str) -> tuple[RunConfig, str]:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read or "run" not in parser:
        raise ConfigError(f"config file {path} is missing its [run] section")
    sec = parser["run"]
    try:
        prior = tuple(float(x) for x in sec.get("prior", "1,2").split(","))
        horizon_raw = sec.get("horizon", "inf")
        cfg = RunConfig(
            family=sec.get("family", "bernoulli"),
            k=sec.getint("k", 2),
            prior=(prior[0], prior[1]),
            gamma=sec.getfloat("gamma", 0.9),
            policies=tuple(p.strip() for p in sec.get("policies", "greedy,kg").split(",")),
            n_runs=sec.getint("n_runs", 1000),
            master_seed=sec.getint("seed", 0),
            horizon=math.inf if horizon_raw == "inf" else float(horizon_raw),
            tau=sec.getfloat("tau", 1.0),
            correlated=sec.getboolean("correlated", False),
            decay=sec.getfloat("decay", 0.5),
            truncation_eps=sec.getfloat("truncation_eps", 1e-7),
            threads=sec.getint("threads", 1),
        )
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from exc
    reference = sec.get("reference", cfg.policies[0])
    if reference not in cfg.policies:
        raise ConfigError(f"reference {reference!r} is not among the run's policies")
    return cfg, reference


def _cmd_run(args) -> int:
    if bool(args.experiment) == bool(args.config):
        raise ConfigError("exactly one of --experiment or --config is required")
    if args.experiment:
        spec = build_experiment(args.experiment, args.desk_scale, args.seed, args.threads)
    else:
        cfg, reference = _config_from_ini(args.config)
        if args.threads != 1:
            from dataclasses import replace

            cfg = replace(cfg, threads=args.threads)
        spec = ExperimentSpec(
            name=Path(args.config).stem,
            description=f"custom run from {args.config}",
            points=(GridPoint(cfg, "gamma", cfg.gamma, reference),),
        )
    rows = run_experiment(spec)
    csv_text = rows_to_csv(rows)
    out = Path(args.out)
    _write_csv_refusing_divergence(out, csv_text, args.force)
    print(f"{spec.name}: wrote {len(rows)} rows to {out}")
    return 0


def _write_csv_refusing_divergence(path: Path, text: str, force: bool) -> None:
    # wall_ms is telemetry: an existing file that matches in every other
    # column is considered identical for overwrite purposes
    if path.exists() and not force:
        if _strip_wall(path.read_text()) != _strip_wall(text):
            raise OSError(f"{path} exists with different results; use --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _strip_wall(csv_text: str) -> str:
    lines = csv_text.strip().split("\n")
    return "\n".join(",".join(line.split(",")[:-1]) for line in lines)


def _cmd_precompute(args) -> int:
    if args.family == "bernoulli":
        table = build_bernoulli_gi_table(
            args.base_total,
            args.base_n,
            args.gamma,
            args.depth,
            lam_points=args.lam_points,
        )
    elif args.family == "gaussian":
        table = build_gaussian_bonus_table(
            args.gamma, args.n_min, args.n_max, points_per_decade=args.points_per_decade
        )
    else:
        raise ConfigError("precompute-indices supports bernoulli and gaussian tables")
    path = save_index_table(table, args.out, force=args.force)
    acc = table.header.get("est_accuracy")
    extra = f", est accuracy {acc:.2e}" if acc is not None else ""
    print(f"wrote {table.values.size} index values to {path}{extra}")
    return 0


def _cmd_analyze(args) -> int:
    out_dir = Path(args.out_dir)
    if args.what == "witness":
        fam = {"bernoulli": bernoulli(), "exponential": exponential(), "gaussian": gaussian()}[
            args.family
        ]
        w = dominated_witness(fam, args.gamma, seed=args.seed)
        text = w.to_text()
        print(text, end="")
        _write_text(out_dir / f"witness-{args.family}-gamma{args.gamma}.txt", text, args.force)
        return 0
    if args.what == "rlb":
        lines = ["policy,gamma,n1,n2,rlb,rlb_gi"]
        report = [f"RLB curve for {args.policy} at gamma={args.gamma}, n1={args.n1}"]
        for n2 in range(int(args.n1) + 1, args.n2_max + 1):
            r_gi = gi_rlb(args.n1, float(n2), args.gamma)
            r_pi = (
                r_gi
                if args.policy == "gi"
                else rlb(RLBQuery(args.policy, args.n1, float(n2), args.gamma))
            )
            lines.append(
                f"{args.policy},{args.gamma:.17g},{args.n1:.17g},{n2},{r_pi:.17g},{r_gi:.17g}"
            )
            report.append(f"  n2={n2}: rlb={r_pi:.6f} rlb_gi={r_gi:.6f}")
        csv_text = "\n".join(lines) + "\n"
        _write_text(Path(args.out), csv_text, args.force)
        print("\n".join(report))
        return 0
    if args.what == "consistency":
        w = index_consistency_probe(args.policy, args.gamma)
        text = w.to_text()
        print(text, end="")
        _write_text(
            out_dir / f"consistency-{args.policy}-gamma{args.gamma}.txt", text, args.force
        )
        return 0
    raise ConfigError(f"unknown analyze subcommand {args.what!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgbandits",
        description="bandit policy experiments: knowledge-gradient variants "
        "and Gittins-index baselines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a registry experiment or an INI config")
    p_run.add_argument("--experiment", choices=EXPERIMENT_NAMES)
    p_run.add_argument("--config", help="INI file with a [run] section")
    p_run.add_argument("--desk-scale", action="store_true", help="1/8 runs, thinned grids")
    p_run.add_argument("--seed", type=int, default=20240501)
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--force", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_pre = sub.add_parser("precompute-indices", help="build and persist an index table")
    p_pre.add_argument("--family", required=True, choices=["bernoulli", "gaussian"])
    p_pre.add_argument("--gamma", type=float, required=True)
    p_pre.add_argument("--depth", type=int, default=200)
    p_pre.add_argument("--base-total", type=float, default=1.0)
    p_pre.add_argument("--base-n", type=float, default=2.0)
    p_pre.add_argument("--lam-points", type=int, default=4097)
    p_pre.add_argument("--n-min", type=float, default=1.0)
    p_pre.add_argument("--n-max", type=float, default=200.0)
    p_pre.add_argument("--points-per-decade", type=int, default=10)
    p_pre.add_argument("--out", required=True)
    p_pre.add_argument("--force", action="store_true")
    p_pre.set_defaults(fn=_cmd_precompute)

    p_an = sub.add_parser("analyze", help="dominance and learning-bonus instruments")
    an_sub = p_an.add_subparsers(dest="what", required=True)

    w = an_sub.add_parser("witness", help="dominated-action witness generator")
    w.add_argument("--family", required=True, choices=["bernoulli", "exponential", "gaussian"])
    w.add_argument("--gamma", type=float, required=True)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out-dir", default="reports")
    w.add_argument("--force", action="store_true")
    w.set_defaults(fn=_cmd_analyze)

    r = an_sub.add_parser("rlb", help="relative learning bonus curve")
    r.add_argument("--policy", required=True)
    r.add_argument("--gamma", type=float, required=True)
    r.add_argument("--n1", type=float, default=1.0)
    r.add_argument("--n2-max", type=int, default=10)
    r.add_argument("--out", default="reports/rlb.csv")
    r.add_argument("--out-dir", default="reports")
    r.add_argument("--force", action="store_true")
    r.set_defaults(fn=_cmd_analyze)

    c = an_sub.add_parser("consistency", help="index-consistency probe")
    c.add_argument("--policy", required=True)
    c.add_argument("--gamma", type=float, required=True)
    c.add_argument("--out-dir", default="reports")
    c.add_argument("--force", action="store_true")
    c.set_defaults(fn=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
