"""Experiment front-end.

Subcommands:
  tables       dump the Q(t) sequence and stopping thresholds as JSON
  simulate     Monte Carlo throughput estimate per policy
  sweep        rerun the estimate across one swept parameter
  oracle-check compare the closed forms against the grid DP references

Options may come from a JSON config file (--config) and/or flags; flags win.
All randomness flows from --seed; omitting it picks a random seed that is
printed on stderr and embedded in every output record. Exit codes: 0 success,
2 bad configuration, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import Deterministic, DiscreteChannel, Exponential, discretize
from .oracle import GridSpec, closed_form_gap
from .policy import SystemParams, build_tables
from .sim import (
    BetaPolicy,
    ForcedStopPolicy,
    OptimalPolicy,
    PolicySpec,
    run_monte_carlo,
)

CSV_COLUMNS = [
    "sweep_var",
    "sweep_value",
    "policy",
    "episodes",
    "mean_bits",
    "ci95",
    "mean_harvest_J",
    "mean_T0",
    "seed",
]

SWEEP_VARS = ("T", "N", "m", "eta", "forced_T0")
_INT_SWEEPS = {"T", "N", "forced_T0"}


@dataclass
class ExperimentConfig:
    """Resolved experiment description (file values overridden by flags)."""

    T: int = 50
    N: int = 20
    m: float = 3.0
    lam: float = 0.1
    P: float = 10.0
    eta: float = 1.0
    episodes: int = 10_000
    seed: int | None = None
    policies: list[str] = field(default_factory=lambda: ["optimal"])
    sweep: str | None = None
    values: list | None = None
    out: str | None = None
    format: str = "json"
    workers: int = 1
    e1: float = 0.0
    channel: dict | None = None


_FILE_KEYS = {
    "T": "T",
    "N": "N",
    "m": "m",
    "lambda": "lam",
    "P": "P",
    "eta": "eta",
    "episodes": "episodes",
    "seed": "seed",
    "policies": "policies",
    "sweep": "sweep",
    "values": "values",
    "out": "out",
    "format": "format",
    "workers": "workers",
    "e1": "e1",
    "channel": "channel",
}


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read config file {args.config}: {exc}")
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        for key, val in data.items():
            if key not in _FILE_KEYS:
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, _FILE_KEYS[key], val)
    for f in fields(ExperimentConfig):
        flag_val = getattr(args, f.name, None)
        if flag_val is not None:
            setattr(cfg, f.name, flag_val)
    if cfg.format not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {cfg.format!r}")
    return cfg


def _parse_values(text, sweep: str | None) -> list:
    if isinstance(text, list):
        items = text
    else:
        items = [s for s in str(text).split(",") if s.strip()]
    if sweep in _INT_SWEEPS:
        return [int(s) for s in items]
    return [float(s) for s in items]


def make_params(cfg: ExperimentConfig, **overrides) -> SystemParams:
    base = dict(T=cfg.T, P=cfg.P, eta=cfg.eta, lam=cfg.lam, m=cfg.m)
    base.update(overrides)
    return SystemParams(**base)


def make_channel(cfg: ExperimentConfig, n_levels: int | None = None) -> DiscreteChannel:
    spec = cfg.channel or {}
    if "levels" in spec or "probs" in spec:
        if n_levels is not None:
            raise ValueError("cannot sweep N with an explicitly listed channel")
        return DiscreteChannel(
            levels=np.asarray(spec["levels"], dtype=float),
            probs=np.asarray(spec["probs"], dtype=float),
        )
    law_name = spec.get("law", "exponential")
    if law_name == "exponential":
        law = Exponential(mean=spec.get("mean", 1.0))
    elif law_name == "deterministic":
        law = Deterministic(value=spec.get("value", 1.0))
    else:
        raise ValueError(f"unknown fading law {law_name!r}")
    n = n_levels if n_levels is not None else spec.get("N", cfg.N)
    return discretize(law, n)


def parse_policy(text: str) -> PolicySpec:
    name, _, arg = text.partition(":")
    if name == "optimal" and not arg:
        return OptimalPolicy()
    if name == "beta" and arg:
        return BetaPolicy(beta=float(arg))
    if name == "forced" and arg:
        return ForcedStopPolicy(t0=int(arg))
    raise ValueError(
        f"bad policy {text!r}; expected 'optimal', 'beta:<b>' or 'forced:<t0>'"
    )


def policy_label(policy: PolicySpec) -> str:
    if isinstance(policy, OptimalPolicy):
        return "optimal"
    if isinstance(policy, BetaPolicy):
        return f"beta:{policy.beta:g}"
    return f"forced:{policy.t0}"


def resolve_seed(cfg: ExperimentConfig) -> int:
    if cfg.seed is not None:
        return int(cfg.seed)
    seed = int.from_bytes(os.urandom(4), "big")
    print(f"no seed given; using seed {seed}", file=sys.stderr)
    return seed


def _config_echo(cfg: ExperimentConfig, seed: int) -> dict:
    channel = cfg.channel if cfg.channel else {"law": "exponential", "mean": 1.0}
    return {
        "T": cfg.T,
        "N": cfg.N,
        "m": cfg.m,
        "lambda": cfg.lam,
        "P": cfg.P,
        "eta": cfg.eta,
        "episodes": cfg.episodes,
        "seed": seed,
        "e1": cfg.e1,
        "policies": list(cfg.policies),
        "channel": channel,
    }


def _record(sweep_var, sweep_value, label, summary, echo) -> dict:
    return {
        "sweep_var": sweep_var,
        "sweep_value": sweep_value,
        "policy": label,
        "episodes": summary.episodes,
        "mean_bits": summary.mean_bits,
        "stddev_bits": summary.stddev_bits,
        "ci95": summary.ci95,
        "mean_harvest_J": summary.mean_harvest,
        "mean_T0": summary.mean_t0,
        "seed": summary.seed,
        "config": echo,
    }


def write_records(records: list[dict], cfg: ExperimentConfig) -> None:
    if cfg.format == "json":
        text = json.dumps(records, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([rec[col] for col in CSV_COLUMNS])
        text = buf.getvalue()
    _emit(text, cfg.out)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_policies(params, channel, policies, cfg, seed, echo, sweep_var="", sweep_value=""):
    tables = None
    if any(not isinstance(p, BetaPolicy) for p in policies):
        tables = build_tables(params, channel)
    records = []
    for policy in policies:
        summary = run_monte_carlo(
            params,
            channel,
            tables,
            policy,
            episodes=cfg.episodes,
            master_seed=seed,
            initial_energy=cfg.e1,
            workers=cfg.workers,
        )
        records.append(
            _record(sweep_var, sweep_value, policy_label(policy), summary, echo)
        )
    return records


def cmd_tables(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    tables = build_tables(make_params(cfg), make_channel(cfg))
    _emit(json.dumps(tables.to_dict(), indent=2) + "\n", cfg.out)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    seed = resolve_seed(cfg)
    params = make_params(cfg)
    channel = make_channel(cfg)
    policies = [parse_policy(p) for p in cfg.policies]
    if not policies:
        raise ValueError("at least one policy is required")
    echo = _config_echo(cfg, seed)
    records = _run_policies(params, channel, policies, cfg, seed, echo)
    records.sort(key=lambda r: r["policy"])
    write_records(records, cfg)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    if cfg.sweep not in SWEEP_VARS:
        raise ValueError(f"sweep variable must be one of {SWEEP_VARS}, got {cfg.sweep}")
    values = cfg.values
    if values is None:
        if cfg.sweep == "forced_T0":
            values = list(range(1, cfg.T))
        else:
            raise ValueError("sweep needs --values")
    values = _parse_values(values, cfg.sweep)
    seed = resolve_seed(cfg)
    echo = _config_echo(cfg, seed)

    records = []
    for v in values:
        if cfg.sweep == "forced_T0":
            params, channel = make_params(cfg), make_channel(cfg)
            policies = [ForcedStopPolicy(t0=v)]
        elif cfg.sweep == "N":
            params, channel = make_params(cfg), make_channel(cfg, n_levels=v)
            policies = [parse_policy(p) for p in cfg.policies]
        else:
            params = make_params(cfg, **{cfg.sweep: v})
            channel = make_channel(cfg)
            policies = [parse_policy(p) for p in cfg.policies]
        records.extend(
            _run_policies(params, channel, policies, cfg, seed, echo, cfg.sweep, v)
        )
    records.sort(key=lambda r: (r["sweep_value"], r["policy"]))
    write_records(records, cfg)
    return 0


def cmd_oracle_check(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    grid = GridSpec(e_max=args.emax, k_e=args.ke, k_alpha=args.kalpha)
    report = closed_form_gap(
        make_params(cfg), make_channel(cfg), grid, e_floor_rows=args.floor_rows
    )
    _emit(json.dumps(report, indent=2) + "\n", cfg.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harvestopt",
        description="Throughput-maximizing harvest-then-transmit experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    system = argparse.ArgumentParser(add_help=False)
    system.add_argument("--config", help="JSON config file; flags override it")
    system.add_argument("--T", type=int, help="frame length in slots")
    system.add_argument("--N", type=int, help="number of channel levels")
    system.add_argument("--m", type=float, help="monomial order of the energy model")
    system.add_argument("--lambda", dest="lam", type=float, help="energy coefficient")
    system.add_argument("--P", type=float, help="power beacon (W)")
    system.add_argument("--eta", type=float, help="harvesting efficiency")
    system.add_argument("--out", help="output path (default: stdout)")

    runner = argparse.ArgumentParser(add_help=False)
    runner.add_argument("--episodes", type=int, help="Monte Carlo episodes")
    runner.add_argument("--seed", type=int, help="master seed (random if omitted)")
    runner.add_argument(
        "--policy",
        dest="policies",
        action="append",
        help="policy: optimal | beta:<b> | forced:<t0> (repeatable)",
    )
    runner.add_argument("--format", choices=("csv", "json"), help="output format")
    runner.add_argument("--workers", type=int, help="parallel workers")
    runner.add_argument("--e1", type=float, help="initial battery energy (J)")

    p_tables = sub.add_parser("tables", parents=[system], help="dump Q and gamma")
    p_tables.set_defaults(func=cmd_tables)

    p_sim = sub.add_parser(
        "simulate", parents=[system, runner], help="estimate throughput per policy"
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser(
        "sweep", parents=[system, runner], help="sweep one parameter"
    )
    p_sweep.add_argument("--sweep", choices=SWEEP_VARS, help="swept variable")
    p_sweep.add_argument("--values", help="comma-separated sweep values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser(
        "oracle-check",
        parents=[system],
        help="compare closed forms against the grid DP references",
    )
    p_oracle.add_argument("--ke", type=int, default=512, help="energy grid points")
    p_oracle.add_argument("--kalpha", type=int, default=512, help="alpha grid points")
    p_oracle.add_argument("--emax", type=float, default=None, help="top of energy grid")
    p_oracle.add_argument(
        "--floor-rows", type=int, default=16, help="energy rows excluded near zero"
    )
    p_oracle.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
