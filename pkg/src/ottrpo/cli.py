"""Command line entry point: ``ottrpo train | verify | sweep | eval``."""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from .continuous import ContinuousConfig, ContToyEnv, GaussianLinearPolicy, evaluate_continuous, polynomial_features, train_continuous
from .envs import TABULAR_ENVS, make_env
from .mdp import TabularPolicy
from .training import TrainConfig, default_config, evaluate_policy, train_tabular
from .transport import COST_VARIANTS
from .verify import SCOPES, run_suites

ENVS = TABULAR_ENVS + ("cont-toy",)
CURVE_HEADER = ("episodes", "mean", "std_pos", "std_neg")
RUN_KEYS = ("env", "seeds", "out", "steps")
CONT_KEYS = tuple(f.name for f in fields(ContinuousConfig) if f.name not in ("gae", "gradient"))

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_value(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_key_values(path):
    """``key = value`` lines; ``#`` starts a comment. Values are parsed as bool/None/int/float/str."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for n, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_seeds(value):
    """``"3"`` means seeds 0, 1, 2; ``"4,7"`` lists them explicitly."""
    text = str(value).strip()
    try:
        if "," in text:
            seeds = [int(s) for s in text.split(",") if s.strip()]
        else:
            seeds = list(range(int(text)))
    except ValueError:
        raise UsageError(f"invalid seeds {value!r}") from None
    if not seeds:
        raise UsageError("seeds must be non-empty")
    return seeds


def build_run(args):
    """Merge config file values and flags into (env, seeds, out, config)."""
    raw = read_key_values(args.config) if getattr(args, "config", None) else {}
    flags = {
        "env": args.env,
        "seeds": args.seeds,
        "out": args.out,
        "steps": args.steps,
        "epsilon": args.epsilon,
        "cost": args.cost,
    }
    for key, value in flags.items():
        if value is not None:
            raw[key] = str(value)
    env = raw.pop("env", "cliffwalking")
    if env not in ENVS:
        raise UsageError(f"unknown env {env!r}; choose from {ENVS}")
    seeds = parse_seeds(raw.pop("seeds", "1"))
    out = Path(raw.pop("out", "runs"))
    steps = raw.pop("steps", None)
    params = {k: parse_value(v) for k, v in raw.items()}
    try:
        if env == "cont-toy":
            params.pop("cost", None)
            unknown = set(params) - set(CONT_KEYS)
            if unknown:
                raise UsageError(f"unknown config keys for cont-toy: {sorted(unknown)}")
            config = ContinuousConfig(**params)
            if steps is not None:
                config = replace(config, cycles=max(1, int(steps) // config.steps_per_cycle))
        else:
            unknown = set(params) - set(TrainConfig.field_names())
            if unknown:
                raise UsageError(f"unknown config keys: {sorted(unknown)}")
            if steps is not None:
                params["total_steps"] = int(steps)
            if getattr(args, "break_mass_splitting", False):
                params["mass_splitting"] = False
            config = default_config(env, **params)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None
    return env, seeds, out, config


def fmt(x) -> str:
    return repr(float(x))


def write_curve(path, steps, runs):
    """Aggregate curve: mean and mean +/- std across seeds at each cadence point."""
    arr = np.asarray(runs, float)
    mean = arr.mean(axis=0)
    std = arr.std(axis=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for x, m, s in zip(steps, mean, std):
            w.writerow([int(x), fmt(m), fmt(m + s), fmt(m - s)])


def write_seed_curve(path, steps, returns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("episodes", "return"))
        for x, r in zip(steps, returns):
            w.writerow([int(x), fmt(r)])


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def run_training(env, seeds, out, config, log=print):
    """Train every seed, write per-seed and aggregate files; return the final-10% mean per seed."""
    out.mkdir(parents=True, exist_ok=True)
    curves, finals, steps = [], [], None
    for seed in seeds:
        if env == "cont-toy":
            res = train_continuous(config, seed=seed)
            n_eps = -(-config.steps_per_cycle // ContToyEnv().horizon)
            x = [i * n_eps * ContToyEnv().horizon for i in range(len(res.returns))]
            y = res.returns
            final = y[-1]
            policy_payload = {
                "env": env,
                "seed": seed,
                "weights": [float(v) for v in res.policy.weights],
                "log_std": float(res.policy.log_std),
                "degree": int(config.policy_degree),
            }
        else:
            res = train_tabular(make_env(env), config, seed=seed)
            x, y = res.steps, res.returns
            final = res.final_score()
            policy_payload = {
                "env": env,
                "seed": seed,
                "n_states": res.policy.n_states,
                "n_actions": res.policy.n_actions,
                "probs": res.policy.probs.tolist(),
                "n_updates": res.n_updates,
                "config": asdict(config),
            }
            if config.audit and res.max_discrepancy > config.epsilon + 1e-7:
                log(f"warning: seed {seed} exceeded the trust region ({res.max_discrepancy:.3e})")
        if steps is not None and list(x) != list(steps):
            raise RuntimeError("evaluation cadence differs between seeds")
        steps = x
        curves.append(y)
        finals.append(final)
        write_seed_curve(out / f"seed_{seed}.csv", x, y)
        write_json(out / f"policy_seed_{seed}.json", policy_payload)
        log(f"seed {seed}: final score {final:.3f}")
    write_curve(out / "curve.csv", steps, curves)
    return finals


def cmd_train(args):
    env, seeds, out, config = build_run(args)
    finals = run_training(env, seeds, out, config)
    print(f"{env}: mean final score {np.mean(finals):.3f} over {len(seeds)} seed(s); wrote {out / 'curve.csv'}")
    return EXIT_OK


def cmd_verify(args):
    results = run_suites(args.scope, n=args.n, seed=args.seed, mass_splitting=not args.break_mass_splitting)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_sweep(args):
    grid = {k: [parse_value(v) for v in str(vals).split(",")] for k, vals in read_key_values(args.grid).items()}
    if not grid:
        raise UsageError("grid file defines no parameters")
    env, seeds, out, base = build_run(args)
    keys = sorted(grid)
    rows = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cell = dict(zip(keys, combo))
        name = "_".join(f"{k}={v}" for k, v in cell.items())
        try:
            config = replace(base, **cell)
            if isinstance(config, TrainConfig):
                config.validate()
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid grid cell {name}: {exc}") from None
        finals = run_training(env, seeds, out / name, config, log=lambda *_: None)
        rows.append([name, *(cell[k] for k in keys), fmt(np.mean(finals)), f"{name}/curve.csv"])
        print(f"{name}: mean final score {np.mean(finals):.3f}")
    with open(out / "index.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", *keys, "final_mean", "curve"])
        w.writerows(rows)
    return EXIT_OK


def cmd_eval(args):
    path = Path(args.policy)
    if not path.is_file():
        raise UsageError(f"policy file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from None
    env = args.env or payload.get("env")
    rng = np.random.default_rng(args.seed)
    if env == "cont-toy":
        policy = GaussianLinearPolicy(payload["weights"], payload["log_std"], polynomial_features(payload["degree"]))
        score = evaluate_continuous(ContToyEnv(), policy, args.episodes, rng)
    elif env in TABULAR_ENVS:
        mdp = make_env(env)
        policy = TabularPolicy(payload["probs"])
        if policy.probs.shape != (mdp.n_states, mdp.n_actions):
            raise UsageError(f"policy shape {policy.probs.shape} does not match {env}")
        score = evaluate_policy(mdp, policy, args.episodes, rng)
    else:
        raise UsageError(f"unknown env {env!r}")
    print(f"{env}: mean return {score:.3f} over {args.episodes} episodes")
    return EXIT_OK


def _run_flags(p):
    p.add_argument("--env", choices=ENVS)
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--cost", choices=COST_VARIANTS)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seeds", help="seed count N (seeds 0..N-1) or comma-separated list")
    p.add_argument("--steps", type=int, help="total environment steps")
    p.add_argument("--out", help="output directory")
    p.add_argument("--break-mass-splitting", action="store_true", help="fault mode: force b_over = b_under")


def build_parser():
    parser = argparse.ArgumentParser(prog="ottrpo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on one environment for one or more seeds")
    _run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="run the numerical verification suites")
    p.add_argument("--scope", choices=SCOPES, default="all")
    p.add_argument("--n", type=int, default=100, help="random instances per suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--break-mass-splitting", action="store_true", help="fault mode: force b_over = b_under")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="train every cell of a parameter grid")
    _run_flags(p)
    p.add_argument("--grid", required=True, help="file with 'key = v1, v2, ...' lines")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="evaluate a saved policy")
    p.add_argument("--policy", required=True)
    p.add_argument("--env", choices=ENVS)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
