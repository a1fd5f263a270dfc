"""Experiment harness: ``softflow verify | train | eval``.

Exit codes: 0 success, 1 failed checks or diverged training, 2
configuration errors.  The output root can be overridden with the
SOFTFLOW_OUTPUT_ROOT environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    build_env,
    build_sampler,
    config_from_sections,
    load_config,
    serialize_config,
)
from .envs import exact_partition
from .metrics import SampleWindow, l1_distance, mc_prob_estimate, total_variation, write_summary
from .nets import TrainingDiverged, load_checkpoint
from .oracle import oracle_report, terminal_distribution
from .rng import stream_rng
from .training import NetPolicy, QModel
from .baselines import _FlowColumnView

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _add_env_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file (sectioned key-value or JSON)")
    parser.add_argument("--env", help="hypergrid | hypergrid-hard | bitseq")
    parser.add_argument("--H", type=int, help="hypergrid side length")
    parser.add_argument("--D", type=int, help="hypergrid dimension")
    parser.add_argument("--r0", type=float, help="hypergrid base reward")
    parser.add_argument("--r1", type=float, help="hypergrid corner reward")
    parser.add_argument("--r2", type=float, help="hypergrid shell reward")
    parser.add_argument("--n", type=int, help="bit sequence length")
    parser.add_argument("--k", type=int, help="bit word size")
    parser.add_argument("--num-modes", type=int, help="number of reward modes")
    parser.add_argument("--mode-seed", type=int, help="seed for the mode set")
    parser.add_argument("--modes-file", help="newline-delimited mode strings")
    parser.add_argument("--reward-exponent", type=float, help="bitseq reward exponent")


def _env_section(args) -> dict:
    section: dict = {}
    if args.env:
        section["kind"] = args.env
    mapping = {
        "H": "height",
        "D": "ndim",
        "r0": "r0",
        "r1": "r1",
        "r2": "r2",
        "n": "n",
        "k": "k",
        "num_modes": "num_modes",
        "mode_seed": "mode_seed",
        "modes_file": "modes_file",
        "reward_exponent": "reward_exponent",
    }
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            section[key] = value
    return section


METHOD_FLAGS = {
    "lr": float,
    "z_lr": float,
    "batch_size": int,
    "batch_trajectories": int,
    "epsilon": float,
    "buffer_capacity": int,
    "per_alpha": float,
    "per_beta": float,
    "tau": float,
    "target_update_period": int,
    "hard_updates": bool,
    "dueling": bool,
    "approximator": str,
    "terminal_loss_weight": float,
    "loss": str,
    "munchausen_alpha": float,
    "munchausen_l0": float,
    "activation": str,
    "mode_delta": int,
}


def _add_method_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", help="mdqn | softdqn | softdqn-simple | tb | db")
    for name, kind in METHOD_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        if kind is bool:
            parser.add_argument(flag, action="store_const", const=True, default=None)
        else:
            parser.add_argument(flag, type=kind, default=None)
    parser.add_argument(
        "--hidden", help="comma-separated hidden layer sizes, e.g. 256,256"
    )


def _method_section(args) -> dict:
    section: dict = {}
    if getattr(args, "method", None):
        section["kind"] = args.method
    for name in METHOD_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            section[name] = value
    if getattr(args, "hidden", None):
        section["hidden_sizes"] = [int(h) for h in args.hidden.split(",")]
    return section


def _resolve_config(args, need_method: bool) -> RunConfig:
    """Merge a config file (if any) with command-line overrides."""
    env_over = _env_section(args)
    method_over = _method_section(args) if need_method else {}
    run_over: dict = {}
    for key in ("budget", "eval_every", "window_size", "timing", "output_dir"):
        value = getattr(args, key, None)
        if value is not None:
            run_over[key] = value
    if getattr(args, "seed", None) is not None:
        run_over["seeds"] = [args.seed]
    if getattr(args, "seeds", None):
        run_over["seeds"] = [int(s) for s in args.seeds.split(",")]

    if args.config:
        base = load_config(args.config).to_dict()
    else:
        base = {"env": {}, "method": {}, "run": {}}
        if "budget" not in run_over:
            run_over["budget"] = 10_000
    env = {**base["env"], **env_over}
    method = {**base["method"], **method_over}
    run = {**base["run"], **run_over}
    if not need_method and not method:
        method = {"kind": "mdqn"}
    return config_from_sections(env, method, run)


def _output_root(config: RunConfig) -> Path:
    root = os.environ.get("SOFTFLOW_OUTPUT_ROOT")
    out = Path(config.output_dir)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def cmd_verify(args) -> int:
    config = _resolve_config(args, need_method=False)
    env = build_env(config.env)
    report = oracle_report(
        env,
        n_random_policies=args.policies,
        n_random_logits=args.logits,
        seed=config.seeds[0],
    )
    for check in report["checks"]:
        if check.get("skipped"):
            print(f"{check['name']:40s} SKIPPED ({check['skipped']})")
            continue
        status = "PASS" if check["passed"] else "FAIL"
        print(
            f"{check['name']:40s} max_error={check['max_error']:.3e} "
            f"tol={check['tolerance']:.1e} {status}"
        )
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print("all checks passed" if report["passed"] else "CHECKS FAILED")
    return EXIT_OK if report["passed"] else EXIT_FAILED


def _run_dir(config: RunConfig, seed: int) -> Path:
    env_tag = config.env["kind"]
    method_tag = config.method["kind"]
    return _output_root(config) / f"{method_tag}-{env_tag}-seed{seed}"


def cmd_train(args) -> int:
    config = _resolve_config(args, need_method=True)
    env = build_env(config.env)
    for seed in config.seeds:
        sampler = build_sampler(config, seed)
        t0 = time.perf_counter()
        sampler.fit(env)
        wall = time.perf_counter() - t0
        run_dir = _run_dir(config, seed)
        run_dir.mkdir(parents=True, exist_ok=True)
        with open(run_dir / "config.ini", "w") as fh:
            fh.write(serialize_config(config))
        sampler.metrics_.write_csv(run_dir / "metrics.csv")
        sampler.save(run_dir / "checkpoint")
        summary = {
            "version": f"softflow-{__version__}",
            "config_hash": config.hash(),
            "seed": seed,
            "method": config.method["kind"],
            "env": config.env["kind"],
            "wall_seconds": wall,
            "metrics": sampler.metrics_.summary(),
        }
        write_summary(run_dir / "summary.json", summary)
        final = sampler.metrics_.rows[-1] if sampler.metrics_.rows else None
        note = ""
        if final is not None and final.tv_exact is not None:
            note = f" tv={final.tv_exact:.5f}"
        if final is not None and final.l1 is not None:
            note += f" l1={final.l1:.6f}"
        print(f"seed {seed}: {run_dir}{note} ({wall:.1f}s)")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not Path(args.checkpoint).with_suffix(".json").exists():
        print(f"checkpoint not found: {args.checkpoint}", file=sys.stderr)
        return EXIT_CONFIG
    config = _resolve_config(args, need_method=False)
    env = build_env(config.env)
    net = load_checkpoint(args.checkpoint)
    model = QModel(net, env)
    if net.kind == "mlp" and net.output_dim == env.num_actions + 1:
        model = _FlowColumnView(model)
    lam = getattr(net, "lambda_coef", None)
    if lam is None:  # tabular checkpoints carry no temperature; infer it
        default_alpha = 0.15 if config.method.get("kind") == "mdqn" else 0.0
        alpha = float(config.method.get("munchausen_alpha", default_alpha))
        lam = 1.0 / (1.0 - alpha)
    policy = NetPolicy(model, lam)
    rng = stream_rng(config.seeds[0], "eval")
    payload: dict = {
        "version": f"softflow-{__version__}",
        "config_hash": config.hash(),
        "checkpoint": str(args.checkpoint),
    }
    if env.enumerable:
        z, target = exact_partition(env)
        dist = terminal_distribution(env, policy.tabular())
        payload["tv_exact"] = total_variation(dist, target)
        payload["log_partition"] = float(np.log(z))
    if args.samples:
        from .training import rollout as rollout_fn
        from .mdp import SoftMdp

        window = SampleWindow(args.samples)
        mdp = SoftMdp(env, lambda_coef=lam)
        trajectories = rollout_fn(mdp, model, args.samples, 0.0, rng, lam)
        window.add([t.terminal for t in trajectories])
        if env.enumerable:
            payload["l1_sampled"] = l1_distance(window, exact_partition(env)[1])
    if args.mc_terminals:
        estimates = {}
        for x in args.mc_terminals.split(","):
            x = int(x)
            estimates[x] = mc_prob_estimate(
                env, policy, x, n_samples=args.mc_samples, rng=rng
            )
        payload["mc_estimates"] = estimates
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softflow",
        description="Train and verify reward-proportional samplers on DAG environments.",
    )
    parser.add_argument("--version", action="version", version=f"softflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the exact oracle check suite")
    _add_env_flags(p_verify)
    p_verify.add_argument("--policies", type=int, default=100)
    p_verify.add_argument("--logits", type=int, default=20)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--json", help="write the JSON report here")
    p_verify.set_defaults(func=cmd_verify)

    p_train = sub.add_parser("train", help="train one method, one run per seed")
    _add_env_flags(p_train)
    _add_method_flags(p_train)
    p_train.add_argument("--budget", type=int, help="total trajectories per run")
    p_train.add_argument("--seed", type=int, help="single seed")
    p_train.add_argument("--seeds", help="comma-separated seeds")
    p_train.add_argument("--out", dest="output_dir", help="output directory")
    p_train.add_argument("--eval-every", dest="eval_every", type=int)
    p_train.add_argument("--window", dest="window_size", type=int)
    p_train.add_argument("--timing", choices=("off", "wall"))
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="re-evaluate a saved checkpoint")
    _add_env_flags(p_eval)
    _add_method_flags(p_eval)
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint path prefix")
    p_eval.add_argument("--samples", type=int, default=0)
    p_eval.add_argument("--mc-terminals", help="comma-separated terminal ids")
    p_eval.add_argument("--mc-samples", type=int, default=10)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--out", help="write the JSON result here")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"missing file: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as err:
        print(f"training diverged: {err}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
