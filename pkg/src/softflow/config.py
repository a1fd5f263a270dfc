"""Run configuration: a small sectioned schema accepted as INI-style
key-value text or as JSON, with strict key checking and a canonical
serialization (parse -> serialize -> parse is the identity).
"""

from __future__ import annotations

import configparser
import hashlib
import inspect
import io
import json
from dataclasses import dataclass

from .baselines import DetailedBalanceSampler, TrajectoryBalanceSampler
from .envs import BitSequence, HyperGrid, load_modes, random_modes
from .training import MunchausenDqnSampler, SoftDqnSampler


class ConfigError(ValueError):
    """Malformed, incomplete, or unknown configuration input."""


METHODS = {
    "mdqn": MunchausenDqnSampler,
    "softdqn": SoftDqnSampler,
    "softdqn-simple": SoftDqnSampler,
    "tb": TrajectoryBalanceSampler,
    "db": DetailedBalanceSampler,
}

# Estimator parameters owned by the [run] section or the runner itself.
RESERVED_METHOD_KEYS = {
    "budget",
    "eval_every",
    "window_size",
    "seed",
    "wall_clock",
}

ENV_KEYS = {
    "hypergrid": {"kind", "height", "ndim", "r0", "r1", "r2"},
    "hypergrid-hard": {"kind", "height", "ndim"},
    "bitseq": {
        "kind",
        "n",
        "k",
        "num_modes",
        "mode_seed",
        "modes_file",
        "reward_exponent",
    },
}

RUN_KEYS = {
    "budget",
    "seeds",
    "output_dir",
    "eval_every",
    "window_size",
    "timing",
}

RUN_DEFAULTS = {
    "eval_every": 2000,
    "window_size": 200_000,
    "timing": "off",
    "output_dir": "runs",
}


@dataclass
class RunConfig:
    """One experiment: an environment, a method, and run bookkeeping."""

    env: dict
    method: dict
    budget: int
    seeds: list[int]
    output_dir: str = "runs"
    eval_every: int = 2000
    window_size: int = 200_000
    timing: str = "off"

    def to_dict(self) -> dict:
        return {
            "env": dict(self.env),
            "method": dict(self.method),
            "run": {
                "budget": self.budget,
                "seeds": list(self.seeds),
                "output_dir": self.output_dir,
                "eval_every": self.eval_every,
                "window_size": self.window_size,
                "timing": self.timing,
            },
        }

    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _parse_scalar(raw: str):
    text = raw.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if "," in text:
        return [_parse_scalar(part) for part in text.split(",") if part.strip()]
    return text


def _format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format_scalar(v) for v in value)
    return str(value)


def _validate_sections(env: dict, method: dict, run: dict) -> None:
    kind = env.get("kind")
    if kind not in ENV_KEYS:
        raise ConfigError(f"env.kind must be one of {sorted(ENV_KEYS)}, got {kind!r}")
    unknown = set(env) - ENV_KEYS[kind]
    if unknown:
        raise ConfigError(f"unknown env keys for {kind}: {sorted(unknown)}")
    method_kind = method.get("kind")
    if method_kind not in METHODS:
        raise ConfigError(
            f"method.kind must be one of {sorted(METHODS)}, got {method_kind!r}"
        )
    allowed = set(inspect.signature(METHODS[method_kind].__init__).parameters)
    allowed -= {"self"}
    allowed -= RESERVED_METHOD_KEYS
    unknown = set(method) - allowed - {"kind"}
    if unknown:
        raise ConfigError(f"unknown method keys for {method_kind}: {sorted(unknown)}")
    unknown = set(run) - RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown run keys: {sorted(unknown)}")
    if "budget" not in run:
        raise ConfigError("run.budget is required")
    if run.get("timing", "off") not in ("off", "wall"):
        raise ConfigError("run.timing must be 'off' or 'wall'")


def config_from_sections(env: dict, method: dict, run: dict) -> RunConfig:
    _validate_sections(env, method, run)
    run = {**RUN_DEFAULTS, **run}
    seeds = run.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("run.seeds must be an integer or a list of integers")
    return RunConfig(
        env=dict(env),
        method=dict(method),
        budget=int(run["budget"]),
        seeds=list(seeds),
        output_dir=str(run["output_dir"]),
        eval_every=int(run["eval_every"]),
        window_size=int(run["window_size"]),
        timing=str(run["timing"]),
    )


def parse_config(text: str) -> RunConfig:
    """Parse a config from INI-style sections or a JSON object."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"invalid JSON config: {err}") from err
        sections = {k: dict(v) for k, v in payload.items()}
    else:
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as err:
            raise ConfigError(f"invalid config file: {err}") from err
        sections = {
            name: {key: _parse_scalar(raw) for key, raw in parser[name].items()}
            for name in parser.sections()
        }
    missing = {"env", "method", "run"} - set(sections)
    if missing:
        raise ConfigError(f"missing config sections: {sorted(missing)}")
    extra = set(sections) - {"env", "method", "run"}
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    return config_from_sections(sections["env"], sections["method"], sections["run"])


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def serialize_config(config: RunConfig) -> str:
    """Canonical INI-style text for a config."""
    parser = configparser.ConfigParser()
    payload = config.to_dict()
    for section in ("env", "method", "run"):
        parser[section] = {
            key: _format_scalar(value) for key, value in payload[section].items()
        }
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def build_env(env_cfg: dict):
    """Instantiate the environment a config names."""
    kind = env_cfg["kind"]
    if kind == "hypergrid":
        return HyperGrid(
            height=int(env_cfg.get("height", 8)),
            ndim=int(env_cfg.get("ndim", 2)),
            r0=float(env_cfg.get("r0", 1e-3)),
            r1=float(env_cfg.get("r1", 0.5)),
            r2=float(env_cfg.get("r2", 2.0)),
        )
    if kind == "hypergrid-hard":
        return HyperGrid(
            height=int(env_cfg.get("height", 8)),
            ndim=int(env_cfg.get("ndim", 2)),
            r0=1e-4,
            r1=1.0,
            r2=3.0,
        )
    n = int(env_cfg.get("n", 12))
    k = int(env_cfg.get("k", 3))
    if "modes_file" in env_cfg:
        modes = load_modes(env_cfg["modes_file"])
    else:
        modes = random_modes(n, int(env_cfg.get("num_modes", 4)), int(env_cfg.get("mode_seed", 0)))
    return BitSequence(
        n=n, k=k, modes=modes, reward_exponent=float(env_cfg.get("reward_exponent", 2.0))
    )


# Hyperparameter defaults that differ between the two experiment families.
BITSEQ_METHOD_DEFAULTS = {
    "mdqn": {
        "epsilon": 1e-3,
        "per_alpha": 0.9,
        "per_beta": 0.1,
        "munchausen_l0": -25.0,
        "hard_updates": True,
        "target_update_period": 5,
    },
    "softdqn": {
        "epsilon": 1e-3,
        "per_alpha": 0.9,
        "per_beta": 0.1,
        "hard_updates": True,
        "target_update_period": 5,
    },
    "softdqn-simple": {"epsilon": 1e-3},
    "tb": {"epsilon": 1e-3},
    "db": {"epsilon": 1e-3},
}


def build_sampler(config: RunConfig, seed: int):
    """Instantiate the estimator a config names, for one seed."""
    method = dict(config.method)
    kind = method.pop("kind")
    cls = METHODS[kind]
    kwargs = dict(method)
    if kind == "softdqn-simple":
        kwargs.setdefault("use_replay", False)
        kwargs.setdefault("loss", "mse")
    if config.env.get("kind") == "bitseq":
        for key, value in BITSEQ_METHOD_DEFAULTS.get(kind, {}).items():
            kwargs.setdefault(key, value)
    if "hidden_sizes" in kwargs and isinstance(kwargs["hidden_sizes"], list):
        kwargs["hidden_sizes"] = tuple(kwargs["hidden_sizes"])
    return cls(
        budget=config.budget,
        eval_every=config.eval_every,
        window_size=config.window_size,
        wall_clock=config.timing == "wall",
        seed=seed,
        **kwargs,
    )
