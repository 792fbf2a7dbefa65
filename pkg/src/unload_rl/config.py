"""Flat ``key = value`` config files with one section per module.

Example::

    [env]
    columns = 4
    rows = 3
    obs_resolution = 32

    [train]
    total_steps = 20000
    variant = mask-on-v

Sections: ``env``, ``net``, ``policy``, ``reward``, ``train``.  Omitted keys
keep their defaults (the full-scale hyperparameters).
"""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional

from .camera import Workspace
from .env import CollapseMode, EnvConfig
from .errors import ConfigError
from .trainer import TrainConfig, Variant


def _floats(n: Optional[int] = None) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        vals = tuple(float(x) for x in text.replace(" ", "").split(",") if x)
        if n is not None and len(vals) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        return vals

    return parse


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.replace(" ", "").split(",") if x)


def _workspace(text: str) -> Optional[Workspace]:
    if text.strip().lower() in ("", "default", "none"):
        return None
    x0, x1, y0, y1, z0, z1 = _floats(6)(text)
    return Workspace((x0, x1), (y0, y1), (z0, z1))


ENV_KEYS: Dict[str, Callable[[str], Any]] = {
    "columns": int,
    "rows": int,
    "parcel_edge": float,
    "obs_resolution": int,
    "collapse_mode": CollapseMode,
    "p_out": float,
    "color_base": _floats(3),
    "color_jitter": float,
    "seed": int,
    "workspace": _workspace,
}

# section -> {key: (TrainConfig field, parser)}
TRAIN_KEYS: Dict[str, Dict[str, tuple]] = {
    "train": {
        "total_steps": ("total_steps", int),
        "zeta": ("zeta", float),
        "batch_size": ("batch_size", int),
        "learning_rate": ("learning_rate", float),
        "gamma": ("gamma", float),
        "k": ("K", int),
        "eval_every_episodes": ("eval_every_episodes", int),
        "eval_episodes": ("eval_episodes", int),
        "seed": ("seed", int),
        "variant": ("variant", Variant),
        "replay_capacity": ("replay_capacity", int),
        "eval_mask": ("eval_mask", str),
    },
    "net": {
        "hidden_sizes": ("hidden_sizes", _ints),
        "trunk_layers": ("trunk_layers", int),
        "final_init": ("final_init", str),
        "k": ("K", int),
    },
    "policy": {
        "b": ("b", float),
        "epsilon": ("epsilon", float),
        "softmax_temperature": ("softmax_temperature", float),
    },
    "reward": {
        "lambda": ("lam", float),
        "lam": ("lam", float),
    },
}


def parse_config_text(text: str, base: Optional[TrainConfig] = None) -> TrainConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    base = base if base is not None else TrainConfig()
    env_kw: Dict[str, Any] = {}
    train_kw: Dict[str, Any] = {}
    for section in parser.sections():
        name = section.lower()
        if name == "env":
            table = {k: (k, p) for k, p in ENV_KEYS.items()}
            target = env_kw
        elif name in TRAIN_KEYS:
            table = TRAIN_KEYS[name]
            target = train_kw
        else:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in table:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            field_name, parse = table[key]
            try:
                target[field_name] = parse(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    try:
        env = dataclasses.replace(base.env, **env_kw)
        return dataclasses.replace(base, env=env, **train_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, base: Optional[TrainConfig] = None) -> TrainConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(), base)


def config_to_dict(config: TrainConfig) -> Dict[str, Any]:
    """JSON-friendly snapshot; inverse of :func:`config_from_dict`."""
    out = dataclasses.asdict(config)
    out["variant"] = config.variant.value
    env = out["env"]
    env["collapse_mode"] = config.env.collapse_mode.value
    env["color_base"] = list(config.env.color_base)
    ws = config.env.workspace
    env["workspace"] = None if ws is None else list(ws.as_tuple())
    out["hidden_sizes"] = list(config.hidden_sizes)
    return out


def config_from_dict(data: Mapping[str, Any]) -> TrainConfig:
    data = dict(data)
    env = dict(data.pop("env", {}))
    ws = env.get("workspace")
    if ws is not None:
        env["workspace"] = Workspace(tuple(ws[0:2]), tuple(ws[2:4]), tuple(ws[4:6]))
    if "color_base" in env:
        env["color_base"] = tuple(env["color_base"])
    try:
        return TrainConfig(env=EnvConfig(**env), **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
