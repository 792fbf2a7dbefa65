"""Command-line entry point: ``unload-rl {train,evaluate,ablate,oracle,render}``.

Exit codes: 0 success, 2 bad configuration or arguments, 3 numerical abort.
The ``UNLOAD_RL_SEED`` environment variable overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__, kernels
from .approximator import CriticEnsemble
from .config import config_to_dict, load_config
from .env import reset, step, write_ppm
from .errors import ConfigError, InputError, NumericalError, UnloadError
from .trainer import (
    ALL_VARIANTS,
    TrainConfig,
    Variant,
    desk_config,
    evaluate,
    metrics_csv,
    oracle_actor,
    run_ablation,
    train,
    write_ablation_outputs,
)

log = logging.getLogger("unload_rl")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class UsageError(UnloadError):
    pass


def _base_config(args) -> TrainConfig:
    base = desk_config() if args.preset == "desk" else TrainConfig()
    if args.config is not None:
        base = load_config(args.config, base)
    return base


def _seed(args) -> int:
    env_seed = os.environ.get("UNLOAD_RL_SEED")
    if env_seed is not None:
        try:
            return int(env_seed)
        except ValueError:
            raise UsageError(f"UNLOAD_RL_SEED={env_seed!r} is not an integer") from None
    return args.seed


def _apply_overrides(config: TrainConfig, args, seed: Optional[int] = None) -> TrainConfig:
    changes = {}
    if getattr(args, "steps", None) is not None:
        changes["total_steps"] = args.steps
    if getattr(args, "variant", None) is not None:
        changes["variant"] = Variant(args.variant)
    if getattr(args, "eval_mask", None) is not None:
        changes["eval_mask"] = args.eval_mask
    if seed is not None:
        changes["seed"] = seed
    try:
        return dataclasses.replace(config, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _write_manifest(path: Path, config_snapshot, seeds, outputs, command: str) -> None:
    manifest = {
        "tool": "unload-rl",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "command": command,
        "seeds": list(seeds),
        "config": config_snapshot,
        "outputs": {k: str(v) for k, v in outputs.items()},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    config = _apply_overrides(_base_config(args), args, _seed(args))
    out = Path(args.out)
    outputs = {"metrics": out / "metrics.csv", "checkpoint": out / "checkpoint.bin"}
    _write_manifest(out / "manifest.json", config_to_dict(config), [config.seed], outputs, "train")

    def progress(t, record):
        log.info("step %d episode %d success %.3f oow %.3f",
                 t, record.episode, record.success_norm, record.oow_norm)

    result = train(config, progress)
    outputs["metrics"].write_text(metrics_csv(result.evals, config.seed, config.variant))
    result.ensemble.save(outputs["checkpoint"])
    print(f"wrote {outputs['metrics']} and {outputs['checkpoint']}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _apply_overrides(_base_config(args), args, _seed(args))
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    try:
        ensemble = CriticEnsemble.load(args.checkpoint)
    except OSError as exc:
        raise UsageError(f"cannot read checkpoint: {exc}") from None
    if ensemble.config.input_dims != config.net_config(0).input_dims:
        raise ConfigError("checkpoint input size does not match the env config")
    record = evaluate(ensemble, config, args.episodes)
    print(f"success_norm={record.success_norm!r} oow_norm={record.oow_norm!r}")
    return EXIT_OK


def _parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise UsageError("--seeds is empty")
    return seeds


def _parse_variants(text: Optional[str]) -> List[Variant]:
    if not text:
        return list(ALL_VARIANTS)
    try:
        return [Variant(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_ablate(args) -> int:
    config = _apply_overrides(_base_config(args), args)
    seeds = _parse_seeds(args.seeds)
    variants = _parse_variants(args.variants)
    out = Path(args.out)
    snapshot = config_to_dict(config)
    snapshot["variants"] = [v.value for v in variants]
    _write_manifest(out / "manifest.json", snapshot, seeds, {"dir": out}, "ablate")
    result = run_ablation(config, seeds, variants, parallel=args.parallel, early_steps=args.early_steps)
    for path in write_ablation_outputs(result, out):
        print(f"wrote {path}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    config = _apply_overrides(_base_config(args), args, _seed(args))
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    record = evaluate(None, config, args.episodes, actor=oracle_actor)
    print(f"success_norm={record.success_norm!r} oow_norm={record.oow_norm!r}")
    return EXIT_OK


def _parse_picks(text: Optional[str]):
    if not text:
        return []
    picks = []
    for item in text.split(";"):
        if not item.strip():
            continue
        try:
            u, v = (int(x) for x in item.split(","))
        except ValueError:
            raise UsageError(f"bad pick {item!r}; expected 'u,v'") from None
        picks.append((u, v))
    return picks


def cmd_render(args) -> int:
    config = _base_config(args)
    state, obs = reset(config.env, _seed(args))
    for pixel in _parse_picks(args.picks):
        if state.terminal:
            break
        _, _, obs = step(state, pixel)
    try:
        write_ppm(args.out, obs)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc}") from None
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unload-rl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--preset", choices=("full", "desk"), default="full",
                       help="defaults before the config file is applied")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    variants = [v.value for v in ALL_VARIANTS]

    p = sub.add_parser("train", help="train one (variant, seed) run")
    common(p)
    p.add_argument("--variant", choices=variants)
    p.add_argument("--steps", type=int)
    p.add_argument("--eval-mask", choices=("mirror", "always"))
    p.add_argument("--out", default="runs/train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="greedy evaluation of a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--variant", choices=variants)
    p.add_argument("--episodes", type=int, default=3)
    p.add_argument("--eval-mask", choices=("mirror", "always"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="all variants x seeds, aggregate CSVs")
    common(p, seed=False)
    p.add_argument("--seeds", default="0,1,2,3,4,5")
    p.add_argument("--variants", help="comma-separated subset of " + ",".join(variants))
    p.add_argument("--steps", type=int)
    p.add_argument("--eval-mask", choices=("mirror", "always"))
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--early-steps", type=int, default=2000)
    p.add_argument("--out", default="runs/ablate")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("oracle", help="roll the top-down oracle")
    common(p)
    p.add_argument("--episodes", type=int, default=3)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("render", help="dump an observation as binary PPM")
    common(p)
    p.add_argument("--picks", help="scripted picks 'u,v;u,v;...' applied after reset")
    p.add_argument("--out", default="render.ppm")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, InputError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
