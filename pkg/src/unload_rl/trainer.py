"""Deep Q-learning loop, periodic evaluation and the multi-seed ablation harness."""

from __future__ import annotations

import csv
import enum
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .approximator import CriticEnsemble, NetConfig
from .camera import workspace_action_mask
from .env import EnvConfig, StackState, oracle_policy, reset, step
from .errors import ConfigError, InputError, NumericalError
from .policy import MaskConfig, exploration_action, greedy_action, pixel_to_index
from .replay import ReplayBuffer, Transition
from .reward import RewardConfig, RewardKind, reward

log = logging.getLogger(__name__)

# Sub-stream ids for SeedSequence-derived generators.
_STREAM_ENV, _STREAM_NET, _STREAM_EXPLORE, _STREAM_REPLAY, _STREAM_EVAL = range(5)


class Variant(str, enum.Enum):
    MASK_OFF = "mask-off"
    MASK_OFF_V = "mask-off-v"
    MASK_ON = "mask-on"
    MASK_ON_V = "mask-on-v"

    @property
    def mask(self) -> bool:
        return self in (Variant.MASK_ON, Variant.MASK_ON_V)

    @property
    def verticality(self) -> bool:
        return self in (Variant.MASK_OFF_V, Variant.MASK_ON_V)


ALL_VARIANTS = (Variant.MASK_OFF, Variant.MASK_OFF_V, Variant.MASK_ON, Variant.MASK_ON_V)


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 100_000
    zeta: float = 0.005
    batch_size: int = 64
    learning_rate: float = 1e-4
    gamma: float = 0.99
    K: int = 2
    epsilon: float = 0.1
    lam: float = 2.0
    b: float = 100.0
    softmax_temperature: float = 1.0
    eval_every_episodes: int = 10
    eval_episodes: int = 3
    seed: int = 0
    variant: Variant = Variant.MASK_ON_V
    hidden_sizes: Tuple[int, ...] = (256, 256)
    trunk_layers: int = 1
    final_init: str = "fan_in"
    replay_capacity: int = 100_000
    eval_mask: str = "mirror"
    env: EnvConfig = field(default_factory=EnvConfig)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")
        if not 0.0 < self.zeta <= 1.0:
            raise ConfigError(f"zeta must lie in (0, 1], got {self.zeta}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.eval_every_episodes < 1 or self.eval_episodes < 1:
            raise ConfigError("eval_every_episodes and eval_episodes must be positive")
        if self.eval_mask not in ("mirror", "always"):
            raise ConfigError(f"eval_mask must be 'mirror' or 'always', got {self.eval_mask!r}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        # validate the derived configs eagerly
        self.mask_config()
        self.reward_config()
        self.net_config(0)

    def mask_config(self) -> MaskConfig:
        return MaskConfig(self.b, self.epsilon, self.softmax_temperature)

    def reward_config(self) -> RewardConfig:
        kind = RewardKind.VERTICALITY if self.variant.verticality else RewardKind.BASELINE
        return RewardConfig(kind, self.lam)

    def net_config(self, seed: int) -> NetConfig:
        res = self.env.obs_resolution
        return NetConfig(
            input_dims=(3, res, res),
            hidden_sizes=self.hidden_sizes,
            K=self.K,
            trunk_layers=self.trunk_layers,
            final_init=self.final_init,
            seed=seed,
        )

    @property
    def eval_bias(self) -> float:
        """Bias used by the greedy evaluation rule (0 disables the mask)."""
        return self.b if (self.variant.mask or self.eval_mask == "always") else 0.0


def desk_config(**overrides) -> TrainConfig:
    """4x3 stack, 32x32 observations, full-scale hyperparameters otherwise."""
    env = EnvConfig(columns=4, rows=3, obs_resolution=32)
    base = dict(total_steps=20_000, env=env)
    base.update(overrides)
    return TrainConfig(**base)


@dataclass(frozen=True)
class EvalRecord:
    step: int
    episode: int
    success_norm: float
    oow_norm: float
    successes: Tuple[int, ...]
    oow_attempts: Tuple[int, ...]


@dataclass
class TrainResult:
    ensemble: CriticEnsemble
    evals: List[EvalRecord]
    train_oow: np.ndarray  # bool per training step
    episodes: int = 0


def _seed_from(run_seed: int, stream: int, counter: int = 0) -> int:
    return int(np.random.SeedSequence([run_seed, stream, counter]).generate_state(1)[0])


def _generator(run_seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([run_seed, stream]))


Actor = Callable[[StackState, np.ndarray, np.ndarray], Tuple[int, int]]


def rollout(config: EnvConfig, episode_seed: int, actor: Actor) -> Dict[str, int]:
    """Run one full episode; returns raw counts."""
    state, obs = reset(config, episode_seed)
    camera, ws = config.camera, config.resolved_workspace
    successes = oow = decisions = 0
    while not state.terminal:
        mask = workspace_action_mask(state, camera, ws)
        _, outcome, obs = step(state, actor(state, obs, mask), camera, ws)
        decisions += 1
        successes += outcome.success
        oow += outcome.out_of_workspace
    return {"successes": successes, "oow": oow, "decisions": decisions, "clock": state.t}


def evaluate(
    ensemble: Optional[CriticEnsemble],
    config: TrainConfig,
    n_episodes: int,
    step_index: int = 0,
    episode_index: int = 0,
    eval_round: int = 0,
    actor: Optional[Actor] = None,
) -> EvalRecord:
    """Greedy rollouts on freshly seeded environments, normalized by the parcel count."""
    if n_episodes < 1:
        raise InputError(f"n_episodes must be >= 1, got {n_episodes}")
    if actor is None:
        if ensemble is None:
            raise InputError("evaluate needs an ensemble or an actor")
        bias = config.eval_bias

        def actor(state, obs, mask):
            return greedy_action(obs, ensemble, mask, bias)

    env = config.env
    succ, oow = [], []
    for j in range(n_episodes):
        seed = _seed_from(config.seed, _STREAM_EVAL, eval_round * n_episodes + j)
        counts = rollout(env, seed, actor)
        succ.append(counts["successes"])
        oow.append(counts["oow"])
    n_total = env.n_total
    success_norm = float(np.mean(succ)) / n_total
    oow_norm = float(np.mean(oow)) / n_total
    assert oow_norm <= 1.0
    return EvalRecord(step_index, episode_index, success_norm, oow_norm, tuple(succ), tuple(oow))


def oracle_actor(state: StackState, obs, mask):
    return oracle_policy(state)


def train(config: TrainConfig, progress: Optional[Callable[[int, EvalRecord], None]] = None) -> TrainResult:
    env_cfg = config.env
    camera, ws = env_cfg.camera, env_cfg.resolved_workspace
    width = env_cfg.obs_resolution
    mask_cfg = config.mask_config()
    reward_cfg = config.reward_config()

    ensemble = CriticEnsemble.initialize(
        config.net_config(config.seed), _generator(config.seed, _STREAM_NET), lr=config.learning_rate
    )
    explore_rng = _generator(config.seed, _STREAM_EXPLORE)
    replay_rng = _generator(config.seed, _STREAM_REPLAY)
    buffer = ReplayBuffer(config.replay_capacity)

    evals: List[EvalRecord] = []
    train_oow = np.zeros(config.total_steps, dtype=bool)
    episodes = 0
    if config.total_steps == 0:
        return TrainResult(ensemble, evals, train_oow, episodes)

    state, obs = reset(env_cfg, _seed_from(config.seed, _STREAM_ENV, 0))
    for t in range(config.total_steps):
        mask = workspace_action_mask(state, camera, ws)
        pixel = exploration_action(obs, ensemble, mask, mask_cfg, explore_rng, config.variant.mask)
        train_oow[t] = not mask[pixel[1], pixel[0]]
        _, outcome, next_obs = step(state, pixel, camera, ws)
        r = reward(outcome, reward_cfg)
        buffer.push(Transition(obs, pixel_to_index(pixel, width), r, next_obs, outcome.terminal))

        if len(buffer) >= config.batch_size:
            batch = buffer.sample_batch(config.batch_size, replay_rng)
            y = ensemble.td_target(batch.rewards, batch.next_observations, batch.terminals, config.gamma)
            try:
                ensemble.update(batch.observations, batch.actions, y)
            except NumericalError as exc:
                exc.diagnostics["train_step"] = t
                raise
            ensemble.polyak_update(config.zeta)

        if outcome.terminal:
            episodes += 1
            if episodes % config.eval_every_episodes == 0:
                record = evaluate(
                    ensemble, config, config.eval_episodes,
                    step_index=t + 1, episode_index=episodes,
                    eval_round=episodes // config.eval_every_episodes,
                )
                evals.append(record)
                if progress is not None:
                    progress(t + 1, record)
            state, obs = reset(env_cfg, _seed_from(config.seed, _STREAM_ENV, episodes))
        else:
            obs = next_obs
    return TrainResult(ensemble, evals, train_oow, episodes)


# ---------------------------------------------------------------- ablation


@dataclass
class RunSummary:
    variant: Variant
    seed: int
    evals: List[EvalRecord]
    train_oow_count: int
    train_oow_early: int  # over the first `early_steps` steps


@dataclass
class AblationResult:
    runs: List[RunSummary]
    early_steps: int

    def curves(self, variant: Variant, metric: str = "success_norm") -> Dict[int, np.ndarray]:
        return {
            r.seed: np.array([getattr(e, metric) for e in r.evals])
            for r in self.runs
            if r.variant is variant
        }

    def variants(self) -> List[Variant]:
        seen: List[Variant] = []
        for r in self.runs:
            if r.variant not in seen:
                seen.append(r.variant)
        return seen


def _run_one(args) -> RunSummary:
    config, early_steps = args
    result = train(config)
    oow = result.train_oow
    return RunSummary(
        config.variant, config.seed, result.evals, int(oow.sum()), int(oow[:early_steps].sum())
    )


def run_ablation(
    base: TrainConfig,
    seeds: Sequence[int],
    variants: Sequence[Variant] = ALL_VARIANTS,
    parallel: int = 1,
    early_steps: int = 2000,
) -> AblationResult:
    if not seeds:
        raise InputError("run_ablation needs at least one seed")
    jobs = [
        (replace(base, variant=Variant(v), seed=int(s)), early_steps)
        for v in variants
        for s in seeds
    ]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    return AblationResult(runs, early_steps)


def mean_std_curve(curves: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and population std over seeds, truncated to the shortest curve."""
    if not curves:
        return np.zeros(0), np.zeros(0)
    n = min(len(c) for c in curves)
    stack = np.stack([np.asarray(c[:n], dtype=np.float64) for c in curves])
    return stack.mean(axis=0), stack.std(axis=0)


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    lo_whisker: float
    hi_whisker: float


def box_stats(samples) -> BoxStats:
    """Quartiles plus Tukey whiskers (furthest samples within 1.5 IQR)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise InputError("box_stats of an empty sample")
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    iqr = q3 - q1
    lo = x[x >= q1 - 1.5 * iqr].min()
    hi = x[x <= q3 + 1.5 * iqr].max()
    return BoxStats(float(med), float(q1), float(q3), float(lo), float(hi))


def curve_auc(curve) -> float:
    """Area under a curve sampled once per evaluation, normalized by its length."""
    c = np.asarray(curve, dtype=np.float64)
    return float(c.mean()) if c.size else 0.0


BEST_CRITERIA = {
    "max": lambda c: float(np.max(c)) if len(c) else float("-inf"),
    "final": lambda c: float(c[-1]) if len(c) else float("-inf"),
    "mean": lambda c: float(np.mean(c)) if len(c) else float("-inf"),
}


def best_seed(curves: Dict[int, np.ndarray], criterion: str) -> Tuple[int, float]:
    """Seed with the highest score; the first listed seed wins ties."""
    score = BEST_CRITERIA[criterion]
    best = None
    for seed, curve in curves.items():
        s = score(curve)
        if best is None or s > best[1]:
            best = (seed, s)
    if best is None:
        raise InputError("best_seed needs at least one curve")
    return best


# ---------------------------------------------------------------- CSV output

METRICS_HEADER = ["step", "seed", "variant", "success_norm", "oow_norm"]
BOX_HEADER = ["variant", "metric", "median", "q1", "q3", "lo_whisker", "hi_whisker"]
METRICS = ("success_norm", "oow_norm")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def metrics_rows(evals: Sequence[EvalRecord], seed: int, variant: Variant):
    return [[e.step, seed, variant.value, repr(e.success_norm), repr(e.oow_norm)] for e in evals]


def metrics_csv(evals: Sequence[EvalRecord], seed: int, variant: Variant) -> str:
    return _csv_text(METRICS_HEADER, metrics_rows(evals, seed, variant))


def _box_rows(variant: Variant, series: Dict[str, np.ndarray]):
    rows = []
    for metric in METRICS:
        data = series[metric]
        if len(data) == 0:
            continue
        s = box_stats(data)
        rows.append([variant.value, metric] + [repr(x) for x in (s.median, s.q1, s.q3, s.lo_whisker, s.hi_whisker)])
    return rows


def ablation_tables(result: AblationResult) -> Dict[str, str]:
    """All ablation outputs as ``filename -> CSV text``."""
    out: Dict[str, str] = {}
    rows = []
    for run in result.runs:
        rows.extend(metrics_rows(run.evals, run.seed, run.variant))
    out["metrics.csv"] = _csv_text(METRICS_HEADER, rows)

    curve_rows, box_rows, oow_rows = [], [], []
    best_rows = {k: [] for k in BEST_CRITERIA}
    best_curve_rows = {k: [] for k in BEST_CRITERIA}
    best_box_rows = {k: [] for k in BEST_CRITERIA}
    for variant in result.variants():
        runs = [r for r in result.runs if r.variant is variant]
        mean_series = {}
        for metric in METRICS:
            mean, std = mean_std_curve([np.array([getattr(e, metric) for e in r.evals]) for r in runs])
            mean_series[metric] = mean
            for i, (m, s) in enumerate(zip(mean, std)):
                episode = runs[0].evals[i].episode
                curve_rows.append([variant.value, i, episode, metric, repr(float(m)), repr(float(s)), len(runs)])
        box_rows.extend(_box_rows(variant, mean_series))
        oow_rows.append([
            variant.value,
            repr(float(np.mean([r.train_oow_early for r in runs]))),
            repr(float(np.mean([r.train_oow_count for r in runs]))),
        ])
        curves = result.curves(variant)
        for crit in BEST_CRITERIA:
            seed, score = best_seed(curves, crit)
            best_rows[crit].append([variant.value, crit, seed, repr(score)])
            run = next(r for r in runs if r.seed == seed)
            best_curve_rows[crit].extend(metrics_rows(run.evals, seed, variant))
            best_box_rows[crit].extend(_box_rows(variant, {
                m: np.array([getattr(e, m) for e in run.evals]) for m in METRICS
            }))

    out["curves.csv"] = _csv_text(
        ["variant", "eval_index", "episode", "metric", "mean", "std", "n_seeds"], curve_rows
    )
    out["box_stats.csv"] = _csv_text(BOX_HEADER, box_rows)
    out["train_oow.csv"] = _csv_text(
        ["variant", f"mean_oow_first_{result.early_steps}", "mean_oow_total"], oow_rows
    )
    out["best_seeds.csv"] = _csv_text(
        ["variant", "criterion", "seed", "score"], [r for k in BEST_CRITERIA for r in best_rows[k]]
    )
    for crit in BEST_CRITERIA:
        out[f"best_{crit}_curves.csv"] = _csv_text(METRICS_HEADER, best_curve_rows[crit])
        out[f"best_{crit}_box_stats.csv"] = _csv_text(BOX_HEADER, best_box_rows[crit])
    return out


def write_ablation_outputs(result: AblationResult, out_dir) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in ablation_tables(result).items():
        path = out / name
        path.write_text(text)
        written.append(path)
    return written
