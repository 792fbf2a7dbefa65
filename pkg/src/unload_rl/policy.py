"""Safety-bias mask, softmax exploration and greedy evaluation.

Every action rule here reads the *target* critics: the min over the K target
maps, shifted by ``b`` on in-workspace pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approximator import min_over_critics
from .camera import Pixel
from .errors import ConfigError, InputError


@dataclass(frozen=True)
class MaskConfig:
    b: float = 100.0
    epsilon: float = 0.1
    softmax_temperature: float = 1.0

    def __post_init__(self):
        if not self.b > 0:
            raise ConfigError(f"safety bias b must be positive, got {self.b}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.softmax_temperature > 0:
            raise ConfigError("softmax_temperature must be positive")


def index_to_pixel(index: int, width: int) -> Pixel:
    v, u = divmod(int(index), width)
    return u, v


def pixel_to_index(pixel: Pixel, width: int) -> int:
    return int(pixel[1]) * width + int(pixel[0])


def mask_apply(qmap: np.ndarray, ws_mask: np.ndarray, b: float) -> np.ndarray:
    q = np.asarray(qmap, dtype=np.float64)
    m = np.asarray(ws_mask, dtype=bool)
    if q.shape != m.shape:
        raise InputError(f"Q map shape {q.shape} != mask shape {m.shape}")
    return np.where(m, q + b, q)


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64).reshape(-1) / temperature
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def target_min_q(observation, ensemble) -> np.ndarray:
    return min_over_critics(ensemble.forward(observation, use_target=True))


def exploration_action(
    observation,
    ensemble,
    ws_mask: np.ndarray,
    config: MaskConfig,
    rng: np.random.Generator,
    use_mask: bool = True,
) -> Pixel:
    """Uniform in-workspace pixel with probability epsilon, else a softmax draw.

    ``use_mask=False`` drops the bias from the softmax logits only; the
    epsilon branch still samples in-workspace pixels.
    """
    mask = np.asarray(ws_mask, dtype=bool)
    width = mask.shape[1]
    u = rng.random()
    if u <= config.epsilon:
        allowed = np.flatnonzero(mask)
        if allowed.size:
            return index_to_pixel(allowed[rng.integers(allowed.size)], width)
    q = target_min_q(observation, ensemble)
    logits = mask_apply(q, mask, config.b) if use_mask else q
    cdf = np.cumsum(softmax(logits, config.softmax_temperature))
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return index_to_pixel(min(idx, cdf.size - 1), width)


def greedy_action(observation, ensemble, ws_mask: np.ndarray, b: float) -> Pixel:
    """Argmax of the masked min-target map; ties go to the lowest row-major index.

    Pass ``b=0`` for the unmasked rule.
    """
    mask = np.asarray(ws_mask, dtype=bool)
    q = target_min_q(observation, ensemble)
    logits = mask_apply(q, mask, b) if b else q
    return index_to_pixel(int(np.argmax(logits)), mask.shape[1])
