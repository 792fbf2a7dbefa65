"""K-critic ensemble of dense pixel-value networks with a shared trunk.

All parameters (trunk, then heads in order, each layer weight then bias) live
in one flat float64 vector so that Adam and Polyak tracking are single fused
kernel calls.  The target copy uses the same layout.

The final layer of each head stores its weights as ``(n_pixels, fan_in)``: one
row per pixel, so the loss at the taken action touches exactly one row.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import ConfigError, InputError, NumericalError

CHECKPOINT_MAGIC = b"UNLDQNv\x00"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    input_dims: Tuple[int, int, int]
    hidden_sizes: Tuple[int, ...] = (256, 256)
    K: int = 2
    trunk_layers: int = 1
    final_init: str = "fan_in"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(x) for x in self.input_dims))
        object.__setattr__(self, "hidden_sizes", tuple(int(x) for x in self.hidden_sizes))
        if len(self.input_dims) != 3 or min(self.input_dims) < 1:
            raise ConfigError(f"input_dims must be (C, H, W) positive, got {self.input_dims}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ConfigError("hidden_sizes must be a non-empty list of positive sizes")
        if not 1 <= self.trunk_layers <= len(self.hidden_sizes):
            raise ConfigError(
                f"trunk_layers must be in [1, {len(self.hidden_sizes)}], got {self.trunk_layers}"
            )
        if self.final_init not in ("fan_in", "zero"):
            raise ConfigError(f"final_init must be 'fan_in' or 'zero', got {self.final_init!r}")

    @property
    def input_size(self) -> int:
        c, h, w = self.input_dims
        return c * h * w

    @property
    def n_pixels(self) -> int:
        return self.input_dims[1] * self.input_dims[2]

    def layer_shapes(self) -> Tuple[List[Tuple[int, int]], List[Tuple[int, int]]]:
        """``(fan_in, fan_out)`` of trunk layers and of one head's layers."""
        sizes = [self.input_size, *self.hidden_sizes]
        trunk = [(sizes[i], sizes[i + 1]) for i in range(self.trunk_layers)]
        head = [(sizes[i], sizes[i + 1]) for i in range(self.trunk_layers, len(sizes) - 1)]
        head.append((sizes[-1], self.n_pixels))
        return trunk, head

    def n_params(self) -> int:
        trunk, head = self.layer_shapes()
        per = lambda shapes: sum(a * b + b for a, b in shapes)  # noqa: E731
        return per(trunk) + self.K * per(head)


@dataclass
class Layers:
    """Views into a flat parameter vector.  ``heads[k][-1]`` is the pixel layer."""

    trunk: List[Tuple[np.ndarray, np.ndarray]]
    heads: List[List[Tuple[np.ndarray, np.ndarray]]]


def _layer_views(flat: np.ndarray, config: NetConfig) -> Layers:
    trunk_shapes, head_shapes = config.layer_shapes()
    offset = 0

    def take(fan_in, fan_out, pixel_rows=False):
        nonlocal offset
        n = fan_in * fan_out
        w = flat[offset : offset + n]
        w = w.reshape(fan_out, fan_in) if pixel_rows else w.reshape(fan_in, fan_out)
        offset += n
        b = flat[offset : offset + fan_out]
        offset += fan_out
        return w, b

    trunk = [take(a, b) for a, b in trunk_shapes]
    heads = []
    for _ in range(config.K):
        layers = [take(a, b) for a, b in head_shapes[:-1]]
        layers.append(take(*head_shapes[-1], pixel_rows=True))
        heads.append(layers)
    assert offset == flat.size
    return Layers(trunk, heads)


def min_over_critics(qmaps: np.ndarray) -> np.ndarray:
    """Elementwise minimum over the leading (critic) axis."""
    q = np.asarray(qmaps)
    if q.ndim < 1 or q.shape[0] < 1:
        raise InputError("min_over_critics needs at least one map")
    return np.min(q, axis=0)


def td_targets_from_qmaps(rewards, next_qmaps, terminals, gamma: float) -> np.ndarray:
    """``r + gamma * max_a min_k Q_k(s', a)``, cut to ``r`` at terminal states.

    ``next_qmaps`` is ``(K, N, P)`` (or any ``(K, N, ...)``).
    """
    if not 0.0 <= gamma < 1.0:
        raise InputError(f"gamma must lie in [0, 1), got {gamma}")
    r = np.asarray(rewards, dtype=np.float64)
    q = np.asarray(next_qmaps, dtype=np.float64)
    best = min_over_critics(q).reshape(q.shape[1], -1).max(axis=1)
    return np.where(np.asarray(terminals, dtype=bool), r, r + gamma * best)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


@dataclass
class CriticEnsemble:
    config: NetConfig
    params: np.ndarray
    target: np.ndarray
    adam: AdamState
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    layers: Layers = field(init=False, repr=False)
    target_layers: Layers = field(init=False, repr=False)
    _grad: np.ndarray = field(init=False, repr=False)
    _grad_layers: Layers = field(init=False, repr=False)

    def __post_init__(self):
        n = self.config.n_params()
        for name in ("params", "target"):
            arr = getattr(self, name)
            if arr.shape != (n,) or arr.dtype != np.float64 or not arr.flags.c_contiguous:
                raise InputError(f"{name} must be a contiguous float64 vector of length {n}")
        self.layers = _layer_views(self.params, self.config)
        self.target_layers = _layer_views(self.target, self.config)
        self._grad = np.zeros(n)
        self._grad_layers = _layer_views(self._grad, self.config)

    @classmethod
    def initialize(cls, config: NetConfig, rng: Optional[np.random.Generator] = None, **adam):
        """Fan-in scaled uniform weights, zero biases, target = online."""
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        params = np.zeros(config.n_params())
        layers = _layer_views(params, config)
        for w, _ in layers.trunk:
            w[...] = rng.uniform(-1.0, 1.0, size=w.shape) / np.sqrt(w.shape[0])
        for head in layers.heads:
            for w, _ in head[:-1]:
                w[...] = rng.uniform(-1.0, 1.0, size=w.shape) / np.sqrt(w.shape[0])
            w_out, _ = head[-1]
            if config.final_init == "fan_in":
                w_out[...] = rng.uniform(-1.0, 1.0, size=w_out.shape) / np.sqrt(w_out.shape[1])
        return cls(
            config=config,
            params=params,
            target=params.copy(),
            adam=AdamState(np.zeros_like(params), np.zeros_like(params)),
            **adam,
        )

    @property
    def K(self) -> int:
        return self.config.K

    def _flatten_input(self, observation) -> Tuple[np.ndarray, bool]:
        obs = np.asarray(observation)
        dims = self.config.input_dims
        if obs.shape == dims:
            return obs.reshape(1, -1).astype(np.float64), True
        if obs.ndim == 4 and obs.shape[1:] == dims:
            return obs.reshape(obs.shape[0], -1).astype(np.float64), False
        raise InputError(f"observation shape {obs.shape} does not match input_dims {dims}")

    def _maps(self, x: np.ndarray, layers: Layers) -> np.ndarray:
        h = x
        for w, b in layers.trunk:
            h = np.maximum(h @ w + b, 0.0)
        out = np.empty((self.K, x.shape[0], self.config.n_pixels))
        for k, head in enumerate(layers.heads):
            hk = h
            for w, b in head[:-1]:
                hk = np.maximum(hk @ w + b, 0.0)
            w_out, b_out = head[-1]
            np.add(hk @ w_out.T, b_out, out=out[k])
        if not np.isfinite(out).all():
            raise NumericalError("non-finite Q values in forward pass")
        return out

    def forward(self, observation, use_target: bool = False) -> np.ndarray:
        """Per-pixel Q maps: ``(K, H, W)`` for one observation, ``(K, N, H, W)`` for a batch."""
        x, single = self._flatten_input(observation)
        maps = self._maps(x, self.target_layers if use_target else self.layers)
        _, h, w = self.config.input_dims
        if single:
            return maps.reshape(self.K, h, w)
        return maps.reshape(self.K, x.shape[0], h, w)

    def td_target(self, rewards, next_observations, terminals, gamma: float) -> np.ndarray:
        """Bootstrap targets from the target critics; constants w.r.t. online params."""
        x, _ = self._flatten_input(next_observations)
        r = np.atleast_1d(np.asarray(rewards, dtype=np.float64))
        term = np.atleast_1d(np.asarray(terminals, dtype=bool))
        if term.all():
            return r.copy()
        return td_targets_from_qmaps(r, self._maps(x, self.target_layers), term, gamma)

    def loss_and_grad(self, observations, actions, targets) -> Tuple[np.ndarray, np.ndarray]:
        """Per-critic MSE at the taken pixels and the gradient of their sum.

        The returned gradient is an internal buffer reused by the next call.
        """
        x, _ = self._flatten_input(observations)
        a = np.asarray(actions, dtype=np.int64).reshape(-1)
        y = np.asarray(targets, dtype=np.float64).reshape(-1)
        n = x.shape[0]
        if n == 0 or a.shape[0] != n or y.shape[0] != n:
            raise InputError("batch must be non-empty with one action and target per sample")
        if a.min() < 0 or a.max() >= self.config.n_pixels:
            raise InputError("action index outside the pixel map")
        if not np.isfinite(y).all():
            raise InputError("targets must be finite")

        grad = self._grad
        grad.fill(0.0)
        glayers = self._grad_layers

        acts = [x]
        for w, b in self.layers.trunk:
            acts.append(np.maximum(acts[-1] @ w + b, 0.0))
        trunk_out = acts[-1]

        losses = np.empty(self.K)
        d_trunk = np.zeros_like(trunk_out)
        for k, head in enumerate(self.layers.heads):
            gh = glayers.heads[k]
            hs = [trunk_out]
            for w, b in head[:-1]:
                hs.append(np.maximum(hs[-1] @ w + b, 0.0))
            w_out, b_out = head[-1]
            rows = w_out[a]
            q = (hs[-1] * rows).sum(axis=1) + b_out[a]
            resid = q - y
            losses[k] = np.mean(resid * resid)
            dq = (2.0 / n) * resid
            np.add.at(gh[-1][0], a, dq[:, None] * hs[-1])
            np.add.at(gh[-1][1], a, dq)
            dh = dq[:, None] * rows
            for i in range(len(head) - 2, -1, -1):
                w, _ = head[i]
                dz = dh * (hs[i + 1] > 0.0)
                gh[i][0][...] = hs[i].T @ dz
                gh[i][1][...] = dz.sum(axis=0)
                dh = dz @ w.T
            d_trunk += dh

        dh = d_trunk
        for i in range(len(self.layers.trunk) - 1, -1, -1):
            w, _ = self.layers.trunk[i]
            dz = dh * (acts[i + 1] > 0.0)
            glayers.trunk[i][0][...] = acts[i].T @ dz
            glayers.trunk[i][1][...] = dz.sum(axis=0)
            if i > 0:
                dh = dz @ w.T
        return losses, grad

    def update(self, observations, actions, targets) -> np.ndarray:
        """One Adam step on all K critics; returns the pre-update per-critic losses."""
        losses, grad = self.loss_and_grad(observations, actions, targets)
        # grad @ grad is non-finite iff some entry is non-finite (or it overflows)
        if not (math.isfinite(float(grad @ grad)) and np.isfinite(losses).all()):
            raise NumericalError(
                "non-finite gradient",
                {"step": self.adam.step, "losses": losses.tolist(),
                 "param_norm": float(np.linalg.norm(self.params))},
            )
        self.adam.step += 1
        t = self.adam.step
        kernels.adam_step(
            self.params, grad, self.adam.m, self.adam.v,
            self.lr, self.beta1, self.beta2, self.eps,
            1.0 - self.beta1**t, 1.0 - self.beta2**t,
        )
        return losses

    def polyak_update(self, zeta: float) -> None:
        if not 0.0 < zeta <= 1.0:
            raise InputError(f"zeta must lie in (0, 1], got {zeta}")
        if zeta == 1.0:
            self.target[...] = self.params
        else:
            kernels.polyak(self.target, self.params, zeta)

    def copy(self) -> "CriticEnsemble":
        return CriticEnsemble(
            config=self.config,
            params=self.params.copy(),
            target=self.target.copy(),
            adam=AdamState(self.adam.m.copy(), self.adam.v.copy(), self.adam.step),
            lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
        )

    # checkpoint format: magic | u32 version | u32 header length | header JSON |
    # online params | target params | adam m | adam v  (all <f8) | u64 adam step

    def to_bytes(self) -> bytes:
        header = {
            "net": asdict(self.config),
            "adam": {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps},
        }
        blob = json.dumps(header, sort_keys=True).encode()
        buf = io.BytesIO()
        buf.write(CHECKPOINT_MAGIC)
        buf.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        buf.write(blob)
        for arr in (self.params, self.target, self.adam.m, self.adam.v):
            buf.write(arr.astype("<f8", copy=False).tobytes())
        buf.write(struct.pack("<Q", self.adam.step))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CriticEnsemble":
        if data[:8] != CHECKPOINT_MAGIC:
            raise InputError("not a critic checkpoint (bad magic)")
        version, hlen = struct.unpack_from("<II", data, 8)
        if version != CHECKPOINT_VERSION:
            raise InputError(f"unsupported checkpoint version {version}")
        pos = 16
        header = json.loads(data[pos : pos + hlen])
        pos += hlen
        config = NetConfig(**header["net"])
        n = config.n_params()
        expected = pos + 4 * 8 * n + 8
        if len(data) != expected:
            raise InputError(f"checkpoint length {len(data)} != expected {expected}")
        arrays = []
        for _ in range(4):
            arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(np.float64))
            pos += 8 * n
        (step,) = struct.unpack_from("<Q", data, pos)
        return cls(
            config=config,
            params=arrays[0],
            target=arrays[1],
            adam=AdamState(arrays[2], arrays[3], int(step)),
            **header["adam"],
        )

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "CriticEnsemble":
        return cls.from_bytes(Path(path).read_bytes())


def build_ensemble(
    input_dims: Sequence[int],
    hidden_sizes: Sequence[int] = (256, 256),
    K: int = 2,
    seed: int = 0,
    **kwargs,
) -> CriticEnsemble:
    adam = {k: kwargs.pop(k) for k in ("lr", "beta1", "beta2", "eps") if k in kwargs}
    config = NetConfig(tuple(input_dims), tuple(hidden_sizes), K, seed=seed, **kwargs)
    return CriticEnsemble.initialize(config, **adam)
