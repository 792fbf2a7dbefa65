"""Finite-horizon parcel-stack unloading environment.

The stack is a ``rows x columns`` wall of cubic parcels seen from the front.
Each decision picks one pixel of the rendered front face.  The episode clock
counts parcels that left the scene, so every episode lasts exactly
``columns * rows`` clock units whatever the agent does:

* a successful pick of a parcel with ``k`` parcels above it removes the picked
  parcel and ``n`` of those ``k`` tumble out of reach (all of them in
  deterministic mode); the clock advances by ``1 + n``;
* a pick on background, on an empty cell or on an unreachable pose removes the
  top parcel of the tallest column (leftmost on ties) and the clock advances
  by one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .camera import (
    CameraModel,
    Pixel,
    Workspace,
    check_workspace,
    default_workspace,
    pixel_to_pose,
    workspace_action_mask,
)
from .errors import ConfigError, InputError, NoActionError, ProtocolError


class CollapseMode(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


class OutcomeKind(str, enum.Enum):
    PICK_SUCCESS = "PickSuccess"
    PICK_OUT_OF_WORKSPACE = "PickOutOfWorkspace"
    PICK_EMPTY_CELL = "PickEmptyCell"


@dataclass(frozen=True)
class EnvConfig:
    columns: int = 7
    rows: int = 6
    parcel_edge: float = 0.25
    obs_resolution: int = 64
    collapse_mode: CollapseMode = CollapseMode.DETERMINISTIC
    p_out: float = 0.7
    color_base: Tuple[float, float, float] = (0.55, 0.35, 0.15)
    color_jitter: float = 0.1
    seed: int = 0
    workspace: Optional[Workspace] = None

    def __post_init__(self):
        object.__setattr__(self, "collapse_mode", CollapseMode(self.collapse_mode))
        object.__setattr__(self, "color_base", tuple(float(x) for x in self.color_base))
        if self.columns < 1 or self.rows < 1:
            raise ConfigError(f"stack must be at least 1x1, got {self.columns}x{self.rows}")
        if self.obs_resolution < max(self.columns, self.rows):
            raise ConfigError(
                f"obs_resolution {self.obs_resolution} smaller than the grid "
                f"{self.columns}x{self.rows}"
            )
        if not self.parcel_edge > 0:
            raise ConfigError("parcel_edge must be positive")
        if not 0.0 <= self.p_out <= 1.0:
            raise ConfigError(f"p_out must lie in [0, 1], got {self.p_out}")
        if len(self.color_base) != 3 or not all(0.0 <= x <= 1.0 for x in self.color_base):
            raise ConfigError(f"color_base must be an RGB triple in [0, 1], got {self.color_base}")
        if self.color_jitter < 0:
            raise ConfigError("color_jitter must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.workspace is not None:
            try:
                check_workspace(self.workspace, CameraModel.from_config(self))
            except InputError as exc:
                raise ConfigError(str(exc)) from None

    @property
    def n_total(self) -> int:
        return self.columns * self.rows

    @property
    def camera(self) -> CameraModel:
        return camera_for(self)

    @property
    def resolved_workspace(self) -> Workspace:
        return self.workspace if self.workspace is not None else default_workspace(self.camera)


@lru_cache(maxsize=64)
def camera_for(config: EnvConfig) -> CameraModel:
    return CameraModel.from_config(config)


@dataclass
class StackState:
    """Mutable episode state.  ``occupancy[r, c]`` with ``r = 0`` the ground row."""

    occupancy: np.ndarray
    shades: np.ndarray
    rng: np.random.Generator
    t: int = 0
    removed_success: int = 0
    removed_fallen: int = 0
    removed_forced: int = 0
    config: EnvConfig = field(default_factory=EnvConfig)

    @property
    def n_total(self) -> int:
        return self.config.n_total

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    @property
    def heights(self) -> np.ndarray:
        return self.occupancy.sum(axis=0)

    @property
    def terminal(self) -> bool:
        return self.t >= self.n_total


@dataclass(frozen=True)
class StepOutcome:
    kind: OutcomeKind
    picked_cell: Optional[Tuple[int, int]]
    z_pick: float
    n_fallen_out: int
    clock_delta: int
    terminal: bool

    @property
    def success(self) -> bool:
        return self.kind is OutcomeKind.PICK_SUCCESS

    @property
    def out_of_workspace(self) -> bool:
        """Attempted pick whose pose was not in the workspace (background included)."""
        return self.kind is not OutcomeKind.PICK_SUCCESS


def reset(config: EnvConfig, episode_seed: int) -> Tuple[StackState, np.ndarray]:
    rng = np.random.default_rng(episode_seed)
    jitter = rng.uniform(
        -config.color_jitter, config.color_jitter, size=(config.rows, config.columns, 3)
    )
    shades = np.clip(np.asarray(config.color_base) + jitter, 0.0, 1.0)
    state = StackState(
        occupancy=np.ones((config.rows, config.columns), dtype=bool),
        shades=shades,
        rng=rng,
        config=config,
    )
    return state, render(state, config)


def _settle(state: StackState) -> None:
    """Compact every column downwards, carrying shades with their parcels."""
    occ = state.occupancy
    for c in range(occ.shape[1]):
        col = occ[:, c]
        n = int(col.sum())
        if n == 0 or col[:n].all():
            continue
        keep = np.nonzero(col)[0]
        state.shades[:n, c] = state.shades[keep, c]
        occ[:, c] = False
        occ[:n, c] = True


def _remove_top(state: StackState) -> None:
    heights = state.heights
    c = int(np.argmax(heights))
    if heights[c] == 0:
        raise ProtocolError("no parcel left to remove")
    state.occupancy[heights[c] - 1, c] = False


def step(
    state: StackState,
    pixel: Pixel,
    camera: Optional[CameraModel] = None,
    workspace: Optional[Workspace] = None,
) -> Tuple[StackState, StepOutcome, np.ndarray]:
    """Apply one pick.  ``state`` is updated in place and returned."""
    config = state.config
    camera = camera if camera is not None else config.camera
    ws = workspace if workspace is not None else config.resolved_workspace
    if state.terminal:
        raise ProtocolError(f"step on terminal state (t={state.t})")
    pixel = camera.check_pixel(pixel)
    pose = pixel_to_pose(pixel, state, camera, ws)

    if pose.is_background or not pose.in_workspace:
        if pose.is_background and camera.cell_at(pixel) is not None:
            kind = OutcomeKind.PICK_EMPTY_CELL
        else:
            kind = OutcomeKind.PICK_OUT_OF_WORKSPACE
        _remove_top(state)
        state.removed_forced += 1
        picked, z_pick, n_out, delta = None, 0.0, 0, 1
    else:
        kind = OutcomeKind.PICK_SUCCESS
        c, r = pose.cell
        height = int(state.occupancy[:, c].sum())
        above = height - 1 - r
        state.occupancy[r, c] = False
        state.removed_success += 1
        if config.collapse_mode is CollapseMode.DETERMINISTIC:
            falls = np.ones(above, dtype=bool)
        else:
            falls = state.rng.random(above) < config.p_out
        state.occupancy[r + 1 : height, c] = ~falls
        n_out = int(falls.sum())
        state.removed_fallen += n_out
        picked, z_pick, delta = (c, r), pose.position[2], 1 + n_out

    _settle(state)
    state.t += delta
    outcome = StepOutcome(kind, picked, z_pick, n_out, delta, state.terminal)
    return state, outcome, render(state, config)


def render(state: StackState, config: Optional[EnvConfig] = None) -> np.ndarray:
    """Front-face image as ``(3, R, R)`` float32 in ``[0, 1]``; empty space is 0."""
    config = config if config is not None else state.config
    camera = config.camera
    colors = np.where(state.occupancy[..., None], state.shades, 0.0).reshape(-1, 3)
    table = np.vstack([colors, np.zeros((1, 3))]).astype(np.float32)
    image = table[camera.cell_index_map]
    return np.ascontiguousarray(image.transpose(2, 0, 1))


def oracle_policy(state: StackState, camera: Optional[CameraModel] = None) -> Pixel:
    """Center pixel of the highest occupied cell, leftmost on ties."""
    camera = camera if camera is not None else state.config.camera
    heights = state.heights
    if heights.max(initial=0) == 0:
        raise NoActionError("oracle_policy called on an empty stack")
    c = int(np.argmax(heights))
    return camera.cell_center((c, int(heights[c]) - 1))


def write_ppm(path, observation: np.ndarray) -> None:
    """Binary P6 dump of a ``(3, H, W)`` observation."""
    obs = np.asarray(observation)
    if obs.ndim != 3 or obs.shape[0] != 3:
        raise InputError(f"expected a (3, H, W) image, got shape {obs.shape}")
    _, h, w = obs.shape
    data = np.clip(np.rint(obs * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + data.tobytes())


def read_ppm(path) -> np.ndarray:
    """Inverse of :func:`write_ppm` (8-bit precision)."""
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise InputError(f"{path} is not an 8-bit P6 file")
    w, h = int(parts[1]), int(parts[2])
    data = np.frombuffer(parts[4], dtype=np.uint8, count=w * h * 3)
    return data.reshape(h, w, 3).transpose(2, 0, 1).astype(np.float32) / 255.0


class UnloadingEnv:
    """Gym-style wrapper holding the config, camera and current state."""

    def __init__(self, config: Optional[EnvConfig] = None):
        self.config = config if config is not None else EnvConfig()
        self.camera = self.config.camera
        self.workspace = self.config.resolved_workspace
        self.state: Optional[StackState] = None

    def reset(self, episode_seed: int) -> np.ndarray:
        self.state, obs = reset(self.config, episode_seed)
        return obs

    def step(self, pixel: Pixel) -> Tuple[np.ndarray, StepOutcome]:
        if self.state is None:
            raise ProtocolError("call reset() before step()")
        _, outcome, obs = step(self.state, pixel, self.camera, self.workspace)
        return obs, outcome

    def action_mask(self) -> np.ndarray:
        if self.state is None:
            raise ProtocolError("call reset() before action_mask()")
        return workspace_action_mask(self.state, self.camera, self.workspace)
