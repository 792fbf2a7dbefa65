"""Orthographic front-face camera: exact pixel <-> cell <-> Cartesian mapping.

Pixels are ``(u, v)`` with ``u`` the image column and ``v`` the image row
(``v = 0`` at the top of the image).  Stack cells are ``(c, r)`` with ``r = 0``
the ground row.  The inertial frame has ``x`` along the stack face, ``y``
pointing away from the robot towards the stack and ``z`` up.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np

from .errors import InputError

if TYPE_CHECKING:
    from .env import EnvConfig, StackState

Pixel = Tuple[int, int]
Cell = Tuple[int, int]

FRONT_ORTHOGONAL = "FrontOrthogonal"

# Depth of the stack face and of the background plane (meters from the robot).
FRONT_PLANE_Y = 1.5
FAR_PLANE_Y = 6.0


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned reachable box in the inertial frame; bounds are closed."""

    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    z_range: Tuple[float, float]

    def __post_init__(self):
        for name in ("x_range", "y_range", "z_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InputError(f"workspace {name} has min > max: {lo} > {hi}")

    def contains(self, position) -> bool:
        x, y, z = position
        return (
            self.x_range[0] <= x <= self.x_range[1]
            and self.y_range[0] <= y <= self.y_range[1]
            and self.z_range[0] <= z <= self.z_range[1]
        )

    def as_tuple(self) -> Tuple[float, ...]:
        return (*self.x_range, *self.y_range, *self.z_range)


@dataclass(frozen=True)
class PickPose:
    """End-effector picking pose with a fixed front-orthogonal orientation.

    ``cell`` is ``None`` for background poses (far plane, behind empty space).
    """

    position: Tuple[float, float, float]
    in_workspace: bool
    cell: Optional[Cell] = None
    orientation: str = FRONT_ORTHOGONAL

    @property
    def is_background(self) -> bool:
        return self.cell is None


def _margin(resolution: int, cells: int) -> int:
    return max(0, min(max(1, resolution // 16), (resolution - cells) // 2))


@dataclass(frozen=True)
class CameraModel:
    obs_resolution: int
    columns: int
    rows: int
    parcel_edge: float
    cell_px: int
    u_left: int
    v_ground: int
    front_plane_y: float = FRONT_PLANE_Y
    far_plane_y: float = FAR_PLANE_Y

    @classmethod
    def from_config(cls, config: "EnvConfig") -> "CameraModel":
        res = config.obs_resolution
        span = max(config.columns, config.rows)
        margin = _margin(res, span)
        cell_px = (res - 2 * margin) // span
        grid_w = cell_px * config.columns
        return cls(
            obs_resolution=res,
            columns=config.columns,
            rows=config.rows,
            parcel_edge=config.parcel_edge,
            cell_px=cell_px,
            u_left=(res - grid_w) // 2,
            v_ground=res - margin,
        )

    @property
    def n_pixels(self) -> int:
        return self.obs_resolution * self.obs_resolution

    @property
    def viewport(self) -> Tuple[int, int, int, int]:
        """Grid rectangle as ``(u0, v0, u1, v1)``, half-open."""
        return (
            self.u_left,
            self.v_ground - self.rows * self.cell_px,
            self.u_left + self.columns * self.cell_px,
            self.v_ground,
        )

    def check_pixel(self, pixel: Pixel) -> Tuple[int, int]:
        try:
            u, v = int(pixel[0]), int(pixel[1])
        except (TypeError, IndexError, ValueError):
            raise InputError(f"pixel must be a (u, v) pair, got {pixel!r}") from None
        if not (0 <= u < self.obs_resolution and 0 <= v < self.obs_resolution):
            raise InputError(
                f"pixel {(u, v)} outside {self.obs_resolution}x{self.obs_resolution} image"
            )
        return u, v

    def cell_at(self, pixel: Pixel) -> Optional[Cell]:
        """Cell under ``pixel`` regardless of occupancy; ``None`` in the margin."""
        u, v = self.check_pixel(pixel)
        u0, v0, u1, v1 = self.viewport
        if not (u0 <= u < u1 and v0 <= v < v1):
            return None
        return (u - u0) // self.cell_px, (self.v_ground - 1 - v) // self.cell_px

    def cell_rect(self, cell: Cell) -> Tuple[int, int, int, int]:
        c, r = cell
        u0 = self.u_left + c * self.cell_px
        v1 = self.v_ground - r * self.cell_px
        return u0, v1 - self.cell_px, u0 + self.cell_px, v1

    def cell_center(self, cell: Cell) -> Pixel:
        u0, v0, _, _ = self.cell_rect(cell)
        half = self.cell_px // 2
        return u0 + half, v0 + half

    def cell_position(self, cell: Cell) -> Tuple[float, float, float]:
        c, r = cell
        e = self.parcel_edge
        return ((c + 0.5) * e, self.front_plane_y, (r + 0.5) * e)

    def background_position(self, pixel: Pixel) -> Tuple[float, float, float]:
        u, v = pixel
        scale = self.parcel_edge / self.cell_px
        return (
            (u - self.u_left + 0.5) * scale,
            self.far_plane_y,
            (self.v_ground - v - 0.5) * scale,
        )

    @cached_property
    def cell_index_map(self) -> np.ndarray:
        """``(R, R)`` int map of flat cell index ``r * columns + c``; -1 in the margin."""
        res = self.obs_resolution
        out = np.full((res, res), -1, dtype=np.int64)
        for r in range(self.rows):
            for c in range(self.columns):
                u0, v0, u1, v1 = self.cell_rect((c, r))
                out[v0:v1, u0:u1] = r * self.columns + c
        out.setflags(write=False)
        return out


def default_workspace(camera: CameraModel) -> Workspace:
    """Stack bounding box plus a ground margin; only background poses fall outside."""
    e = camera.parcel_edge
    return Workspace(
        x_range=(-0.5, camera.columns * e + 0.5),
        y_range=(0.0, camera.front_plane_y + 0.5),
        z_range=(0.0, camera.rows * e + 0.5),
    )


def pixel_to_pose(
    pixel: Pixel,
    state: "StackState",
    camera: CameraModel,
    workspace: Optional[Workspace] = None,
) -> PickPose:
    ws = workspace if workspace is not None else default_workspace(camera)
    cell = camera.cell_at(pixel)
    if cell is not None and state.occupancy[cell[1], cell[0]]:
        position = camera.cell_position(cell)
        return PickPose(position, ws.contains(position), cell)
    position = camera.background_position(camera.check_pixel(pixel))
    return PickPose(position, ws.contains(position), None)


def in_workspace(pose: PickPose, workspace: Workspace) -> bool:
    return workspace.contains(pose.position)


@lru_cache(maxsize=64)
def cell_workspace_flags(camera: CameraModel, workspace: Workspace) -> np.ndarray:
    """``(rows, columns)`` bool: is the face center of each cell reachable."""
    flags = np.zeros((camera.rows, camera.columns), dtype=bool)
    for r in range(camera.rows):
        for c in range(camera.columns):
            flags[r, c] = workspace.contains(camera.cell_position((c, r)))
    flags.setflags(write=False)
    return flags


def workspace_action_mask(
    state: "StackState",
    camera: CameraModel,
    workspace: Optional[Workspace] = None,
) -> np.ndarray:
    """Per-pixel ``(R, R)`` bool map indexed ``[v, u]``; true iff the pixel
    resolves to an in-workspace pose.

    Background always resolves to the far plane, which no valid workspace
    contains (see :func:`check_workspace`), so only occupied cells can be true.
    """
    ws = workspace if workspace is not None else default_workspace(camera)
    allowed = state.occupancy & cell_workspace_flags(camera, ws)
    lookup = np.append(allowed.reshape(-1), False)
    return lookup[camera.cell_index_map]


def check_workspace(workspace: Workspace, camera: CameraModel) -> None:
    lo, hi = workspace.y_range
    if lo <= camera.far_plane_y <= hi:
        raise InputError(
            f"workspace y_range {workspace.y_range} reaches the background plane "
            f"at y={camera.far_plane_y}"
        )
