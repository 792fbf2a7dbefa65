import numpy as np
import pytest

from unload_rl.camera import (
    FRONT_ORTHOGONAL,
    CameraModel,
    Workspace,
    default_workspace,
    in_workspace,
    pixel_to_pose,
    workspace_action_mask,
)
from unload_rl.env import EnvConfig, OutcomeKind, reset, step
from unload_rl.errors import ConfigError, InputError


@pytest.fixture
def setup(default_config):
    state, _ = reset(default_config, 0)
    return state, default_config.camera


def test_default_geometry(default_config):
    cam = default_config.camera
    assert cam.cell_px == 8
    assert cam.viewport == (4, 12, 60, 60)


def test_center_pose_of_bottom_left_cell(setup):
    state, cam = setup
    pose = pixel_to_pose(cam.cell_center((0, 0)), state, cam)
    assert pose.cell == (0, 0)
    assert pose.position[0] == pytest.approx(0.125)
    assert pose.position[2] == pytest.approx(0.125)
    assert pose.orientation == FRONT_ORTHOGONAL
    assert pose.in_workspace


def test_margin_pixel_is_background(setup):
    state, cam = setup
    pose = pixel_to_pose((1, 1), state, cam)
    assert pose.is_background and not pose.in_workspace
    assert pose.position[1] == cam.far_plane_y


def test_emptied_cell_is_background(setup, default_config):
    state, cam = setup
    pixel = cam.cell_center((4, 5))
    step(state, pixel)
    assert pixel_to_pose(pixel, state, cam).is_background


def test_out_of_bounds_pixel(setup):
    state, cam = setup
    with pytest.raises(InputError):
        pixel_to_pose((64, 0), state, cam)


def test_round_trip_every_cell(setup):
    state, cam = setup
    for r in range(cam.rows):
        for c in range(cam.columns):
            u0, v0, u1, v1 = cam.cell_rect((c, r))
            u, v = cam.cell_center((c, r))
            assert u0 <= u < u1 and v0 <= v < v1
            assert cam.cell_at((u, v)) == (c, r)
            pose = pixel_to_pose((u, v), state, cam)
            assert pose.position == cam.cell_position((c, r))
            assert pose.position[2] == pytest.approx((r + 0.5) * cam.parcel_edge)


def test_height_is_monotone(setup):
    state, cam = setup
    z = [pixel_to_pose(cam.cell_center((2, r)), state, cam).position[2] for r in range(cam.rows)]
    assert all(a < b for a, b in zip(z, z[1:]))


def test_in_workspace_examples():
    ws = Workspace((-1, 3), (0, 2), (0, 2))
    from unload_rl.camera import PickPose

    assert in_workspace(PickPose((0.1, 1.5, 0.125), True, (0, 0)), ws)
    assert in_workspace(PickPose((0.1, 1.5, 2.0), True, (0, 7)), ws)  # closed bound
    assert not in_workspace(PickPose((0.1, 6.0, 0.5), False, None), ws)


def test_workspace_bounds_validated():
    with pytest.raises(InputError):
        Workspace((1, 0), (0, 1), (0, 1))


def test_workspace_reaching_far_plane_rejected():
    with pytest.raises(ConfigError):
        EnvConfig(workspace=Workspace((-1, 3), (0, 10), (0, 3)))


def test_mask_full_stack_matches_enumeration(setup):
    state, cam = setup
    ws = default_workspace(cam)
    mask = workspace_action_mask(state, cam, ws)
    brute = np.zeros_like(mask)
    for v in range(cam.obs_resolution):
        for u in range(cam.obs_resolution):
            brute[v, u] = in_workspace(pixel_to_pose((u, v), state, cam, ws), ws)
    assert np.array_equal(mask, brute)
    assert mask.sum() == 42 * cam.cell_px**2


def test_mask_excludes_top_row_when_workspace_is_low(setup):
    state, cam = setup
    ws = Workspace((-0.5, 2.25), (0.0, 2.0), (0.0, 1.25))
    mask = workspace_action_mask(state, cam, ws)
    for c in range(cam.columns):
        u, v = cam.cell_center((c, 5))
        assert not mask[v, u]
        u, v = cam.cell_center((c, 4))
        assert mask[v, u]


def test_mask_empty_stack(setup):
    state, cam = setup
    state.occupancy[:] = False
    assert not workspace_action_mask(state, cam).any()


def test_mask_agrees_with_step_outcomes():
    ws = Workspace((-0.5, 2.25), (0.0, 2.0), (0.0, 1.0))
    cfg = EnvConfig(workspace=ws)
    cam = cfg.camera
    rng = np.random.default_rng(3)
    for episode in range(5):
        state, _ = reset(cfg, episode)
        while not state.terminal:
            mask = workspace_action_mask(state, cam, ws)
            pixel = tuple(int(x) for x in rng.integers(0, 64, 2))
            flagged = mask[pixel[1], pixel[0]]
            _, out, _ = step(state, pixel)
            assert flagged == (out.kind is OutcomeKind.PICK_SUCCESS)


def test_camera_small_resolution_has_no_margin():
    cam = CameraModel.from_config(EnvConfig(columns=4, rows=4, obs_resolution=4))
    assert cam.cell_px == 1 and cam.viewport == (0, 0, 4, 4)
