"""Tests for scene primitives, the software renderer and the egocentric camera."""

import math

import numpy as np
import pytest

from viewdistill.core.camgeo import (
    project_point,
    projection_matrix,
    sample_camera,
    view_matrix,
)
from viewdistill.core.rasterizer import (
    BACKGROUND,
    CUBE_COLOR,
    FINGER_COLOR,
    MUG_COLOR,
    TABLE_COLOR,
    color_mask,
    egocentric_camera,
    finger_gap,
    from_uint8,
    read_ppm,
    render,
    render_primitives,
    render_rig,
    scene_primitives,
    to_uint8,
    write_ppm,
)
from viewdistill.schemas.camera import CameraRange, CameraSetup, CameraSpec
from viewdistill.services.liftsim import reset


@pytest.fixture
def front() -> CameraSpec:
    return CameraSetup().front


@pytest.fixture
def cube_state(task_config, rng):
    return reset(task_config, "cube", rng)


class TestScenePrimitives:
    def test_cube_scene_counts(self, cube_state, task_config):
        prims = scene_primitives(cube_state, task_config)
        assert len(prims) == 4
        assert [p.color for p in prims].count(FINGER_COLOR) == 2
        assert sum(p.color == CUBE_COLOR for p in prims) == 1

    def test_mug_scene_counts(self, task_config, rng):
        prims = scene_primitives(reset(task_config, "mug", rng), task_config)
        assert len(prims) == 5
        assert [p.kind for p in prims].count("cylinder") == 1

    def test_finger_separation_tracks_opening(self, cube_state, task_config):
        def separation(opening: float) -> float:
            state = cube_state.model_copy(update={"gripper_open": opening})
            fingers = [p for p in scene_primitives(state, task_config) if p.color == FINGER_COLOR]
            return float(np.linalg.norm(np.subtract(fingers[0].center, fingers[1].center)))

        assert separation(1.0) > separation(0.5) > separation(0.0)
        assert separation(1.0) == pytest.approx(finger_gap(1.0))

    def test_mug_handle_follows_yaw(self, task_config, rng):
        mug = reset(task_config, "mug", rng)
        handles = []
        for yaw in (0.0, math.pi):
            prims = scene_primitives(mug.model_copy(update={"object_yaw": yaw}), task_config)
            handles.append(np.array(prims[2].center))
        center = np.array(mug.object_pos)
        assert (handles[0] - center)[0] > 0.0
        assert (handles[1] - center)[0] < 0.0


class TestRender:
    def test_empty_scene_is_background(self, front):
        image = render_primitives([], front, 32, 24)
        assert image.shape == (24, 32, 3)
        np.testing.assert_allclose(image, np.broadcast_to(BACKGROUND, image.shape), atol=1e-7)

    def test_render_is_bit_identical(self, cube_state, front, task_config):
        a = render(cube_state, front, task_config)
        b = render(cube_state, front, task_config)
        assert a.dtype == np.float32
        assert np.array_equal(a, b)

    def test_object_center_pixel_is_object_colored(self, cube_state, front, task_config):
        image = render(cube_state, front, task_config)
        hit = project_point(
            cube_state.object_pos, view_matrix(front), projection_matrix(front), 84, 84
        )
        assert hit is not None
        mask = color_mask(image, CUBE_COLOR)
        row, col = int(hit.py), int(hit.px)
        assert mask[row, col]
        # the blob around the center is more than a single stray pixel
        assert mask[row - 1 : row + 2, col - 1 : col + 2].sum() >= 5

    def test_table_is_visible_from_front(self, cube_state, front, task_config):
        image = render(cube_state, front, task_config)
        assert color_mask(image, TABLE_COLOR).sum() > 500

    @pytest.mark.slow
    @pytest.mark.parametrize("kind, color", [("cube", CUBE_COLOR), ("mug", MUG_COLOR)])
    def test_object_in_frame_from_any_sampled_camera(self, task_config, kind, color):
        rng = np.random.default_rng(11)
        camera_range = CameraRange()
        counts = []
        for _ in range(1000):
            state = reset(task_config, kind, rng)
            image = render(state, sample_camera(camera_range, rng), task_config)
            counts.append(int(color_mask(image, color).sum()))
        assert min(counts) >= 10

    def test_values_in_unit_range(self, cube_state, front, task_config):
        image = render(cube_state, front, task_config)
        assert image.min() >= 0.0 and image.max() <= 1.0

    def test_translation_consistency(self, cube_state, front, task_config):
        delta = (0.05, -0.02, 0.03)
        prims = scene_primitives(cube_state, task_config)
        a = render_primitives(prims, front)
        b = render_primitives([p.translated(delta) for p in prims], front.translated(delta))
        # only rounding at triangle edges may differ
        assert np.mean(np.abs(a - b)) < 0.01

    def test_rig_order_is_ego_first(self, cube_state, task_config):
        setup = CameraSetup()
        images = render_rig(cube_state, setup.rig(3), task_config)
        assert len(images) == 3
        ego = render(cube_state, egocentric_camera(cube_state, setup.ego), task_config)
        assert np.array_equal(images[0], ego)
        assert np.array_equal(images[1], render(cube_state, setup.front, task_config))


class TestEgocentricCamera:
    def test_rigid_attachment(self, cube_state):
        delta = np.array([0.03, -0.04, 0.02])
        moved = cube_state.model_copy(
            update={"gripper_pos": tuple(np.add(cube_state.gripper_pos, delta))}
        )
        a, b = egocentric_camera(cube_state), egocentric_camera(moved)
        np.testing.assert_allclose(np.subtract(b.eye, a.eye), delta, atol=1e-12)

    def test_gaze_azimuth_follows_yaw(self, cube_state):
        def azimuth(yaw: float) -> float:
            cam = egocentric_camera(cube_state.model_copy(update={"gripper_yaw": yaw}))
            gaze = np.subtract(cam.target, cam.eye)
            return math.atan2(gaze[1], gaze[0])

        turned = azimuth(0.3 + math.pi) - azimuth(0.3)
        assert abs(math.remainder(turned, 2 * math.pi)) == pytest.approx(math.pi, abs=1e-9)

    def test_home_view_shows_table_below(self, cube_state, task_config):
        image = render(cube_state, egocentric_camera(cube_state), task_config)
        table = color_mask(image, TABLE_COLOR)
        assert table[42:].sum() > 0


class TestImageIO:
    def test_ppm_round_trip(self, cube_state, front, task_config, tmp_path):
        image = render(cube_state, front, task_config)
        path = tmp_path / "frame.ppm"
        write_ppm(path, image)
        assert path.read_bytes().startswith(b"P6")
        np.testing.assert_array_equal(read_ppm(path), from_uint8(to_uint8(image)))
