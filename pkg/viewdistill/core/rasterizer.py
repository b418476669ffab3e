"""Deterministic z-buffer software renderer for the lift scene.

Primitives are triangulated, moved into camera space, clipped against the near plane and
rasterized with edge functions at pixel centers. Shading is flat per-primitive color times a
depth falloff; there is no lighting model.
"""

import math
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image as PILImage
from pydantic import BaseModel, ConfigDict, model_validator

from viewdistill.core.camgeo import projection_matrix
from viewdistill.schemas.camera import CameraRig, CameraSpec, EgocentricMount, Vec3
from viewdistill.schemas.task import SceneState, TaskConfig

Image = np.ndarray  # (H, W, 3) float32 in [0, 1]

BACKGROUND: Vec3 = (0.60, 0.75, 0.90)
TABLE_COLOR: Vec3 = (0.55, 0.42, 0.30)
CUBE_COLOR: Vec3 = (0.85, 0.10, 0.10)
MUG_COLOR: Vec3 = (0.90, 0.75, 0.10)
FINGER_COLOR: Vec3 = (0.15, 0.15, 0.15)

DEPTH_FALLOFF = 0.2
CYLINDER_SEGMENTS = 16

TABLE_SIZE: Vec3 = (1.0, 0.9, 0.02)
FINGER_SIZE: Vec3 = (0.015, 0.015, 0.06)
FINGER_GAP_CLOSED = 0.02
FINGER_GAP_SPAN = 0.13


class Primitive(BaseModel):
    """Box or upright cylinder. `size` holds full extents; a cylinder's diameter is size[0]."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["box", "cylinder"]
    center: Vec3
    yaw: float = 0.0
    size: Vec3
    color: Vec3

    @model_validator(mode="after")
    def check_size(self) -> "Primitive":
        if min(self.size) <= 0.0:
            raise ValueError(f"primitive dimensions must be positive, got {self.size}")
        return self

    def translated(self, delta: Vec3) -> "Primitive":
        return self.model_copy(
            update={"center": tuple(c + d for c, d in zip(self.center, delta))}
        )


def _planar(yaw: float, local_x: float, local_y: float) -> tuple[float, float]:
    c, s = math.cos(yaw), math.sin(yaw)
    return c * local_x - s * local_y, s * local_x + c * local_y


def finger_gap(gripper_open: float) -> float:
    return FINGER_GAP_CLOSED + FINGER_GAP_SPAN * gripper_open


def scene_primitives(state: SceneState, config: TaskConfig) -> list[Primitive]:
    """Table, object (cube, or mug body plus handle) and the two gripper fingers."""
    geo = config.geometry
    prims = [
        Primitive(
            kind="box",
            center=(0.5, 0.0, config.table_height - TABLE_SIZE[2] / 2.0),
            size=TABLE_SIZE,
            color=TABLE_COLOR,
        )
    ]

    ox, oy, oz = state.object_pos
    if state.object_kind == "cube":
        edge = 2.0 * geo.cube_half_extent
        prims.append(
            Primitive(
                kind="box",
                center=(ox, oy, oz),
                yaw=state.object_yaw,
                size=(edge, edge, edge),
                color=CUBE_COLOR,
            )
        )
    else:
        diameter = 2.0 * geo.mug_radius
        prims.append(
            Primitive(
                kind="cylinder",
                center=(ox, oy, oz + geo.mug_height / 2.0),
                size=(diameter, diameter, geo.mug_height),
                color=MUG_COLOR,
            )
        )
        hx, hy = _planar(state.object_yaw, geo.mug_radius + geo.handle_length / 2.0, 0.0)
        prims.append(
            Primitive(
                kind="box",
                center=(ox + hx, oy + hy, oz + geo.mug_height / 2.0),
                yaw=state.object_yaw,
                size=(geo.handle_length, geo.handle_width, geo.handle_height),
                color=MUG_COLOR,
            )
        )

    gx, gy, gz = state.gripper_pos
    half_gap = finger_gap(state.gripper_open) / 2.0
    for side in (1.0, -1.0):
        fx, fy = _planar(state.gripper_yaw, 0.0, side * half_gap)
        prims.append(
            Primitive(
                kind="box",
                center=(gx + fx, gy + fy, gz + FINGER_SIZE[2] / 2.0),
                yaw=state.gripper_yaw,
                size=FINGER_SIZE,
                color=FINGER_COLOR,
            )
        )
    return prims


_BOX_CORNERS = np.array(
    [[sx, sy, sz] for sx in (-0.5, 0.5) for sy in (-0.5, 0.5) for sz in (-0.5, 0.5)]
)
_BOX_FACES = np.array(
    [
        [0, 1, 3], [0, 3, 2],  # -x
        [4, 6, 7], [4, 7, 5],  # +x
        [0, 4, 5], [0, 5, 1],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [0, 2, 6], [0, 6, 4],  # -z
        [1, 5, 7], [1, 7, 3],  # +z
    ]
)  # fmt: skip


def _local_vertices(prim: Primitive) -> np.ndarray:
    """Triangles (T, 3, 3) in the primitive's frame (before yaw and translation)."""
    sx, sy, sz = prim.size
    if prim.kind == "box":
        corners = _BOX_CORNERS * np.array([sx, sy, sz])
        return corners[_BOX_FACES]

    radius, half_h = sx / 2.0, sz / 2.0
    angles = np.linspace(0.0, 2.0 * math.pi, CYLINDER_SEGMENTS, endpoint=False)
    ring = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    nxt = np.roll(ring, -1, axis=0)
    top = np.full((CYLINDER_SEGMENTS, 1), half_h)
    bottom = -top
    a_bot = np.hstack([ring, bottom])
    b_bot = np.hstack([nxt, bottom])
    a_top = np.hstack([ring, top])
    b_top = np.hstack([nxt, top])
    top_center = np.tile([0.0, 0.0, half_h], (CYLINDER_SEGMENTS, 1))
    bottom_center = np.tile([0.0, 0.0, -half_h], (CYLINDER_SEGMENTS, 1))
    sides_a = np.stack([a_bot, b_bot, b_top], axis=1)
    sides_b = np.stack([a_bot, b_top, a_top], axis=1)
    cap_top = np.stack([top_center, a_top, b_top], axis=1)
    cap_bottom = np.stack([bottom_center, b_bot, a_bot], axis=1)
    return np.concatenate([sides_a, sides_b, cap_top, cap_bottom], axis=0)


def triangulate(prim: Primitive) -> np.ndarray:
    """World-space triangles (T, 3, 3) of one primitive."""
    local = _local_vertices(prim)
    c, s = math.cos(prim.yaw), math.sin(prim.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return local @ rot.T + np.asarray(prim.center)


def _camera_basis(cam: CameraSpec) -> np.ndarray:
    """Rows are the camera's side, up and backward axes in world coordinates."""
    eye = np.asarray(cam.eye, dtype=np.float64)
    forward = np.asarray(cam.target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    side = np.cross(forward, np.asarray(cam.up, dtype=np.float64))
    side /= np.linalg.norm(side)
    up = np.cross(side, forward)
    return np.stack([side, up, -forward])


def _clip_near(tri: np.ndarray, near: float) -> list[np.ndarray]:
    """Clip a camera-space triangle to z <= -near; returns 0, 1 or 2 triangles."""
    inside = tri[:, 2] <= -near
    if inside.all():
        return [tri]
    if not inside.any():
        return []
    poly = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        a_in, b_in = inside[i], inside[(i + 1) % 3]
        if a_in:
            poly.append(a)
        if a_in != b_in:
            t = (-near - a[2]) / (b[2] - a[2])
            poly.append(a + t * (b - a))
    return [np.stack([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]


def _raster_triangle(
    tri: np.ndarray,
    proj: np.ndarray,
    color: np.ndarray,
    image: np.ndarray,
    zbuf: np.ndarray,
) -> None:
    height, width = zbuf.shape
    depth = -tri[:, 2]
    sx = (proj[0, 0] * tri[:, 0] / depth + 1.0) * 0.5 * width
    sy = (1.0 - proj[1, 1] * tri[:, 1] / depth) * 0.5 * height
    sz = (proj[2, 2] * tri[:, 2] + proj[2, 3]) / depth

    x0 = max(int(math.ceil(sx.min() - 0.5)), 0)
    x1 = min(int(math.floor(sx.max() - 0.5)), width - 1)
    y0 = max(int(math.ceil(sy.min() - 0.5)), 0)
    y1 = min(int(math.floor(sy.max() - 0.5)), height - 1)
    if x0 > x1 or y0 > y1:
        return

    area = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sy[1] - sy[0]) * (sx[2] - sx[0])
    if abs(area) < 1e-12:
        return

    px, py = np.meshgrid(np.arange(x0, x1 + 1) + 0.5, np.arange(y0, y1 + 1) + 0.5)
    w0 = ((sx[2] - sx[1]) * (py - sy[1]) - (sy[2] - sy[1]) * (px - sx[1])) / area
    w1 = ((sx[0] - sx[2]) * (py - sy[2]) - (sy[0] - sy[2]) * (px - sx[2])) / area
    w2 = 1.0 - w0 - w1
    covered = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
    if not covered.any():
        return

    z = w0 * sz[0] + w1 * sz[1] + w2 * sz[2]
    zone = zbuf[y0 : y1 + 1, x0 : x1 + 1]
    visible = covered & (z < zone) & (z <= 1.0)
    if not visible.any():
        return

    inv_depth = w0 / depth[0] + w1 / depth[1] + w2 / depth[2]
    shade = 1.0 / (1.0 + DEPTH_FALLOFF / inv_depth)
    zone[visible] = z[visible]
    patch = image[y0 : y1 + 1, x0 : x1 + 1]
    patch[visible] = (shade[visible, None] * color).astype(np.float32)


def render_primitives(
    prims: list[Primitive], cam: CameraSpec, width: int = 84, height: int = 84
) -> Image:
    """Rasterize primitives in list order; nearer fragments win, ties keep the earlier one."""
    image = np.empty((height, width, 3), dtype=np.float32)
    image[:] = BACKGROUND
    zbuf = np.full((height, width), np.inf)
    proj = projection_matrix(cam)
    basis = _camera_basis(cam)
    eye = np.asarray(cam.eye, dtype=np.float64)

    for prim in prims:
        color = np.asarray(prim.color, dtype=np.float64)
        tris = (triangulate(prim) - eye) @ basis.T
        for tri in tris:
            for piece in _clip_near(tri, cam.near):
                _raster_triangle(piece, proj, color, image, zbuf)
    return np.clip(image, 0.0, 1.0)


def render(
    state: SceneState, cam: CameraSpec, config: TaskConfig, width: int = 84, height: int = 84
) -> Image:
    """Render one view of the scene. Identical inputs give bit-identical buffers."""
    return render_primitives(scene_primitives(state, config), cam, width, height)


def egocentric_camera(state: SceneState, mount: EgocentricMount = EgocentricMount()) -> CameraSpec:
    """Camera riding on the gripper, tilted forward along the gripper yaw."""
    tilt = math.radians(mount.tilt_deg)
    yaw = state.gripper_yaw
    gaze = (
        math.cos(yaw) * math.sin(tilt),
        math.sin(yaw) * math.sin(tilt),
        -math.cos(tilt),
    )
    gx, gy, gz = state.gripper_pos
    eye = (
        gx - mount.back_off * gaze[0],
        gy - mount.back_off * gaze[1],
        gz + mount.height - mount.back_off * gaze[2],
    )
    target = (eye[0] + gaze[0], eye[1] + gaze[1], eye[2] + gaze[2])
    return CameraSpec(
        eye=eye,
        target=target,
        fov_deg=mount.fov_deg,
        aspect=mount.aspect,
        near=mount.near,
        far=mount.far,
    )


def rig_cameras(state: SceneState, rig: CameraRig) -> list[CameraSpec]:
    """Cameras of a rig for this state, egocentric first."""
    cams = [egocentric_camera(state, rig.ego)] if rig.ego is not None else []
    return cams + list(rig.third_person)


def render_rig(
    state: SceneState, rig: CameraRig, config: TaskConfig, size: int = 84
) -> list[Image]:
    prims = scene_primitives(state, config)
    return [render_primitives(prims, cam, size, size) for cam in rig_cameras(state, rig)]


def color_mask(image: Image, color: Vec3, tolerance: float = 0.03) -> np.ndarray:
    """Pixels whose chromaticity matches `color` (depth falloff only scales intensity)."""
    total = image.sum(axis=-1, keepdims=True)
    chroma = np.divide(image, total, out=np.zeros_like(image), where=total > 1e-6)
    ref = np.asarray(color) / sum(color)
    return np.all(np.abs(chroma - ref) <= tolerance, axis=-1)


def to_uint8(image: Image) -> np.ndarray:
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(pixels: np.ndarray) -> Image:
    return pixels.astype(np.float32) / 255.0


def write_ppm(path: Path, image: Image) -> None:
    """Binary P6 dump, 8 bits per channel."""
    PILImage.fromarray(to_uint8(image)).save(path, format="PPM")


def read_ppm(path: Path) -> Image:
    with PILImage.open(path) as img:
        return from_uint8(np.asarray(img.convert("RGB")))
