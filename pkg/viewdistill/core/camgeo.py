"""Camera geometry - view/projection matrices, projection, viewpoint sampling and curriculum.

Conventions: right-handed world with z up, cameras look down their local -z axis, matrices are
row-major 4x4 float64 arrays acting on column vectors (p_cam = M @ [x, y, z, 1]).
"""

import math
from typing import NamedTuple

import numpy as np

from viewdistill.core.exceptions import GeometryError
from viewdistill.schemas.camera import (
    RANGE_FIELDS,
    CameraRange,
    CameraSpec,
    CurriculumSchedule,
    Vec3,
)

Mat4 = np.ndarray


class Projection(NamedTuple):
    """Pixel position (x right, y down) and positive camera-space depth."""

    px: float
    py: float
    depth: float


def look_at(eye: Vec3, target: Vec3, up: Vec3) -> Mat4:
    """World-to-camera rigid transform with the camera gazing from `eye` toward `target`."""
    eye_v = np.asarray(eye, dtype=np.float64)
    gaze = np.asarray(target, dtype=np.float64) - eye_v
    up_v = np.asarray(up, dtype=np.float64)

    gaze_norm = np.linalg.norm(gaze)
    if gaze_norm < 1e-12:
        raise GeometryError(f"eye {tuple(eye)} coincides with target")
    if np.linalg.norm(up_v) < 1e-12:
        raise GeometryError("up vector has zero length")
    forward = gaze / gaze_norm
    side = np.cross(forward, up_v)
    side_norm = np.linalg.norm(side)
    if side_norm < 1e-9 * np.linalg.norm(up_v):
        raise GeometryError(f"up vector {tuple(up)} is parallel to the gaze direction")
    side = side / side_norm
    true_up = np.cross(side, forward)

    view = np.eye(4)
    view[0, :3] = side
    view[1, :3] = true_up
    view[2, :3] = -forward
    view[:3, 3] = -view[:3, :3] @ eye_v
    return view


def perspective(fov_deg: float, aspect: float, near: float, far: float) -> Mat4:
    """OpenGL-style perspective projection with vertical field of view `fov_deg`."""
    if not 0.0 < fov_deg < 180.0:
        raise GeometryError(f"fov_deg must be in (0, 180), got {fov_deg}")
    if aspect <= 0.0:
        raise GeometryError(f"aspect must be positive, got {aspect}")
    if not 0.0 < near < far:
        raise GeometryError(f"need 0 < near < far, got near={near} far={far}")

    f = 1.0 / math.tan(math.radians(fov_deg) / 2.0)
    proj = np.zeros((4, 4))
    proj[0, 0] = f / aspect
    proj[1, 1] = f
    proj[2, 2] = (far + near) / (near - far)
    proj[2, 3] = 2.0 * far * near / (near - far)
    proj[3, 2] = -1.0
    return proj


def view_matrix(cam: CameraSpec) -> Mat4:
    return look_at(cam.eye, cam.target, cam.up)


def projection_matrix(cam: CameraSpec) -> Mat4:
    return perspective(cam.fov_deg, cam.aspect, cam.near, cam.far)


def project_point(
    p: Vec3, view: Mat4, proj: Mat4, width: int, height: int
) -> Projection | None:
    """Project a world point to pixel coordinates; None when it falls outside the frustum."""
    cam_p = view @ np.array([p[0], p[1], p[2], 1.0])
    clip = proj @ cam_p
    w = clip[3]
    if w <= 0.0:
        return None
    ndc = clip[:3] / w
    if np.any(np.abs(ndc) > 1.0):
        return None
    px = (ndc[0] + 1.0) * 0.5 * width
    py = (1.0 - ndc[1]) * 0.5 * height
    if not (0.0 <= px < width and 0.0 <= py < height):
        return None
    return Projection(float(px), float(py), float(-cam_p[2]))


def spherical_eye(target: Vec3, azimuth_deg: float, elevation_deg: float, radius: float) -> Vec3:
    """Eye position on a sphere about `target`; azimuth 0 lies along +x, elevation above z=0."""
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    return (
        target[0] + radius * math.cos(el) * math.cos(az),
        target[1] + radius * math.cos(el) * math.sin(az),
        target[2] + radius * math.sin(el),
    )


def sample_camera(camera_range: CameraRange, rng: np.random.Generator) -> CameraSpec:
    """Draw every camera parameter independently and uniformly from its interval.

    The draw order is fixed (azimuth, elevation, radius, jitter x/y/z, fov, aspect) so a seeded
    generator always yields the same sequence.
    """
    r = camera_range
    azimuth = rng.uniform(*r.azimuth)
    elevation = rng.uniform(*r.elevation)
    radius = rng.uniform(*r.radius)
    jitter = rng.uniform(r.target_jitter[0], r.target_jitter[1], size=3)
    fov = rng.uniform(*r.fov_deg)
    aspect = rng.uniform(*r.aspect)

    target = (
        r.center[0] + float(jitter[0]),
        r.center[1] + float(jitter[1]),
        r.center[2] + float(jitter[2]),
    )
    eye = spherical_eye(target, azimuth, elevation, radius)
    return CameraSpec(eye=eye, target=target, fov_deg=float(fov), aspect=float(aspect))


def curriculum_range(schedule: CurriculumSchedule, episode_index: int) -> CameraRange:
    """Camera range in force at `episode_index`.

    After k completed widening periods each endpoint has covered 1 - (1 - widen_fraction)^k of
    its gap to the maximal range.
    """
    if episode_index < 0:
        raise ValueError(f"episode_index must be non-negative, got {episode_index}")
    steps = episode_index // schedule.widen_every_episodes
    if steps == 0:
        return schedule.start_range

    remaining = (1.0 - schedule.widen_fraction) ** steps
    start, full = schedule.start_range, schedule.max_range
    update = {}
    for name in RANGE_FIELDS:
        s_lo, s_hi = getattr(start, name)
        m_lo, m_hi = getattr(full, name)
        lo = m_lo - (m_lo - s_lo) * remaining
        hi = m_hi - (m_hi - s_hi) * remaining
        # rounding must never leave the maximal range
        update[name] = (max(lo, m_lo), min(hi, m_hi))
    return start.model_copy(update=update)
