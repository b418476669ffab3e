"""Camera schemas - pose/intrinsics, randomization ranges, curriculum and rigs."""

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Vec3 = tuple[float, float, float]
Interval = tuple[float, float]

RANGE_FIELDS = ("azimuth", "elevation", "radius", "target_jitter", "fov_deg", "aspect")


def _norm(v: Vec3) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def _cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


class CameraSpec(BaseModel):
    """Synthetic pinhole camera: pose in world meters plus vertical fov and aspect."""

    model_config = ConfigDict(frozen=True)

    eye: Vec3
    target: Vec3
    up: Vec3 = (0.0, 0.0, 1.0)
    fov_deg: float = 55.0
    aspect: float = 1.0
    near: float = 0.01
    far: float = 5.0

    @model_validator(mode="after")
    def check_invariants(self) -> "CameraSpec":
        gaze = tuple(t - e for t, e in zip(self.target, self.eye))
        if _norm(gaze) < 1e-9:
            raise ValueError("eye and target coincide")
        if _norm(self.up) <= 0.0:
            raise ValueError("up vector has zero length")
        if _norm(_cross(gaze, self.up)) < 1e-9 * _norm(gaze) * _norm(self.up):
            raise ValueError("up vector is parallel to the gaze direction")
        if not 0.0 < self.near < self.far:
            raise ValueError(f"need 0 < near < far, got near={self.near} far={self.far}")
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError(f"fov_deg must be in (0, 180), got {self.fov_deg}")
        if self.aspect <= 0.0:
            raise ValueError(f"aspect must be positive, got {self.aspect}")
        return self

    def translated(self, delta: Vec3) -> "CameraSpec":
        """Same camera with eye and target moved by `delta`."""
        return self.model_copy(
            update={
                "eye": tuple(a + d for a, d in zip(self.eye, delta)),
                "target": tuple(a + d for a, d in zip(self.target, delta)),
            }
        )


class CameraRange(BaseModel):
    """Uniform randomization bounds around a look-at center.

    Angles are degrees, distances meters. Azimuth 0 looks at the workspace from +x (the robot's
    front), elevation is measured up from the table plane.
    """

    model_config = ConfigDict(frozen=True)

    center: Vec3 = (0.5, 0.0, 0.02)
    azimuth: Interval = (-60.0, 60.0)
    elevation: Interval = (15.0, 60.0)
    radius: Interval = (0.8, 1.6)
    target_jitter: Interval = (-0.05, 0.05)
    fov_deg: Interval = (40.0, 70.0)
    aspect: Interval = (1.0, 1.5)

    @field_validator(*RANGE_FIELDS)
    @classmethod
    def check_ordered(cls, v: Interval) -> Interval:
        if v[0] > v[1]:
            raise ValueError(f"interval min {v[0]} exceeds max {v[1]}")
        return v

    @model_validator(mode="after")
    def check_domains(self) -> "CameraRange":
        if self.radius[0] <= 0.0:
            raise ValueError("radius must be positive")
        if not (-90.0 < self.elevation[0] and self.elevation[1] < 90.0):
            raise ValueError("elevation must stay strictly between -90 and 90 degrees")
        if not (0.0 < self.fov_deg[0] and self.fov_deg[1] < 180.0):
            raise ValueError("fov_deg must stay inside (0, 180)")
        if self.aspect[0] <= 0.0:
            raise ValueError("aspect must be positive")
        return self

    def contains(self, other: "CameraRange") -> bool:
        """True when every interval of `other` lies inside the matching interval here."""
        if other.center != self.center:
            return False
        for name in RANGE_FIELDS:
            lo, hi = getattr(self, name)
            o_lo, o_hi = getattr(other, name)
            if o_lo < lo or o_hi > hi:
                return False
        return True


class CurriculumSchedule(BaseModel):
    """Widens the student camera range toward `max_range` every `widen_every_episodes`."""

    model_config = ConfigDict(frozen=True)

    start_range: CameraRange = CameraRange(
        azimuth=(-5.0, 5.0),
        elevation=(30.0, 40.0),
        radius=(1.1, 1.3),
        target_jitter=(0.0, 0.0),
        fov_deg=(50.0, 60.0),
        aspect=(1.0, 1.1),
    )
    max_range: CameraRange = CameraRange()
    widen_every_episodes: int = Field(default=50, ge=1)
    widen_fraction: float = Field(default=0.25, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def check_nested(self) -> "CurriculumSchedule":
        if not self.max_range.contains(self.start_range):
            raise ValueError("curriculum start_range must lie inside max_range")
        return self


class EgocentricMount(BaseModel):
    """Camera rigidly attached to the gripper, backed off along its gaze axis."""

    model_config = ConfigDict(frozen=True)

    back_off: float = Field(default=0.05, ge=0.0)
    height: float = Field(default=0.06, ge=0.0)
    tilt_deg: float = Field(default=30.0, gt=0.0, lt=90.0)
    fov_deg: float = Field(default=80.0, gt=0.0, lt=180.0)
    aspect: float = Field(default=1.0, gt=0.0)
    near: float = Field(default=0.01, gt=0.0)
    far: float = Field(default=3.0, gt=0.0)


class CameraRig(BaseModel):
    """Ordered view set of one policy: egocentric first, then third-person cameras."""

    model_config = ConfigDict(frozen=True)

    ego: EgocentricMount | None = None
    third_person: tuple[CameraSpec, ...] = ()

    @model_validator(mode="after")
    def check_not_empty(self) -> "CameraRig":
        if self.ego is None and not self.third_person:
            raise ValueError("a camera rig needs at least one view")
        return self

    @property
    def view_count(self) -> int:
        return len(self.third_person) + (1 if self.ego is not None else 0)

    def with_front(self, front: CameraSpec) -> "CameraRig":
        """Replace the first third-person camera (the front camera)."""
        return self.model_copy(update={"third_person": (front, *self.third_person[1:])})


ViewCount = Literal[1, 2, 3]


class CameraSetup(BaseModel):
    """Fixed training cameras. Front and side are orthogonal (azimuth 0 and 90 degrees)."""

    model_config = ConfigDict(frozen=True)

    front: CameraSpec = CameraSpec(eye=(1.483, 0.0, 0.708), target=(0.5, 0.0, 0.02))
    side: CameraSpec = CameraSpec(eye=(0.5, 0.983, 0.708), target=(0.5, 0.0, 0.02))
    ego: EgocentricMount = EgocentricMount()

    def rig(self, views: ViewCount) -> CameraRig:
        """1 = front only; 2 = egocentric + front; 3 = egocentric + front + side."""
        if views == 1:
            return CameraRig(third_person=(self.front,))
        if views == 2:
            return CameraRig(ego=self.ego, third_person=(self.front,))
        return CameraRig(ego=self.ego, third_person=(self.front, self.side))

    def student_rig(self) -> CameraRig:
        return CameraRig(third_person=(self.front,))
