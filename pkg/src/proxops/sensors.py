"""Synthetic rate-gyro, UWB ranging, and feature-camera measurements.

Every generator takes an explicit numpy Generator so a run can own its
streams; the same seed always reproduces the same measurement sequence.
UWB outliers draw from a stream separate from the additive noise, so an
outlier-injected run sees bit-identical clean measurements to a run with
injection disabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RigidBodyParams, TrueState, sensor_point_state
from .quat import quat_to_dcm


@dataclass
class GyroSpec:
    """Rate gyro: white-noise density (rad/s/√Hz) sampled at rate_hz."""

    noise_density: float = 3.5e-4
    rate_hz: float = 50.0

    def __post_init__(self) -> None:
        if self.noise_density < 0.0 or self.rate_hz <= 0.0:
            raise ValueError("gyro noise density must be >= 0 and rate positive")

    @property
    def sigma(self) -> float:
        """Per-sample rate noise standard deviation."""
        return self.noise_density * math.sqrt(self.rate_hz)


@dataclass
class UwbAnchorSet:
    """Fixed ranging anchors with additive noise and an optional outlier model."""

    positions: np.ndarray  # (n, 3) m, station frame
    sigma: float = 0.02  # m
    outlier_prob: float = 0.0
    outlier_bias: tuple[float, float] = (0.2, 1.0)  # uniform bias range, m

    def __post_init__(self) -> None:
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape[0] < 1 or self.positions.shape[1] != 3:
            raise ValueError("anchor set needs at least one (x, y, z) position")
        if self.sigma <= 0.0 and self.sigma != 0.0:
            raise ValueError("range noise sigma must be non-negative")
        if not 0.0 <= self.outlier_prob < 1.0:
            raise ValueError("outlier probability must lie in [0, 1)")

    @property
    def count(self) -> int:
        return self.positions.shape[0]


@dataclass
class CameraSpec:
    """Feature camera: mounting, FOV cone, noise, and the known marker pattern.

    mount_dcm maps chaser-body vectors into the camera frame whose +z axis
    is the boresight. markers_target holds the 6 marker positions in the
    target body frame.
    """

    mount_dcm: np.ndarray
    lever_arm: np.ndarray  # m, chaser body frame
    half_angle: float = math.radians(30.0)  # rad
    max_range: float = 1.0  # m
    sigma: float = 0.001  # m, per axis
    markers_target: np.ndarray = field(
        default_factory=lambda: np.array(
            [
                [0.03, 0.02, 0.02],
                [0.03, -0.02, 0.02],
                [0.03, -0.02, -0.02],
                [0.03, 0.02, -0.02],
                [0.035, 0.01, 0.0],
                [0.035, -0.01, 0.0],
            ]
        )
    )
    rate_hz: float = 20.0

    def __post_init__(self) -> None:
        self.mount_dcm = np.asarray(self.mount_dcm, dtype=float)
        self.lever_arm = np.asarray(self.lever_arm, dtype=float)
        self.markers_target = np.asarray(self.markers_target, dtype=float)
        if not 0.0 < self.half_angle < math.pi / 2.0:
            raise ValueError("FOV half-angle must lie in (0, pi/2)")
        if self.markers_target.shape != (6, 3):
            raise ValueError("marker pattern must contain exactly 6 points")


@dataclass
class GyroMeasurement:
    time: float
    omega: np.ndarray  # rad/s, body frame


@dataclass
class RangeMeasurement:
    time: float
    anchor_id: int
    range: float  # m


@dataclass
class FeatureMeasurement:
    time: float
    points: np.ndarray  # (6, 3) m, camera frame


def measure_gyro(state: TrueState, spec: GyroSpec, rng: np.random.Generator, time: float = 0.0) -> GyroMeasurement:
    """Body rates plus unbiased white noise."""
    if spec.sigma > 0.0:
        omega = state.omega_b + rng.normal(0.0, spec.sigma, 3)
    else:
        omega = state.omega_b.copy()
    return GyroMeasurement(time, omega)


def measure_range(
    state: TrueState,
    anchors: UwbAnchorSet,
    anchor_id: int,
    p: RigidBodyParams,
    rng: np.random.Generator,
    time: float = 0.0,
    rng_outlier: np.random.Generator | None = None,
) -> RangeMeasurement:
    """Distance from the ranging tag to one anchor, with noise and outliers."""
    if not 0 <= anchor_id < anchors.count:
        raise ValueError(f"anchor id {anchor_id} out of range")
    tag_pos, _ = sensor_point_state(state, p)
    d = tag_pos - anchors.positions[anchor_id]
    r = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    if anchors.sigma > 0.0:
        r += rng.normal(0.0, anchors.sigma)
    if anchors.outlier_prob > 0.0:
        stream = rng_outlier if rng_outlier is not None else rng
        if stream.random() < anchors.outlier_prob:
            lo, hi = anchors.outlier_bias
            r += lo if hi <= lo else stream.uniform(lo, hi)
    return RangeMeasurement(time, anchor_id, max(r, 0.0))


def check_fov(
    state: TrueState,
    cam: CameraSpec,
    target_position: np.ndarray,
) -> bool:
    """True iff the target center lies inside the camera's closed FOV cone."""
    dcm = quat_to_dcm(state.q)
    cam_pos = state.rho + dcm @ cam.lever_arm
    los_cam = cam.mount_dcm @ (dcm.T @ (target_position - cam_pos))
    rng_to_target = float(np.linalg.norm(los_cam))
    if rng_to_target > cam.max_range or rng_to_target < 1e-12:
        return False
    cos_angle = los_cam[2] / rng_to_target
    return cos_angle >= math.cos(cam.half_angle) - 1e-12


def marker_positions_camera(
    rho: np.ndarray,
    dcm_chaser: np.ndarray,
    cam: CameraSpec,
    target_position: np.ndarray,
    target_dcm: np.ndarray,
) -> np.ndarray:
    """Noise-free marker positions in the camera frame, one row per marker."""
    markers_station = target_position + cam.markers_target @ target_dcm.T
    rel_body = (markers_station - rho) @ dcm_chaser - cam.lever_arm
    return rel_body @ cam.mount_dcm.T


def measure_features(
    state: TrueState,
    cam: CameraSpec,
    target_position: np.ndarray,
    target_dcm: np.ndarray,
    rng: np.random.Generator,
    time: float = 0.0,
) -> FeatureMeasurement | None:
    """All 6 markers in the camera frame, or None when the target is out of view."""
    if not check_fov(state, cam, target_position):
        return None
    dcm = quat_to_dcm(state.q)
    pts = marker_positions_camera(state.rho, dcm, cam, target_position, target_dcm)
    if cam.sigma > 0.0:
        pts = pts + rng.normal(0.0, cam.sigma, pts.shape)
    return FeatureMeasurement(time, pts)
