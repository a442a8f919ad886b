"""Scenario configuration: a versioned JSON document mapped onto dataclasses.

`baseline_config()` returns the stock docking scenario: a stationary target
at (1, 2, 1) m rotated (-90, 0, -90) deg, the chaser starting at (0, 1, 0) m
aligned with the station frame, and four ranging anchors on the station
corners. Every tuning knob the simulation consumes lives here so a run is
fully reproducible from (config, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np

from .control import AttitudeGains
from .dynamics import RigidBodyParams
from .guidance import ModeSpeeds, SwitchingState
from .quat import dcm_to_quat, euler_xyz_to_dcm
from .sensors import CameraSpec, GyroSpec, UwbAnchorSet

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass
class TimingConfig:
    dt: float = 0.02  # control/estimator step, s
    truth_substeps: int = 1  # truth RK4 substeps per control step
    guidance_every: int = 10  # control steps per guidance decision
    max_duration: float = 300.0  # s

    def validate(self) -> None:
        if self.dt <= 0.0 or self.max_duration <= 0.0:
            raise ConfigError("timing: dt and max_duration must be positive")
        if self.truth_substeps < 1 or self.guidance_every < 1:
            raise ConfigError("timing: substeps and guidance divisor must be >= 1")


@dataclass
class ChaserConfig:
    mass: float = 3.0  # kg
    inertia_diag: tuple[float, float, float] = (0.0045, 0.005, 0.0055)  # kg m^2
    tag_lever_arm: tuple[float, float, float] = (0.05, 0.05, 0.0)  # m
    dock_face_normal: tuple[float, float, float] = (0.0, 0.0, -1.0)  # body frame
    initial_position: tuple[float, float, float] = (0.0, 1.0, 0.0)  # m
    initial_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_euler_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_rates: tuple[float, float, float] = (0.0, 0.0, 0.0)
    disperse_position_sigma: float = 0.0  # m, per axis, per run
    disperse_attitude_sigma_deg: float = 15.0  # deg, per axis, per run

    def validate(self) -> None:
        if self.mass <= 0.0:
            raise ConfigError("chaser: mass must be positive")
        if any(i <= 0.0 for i in self.inertia_diag):
            raise ConfigError("chaser: inertia diagonal must be positive")


@dataclass
class TargetConfig:
    position: tuple[float, float, float] = (1.0, 2.0, 1.0)  # m
    euler_deg: tuple[float, float, float] = (-90.0, 0.0, -90.0)
    dock_face_normal: tuple[float, float, float] = (1.0, 0.0, 0.0)  # body frame
    markers: tuple = (
        (0.03, 0.02, 0.02),
        (0.03, -0.02, 0.02),
        (0.03, -0.02, -0.02),
        (0.03, 0.02, -0.02),
        (0.035, 0.01, 0.0),
        (0.035, -0.01, 0.0),
    )

    def validate(self) -> None:
        if len(self.markers) != 6:
            raise ConfigError("target: exactly 6 markers required")
        n = np.linalg.norm(self.dock_face_normal)
        if abs(n - 1.0) > 1e-6:
            raise ConfigError("target: dock face normal must be a unit vector")


@dataclass
class UwbConfig:
    anchors: tuple = (
        (1.0, -0.2, 0.5),
        (1.0, 0.2, -0.5),
        (-1.0, 0.2, -0.5),
        (-1.0, -0.2, 0.5),
    )
    sigma: float = 0.02  # m
    outlier_prob: float = 0.0
    outlier_bias: tuple[float, float] = (0.2, 1.0)  # m, uniform range

    def validate(self) -> None:
        if len(self.anchors) < 1:
            raise ConfigError("uwb: at least one anchor required")
        if self.sigma <= 0.0:
            raise ConfigError("uwb: range sigma must be positive")
        if not 0.0 <= self.outlier_prob < 1.0:
            raise ConfigError("uwb: outlier probability must lie in [0, 1)")


@dataclass
class GyroConfig:
    noise_density: float = 3.5e-4  # rad/s/sqrt(Hz)
    rate_hz: float = 50.0

    def validate(self) -> None:
        if self.noise_density < 0.0 or self.rate_hz <= 0.0:
            raise ConfigError("gyro: density must be >= 0 and rate positive")


@dataclass
class CameraConfig:
    boresight: tuple[float, float, float] = (0.0, 0.0, -1.0)  # chaser body frame
    lever_arm: tuple[float, float, float] = (0.0, 0.0, -0.01)  # m
    half_angle_deg: float = 30.0
    max_range: float = 1.0  # m
    sigma: float = 0.001  # m
    rate_hz: float = 20.0

    def validate(self) -> None:
        if not 0.0 < self.half_angle_deg < 90.0:
            raise ConfigError("camera: half angle must lie in (0, 90) deg")
        if self.max_range <= 0.0 or self.rate_hz <= 0.0:
            raise ConfigError("camera: max range and rate must be positive")


@dataclass
class FilterConfig:
    q_accel: float = 1e-4  # m^2/s^3
    init_pos_var: float = 0.01  # m^2
    init_vel_var: float = 0.0025  # (m/s)^2
    init_att_sigma_deg: float = 3.3333  # per-axis 1-sigma of the initial attitude error
    gate_prob: float = 0.9999
    underweight_prob: float = 0.95
    underweight_beta: float = 2.0
    d_ema_alpha: float = 0.3
    init_sigma_threshold: float = 0.05  # m, motion starts below this

    def validate(self) -> None:
        if self.q_accel < 0.0:
            raise ConfigError("filter: process noise must be >= 0")
        if self.underweight_beta < 1.0:
            raise ConfigError("filter: under-weighting factor must be >= 1")
        if not 0.0 < self.d_ema_alpha <= 1.0:
            raise ConfigError("filter: EMA alpha must lie in (0, 1]")


@dataclass
class ControlConfig:
    q_pos: float = 100.0
    q_vel: float = 10.0
    r_force: float = 10.0
    q_integral: float = 1.0
    force_max: float = 0.2  # N per axis
    kp_att: float = 0.02  # N m
    kd_att: float = 0.05  # N m s
    torque_max: float = 0.01  # N m per axis

    def validate(self) -> None:
        if self.r_force <= 0.0:
            raise ConfigError("control: input weight must be positive")
        if self.force_max <= 0.0 or self.torque_max <= 0.0:
            raise ConfigError("control: saturation limits must be positive")


@dataclass
class GuidanceConfig:
    r_t: float = 1.0  # m, switching activation radius
    r_d: float = 0.08  # m, docking standoff
    r1_init: float = 0.1
    r2_init: float = 0.3
    theta_a11: float = 0.4
    theta_pi: float = 0.6
    standoff: float = 0.25  # m, alignment point distance
    v_los: float = 0.035  # m/s
    v_reorient: float = 0.02
    v_align: float = 0.02
    v_terminal: float = 0.01
    vision_hold: float = 1.0  # s of continuous features before align is skipped
    align_tol: float = 0.03  # m
    dock_pos_tol: float = 0.01  # m
    dock_vel_tol: float = 0.01  # m/s
    dock_att_tol: float = 0.05  # rad
    dock_debounce: float = 1.0  # s
    fixed_r2: float = 0.8
    fixed_r1: float = 0.3

    def validate(self) -> None:
        if not 0.0 < self.r_d < self.r1_init < self.r2_init <= self.r_t:
            raise ConfigError("guidance: need 0 < r_d < r1_init < r2_init <= r_t")
        if self.fixed_r1 >= self.fixed_r2:
            raise ConfigError("guidance: fixed radii need r1 < r2")
        if min(self.v_los, self.v_reorient, self.v_align, self.v_terminal) <= 0.0:
            raise ConfigError("guidance: mode speeds must be positive")


@dataclass
class TruthConfig:
    process_noise: float = 1e-5  # m^2/s^3 white CoM acceleration

    def validate(self) -> None:
        if self.process_noise < 0.0:
            raise ConfigError("truth: process noise must be >= 0")


@dataclass
class ScenarioConfig:
    schema_version: int = SCHEMA_VERSION
    name: str = "docking_baseline"
    timing: TimingConfig = field(default_factory=TimingConfig)
    chaser: ChaserConfig = field(default_factory=ChaserConfig)
    target: TargetConfig = field(default_factory=TargetConfig)
    uwb: UwbConfig = field(default_factory=UwbConfig)
    gyro: GyroConfig = field(default_factory=GyroConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    truth: TruthConfig = field(default_factory=TruthConfig)
    station_inertia_diag: tuple[float, float, float] = (50.0, 50.0, 50.0)

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported schema_version {self.schema_version}, expected {SCHEMA_VERSION}"
            )
        for section in (
            self.timing,
            self.chaser,
            self.target,
            self.uwb,
            self.gyro,
            self.camera,
            self.filter,
            self.control,
            self.guidance,
            self.truth,
        ):
            section.validate()

    # ------------------------------------------------------------ run objects

    def body_params(self) -> RigidBodyParams:
        return RigidBodyParams(
            inertia_station=np.diag(self.station_inertia_diag),
            inertia_chaser=np.diag(self.chaser.inertia_diag),
            mass_chaser=self.chaser.mass,
            tag_lever_arm=np.array(self.chaser.tag_lever_arm),
        )

    def anchor_set(self) -> UwbAnchorSet:
        return UwbAnchorSet(
            positions=np.array(self.uwb.anchors),
            sigma=self.uwb.sigma,
            outlier_prob=self.uwb.outlier_prob,
            outlier_bias=tuple(self.uwb.outlier_bias),
        )

    def gyro_spec(self) -> GyroSpec:
        return GyroSpec(noise_density=self.gyro.noise_density, rate_hz=self.gyro.rate_hz)

    def camera_spec(self) -> CameraSpec:
        boresight = np.array(self.camera.boresight, dtype=float)
        boresight = boresight / np.linalg.norm(boresight)
        helper = np.array([1.0, 0.0, 0.0]) if abs(boresight[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        x_cam = np.cross(helper, boresight)
        x_cam = x_cam / np.linalg.norm(x_cam)
        y_cam = np.cross(boresight, x_cam)
        mount = np.vstack([x_cam, y_cam, boresight])
        return CameraSpec(
            mount_dcm=mount,
            lever_arm=np.array(self.camera.lever_arm),
            half_angle=math.radians(self.camera.half_angle_deg),
            max_range=self.camera.max_range,
            sigma=self.camera.sigma,
            markers_target=np.array(self.target.markers),
            rate_hz=self.camera.rate_hz,
        )

    def attitude_gains(self) -> AttitudeGains:
        return AttitudeGains(
            kp=self.control.kp_att, kd=self.control.kd_att, torque_max=self.control.torque_max
        )

    def switching_state(self) -> SwitchingState:
        g = self.guidance
        return SwitchingState(
            r_t=g.r_t, r_2=g.r2_init, r_1=g.r1_init, r_d=g.r_d,
            theta_a11=g.theta_a11, theta_pi=g.theta_pi,
        )

    def mode_speeds(self) -> ModeSpeeds:
        g = self.guidance
        return ModeSpeeds(los=g.v_los, reorient=g.v_reorient, align=g.v_align, terminal=g.v_terminal)

    def target_dcm(self) -> np.ndarray:
        return euler_xyz_to_dcm(*(math.radians(a) for a in self.target.euler_deg))

    def chaser_initial_quat(self) -> np.ndarray:
        return dcm_to_quat(euler_xyz_to_dcm(*(math.radians(a) for a in self.chaser.initial_euler_deg)))


def _from_dict(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{cls.__name__}: unknown key '{key}'")
        if key in _SECTION_TYPES and is_dataclass(_SECTION_TYPES[key]):
            kwargs[key] = _from_dict(_SECTION_TYPES[key], value)
        elif isinstance(value, list):
            kwargs[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


_SECTION_TYPES = {
    "timing": TimingConfig,
    "chaser": ChaserConfig,
    "target": TargetConfig,
    "uwb": UwbConfig,
    "gyro": GyroConfig,
    "camera": CameraConfig,
    "filter": FilterConfig,
    "control": ControlConfig,
    "guidance": GuidanceConfig,
    "truth": TruthConfig,
}


def config_from_dict(data: dict) -> ScenarioConfig:
    cfg = _from_dict(ScenarioConfig, data)
    cfg.validate()
    return cfg


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return asdict(cfg)


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


def baseline_config() -> ScenarioConfig:
    """Stock docking scenario used by the comparison campaign."""
    cfg = ScenarioConfig()
    cfg.camera.half_angle_deg = 65.0
    cfg.filter.q_accel = 1e-5  # matched to the truth disturbance level
    cfg.validate()
    return cfg
