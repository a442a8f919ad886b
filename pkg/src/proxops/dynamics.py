"""Coupled translational/rotational relative motion of the chaser module.

States are split across two frames: position and velocity of the chaser
center of mass live in the station frame (the frame the ranging anchors are
surveyed in), while angular rate lives in the chaser body frame where the
gyro measures it. The ranging tag is mounted off the center of mass, so the
tag point picks up lever-arm kinematics on top of the rigid-body motion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrate import PropagationError
from .quat import cross, quat_kinematics, quat_normalize, quat_to_dcm


@dataclass
class RigidBodyParams:
    """Mass properties plus the ranging-tag lever arm (body frame, m)."""

    inertia_station: np.ndarray  # mother-ship inertia, kg m^2
    inertia_chaser: np.ndarray  # chaser inertia, kg m^2
    mass_chaser: float  # kg
    tag_lever_arm: np.ndarray  # m, chaser body frame

    inertia_chaser_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.inertia_station = np.asarray(self.inertia_station, dtype=float)
        self.inertia_chaser = np.asarray(self.inertia_chaser, dtype=float)
        self.tag_lever_arm = np.asarray(self.tag_lever_arm, dtype=float)
        for name, tensor in (("station", self.inertia_station), ("chaser", self.inertia_chaser)):
            if not np.allclose(tensor, tensor.T, atol=1e-12):
                raise ValueError(f"{name} inertia tensor must be symmetric")
            if np.any(np.linalg.eigvalsh(tensor) <= 0.0):
                raise ValueError(f"{name} inertia tensor must be positive-definite")
        if self.mass_chaser <= 0.0:
            raise ValueError("chaser mass must be positive")
        self.inertia_chaser_inv = np.linalg.inv(self.inertia_chaser)


@dataclass
class TrueState:
    """Ground truth: CoM position/velocity (station frame), attitude, body rates."""

    rho: np.ndarray  # m
    rho_dot: np.ndarray  # m/s
    q: np.ndarray  # body -> station
    omega_b: np.ndarray  # rad/s, body frame

    def copy(self) -> "TrueState":
        return TrueState(self.rho.copy(), self.rho_dot.copy(), self.q.copy(), self.omega_b.copy())

    def pack(self) -> np.ndarray:
        return np.concatenate([self.rho, self.rho_dot, self.q, self.omega_b])

    @staticmethod
    def unpack(x: np.ndarray) -> "TrueState":
        return TrueState(x[0:3].copy(), x[3:6].copy(), quat_normalize(x[6:10]), x[10:13].copy())


@dataclass
class ControlInput:
    """Commanded wrench: force in the station frame, torque in the body frame."""

    force: np.ndarray  # N
    torque: np.ndarray  # N m

    @staticmethod
    def zero() -> "ControlInput":
        return ControlInput(np.zeros(3), np.zeros(3))


def angular_accel(omega_b: np.ndarray, torque_b: np.ndarray, p: RigidBodyParams) -> np.ndarray:
    """Body-frame Euler rigid-body equation ω̇ = I⁻¹(N − ω × Iω)."""
    i_omega = p.inertia_chaser @ omega_b
    return p.inertia_chaser_inv @ (torque_b - cross(omega_b, i_omega))


def relative_accel(state: TrueState, u: ControlInput, p: RigidBodyParams) -> np.ndarray:
    """Station-frame acceleration of the ranging-tag point.

    CoM acceleration force/m plus the lever-arm terms
    ω̇ × r + ω × (ω × r) with r the rotated lever arm and rates mapped
    into the station frame.
    """
    dcm = quat_to_dcm(state.q)
    r = dcm @ p.tag_lever_arm
    omega_c = dcm @ state.omega_b
    omega_dot_c = dcm @ angular_accel(state.omega_b, u.torque, p)
    return u.force / p.mass_chaser + cross(omega_dot_c, r) + cross(omega_c, cross(omega_c, r))


def sensor_point_state(state: TrueState, p: RigidBodyParams) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity of the ranging-tag point in the station frame."""
    dcm = quat_to_dcm(state.q)
    r = dcm @ p.tag_lever_arm
    omega_c = dcm @ state.omega_b
    return state.rho + r, state.rho_dot + cross(omega_c, r)


def propagate_truth(state: TrueState, u: ControlInput, p: RigidBodyParams, dt: float) -> TrueState:
    """One RK4 truth step under a zero-order-hold wrench.

    The force-driven translation is linear with constant forcing over the
    step, so its RK4 update collapses to the exact constant-acceleration
    map; the attitude/rate pair runs the four stages explicitly.
    """
    if not 0.0 < dt <= 0.1:
        raise ValueError("dt must lie in (0, 0.1] s")
    accel = u.force / p.mass_chaser
    rho = state.rho + dt * state.rho_dot + (0.5 * dt * dt) * accel
    rho_dot = state.rho_dot + dt * accel

    torque = u.torque
    inertia = p.inertia_chaser
    inertia_inv = p.inertia_chaser_inv

    def deriv(q, w):
        return quat_kinematics(q, w), inertia_inv @ (torque - cross(w, inertia @ w))

    q0, w0 = state.q, state.omega_b
    half = 0.5 * dt
    k1q, k1w = deriv(q0, w0)
    k2q, k2w = deriv(q0 + half * k1q, w0 + half * k1w)
    k3q, k3w = deriv(q0 + half * k2q, w0 + half * k2w)
    k4q, k4w = deriv(q0 + dt * k3q, w0 + dt * k3w)
    sixth = dt / 6.0
    q = q0 + sixth * (k1q + 2.0 * (k2q + k3q) + k4q)
    w = w0 + sixth * (k1w + 2.0 * (k2w + k3w) + k4w)

    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(w)) and np.all(np.isfinite(rho))):
        raise PropagationError("truth propagation produced non-finite state")
    return TrueState(rho, rho_dot, quat_normalize(q), w)
