"""Quaternion-error attitude controller and discrete LQR position controller.

The position loop regulates the center-of-mass estimate against a moving
reference with state feedback, integral action, and anti-windup; the
attitude loop acts directly on the body-frame error quaternion so no
intermediate attitude parameters appear anywhere in the loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quat import quat_inverse, quat_multiply


class RiccatiError(RuntimeError):
    """Riccati recursion failed to reach a fixed point."""


@dataclass
class AttitudeGains:
    kp: float = 0.02  # N m per rad of attitude error
    kd: float = 0.05  # N m s/rad
    torque_max: float = 0.01  # N m, per axis

    def __post_init__(self) -> None:
        if self.kp <= 0.0 or self.kd <= 0.0:
            raise ValueError("attitude gains must be positive")


@dataclass
class LqrDesign:
    """Steady-state gains for the integral-augmented discrete plant."""

    a_d: np.ndarray
    b_d: np.ndarray
    k_state: np.ndarray  # (m, n) feedback on [pos err, vel err]
    k_int: np.ndarray  # (m, ni) feedback on the integral state
    riccati_p: np.ndarray
    force_max: float = 0.2  # N, per axis
    dt: float = 0.02


def double_integrator_plant(dt: float, mass: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact ZOH discretization of a 3-axis force-driven double integrator."""
    a_d = np.eye(6)
    a_d[0:3, 3:6] = dt * np.eye(3)
    b_d = np.vstack([(dt * dt / (2.0 * mass)) * np.eye(3), (dt / mass) * np.eye(3)])
    return a_d, b_d


def solve_dare(
    a: np.ndarray,
    b: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Fixed point of the discrete Riccati recursion via the doubling iteration.

    Each pass squares the recursion horizon, so weakly damped designs
    (very large input weights) still reach the fixed point in tens of
    iterations. Convergence is declared when the iterate stalls below tol
    relative to its own magnitude.
    """
    n = a.shape[0]
    a_k = a.copy()
    g_k = b @ np.linalg.solve(r, b.T)
    h_k = q.copy()
    eye = np.eye(n)
    for _ in range(max_iter):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                w = np.linalg.inv(eye + g_k @ h_k)
                a_next = a_k @ w @ a_k
                g_next = g_k + a_k @ w @ g_k @ a_k.T
                h_next = h_k + a_k.T @ h_k @ w @ a_k
        except np.linalg.LinAlgError as exc:
            raise RiccatiError("doubling iterate became singular") from exc
        if not np.all(np.isfinite(h_next)):
            raise RiccatiError("Riccati iterate diverged (plant not stabilizable?)")
        if np.max(np.abs(h_next - h_k)) < tol * max(1.0, float(np.abs(h_next).max())):
            return 0.5 * (h_next + h_next.T)
        a_k, g_k, h_k = a_next, g_next, h_next
    raise RiccatiError(f"no fixed point within {max_iter} iterations")


def lqr_design(
    a_d: np.ndarray,
    b_d: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    q_int: np.ndarray | None = None,
    dt: float = 0.02,
    force_max: float = 0.2,
) -> LqrDesign:
    """LQR gains, optionally augmented with an integral of the position error."""
    n = a_d.shape[0]
    m = b_d.shape[1]
    if q_int is not None:
        ni = q_int.shape[0]
        a_aug = np.zeros((n + ni, n + ni))
        a_aug[0:n, 0:n] = a_d
        a_aug[n:, n:] = np.eye(ni)
        a_aug[n:, 0:ni] = dt * np.eye(ni)  # integral accumulates position error
        b_aug = np.vstack([b_d, np.zeros((ni, m))])
        q_aug = np.zeros((n + ni, n + ni))
        q_aug[0:n, 0:n] = q
        q_aug[n:, n:] = q_int
    else:
        ni = 0
        a_aug, b_aug, q_aug = a_d, b_d, q

    p = solve_dare(a_aug, b_aug, q_aug, r)
    btp = b_aug.T @ p
    k = np.linalg.solve(r + btp @ b_aug, btp @ a_aug)

    eigs = np.linalg.eigvals(a_aug - b_aug @ k)
    if np.max(np.abs(eigs)) >= 1.0:
        raise RiccatiError("closed loop is not stable")

    return LqrDesign(
        a_d=a_d,
        b_d=b_d,
        k_state=k[:, 0:n],
        k_int=k[:, n:] if ni else np.zeros((m, 0)),
        riccati_p=p,
        force_max=force_max,
        dt=dt,
    )


def riccati_residual(design: LqrDesign, a: np.ndarray, b: np.ndarray, q: np.ndarray, r: np.ndarray) -> float:
    """Max-abs residual of the DARE at the stored solution (diagnostic)."""
    p = design.riccati_p
    btp = b.T @ p
    gain_term = np.linalg.solve(r + btp @ b, btp @ a)
    return float(np.max(np.abs(a.T @ p @ a - (a.T @ p @ b) @ gain_term + q - p)))


@dataclass
class IntegralState:
    """Accumulated position error with per-axis anti-windup freeze."""

    value: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def reset(self) -> None:
        self.value[:] = 0.0


def translational_control(
    pos_err: np.ndarray,
    vel_err: np.ndarray,
    design: LqrDesign,
    integ: IntegralState,
    feed_forward: np.ndarray | None = None,
) -> np.ndarray:
    """Saturated LQR force command; the integral freezes on saturated axes."""
    x = np.concatenate([pos_err, vel_err])
    u = -design.k_state @ x
    if design.k_int.size:
        u -= design.k_int @ integ.value
    if feed_forward is not None:
        u += feed_forward
    u_sat = np.clip(u, -design.force_max, design.force_max)
    if design.k_int.size:
        free = np.abs(u) <= design.force_max
        integ.value[free] += design.dt * pos_err[free]
    return u_sat


def attitude_control(
    q_hat: np.ndarray,
    q_des: np.ndarray,
    omega_hat: np.ndarray,
    gains: AttitudeGains,
) -> np.ndarray:
    """Body-frame torque from the shortest-rotation quaternion error.

    The error is resolved in the body frame; flipping the sign of either
    input quaternion leaves the command unchanged.
    """
    qe = quat_multiply(quat_inverse(q_des), q_hat)
    if qe[0] < 0.0:
        qe = -qe
    # 2 * vector part is the rotation vector to first order
    torque = -gains.kp * (2.0 * qe[1:4]) - gains.kd * omega_hat
    return np.clip(torque, -gains.torque_max, gains.torque_max)
