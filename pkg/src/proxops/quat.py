"""Quaternion and rotation primitives.

Conventions used throughout the package:
  - Quaternions are scalar-first numpy arrays [q0, q1, q2, q3] with the
    Hamilton (right-handed) product.
  - A chaser attitude quaternion q maps body-frame vectors into the
    station frame: v_station = dcm(q) @ v_body.
  - Rotation angles are radians unless a name says otherwise.
"""

from __future__ import annotations

import math

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Return q scaled to unit norm."""
    q = np.asarray(q, dtype=float)
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n < 1e-12:
        raise ValueError("cannot normalize a near-zero quaternion")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a ⊗ b, re-normalized."""
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    q = np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )
    return quat_normalize(q)


def quat_inverse(q: np.ndarray) -> np.ndarray:
    """Conjugate of a unit quaternion."""
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_dcm(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of q: maps body-frame vectors into the parent frame."""
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    wx, wy, wz = w * x, w * y, w * z
    xy, xz, yz = x * y, x * z, y * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def error_quat(q: np.ndarray, q_ref: np.ndarray) -> np.ndarray:
    """Error quaternion q ⊗ q_ref⁻¹ with non-negative scalar part."""
    dq = quat_multiply(q, quat_inverse(q_ref))
    if dq[0] < 0.0:
        dq = -dq
    return dq


def small_angle_to_quat(dv: np.ndarray) -> np.ndarray:
    """Quaternion for a rotation vector dv (exact exponential map)."""
    dv = np.asarray(dv, dtype=float)
    angle = math.sqrt(dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2])
    if angle >= math.pi:
        raise ValueError(f"rotation vector magnitude {angle:.4f} rad >= pi")
    half = 0.5 * angle
    if angle < 1e-12:
        # second-order series keeps the map smooth through zero
        s = 0.5 - angle * angle / 48.0
    else:
        s = math.sin(half) / angle
    return np.array([math.cos(half), s * dv[0], s * dv[1], s * dv[2]])


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Unit quaternion rotating by angle about axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    s = math.sin(half)
    return np.array([math.cos(half), s * axis[0], s * axis[1], s * axis[2]])


def quat_angle(q: np.ndarray) -> float:
    """Rotation angle of q in [0, pi]."""
    w = min(1.0, max(-1.0, abs(float(q[0]))))
    return 2.0 * math.acos(w)


def quat_kinematics(q: np.ndarray, omega_body: np.ndarray) -> np.ndarray:
    """Quaternion rate q̇ = ½ q ⊗ [0, ω_body] (not normalized)."""
    w, x, y, z = q
    ox, oy, oz = omega_body
    return 0.5 * np.array(
        [
            -x * ox - y * oy - z * oz,
            w * ox + y * oz - z * oy,
            w * oy - x * oz + z * ox,
            w * oz + x * oy - y * ox,
        ]
    )


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix [v×]."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a × b without the np.cross dispatch overhead."""
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def euler_xyz_to_dcm(theta_x: float, theta_y: float, theta_z: float) -> np.ndarray:
    """DCM for an x-then-y-then-z rotation sequence: Rz @ Ry @ Rx."""
    cx, sx = math.cos(theta_x), math.sin(theta_x)
    cy, sy = math.cos(theta_y), math.sin(theta_y)
    cz, sz = math.cos(theta_z), math.sin(theta_z)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


def dcm_to_quat(dcm: np.ndarray) -> np.ndarray:
    """Quaternion of a rotation matrix (Shepperd's method), scalar part >= 0."""
    m = np.asarray(dcm, dtype=float)
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0.0:
        s = math.sqrt(trace + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


def rotation_between(v_from: np.ndarray, v_to: np.ndarray) -> np.ndarray:
    """Minimal-angle quaternion rotating unit vector v_from onto v_to."""
    a = np.asarray(v_from, dtype=float)
    b = np.asarray(v_to, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    c = float(a @ b)
    if c > 1.0 - 1e-12:
        return IDENTITY_QUAT.copy()
    if c < -1.0 + 1e-12:
        # antiparallel: rotate pi about any axis orthogonal to a
        helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        axis = cross(a, helper)
        return quat_from_axis_angle(axis, math.pi)
    axis = cross(a, b)
    return quat_from_axis_angle(axis, math.acos(max(-1.0, min(1.0, c))))
