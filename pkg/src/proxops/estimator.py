"""Tandem pose estimator: a 6-state translational EKF for the ranging-tag
point and a 3-state multiplicative attitude-error EKF around a reference
quaternion.

The two filters share no cross-covariance. The attitude enters the
translational filter only through the reference quaternion used in the
propagation and measurement models, and each filter treats the other's
measurement contribution as additional noise during joint vision updates.
Range innovations are chi-square gated; marginal measurements are
under-weighted by inflating the predicted innovation covariance before the
gain is formed (the gate itself always uses the uninflated covariance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import chi2

from .dynamics import ControlInput, RigidBodyParams, angular_accel
from .quat import cross, quat_multiply, quat_normalize, quat_to_dcm, skew, small_angle_to_quat
from .sensors import CameraSpec, FeatureMeasurement, GyroMeasurement, RangeMeasurement, UwbAnchorSet

_EYE6 = np.eye(6)
_EYE3 = np.eye(3)
_EYE18 = np.eye(18)


class FilterNumericsError(RuntimeError):
    """Covariance lost positive-definiteness."""


@dataclass
class GateConfig:
    """Chi-square gate and under-weighting settings."""

    gate_prob: float = 0.9999
    underweight_prob: float = 0.95
    beta: float = 2.0

    _gate_cache: dict = field(default_factory=dict, repr=False)
    _uw_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.gate_prob < 1.0 and 0.0 < self.underweight_prob < 1.0):
            raise ValueError("gate probabilities must lie in (0, 1)")
        if self.beta < 1.0:
            raise ValueError("under-weighting factor must be >= 1")

    def gate_threshold(self, dim: int) -> float:
        if dim not in self._gate_cache:
            self._gate_cache[dim] = float(chi2.ppf(self.gate_prob, dim))
        return self._gate_cache[dim]

    def underweight_threshold(self, dim: int) -> float:
        if dim not in self._uw_cache:
            self._uw_cache[dim] = float(chi2.ppf(self.underweight_prob, dim))
        return self._uw_cache[dim]


@dataclass
class TranslationalFilter:
    """Mean and covariance of the tag-point position/velocity (station frame)."""

    mean: np.ndarray  # (6,) [pos, vel]
    cov: np.ndarray  # (6, 6)
    q_accel: float  # white-acceleration spectral density, m^2/s^3


@dataclass
class AttitudeFilter:
    """Reference quaternion plus the 3-state attitude-error filter."""

    q_ref: np.ndarray  # body -> station
    delta: np.ndarray  # (3,) error-vector mean, zero after every reset
    cov: np.ndarray  # (3, 3)
    gyro_sigma: float  # per-sample rate noise, rad/s


@dataclass
class EstimateReport:
    """Estimator outputs consumed by guidance and control."""

    tag_pos: np.ndarray
    tag_vel: np.ndarray
    cm_pos: np.ndarray
    cm_vel: np.ndarray
    q: np.ndarray
    omega: np.ndarray  # body rates from the latest gyro sample
    sigma_pos: np.ndarray  # (3,) per-axis position std
    sigma_pos_max: float
    d_smooth: float  # smoothed Mahalanobis distance over accepted ranges


def init_position_from_ranges(
    ranges: list[tuple[int, float]],
    anchors: UwbAnchorSet,
    guess: np.ndarray,
    iterations: int = 20,
) -> np.ndarray:
    """Gauss-Newton trilateration of the tag position from range pairs.

    The coarse prior guess selects the correct side of the anchor plane when
    the anchor geometry admits a mirror solution.
    """
    x = np.asarray(guess, dtype=float).copy()
    ids = [i for i, _ in ranges]
    z = np.array([r for _, r in ranges])
    pos = anchors.positions[ids]
    for _ in range(iterations):
        diff = x - pos
        dist = np.linalg.norm(diff, axis=1)
        dist = np.maximum(dist, 1e-9)
        jac = diff / dist[:, None]
        res = z - dist
        try:
            step = np.linalg.solve(jac.T @ jac, jac.T @ res)
        except np.linalg.LinAlgError:
            break
        x += step
        if np.linalg.norm(step) < 1e-12:
            break
    return x


class PoseEstimator:
    """Runs the tandem filter pair over gyro, range, and feature measurements."""

    def __init__(
        self,
        trans: TranslationalFilter,
        att: AttitudeFilter,
        params: RigidBodyParams,
        gates: GateConfig | None = None,
        d_ema_alpha: float = 0.3,
    ):
        self.trans = trans
        self.att = att
        self.params = params
        self.gates = gates if gates is not None else GateConfig()
        self.d_ema_alpha = d_ema_alpha
        self.d_smooth = 0.0
        self._d_primed = False
        self.last_omega = np.zeros(3)
        self._steps_since_check = 0

    # ------------------------------------------------------------------ predict

    def predict(self, gyro: GyroMeasurement, u: ControlInput, dt: float) -> None:
        """Propagate both filters one step using gyro rates and the commanded wrench."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        omega = gyro.omega
        self.last_omega = omega
        p = self.params

        dq = small_angle_to_quat(omega * dt)
        dcm = quat_to_dcm(self.att.q_ref)
        lever = dcm @ p.tag_lever_arm
        omega_c = dcm @ omega
        omega_dot_c = dcm @ angular_accel(omega, u.torque, p)
        accel = (
            u.force / p.mass_chaser
            + cross(omega_dot_c, lever)
            + cross(omega_c, cross(omega_c, lever))
        )

        # tag-point acceleration is state-independent, so the discrete map is
        # the exact constant-acceleration update with Phi = [[I, dt I], [0, I]]
        m = self.trans.mean
        m[0:3] += dt * m[3:6] + (0.5 * dt * dt) * accel
        m[3:6] += dt * accel

        cov = self.trans.cov
        q = self.trans.q_accel
        # Phi P Phi^T expanded in 3x3 blocks
        p00 = cov[0:3, 0:3]
        p01 = cov[0:3, 3:6]
        p11 = cov[3:6, 3:6]
        p01_new = p01 + dt * p11
        p00_new = p00 + dt * (p01 + p01.T) + (dt * dt) * p11
        cov[0:3, 0:3] = p00_new + (q * dt**3 / 3.0) * _EYE3
        cov[0:3, 3:6] = p01_new + (q * dt**2 / 2.0) * _EYE3
        cov[3:6, 0:3] = cov[0:3, 3:6].T
        cov[3:6, 3:6] = p11 + (q * dt) * _EYE3

        # attitude: reference quaternion integrates the gyro, the error-state
        # covariance rotates with -[omega x] dynamics (transpose of the step
        # rotation)
        self.att.q_ref = quat_multiply(self.att.q_ref, dq)
        phi_a = quat_to_dcm(dq).T
        sig_step = self.att.gyro_sigma * dt
        self.att.cov = phi_a @ self.att.cov @ phi_a.T + (sig_step * sig_step) * _EYE3

        self._steps_since_check += 1
        if self._steps_since_check >= 50:
            self._steps_since_check = 0
            self._check_spd()

    def _check_spd(self) -> None:
        for cov in (self.trans.cov, self.att.cov):
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise FilterNumericsError("filter covariance lost positive-definiteness") from exc

    # ------------------------------------------------------------------ updates

    def update_range(
        self, z: RangeMeasurement, anchors: UwbAnchorSet
    ) -> tuple[bool, float]:
        """Scalar gated range update. Returns (accepted, squared Mahalanobis)."""
        anchor = anchors.positions[z.anchor_id]
        diff = self.trans.mean[0:3] - anchor
        dist = math.sqrt(diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2])
        if dist < 1e-6:
            # gradient direction undefined on top of the anchor
            return False, 0.0
        h = diff / dist
        cov = self.trans.cov
        phh = cov[0:3, 0:3] @ h
        hph = float(h @ phh)
        r_meas = anchors.sigma * anchors.sigma
        s = hph + r_meas
        nu = z.range - dist
        d2 = nu * nu / s
        if d2 > self.gates.gate_threshold(1):
            return False, d2

        s_gain = self.gates.beta * hph + r_meas if d2 > self.gates.underweight_threshold(1) else s
        k = (cov[:, 0:3] @ h) / s_gain
        self.trans.mean += k * nu
        a = _EYE6 - np.outer(k, np.concatenate([h, (0.0, 0.0, 0.0)]))
        new_cov = a @ cov @ a.T + r_meas * np.outer(k, k)
        self.trans.cov = 0.5 * (new_cov + new_cov.T)

        d = math.sqrt(d2)
        if self._d_primed:
            self.d_smooth += self.d_ema_alpha * (d - self.d_smooth)
        else:
            self.d_smooth = d
            self._d_primed = True
        return True, d2

    def update_features(
        self,
        z: FeatureMeasurement,
        cam: CameraSpec,
        target_position: np.ndarray,
        target_dcm: np.ndarray,
    ) -> tuple[bool, float]:
        """Stacked 18-dimensional vision update of both filters, then reset."""
        if z.points.shape != (6, 3):
            raise ValueError("feature update requires exactly 6 marker points")
        p = self.params
        dcm = quat_to_dcm(self.att.q_ref)
        m_dcm_t = cam.mount_dcm @ dcm.T  # station -> camera

        markers_station = target_position + cam.markers_target @ target_dcm.T
        rel = markers_station - self.trans.mean[0:3]  # (6, 3) w_k - tag_pos
        pred = rel @ m_dcm_t.T + (p.tag_lever_arm - cam.lever_arm) @ cam.mount_dcm.T

        nu = (z.points - pred).reshape(18)
        h_t = np.zeros((18, 6))
        h_a = np.empty((18, 3))
        for k in range(6):
            h_t[3 * k : 3 * k + 3, 0:3] = -m_dcm_t
            h_a[3 * k : 3 * k + 3, :] = m_dcm_t @ skew(rel[k])

        pt = self.trans.cov
        pa = self.att.cov
        r_meas = cam.sigma * cam.sigma
        spt = h_t @ pt @ h_t.T
        spa = h_a @ pa @ h_a.T
        s = spt + spa + r_meas * _EYE18

        factor = cho_factor(s, lower=True, check_finite=False)
        d2 = float(nu @ cho_solve(factor, nu, check_finite=False))
        if d2 > self.gates.gate_threshold(18):
            return False, d2

        if d2 > self.gates.underweight_threshold(18):
            s_gain = self.gates.beta * (spt + spa) + r_meas * _EYE18
            factor = cho_factor(s_gain, lower=True, check_finite=False)

        kt = cho_solve(factor, h_t @ pt, check_finite=False).T  # (6, 18)
        ka = cho_solve(factor, h_a @ pa, check_finite=False).T  # (3, 18)

        self.trans.mean += kt @ nu
        self.att.delta = ka @ nu

        # Joseph form per filter, treating the other filter's term as noise
        a_t = _EYE6 - kt @ h_t
        r_eff_t = spa + r_meas * _EYE18
        new_pt = a_t @ pt @ a_t.T + kt @ r_eff_t @ kt.T
        self.trans.cov = 0.5 * (new_pt + new_pt.T)

        a_a = _EYE3 - ka @ h_a
        r_eff_a = spt + r_meas * _EYE18
        new_pa = a_a @ pa @ a_a.T + ka @ r_eff_a @ ka.T
        self.att.cov = 0.5 * (new_pa + new_pa.T)

        self.quaternion_reset()
        return True, d2

    def quaternion_reset(self) -> None:
        """Fold the attitude-error mean into the reference quaternion."""
        if self.att.delta[0] == 0.0 and self.att.delta[1] == 0.0 and self.att.delta[2] == 0.0:
            return
        self.att.q_ref = quat_normalize(
            quat_multiply(small_angle_to_quat(self.att.delta), self.att.q_ref)
        )
        self.att.delta = np.zeros(3)

    # ------------------------------------------------------------------ outputs

    def report(self) -> EstimateReport:
        """Center-of-mass estimate via the tag-point lever arm, plus dispersions."""
        dcm = quat_to_dcm(self.att.q_ref)
        lever = dcm @ self.params.tag_lever_arm
        omega_c = dcm @ self.last_omega
        tag_pos = self.trans.mean[0:3].copy()
        tag_vel = self.trans.mean[3:6].copy()
        sigma = np.sqrt(np.diag(self.trans.cov)[0:3])
        return EstimateReport(
            tag_pos=tag_pos,
            tag_vel=tag_vel,
            cm_pos=tag_pos - lever,
            cm_vel=tag_vel - cross(omega_c, lever),
            q=self.att.q_ref.copy(),
            omega=self.last_omega.copy(),
            sigma_pos=sigma,
            sigma_pos_max=float(sigma.max()),
            d_smooth=self.d_smooth,
        )

    def nees(self, tag_pos_true: np.ndarray, tag_vel_true: np.ndarray) -> float:
        """Normalized estimation error squared of the translational state."""
        err = self.trans.mean - np.concatenate([tag_pos_true, tag_vel_true])
        return float(err @ np.linalg.solve(self.trans.cov, err))
