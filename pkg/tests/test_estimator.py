import math

import numpy as np
import pytest
from scipy.stats import chi2

from proxops.dynamics import ControlInput, RigidBodyParams, TrueState, sensor_point_state
from proxops.estimator import (
    AttitudeFilter,
    GateConfig,
    PoseEstimator,
    TranslationalFilter,
    init_position_from_ranges,
)
from proxops.quat import (
    IDENTITY_QUAT,
    error_quat,
    quat_angle,
    quat_from_axis_angle,
    quat_multiply,
    quat_to_dcm,
    small_angle_to_quat,
)
from proxops.sensors import CameraSpec, FeatureMeasurement, GyroMeasurement, RangeMeasurement, UwbAnchorSet

ANCHORS = np.array(
    [
        [1.0, -0.2, 0.5],
        [1.0, 0.2, -0.5],
        [-1.0, 0.2, -0.5],
        [-1.0, -0.2, 0.5],
    ]
)
DT = 0.02


def make_params(lever=(0.05, 0.05, 0.0)):
    return RigidBodyParams(
        inertia_station=np.eye(3),
        inertia_chaser=np.diag([0.0045, 0.005, 0.0055]),
        mass_chaser=3.0,
        tag_lever_arm=np.array(lever),
    )


def make_estimator(
    pos=(0.0, 1.0, 0.0),
    q_ref=None,
    q_accel=1e-5,
    pos_var=0.01,
    vel_var=0.0025,
    att_var=math.radians(3.3333) ** 2,
    beta=2.0,
    lever=(0.05, 0.05, 0.0),
    d_alpha=0.3,
):
    tf = TranslationalFilter(
        mean=np.concatenate([np.array(pos, dtype=float), np.zeros(3)]),
        cov=np.diag([pos_var] * 3 + [vel_var] * 3),
        q_accel=q_accel,
    )
    af = AttitudeFilter(
        q_ref=IDENTITY_QUAT.copy() if q_ref is None else q_ref,
        delta=np.zeros(3),
        cov=att_var * np.eye(3),
        gyro_sigma=2.5e-3,
    )
    return PoseEstimator(tf, af, make_params(lever), GateConfig(beta=beta), d_ema_alpha=d_alpha)


def still_gyro(t=0.0):
    return GyroMeasurement(t, np.zeros(3))


class TestPredict:
    def test_constant_velocity_exact(self):
        est = make_estimator(q_accel=0.0, lever=(0, 0, 0))
        est.trans.mean[3:6] = [0.1, -0.2, 0.05]
        start = est.trans.mean.copy()
        est.predict(still_gyro(), ControlInput.zero(), DT)
        np.testing.assert_allclose(est.trans.mean[0:3], start[0:3] + DT * start[3:6], atol=1e-15)
        np.testing.assert_allclose(est.trans.mean[3:6], start[3:6], atol=1e-15)

    def test_trace_grows_without_updates(self):
        est = make_estimator(q_accel=1e-4)
        prev = np.trace(est.trans.cov)
        for _ in range(10):
            est.predict(still_gyro(), ControlInput.zero(), DT)
            cur = np.trace(est.trans.cov)
            assert cur > prev
            prev = cur

    def test_transition_matches_finite_differences(self):
        """The implied state-transition Jacobian against central differences
        of the full propagation map."""
        params = make_params()
        u = ControlInput(np.array([0.05, -0.02, 0.01]), np.array([0.002, 0.001, -0.001]))
        omega = np.array([0.3, -0.2, 0.4])
        q_ref = quat_from_axis_angle([0.1, 0.8, -0.4], 0.6)

        def propagate_mean(x):
            est = make_estimator(q_ref=q_ref.copy())
            est.trans.mean = x.copy()
            est.predict(GyroMeasurement(0.0, omega), u, DT)
            return est.trans.mean.copy()

        phi_expected = np.eye(6)
        phi_expected[0:3, 3:6] = DT * np.eye(3)
        eps = 1e-6
        base = np.concatenate([[0.2, 0.9, -0.1], [0.01, -0.02, 0.03]])
        fd = np.empty((6, 6))
        for j in range(6):
            dx = np.zeros(6)
            dx[j] = eps
            fd[:, j] = (propagate_mean(base + dx) - propagate_mean(base - dx)) / (2 * eps)
        assert np.max(np.abs(fd - phi_expected)) / np.max(np.abs(phi_expected)) < 1e-5

    def test_reference_quaternion_integrates_gyro(self):
        est = make_estimator()
        omega = np.array([0.0, 0.0, 0.5])
        for _ in range(100):
            est.predict(GyroMeasurement(0.0, omega), ControlInput.zero(), DT)
        expected = quat_from_axis_angle([0, 0, 1], 0.5 * 100 * DT)
        assert quat_angle(error_quat(est.att.q_ref, expected)) < 1e-9


class TestRangeUpdate:
    def test_zero_innovation_contracts(self):
        est = make_estimator(pos=(0.0, 1.0, 0.0), lever=(0, 0, 0))
        anchors = UwbAnchorSet(ANCHORS, sigma=0.02)
        truth_range = float(np.linalg.norm(np.array([0.0, 1.0, 0.0]) - ANCHORS[0]))
        before = est.trans.cov.copy()
        accepted, d2 = est.update_range(RangeMeasurement(0.0, 0, truth_range), anchors)
        assert accepted and d2 == 0.0
        np.testing.assert_allclose(est.trans.mean[0:3], [0.0, 1.0, 0.0], atol=1e-12)
        assert np.trace(est.trans.cov) < np.trace(before)

    def test_chi_square_thresholds(self):
        gates = GateConfig()
        assert abs(gates.gate_threshold(1) - 15.137) < 1e-3
        assert abs(gates.gate_threshold(1) - chi2.ppf(0.9999, 1)) < 1e-12
        assert abs(gates.underweight_threshold(1) - chi2.ppf(0.95, 1)) < 1e-12

    def _run_scaled_innovation(self, n_sigma):
        est = make_estimator(pos=(0.0, 1.0, 0.0), lever=(0, 0, 0))
        anchors = UwbAnchorSet(ANCHORS, sigma=0.02)
        diff = est.trans.mean[0:3] - ANCHORS[0]
        dist = np.linalg.norm(diff)
        h = diff / dist
        s = h @ est.trans.cov[0:3, 0:3] @ h + anchors.sigma**2
        z = RangeMeasurement(0.0, 0, dist + n_sigma * math.sqrt(s))
        mean_before = est.trans.mean.copy()
        cov_before = est.trans.cov.copy()
        accepted, d2 = est.update_range(z, anchors)
        return est, accepted, d2, mean_before, cov_before

    def test_three_sigma_accepted(self):
        _, accepted, d2, _, _ = self._run_scaled_innovation(3.0)
        assert accepted and abs(d2 - 9.0) < 1e-9

    def test_five_sigma_rejected_bit_identical(self):
        est, accepted, d2, mean_before, cov_before = self._run_scaled_innovation(5.0)
        assert not accepted and abs(d2 - 25.0) < 1e-9
        assert np.array_equal(est.trans.mean, mean_before)
        assert np.array_equal(est.trans.cov, cov_before)

    def test_coincident_anchor_skipped(self):
        est = make_estimator(pos=ANCHORS[0], lever=(0, 0, 0))
        anchors = UwbAnchorSet(ANCHORS, sigma=0.02)
        accepted, d2 = est.update_range(RangeMeasurement(0.0, 0, 0.5), anchors)
        assert not accepted and d2 == 0.0

    def test_underweighting_never_adds_rejections(self):
        """Reduced gain leaves larger covariance, so the same stream cannot
        gate out more measurements than the beta = 1 filter."""
        anchors = UwbAnchorSet(ANCHORS, sigma=0.02)
        rng = np.random.default_rng(42)
        truth = np.array([0.0, 1.0, 0.0])
        zs = []
        for k in range(800):
            dist = np.linalg.norm(truth - ANCHORS[k % 4])
            noise = rng.normal(0.0, 0.02) + (0.3 if rng.random() < 0.03 else 0.0)
            zs.append(RangeMeasurement(k * DT, k % 4, dist + noise))
        rejections = {}
        for beta in (1.0, 2.0):
            est = make_estimator(pos=(0.02, 0.95, 0.01), lever=(0, 0, 0), beta=beta)
            count = 0
            for z in zs:
                est.predict(still_gyro(), ControlInput.zero(), DT)
                accepted, _ = est.update_range(z, anchors)
                count += 0 if accepted else 1
            rejections[beta] = count
        assert rejections[2.0] <= rejections[1.0]


class TestFeatureUpdate:
    def setup_method(self):
        mount = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
        self.cam = CameraSpec(mount_dcm=mount, lever_arm=np.zeros(3), sigma=0.001, max_range=3.0)
        self.target_pos = np.array([0.0, 0.0, -0.8])
        self.target_dcm = quat_to_dcm(quat_from_axis_angle([0, 1, 0], math.pi / 2))
        self.params = make_params()

    def truth_features(self, truth: TrueState) -> FeatureMeasurement:
        from proxops.sensors import measure_features

        cam_noiseless = CameraSpec(
            mount_dcm=self.cam.mount_dcm,
            lever_arm=self.cam.lever_arm,
            sigma=0.0,
            max_range=3.0,
            markers_target=self.cam.markers_target,
        )
        z = measure_features(
            truth, cam_noiseless, self.target_pos, self.target_dcm, np.random.default_rng(0)
        )
        assert z is not None
        return z

    def test_information_gain_at_truth(self):
        truth = TrueState(np.zeros(3), np.zeros(3), IDENTITY_QUAT.copy(), np.zeros(3))
        tag_pos, _ = sensor_point_state(truth, self.params)
        est = make_estimator(pos=tag_pos)
        z = self.truth_features(truth)
        sigma_before = np.sqrt(np.diag(est.trans.cov)[0:3]).max()
        err_before = np.linalg.norm(est.trans.mean[0:3] - tag_pos)
        accepted, _ = est.update_features(z, self.cam, self.target_pos, self.target_dcm)
        assert accepted
        err_after = np.linalg.norm(est.trans.mean[0:3] - tag_pos)
        sigma_after = np.sqrt(np.diag(est.trans.cov)[0:3]).max()
        assert err_after <= err_before + 1e-12
        assert sigma_after < sigma_before

    def test_attitude_error_converges(self):
        truth = TrueState(np.zeros(3), np.zeros(3), IDENTITY_QUAT.copy(), np.zeros(3))
        tag_pos, _ = sensor_point_state(truth, self.params)
        q_bad = quat_from_axis_angle([0, 0, 1], math.radians(5.0))
        est = make_estimator(pos=tag_pos, q_ref=q_bad, att_var=math.radians(4.0) ** 2)
        z = self.truth_features(truth)
        for _ in range(5):
            est.update_features(z, self.cam, self.target_pos, self.target_dcm)
        final_err = quat_angle(error_quat(est.att.q_ref, truth.q))
        assert final_err < math.radians(1.0)

    def test_biased_features_gated(self):
        truth = TrueState(np.zeros(3), np.zeros(3), IDENTITY_QUAT.copy(), np.zeros(3))
        tag_pos, _ = sensor_point_state(truth, self.params)
        est = make_estimator(pos=tag_pos)
        z = self.truth_features(truth)
        biased = FeatureMeasurement(z.time, z.points + 1.0)
        mean_before = est.trans.mean.copy()
        accepted, d2 = est.update_features(biased, self.cam, self.target_pos, self.target_dcm)
        assert not accepted and d2 > est.gates.gate_threshold(18)
        assert np.array_equal(est.trans.mean, mean_before)

    def test_marker_count_contract(self):
        est = make_estimator()
        bad = FeatureMeasurement(0.0, np.zeros((5, 3)))
        with pytest.raises(ValueError):
            est.update_features(bad, self.cam, self.target_pos, self.target_dcm)


class TestReset:
    def test_zero_delta_noop(self):
        est = make_estimator()
        q_before = est.att.q_ref.copy()
        est.quaternion_reset()
        np.testing.assert_array_equal(est.att.q_ref, q_before)

    def test_fold_in_rotation(self):
        est = make_estimator()
        est.att.delta = np.array([0.02, 0.0, 0.0])
        cov_before = est.att.cov.copy()
        est.quaternion_reset()
        expected = quat_multiply(small_angle_to_quat(np.array([0.02, 0, 0])), IDENTITY_QUAT)
        assert quat_angle(error_quat(est.att.q_ref, expected)) < 1e-12
        np.testing.assert_array_equal(est.att.delta, np.zeros(3))
        np.testing.assert_array_equal(est.att.cov, cov_before)

    def test_idempotent(self):
        est = make_estimator()
        est.att.delta = np.array([0.01, -0.02, 0.005])
        est.quaternion_reset()
        q_after = est.att.q_ref.copy()
        est.quaternion_reset()
        np.testing.assert_array_equal(est.att.q_ref, q_after)


class TestReport:
    def test_zero_lever(self):
        est = make_estimator(pos=(1.0, 2.0, 3.0), lever=(0, 0, 0))
        rep = est.report()
        np.testing.assert_allclose(rep.cm_pos, rep.tag_pos)

    def test_lever_subtraction(self):
        est = make_estimator(pos=(1.0, 2.0, 3.0), lever=(0.05, 0.05, 0.0))
        rep = est.report()
        np.testing.assert_allclose(rep.cm_pos, [0.95, 1.95, 3.0], atol=1e-15)

    def test_ema_fixed_point(self):
        est = make_estimator(pos=(0.0, 1.0, 0.0), lever=(0, 0, 0), d_alpha=0.3)
        anchors = UwbAnchorSet(ANCHORS, sigma=0.02)
        # constant squared distance of 4 => smoothed d converges to 2
        for k in range(200):
            diff = est.trans.mean[0:3] - ANCHORS[k % 4]
            dist = np.linalg.norm(diff)
            h = diff / dist
            s = h @ est.trans.cov[0:3, 0:3] @ h + anchors.sigma**2
            mean_save = est.trans.mean.copy()
            cov_save = est.trans.cov.copy()
            est.update_range(RangeMeasurement(0.0, k % 4, dist + 2.0 * math.sqrt(s)), anchors)
            est.trans.mean = mean_save  # hold state so d2 stays exactly 4
            est.trans.cov = cov_save
        assert abs(est.report().d_smooth - 2.0) < 1e-6

    def test_sigma_is_cov_diagonal(self):
        est = make_estimator()
        rep = est.report()
        np.testing.assert_allclose(rep.sigma_pos, np.sqrt(np.diag(est.trans.cov)[0:3]))


class TestInitialization:
    def test_recovers_position_noiseless(self):
        anchors = UwbAnchorSet(ANCHORS, sigma=0.02)
        truth = np.array([0.05, 1.05, 0.0])
        ranges = [(i, float(np.linalg.norm(truth - ANCHORS[i]))) for i in range(4)]
        est_pos = init_position_from_ranges(ranges, anchors, guess=np.array([0.0, 1.0, 0.0]))
        np.testing.assert_allclose(est_pos, truth, atol=1e-9)

    def test_prior_guess_selects_branch(self):
        # the four anchors are coplanar; the mirror image across their plane
        # fits the ranges equally well, so the prior decides
        anchors = UwbAnchorSet(ANCHORS, sigma=0.02)
        truth = np.array([0.0, 1.0, 0.0])
        ranges = [(i, float(np.linalg.norm(truth - ANCHORS[i]))) for i in range(4)]
        est_pos = init_position_from_ranges(ranges, anchors, guess=np.array([0.1, 0.8, 0.1]))
        np.testing.assert_allclose(est_pos, truth, atol=1e-9)


class TestLongRunHealth:
    def test_covariances_stay_spd_mixed_stream(self):
        anchors = UwbAnchorSet(ANCHORS, sigma=0.02)
        est = make_estimator(pos=(0.0, 1.0, 0.0), lever=(0, 0, 0))
        rng = np.random.default_rng(11)
        truth = np.array([0.0, 1.0, 0.0])
        n_steps = 100_000
        for k in range(n_steps):
            est.predict(still_gyro(), ControlInput.zero(), DT)
            dist = np.linalg.norm(truth - ANCHORS[k % 4])
            noise = rng.normal(0.0, 0.02)
            if rng.random() < 0.05:
                noise += 1.0  # outlier burst to exercise the reject path
            est.update_range(RangeMeasurement(k * DT, k % 4, dist + noise), anchors)
        assert np.linalg.eigvalsh(est.trans.cov).min() > 0.0
        assert np.linalg.eigvalsh(est.att.cov).min() > 0.0


class TestSteadyStateBands:
    def test_range_only_sigma_within_ls_band(self):
        """Filter steady-state position sigma against the single-epoch batch
        least-squares dilution at the same geometry."""
        from proxops.montecarlo import steady_state_position_sigma
        from proxops.scenario import baseline_config

        cfg = baseline_config()
        probe = np.array([0.0, 1.0, 0.0])
        sigma_filter = steady_state_position_sigma(cfg, ANCHORS, probe)

        diff = probe - ANCHORS
        unit = diff / np.linalg.norm(diff, axis=1, keepdims=True)
        cov_ls = np.linalg.inv(unit.T @ unit) * cfg.uwb.sigma**2
        sigma_ls = float(np.sqrt(np.diag(cov_ls)).max())
        assert 0.2 * cfg.uwb.sigma < sigma_filter < 10.0 * cfg.uwb.sigma
        # filtering over many epochs beats one least-squares epoch
        assert sigma_filter < sigma_ls

    def test_vision_beats_ranging_sigma(self):
        mount = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
        cam = CameraSpec(mount_dcm=mount, lever_arm=np.zeros(3), sigma=0.001, max_range=3.0)
        target_pos = np.array([0.0, 0.0, -0.8])
        target_dcm = quat_to_dcm(quat_from_axis_angle([0, 1, 0], math.pi / 2))
        params = make_params()
        truth = TrueState(np.zeros(3), np.zeros(3), IDENTITY_QUAT.copy(), np.zeros(3))
        tag_pos, _ = sensor_point_state(truth, params)
        est = make_estimator(pos=tag_pos)
        rng = np.random.default_rng(3)
        from proxops.sensors import measure_features

        for _ in range(200):
            est.predict(still_gyro(), ControlInput.zero(), DT)
            z = measure_features(truth, cam, target_pos, target_dcm, rng)
            est.update_features(z, cam, target_pos, target_dcm)
        assert est.report().sigma_pos_max < 0.02  # below the ranging noise floor
