"""Closed-loop scenario runner: truth propagation, sensing, estimation,
guidance, and control at their configured rates, producing a RunLog.

The loop owns every piece of mutable state for one run, and all randomness
comes from substreams spawned off the single run seed, so (config, seed,
arm) reproduces a bit-identical log.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .control import IntegralState, attitude_control, double_integrator_plant, lqr_design, translational_control
from .dynamics import ControlInput, TrueState, propagate_truth
from .estimator import (
    AttitudeFilter,
    FilterNumericsError,
    GateConfig,
    PoseEstimator,
    TranslationalFilter,
    init_position_from_ranges,
)
from .guidance import (
    GuidanceInputs,
    GuidanceMode,
    SetpointGenerator,
    fixed_switching_step,
    switching_step,
    target_attitude_error_norm,
)
from .integrate import PropagationError
from .quat import dcm_to_quat, error_quat, quat_angle, quat_multiply, small_angle_to_quat
from .runlog import STATUS_DIVERGED, STATUS_DOCKED, STATUS_TIMEOUT, RunLog
from .scenario import ScenarioConfig
from .sensors import GyroMeasurement, measure_features, measure_gyro, measure_range

ARM_ADAPTIVE = "adaptive"
ARM_FIXED = "fixed"


def _disturbance_chol(q: float, dt: float) -> np.ndarray | None:
    """Cholesky factor of the per-axis discrete white-acceleration covariance."""
    if q <= 0.0:
        return None
    cov = np.array([[q * dt**3 / 3.0, q * dt**2 / 2.0], [q * dt**2 / 2.0, q * dt]])
    return np.linalg.cholesky(cov)


@lru_cache(maxsize=32)
def _cached_lqr(dt: float, mass: float, q_pos: float, q_vel: float, r_force: float,
                q_integral: float, force_max: float):
    a_d, b_d = double_integrator_plant(dt, mass)
    return lqr_design(
        a_d,
        b_d,
        q=np.diag([q_pos] * 3 + [q_vel] * 3),
        r=r_force * np.eye(3),
        q_int=q_integral * np.eye(3),
        dt=dt,
        force_max=force_max,
    )


def run_scenario(cfg: ScenarioConfig, seed: int, arm: str = ARM_ADAPTIVE) -> RunLog:
    """Execute one closed-loop run; deterministic for a given (cfg, seed, arm)."""
    if arm not in (ARM_ADAPTIVE, ARM_FIXED):
        raise ValueError(f"unknown switching arm '{arm}'")
    cfg.validate()

    ss = np.random.SeedSequence(seed)
    rng_init, rng_gyro, rng_uwb, rng_outlier, rng_cam, rng_truth = (
        np.random.default_rng(child) for child in ss.spawn(6)
    )

    params = cfg.body_params()
    anchors = cfg.anchor_set()
    gyro_spec = cfg.gyro_spec()
    cam = cfg.camera_spec()
    att_gains = cfg.attitude_gains()
    dt = cfg.timing.dt

    # truth initial state with per-run dispersion
    q0_nominal = cfg.chaser_initial_quat()
    pos0 = np.array(cfg.chaser.initial_position, dtype=float)
    if cfg.chaser.disperse_position_sigma > 0.0:
        pos0 = pos0 + rng_init.normal(0.0, cfg.chaser.disperse_position_sigma, 3)
    q0 = q0_nominal
    if cfg.chaser.disperse_attitude_sigma_deg > 0.0:
        rot = rng_init.normal(0.0, math.radians(cfg.chaser.disperse_attitude_sigma_deg), 3)
        q0 = quat_multiply(small_angle_to_quat(rot), q0_nominal)
    truth = TrueState(
        rho=pos0,
        rho_dot=np.array(cfg.chaser.initial_velocity, dtype=float),
        q=q0,
        omega_b=np.array(cfg.chaser.initial_rates, dtype=float),
    )

    # filter: attitude reference starts at truth composed with a drawn error
    # consistent with the configured initial attitude covariance
    sig_att0 = math.radians(cfg.filter.init_att_sigma_deg)
    att_err0 = rng_init.normal(0.0, sig_att0, 3)
    q_ref0 = quat_multiply(small_angle_to_quat(att_err0), q0)
    att_filter = AttitudeFilter(
        q_ref=q_ref0,
        delta=np.zeros(3),
        cov=(sig_att0 * sig_att0) * np.eye(3),
        gyro_sigma=gyro_spec.sigma,
    )
    trans_filter = TranslationalFilter(
        mean=np.zeros(6),
        cov=np.diag(
            [cfg.filter.init_pos_var] * 3 + [cfg.filter.init_vel_var] * 3
        ),
        q_accel=cfg.filter.q_accel,
    )
    estimator = PoseEstimator(
        trans_filter,
        att_filter,
        params,
        GateConfig(cfg.filter.gate_prob, cfg.filter.underweight_prob, cfg.filter.underweight_beta),
        d_ema_alpha=cfg.filter.d_ema_alpha,
    )

    # controllers (the design depends only on config scalars, so cache it)
    design = _cached_lqr(
        dt,
        cfg.chaser.mass,
        cfg.control.q_pos,
        cfg.control.q_vel,
        cfg.control.r_force,
        cfg.control.q_integral,
        cfg.control.force_max,
    )
    integ = IntegralState()

    # guidance
    target_pos = np.array(cfg.target.position, dtype=float)
    target_dcm = cfg.target_dcm()
    q_target = dcm_to_quat(target_dcm)
    setgen = SetpointGenerator(
        target_position=target_pos,
        target_dcm=target_dcm,
        face_normal_body=np.array(cfg.target.dock_face_normal, dtype=float),
        chaser_face_normal_body=np.array(cfg.chaser.dock_face_normal, dtype=float),
        standoff=cfg.guidance.standoff,
        r_d=cfg.guidance.r_d,
        speeds=cfg.mode_speeds(),
        hold_attitude=q_ref0.copy(),
    )
    switching = cfg.switching_state()
    g_cfg = cfg.guidance

    n_max = int(round(cfg.timing.max_duration / dt)) + 1
    log_t = np.empty(n_max)
    log_true_pos = np.empty((n_max, 3))
    log_true_vel = np.empty((n_max, 3))
    log_true_q = np.empty((n_max, 4))
    log_true_w = np.empty((n_max, 3))
    log_est_pos = np.empty((n_max, 3))
    log_est_vel = np.empty((n_max, 3))
    log_est_q = np.empty((n_max, 4))
    log_sigma = np.empty((n_max, 3))
    log_mode = np.empty(n_max, dtype=np.int16)
    log_force = np.zeros((n_max, 3))
    log_torque = np.zeros((n_max, 3))
    log_r_anchor = np.full(n_max, -1, dtype=np.int32)
    log_r_d2 = np.full(n_max, np.nan)
    log_r_acc = np.full(n_max, -1, dtype=np.int8)
    log_f_d2 = np.full(n_max, np.nan)
    log_f_acc = np.full(n_max, -1, dtype=np.int8)
    log_dsm = np.empty(n_max)
    log_rest = np.empty(n_max)
    events = []

    chol = _disturbance_chol(cfg.truth.process_noise, dt / cfg.timing.truth_substeps)
    dt_truth = dt / cfg.timing.truth_substeps

    u = ControlInput.zero()
    mode = GuidanceMode.LOS
    status = STATUS_TIMEOUT
    dock_time = math.nan
    initialized = False
    init_ranges: list[tuple[int, float]] = []
    prev_omega = None
    next_cam_t = 0.0
    cam_period = 1.0 / cfg.camera.rate_hz
    last_feature_t = -1e9
    vision_start_t = math.nan
    dock_met_since = math.nan
    n_logged = 0
    guidance_every = cfg.timing.guidance_every

    try:
        for k in range(n_max):
            t = k * dt

            # ---- truth propagation under the previous wrench
            if k > 0:
                for _ in range(cfg.timing.truth_substeps):
                    truth = propagate_truth(truth, u, params, dt_truth)
                    if chol is not None:
                        w = rng_truth.standard_normal((2, 3))
                        kick = chol @ w  # rows: [position, velocity] per axis
                        truth.rho += kick[0]
                        truth.rho_dot += kick[1]

            # ---- sensing
            gyro = measure_gyro(truth, gyro_spec, rng_gyro, t)
            rng_z = measure_range(
                truth, anchors, k % anchors.count, params, rng_uwb, t, rng_outlier=rng_outlier
            )
            feat = None
            if t >= next_cam_t - 1e-12:
                feat = measure_features(truth, cam, target_pos, target_dcm, rng_cam, t)
                next_cam_t += cam_period
                if feat is not None:
                    if t - last_feature_t > 1.5 * cam_period:
                        vision_start_t = t
                    last_feature_t = t

            vision_seconds = (
                t - vision_start_t
                if (math.isfinite(vision_start_t) and t - last_feature_t <= 1.5 * cam_period)
                else 0.0
            )

            # ---- estimation
            range_acc, range_d2 = -1, math.nan
            feat_acc, feat_d2 = -1, math.nan
            if not initialized:
                init_ranges.append((rng_z.anchor_id, rng_z.range))
                if len({i for i, _ in init_ranges}) >= min(4, anchors.count):
                    tag_guess = np.array(cfg.chaser.initial_position, dtype=float)
                    pos = init_position_from_ranges(init_ranges, anchors, tag_guess)
                    trans_filter.mean[0:3] = pos
                    trans_filter.mean[3:6] = 0.0
                    initialized = True
            else:
                omega_mid = gyro.omega if prev_omega is None else 0.5 * (gyro.omega + prev_omega)
                estimator.predict(GyroMeasurement(t, omega_mid), u, dt)
                estimator.last_omega = gyro.omega
                acc, d2 = estimator.update_range(rng_z, anchors)
                range_acc, range_d2 = int(acc), d2
                if feat is not None:
                    facc, fd2 = estimator.update_features(feat, cam, target_pos, target_dcm)
                    feat_acc, feat_d2 = int(facc), fd2
            prev_omega = gyro.omega

            est = estimator.report()
            r_est = float(np.linalg.norm(target_pos - est.cm_pos))
            ready = initialized and est.sigma_pos_max < cfg.filter.init_sigma_threshold
            if ready and setgen.ref is None:
                setgen.anchor(est.cm_pos)

            # ---- docking criteria (debounced every step while terminal)
            dock_ready = False
            if mode == GuidanceMode.TERMINAL:
                met = (
                    np.linalg.norm(est.cm_pos - setgen.dock_pt) <= g_cfg.dock_pos_tol
                    and np.linalg.norm(est.cm_vel) <= g_cfg.dock_vel_tol
                    and quat_angle(error_quat(est.q, setgen.q_dock)) <= g_cfg.dock_att_tol
                )
                if met and not math.isfinite(dock_met_since):
                    dock_met_since = t
                elif not met:
                    dock_met_since = math.nan
                dock_ready = (
                    math.isfinite(dock_met_since) and t - dock_met_since >= g_cfg.dock_debounce
                )

            # ---- guidance decision
            if ready and setgen.ref is not None and k % guidance_every == 0:
                inputs = GuidanceInputs(
                    r=r_est,
                    d=est.d_smooth,
                    att_err_norm=target_attitude_error_norm(est.q, q_target),
                    sigma_pos_max=est.sigma_pos_max,
                    sigma_uwb=anchors.sigma,
                    vision_seconds=vision_seconds,
                    at_align_point=bool(
                        np.linalg.norm(est.cm_pos - setgen.align_pt) <= g_cfg.align_tol
                    ),
                    dock_ready=dock_ready,
                )
                if arm == ARM_ADAPTIVE:
                    new_mode, event = switching_step(
                        mode, inputs, switching, vision_hold=g_cfg.vision_hold, time=t
                    )
                else:
                    new_mode, event = fixed_switching_step(
                        mode, inputs, g_cfg.fixed_r2, g_cfg.fixed_r1, time=t
                    )
                if event is not None:
                    events.append(event)
                if new_mode != mode:
                    mode = new_mode
                    if mode != GuidanceMode.COMPLETE:
                        setgen.anchor(est.cm_pos)
                        integ.reset()

            # ---- control
            if ready and setgen.ref is not None and mode != GuidanceMode.COMPLETE:
                pos_sp, vel_sp, att_sp = setgen.step(mode, dt)
                force = translational_control(
                    est.cm_pos - pos_sp, est.cm_vel - vel_sp, design, integ
                )
                torque = attitude_control(est.q, att_sp, est.omega, att_gains)
                u = ControlInput(force, torque)
            else:
                u = ControlInput.zero()

            # ---- log
            log_t[k] = t
            log_true_pos[k] = truth.rho
            log_true_vel[k] = truth.rho_dot
            log_true_q[k] = truth.q
            log_true_w[k] = truth.omega_b
            log_est_pos[k] = est.cm_pos
            log_est_vel[k] = est.cm_vel
            log_est_q[k] = est.q
            log_sigma[k] = est.sigma_pos
            log_mode[k] = int(mode)
            log_force[k] = u.force
            log_torque[k] = u.torque
            log_r_anchor[k] = rng_z.anchor_id
            log_r_d2[k] = range_d2
            log_r_acc[k] = range_acc
            log_f_d2[k] = feat_d2
            log_f_acc[k] = feat_acc
            log_dsm[k] = est.d_smooth
            log_rest[k] = r_est
            n_logged = k + 1

            if mode == GuidanceMode.COMPLETE:
                status = STATUS_DOCKED
                dock_time = t
                break
            if not (np.isfinite(truth.rho).all() and np.isfinite(est.cm_pos).all()):
                status = STATUS_DIVERGED
                break
    except (PropagationError, FilterNumericsError, np.linalg.LinAlgError):
        status = STATUS_DIVERGED

    n = max(n_logged, 1)
    return RunLog(
        t=log_t[:n].copy(),
        true_pos=log_true_pos[:n].copy(),
        true_vel=log_true_vel[:n].copy(),
        true_quat=log_true_q[:n].copy(),
        true_omega=log_true_w[:n].copy(),
        est_pos=log_est_pos[:n].copy(),
        est_vel=log_est_vel[:n].copy(),
        est_quat=log_est_q[:n].copy(),
        sigma_pos=log_sigma[:n].copy(),
        mode=log_mode[:n].copy(),
        force=log_force[:n].copy(),
        torque=log_torque[:n].copy(),
        range_anchor=log_r_anchor[:n].copy(),
        range_d2=log_r_d2[:n].copy(),
        range_accepted=log_r_acc[:n].copy(),
        feat_d2=log_f_d2[:n].copy(),
        feat_accepted=log_f_acc[:n].copy(),
        d_smooth=log_dsm[:n].copy(),
        r_est=log_rest[:n].copy(),
        status=status,
        dock_time=dock_time,
        seed=seed,
        arm=arm,
        dt=dt,
        r1_final=switching.r_1 if arm == ARM_ADAPTIVE else g_cfg.fixed_r1,
        r2_final=switching.r_2 if arm == ARM_ADAPTIVE else g_cfg.fixed_r2,
        r1_selected=switching.r1_selected,
        r2_selected=switching.r2_selected,
        dock_point=setgen.dock_pt.copy(),
        dock_quat=setgen.q_dock.copy(),
        events=events,
    )
