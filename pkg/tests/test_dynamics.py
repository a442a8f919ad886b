import math

import numpy as np
import pytest

from proxops.dynamics import (
    ControlInput,
    RigidBodyParams,
    TrueState,
    angular_accel,
    propagate_truth,
    relative_accel,
    sensor_point_state,
)
from proxops.integrate import rk4_step
from proxops.quat import IDENTITY_QUAT, quat_from_axis_angle, quat_kinematics, quat_normalize, quat_to_dcm


def make_params(inertia=None, lever=(0.05, 0.05, 0.0), mass=3.0):
    return RigidBodyParams(
        inertia_station=np.diag([50.0, 50.0, 50.0]),
        inertia_chaser=np.diag([0.0045, 0.005, 0.0055]) if inertia is None else np.asarray(inertia),
        mass_chaser=mass,
        tag_lever_arm=np.array(lever),
    )


def make_state(rho=(0, 0, 0), vel=(0, 0, 0), q=None, omega=(0, 0, 0)):
    return TrueState(
        rho=np.array(rho, dtype=float),
        rho_dot=np.array(vel, dtype=float),
        q=IDENTITY_QUAT.copy() if q is None else q,
        omega_b=np.array(omega, dtype=float),
    )


class TestAngularAccel:
    def test_rest_no_torque(self):
        p = make_params()
        np.testing.assert_allclose(angular_accel(np.zeros(3), np.zeros(3), p), np.zeros(3))

    def test_principal_axis_spin_is_torque_free(self):
        p = make_params(inertia=np.diag([0.004, 0.005, 0.006]))
        wdot = angular_accel(np.array([0.0, 0.0, 2.0]), np.zeros(3), p)
        np.testing.assert_allclose(wdot, np.zeros(3), atol=1e-15)

    def test_hand_evaluated_case(self):
        # I = diag(1,2,3), w = (1,1,1): w x Iw = (1,-2,1), so wdot = -(1,-1,1/3)
        p = make_params(inertia=np.diag([1.0, 2.0, 3.0]))
        wdot = angular_accel(np.array([1.0, 1.0, 1.0]), np.zeros(3), p)
        np.testing.assert_allclose(wdot, [-1.0, 1.0, -1.0 / 3.0], atol=1e-12)


class TestRelativeAccel:
    def test_pure_translation(self):
        p = make_params()
        state = make_state()
        u = ControlInput(np.array([0.3, -0.06, 0.15]), np.zeros(3))
        np.testing.assert_allclose(relative_accel(state, u, p), u.force / p.mass_chaser, atol=1e-15)

    def test_centripetal_term(self):
        # symmetric inertia, steady spin about z, lever in the x-y plane:
        # the tag sees -|w|^2 r toward the axis
        p = make_params(inertia=np.diag([0.005, 0.005, 0.005]), lever=(0.05, 0.05, 0.0))
        omega = 1.3
        state = make_state(omega=(0, 0, omega))
        acc = relative_accel(state, ControlInput.zero(), p)
        lever_station = quat_to_dcm(state.q) @ p.tag_lever_arm
        np.testing.assert_allclose(acc, -(omega**2) * lever_station, atol=1e-12)

    def test_zero_lever_arm(self):
        p = make_params(lever=(0, 0, 0))
        state = make_state(omega=(0.4, -0.2, 0.9))
        u = ControlInput(np.array([0.1, 0.0, -0.2]), np.array([0.001, 0.0, 0.0]))
        np.testing.assert_allclose(relative_accel(state, u, p), u.force / p.mass_chaser, atol=1e-15)


class TestSensorPoint:
    def test_zero_lever(self):
        p = make_params(lever=(0, 0, 0))
        state = make_state(rho=(1, 2, 3), vel=(0.1, 0.2, 0.3))
        pos, vel = sensor_point_state(state, p)
        np.testing.assert_allclose(pos, state.rho)
        np.testing.assert_allclose(vel, state.rho_dot)

    def test_identity_attitude_offset(self):
        p = make_params(lever=(0.05, 0.05, 0.0))
        state = make_state(rho=(1, 2, 3))
        pos, _ = sensor_point_state(state, p)
        np.testing.assert_allclose(pos, [1.05, 2.05, 3.0], atol=1e-15)

    def test_spin_velocity(self):
        p = make_params(lever=(0.05, 0.05, 0.0))
        state = make_state(omega=(0, 0, 1.0))
        _, vel = sensor_point_state(state, p)
        np.testing.assert_allclose(vel, [-0.05, 0.05, 0.0], atol=1e-15)


class TestPropagateTruth:
    def test_coasting(self):
        p = make_params()
        state = make_state(vel=(0.1, 0, 0))
        out = propagate_truth(state, ControlInput.zero(), p, 0.1)
        np.testing.assert_allclose(out.rho, [0.01, 0.0, 0.0], atol=1e-15)

    def test_principal_spin_rate_magnitude_conserved(self):
        p = make_params(inertia=np.diag([0.004, 0.005, 0.006]))
        state = make_state(omega=(0, 0, 1.5))
        for _ in range(1000):
            state = propagate_truth(state, ControlInput.zero(), p, 0.01)
        assert abs(np.linalg.norm(state.omega_b) - 1.5) < 1e-9

    def test_torque_free_conservation(self):
        # asymmetric body tumbling: kinetic energy and |angular momentum|
        # are integration invariants
        inertia = np.diag([0.004, 0.005, 0.007])
        p = make_params(inertia=inertia)
        state = make_state(omega=(0.7, -0.9, 1.2))
        energy0 = 0.5 * state.omega_b @ inertia @ state.omega_b
        h0 = np.linalg.norm(inertia @ state.omega_b)
        for _ in range(1000):
            state = propagate_truth(state, ControlInput.zero(), p, 0.01)
        energy = 0.5 * state.omega_b @ inertia @ state.omega_b
        h = np.linalg.norm(inertia @ state.omega_b)
        assert abs(energy - energy0) < 1e-6
        assert abs(h - h0) < 1e-6

    def test_step_halving_consistency(self):
        p = make_params(inertia=np.diag([0.004, 0.005, 0.007]))
        u = ControlInput(np.array([0.05, 0.0, -0.05]), np.array([0.002, -0.001, 0.003]))
        state = make_state(vel=(0.01, 0.02, 0.0), omega=(0.5, -0.4, 0.8))
        big = propagate_truth(state, u, p, 0.04)
        small = propagate_truth(propagate_truth(state, u, p, 0.02), u, p, 0.02)
        diff = np.linalg.norm(big.omega_b - small.omega_b) + np.linalg.norm(big.q - small.q)
        assert diff < 5e-9  # O(dt^4) local mismatch at dt = 0.04

    def test_dt_validation(self):
        p = make_params()
        with pytest.raises(ValueError):
            propagate_truth(make_state(), ControlInput.zero(), p, 0.5)


class TestFrameEquivalence:
    def test_station_frame_form_matches_body_form(self):
        """Integrating the rate equation with station-frame rates (the form
        with the station inertia cancelled) must reproduce the body-frame
        Euler propagation."""
        inertia = np.diag([0.004, 0.005, 0.007])
        p = make_params(inertia=inertia)
        torque = np.array([0.001, -0.0005, 0.0008])
        dt = 0.01

        state = make_state(omega=(0.6, -0.8, 1.0))
        q_station = state.q.copy()
        omega_c = quat_to_dcm(q_station) @ state.omega_b

        def station_form_derivative(y):
            q = quat_normalize(y[0:4])
            w_c = y[4:7]
            dcm = quat_to_dcm(q)
            w_b = dcm.T @ w_c
            qdot = quat_kinematics(q, w_b)
            wdot_b = np.linalg.solve(inertia, torque - np.cross(w_b, inertia @ w_b))
            return np.concatenate([qdot, dcm @ wdot_b])

        y = np.concatenate([q_station, omega_c])
        body = state
        u = ControlInput(np.zeros(3), torque)
        for _ in range(1000):
            y = rk4_step(station_form_derivative, y, dt)
            body = propagate_truth(body, u, p, dt)
        w_c_from_body = quat_to_dcm(body.q) @ body.omega_b
        assert np.linalg.norm(y[4:7] - w_c_from_body) < 1e-6
        q_int = quat_normalize(y[0:4])
        if q_int[0] * body.q[0] < 0:
            q_int = -q_int
        assert np.linalg.norm(q_int - body.q) < 1e-6


class TestParamValidation:
    def test_rejects_asymmetric_inertia(self):
        bad = np.diag([0.005, 0.005, 0.005])
        bad[0, 1] = 0.01
        with pytest.raises(ValueError):
            make_params(inertia=bad)

    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            make_params(mass=0.0)
