"""Multi-mode docking guidance with adaptive switching-distance selection.

The chaser rides the line of sight toward the target, reorients to the
docking attitude, optionally detours to an alignment point in front of the
docking face, and finishes with a slow terminal approach. Mode changes are
driven by a two-state Markov chain whose transition probabilities are
rebuilt from live navigation health at every guidance tick: the current
chain decides whether committing to the next phase now is more likely to
succeed than pressing on. Radii picked this way are frozen for the rest of
the run, which is what the post-run scatter reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .quat import quat_inverse, quat_multiply, rotation_between


class GuidanceMode(IntEnum):
    LOS = 0
    REORIENT = 1
    ALIGN = 2
    TERMINAL = 3
    COMPLETE = 4


# edges of the mode graph, including the skip-align shortcut and the forced
# align fallback when the alignment floor is reached without a vision lock
ALLOWED_TRANSITIONS = {
    (GuidanceMode.LOS, GuidanceMode.REORIENT),
    (GuidanceMode.REORIENT, GuidanceMode.ALIGN),
    (GuidanceMode.ALIGN, GuidanceMode.REORIENT),
    (GuidanceMode.REORIENT, GuidanceMode.TERMINAL),
    (GuidanceMode.ALIGN, GuidanceMode.TERMINAL),
    (GuidanceMode.TERMINAL, GuidanceMode.COMPLETE),
}


@dataclass
class SwitchingState:
    """Activation/reorient/align/docking radii plus the decision thresholds."""

    r_t: float = 1.0
    r_2: float = 0.3
    r_1: float = 0.1
    r_d: float = 0.08
    theta_a11: float = 0.4
    theta_pi: float = 0.6
    r2_selected: bool = False
    r1_selected: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.r_d < self.r_1 < self.r_2 <= self.r_t):
            raise ValueError("radii must satisfy 0 < r_d < r_1 < r_2 <= r_t")


@dataclass
class GuidanceInputs:
    """Navigation snapshot consumed by one switching decision."""

    r: float  # estimated range to target center, m
    d: float  # smoothed Mahalanobis distance
    att_err_norm: float  # |vec part| of target-vs-chaser error quaternion
    sigma_pos_max: float  # m
    sigma_uwb: float  # m
    vision_seconds: float = 0.0  # continuous feature-track duration
    at_align_point: bool = False
    dock_ready: bool = False


@dataclass
class SwitchEvent:
    time: float
    from_mode: GuidanceMode
    to_mode: GuidanceMode
    r: float
    trigger: str
    trigger_value: float
    radius_set: float | None = None


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def los_stay_probability(r: float, r_t: float, d: float, att_err_norm: float) -> float:
    """Probability of staying on the line-of-sight leg (the chain's self loop).

    Shrinks with remaining normalized range, with inconsistent navigation,
    and with the attitude slew still owed. An already-aligned chaser never
    needs the reorientation, so the degenerate zero-error case returns 1.
    """
    if r_t <= 0.0:
        raise ValueError("activation radius must be positive")
    if d < 0.0:
        raise ValueError("Mahalanobis distance must be non-negative")
    if att_err_norm < 1e-6:
        return 1.0
    return _clamp01((r / r_t) * (1.0 / (1.0 + d)) * (1.0 / att_err_norm))


def reorient_transition_matrix(
    r: float,
    r_2: float,
    r_d: float,
    d: float,
    sigma_pos_max: float,
    sigma_uwb: float,
) -> np.ndarray:
    """Row-stochastic 2x2 chain over the reorient/align pair."""
    if r_2 <= r_d:
        raise ValueError("reorient radius must exceed the docking standoff")
    a22 = _clamp01((r / r_2) * (1.0 / (1.0 + d)))
    a32 = _clamp01((sigma_pos_max / sigma_uwb) * ((r_2 - r) / (r_2 - r_d)))
    return np.array([[a22, 1.0 - a22], [a32, 1.0 - a32]])


def stationary_distribution(a: np.ndarray) -> tuple[np.ndarray, bool]:
    """Fixed point pi = pi A of a 2x2 row-stochastic matrix.

    Returns (pi, degenerate). A chain with two absorbing states has no
    unique stationary distribution; (1, 0) is returned with the flag set.
    """
    a23 = float(a[0, 1])
    a32 = float(a[1, 0])
    s = a23 + a32
    if s < 1e-12:
        return np.array([1.0, 0.0]), True
    return np.array([a32 / s, a23 / s]), False


def switching_step(
    mode: GuidanceMode,
    inputs: GuidanceInputs,
    s: SwitchingState,
    vision_hold: float = 1.0,
    time: float = 0.0,
) -> tuple[GuidanceMode, SwitchEvent | None]:
    """One adaptive guidance decision; mutates the selected radii in s."""
    r = inputs.r
    if mode == GuidanceMode.COMPLETE:
        return mode, None

    if mode == GuidanceMode.TERMINAL:
        if inputs.dock_ready:
            ev = SwitchEvent(time, mode, GuidanceMode.COMPLETE, r, "dock", 1.0)
            return GuidanceMode.COMPLETE, ev
        return mode, None

    if mode == GuidanceMode.LOS:
        if r > s.r_t:
            return mode, None
        if r > s.r_2:
            a11 = los_stay_probability(r, s.r_t, inputs.d, inputs.att_err_norm)
            if a11 <= s.theta_a11:
                s.r_2 = r
                s.r2_selected = True
                ev = SwitchEvent(time, mode, GuidanceMode.REORIENT, r, "a11", a11, radius_set=r)
                return GuidanceMode.REORIENT, ev
            return mode, None
        # reached the reorient floor while still on the LOS leg
        ev = SwitchEvent(time, mode, GuidanceMode.REORIENT, r, "r2_floor", s.r_2)
        return GuidanceMode.REORIENT, ev

    if mode == GuidanceMode.REORIENT:
        if r <= s.r_1:
            if inputs.vision_seconds >= vision_hold:
                ev = SwitchEvent(time, mode, GuidanceMode.TERMINAL, r, "skip_align", inputs.vision_seconds)
                return GuidanceMode.TERMINAL, ev
            ev = SwitchEvent(time, mode, GuidanceMode.ALIGN, r, "r1_floor", s.r_1)
            return GuidanceMode.ALIGN, ev
        if r <= s.r_2:
            a = reorient_transition_matrix(
                r, s.r_2, s.r_d, inputs.d, inputs.sigma_pos_max, inputs.sigma_uwb
            )
            pi, _ = stationary_distribution(a)
            if pi[1] <= s.theta_pi:
                s.r_1 = r
                s.r1_selected = True
                ev = SwitchEvent(time, mode, GuidanceMode.ALIGN, r, "pi2", float(pi[1]), radius_set=r)
                return GuidanceMode.ALIGN, ev
        return mode, None

    # ALIGN
    if inputs.at_align_point:
        ev = SwitchEvent(time, mode, GuidanceMode.TERMINAL, r, "align_reached", 1.0)
        return GuidanceMode.TERMINAL, ev
    return mode, None


def fixed_switching_step(
    mode: GuidanceMode,
    inputs: GuidanceInputs,
    r2_fixed: float,
    r1_fixed: float,
    time: float = 0.0,
) -> tuple[GuidanceMode, SwitchEvent | None]:
    """Deterministic baseline: switch purely on range thresholds."""
    if r1_fixed >= r2_fixed:
        raise ValueError("fixed radii must satisfy r1 < r2")
    r = inputs.r
    if mode == GuidanceMode.COMPLETE:
        return mode, None
    if mode == GuidanceMode.TERMINAL:
        if inputs.dock_ready:
            return GuidanceMode.COMPLETE, SwitchEvent(time, mode, GuidanceMode.COMPLETE, r, "dock", 1.0)
        return mode, None
    if mode == GuidanceMode.LOS:
        if r <= r2_fixed:
            return GuidanceMode.REORIENT, SwitchEvent(time, mode, GuidanceMode.REORIENT, r, "r2_fixed", r2_fixed)
        return mode, None
    if mode == GuidanceMode.REORIENT:
        if r <= r1_fixed:
            return GuidanceMode.ALIGN, SwitchEvent(time, mode, GuidanceMode.ALIGN, r, "r1_fixed", r1_fixed)
        return mode, None
    # ALIGN
    if inputs.at_align_point:
        return GuidanceMode.TERMINAL, SwitchEvent(time, mode, GuidanceMode.TERMINAL, r, "align_reached", 1.0)
    return mode, None


def alignment_point(
    target_position: np.ndarray,
    target_dcm: np.ndarray,
    face_normal_body: np.ndarray,
    standoff: float,
) -> np.ndarray:
    """Point directly in front of the docking face at the given standoff."""
    if standoff < 0.0:
        raise ValueError("standoff must be non-negative")
    return target_position + standoff * (target_dcm @ face_normal_body)


def docking_attitude(
    chaser_face_normal_body: np.ndarray,
    target_dcm: np.ndarray,
    face_normal_body: np.ndarray,
) -> np.ndarray:
    """Chaser attitude mating its docking face against the target face.

    Minimal rotation taking the chaser face normal onto the anti-normal of
    the target face; the roll degree of freedom about the mating axis is
    left at the minimal-rotation value.
    """
    face_station = target_dcm @ face_normal_body
    return rotation_between(chaser_face_normal_body, -face_station)


def target_attitude_error_norm(q_chaser: np.ndarray, q_target: np.ndarray) -> float:
    """Norm of the vector part of the target-vs-chaser error quaternion."""
    qe = quat_multiply(q_target, quat_inverse(q_chaser))
    return float(math.sqrt(qe[1] * qe[1] + qe[2] * qe[2] + qe[3] * qe[3]))


@dataclass
class ModeSpeeds:
    """Commanded closure speed per guidance mode, m/s."""

    los: float = 0.035
    reorient: float = 0.02
    align: float = 0.02
    terminal: float = 0.01


@dataclass
class SetpointGenerator:
    """Moving-reference setpoints for the position and attitude loops.

    A reference point advances from the chaser's estimated position toward
    the active goal at the mode speed; re-anchoring happens only on mode
    changes so the commanded path stays smooth between decisions.
    """

    target_position: np.ndarray
    target_dcm: np.ndarray
    face_normal_body: np.ndarray
    chaser_face_normal_body: np.ndarray
    standoff: float
    r_d: float
    speeds: ModeSpeeds
    hold_attitude: np.ndarray  # attitude kept during the LOS leg
    ref: np.ndarray | None = None
    q_dock: np.ndarray = field(init=False)
    align_pt: np.ndarray = field(init=False)
    dock_pt: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.q_dock = docking_attitude(
            self.chaser_face_normal_body, self.target_dcm, self.face_normal_body
        )
        self.align_pt = alignment_point(
            self.target_position, self.target_dcm, self.face_normal_body, self.standoff
        )
        self.dock_pt = alignment_point(
            self.target_position, self.target_dcm, self.face_normal_body, self.r_d
        )

    def anchor(self, est_pos: np.ndarray) -> None:
        self.ref = est_pos.copy()

    def _goal_and_speed(self, mode: GuidanceMode) -> tuple[np.ndarray, float, float]:
        """(goal point, speed, stop distance short of the goal)."""
        if mode == GuidanceMode.LOS:
            return self.target_position, self.speeds.los, self.r_d
        if mode == GuidanceMode.REORIENT:
            return self.target_position, self.speeds.reorient, self.r_d
        if mode == GuidanceMode.ALIGN:
            return self.align_pt, self.speeds.align, 0.0
        return self.dock_pt, self.speeds.terminal, 0.0

    def step(self, mode: GuidanceMode, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Advance the reference; returns (pos_sp, vel_sp, attitude_sp)."""
        if self.ref is None:
            raise RuntimeError("setpoint generator not anchored")
        goal, speed, stop = self._goal_and_speed(mode)
        to_goal = goal - self.ref
        dist = float(np.linalg.norm(to_goal))
        vel_sp = np.zeros(3)
        if dist > stop + 1e-9:
            direction = to_goal / dist
            advance = min(speed * dt, dist - stop)
            self.ref = self.ref + advance * direction
            if dist - stop > speed * dt:
                vel_sp = speed * direction
        att_sp = self.hold_attitude if mode == GuidanceMode.LOS else self.q_dock
        return self.ref.copy(), vel_sp, att_sp

    def los_direction(self, est_pos: np.ndarray) -> np.ndarray:
        v = self.target_position - est_pos
        return v / np.linalg.norm(v)
