"""Per-run time history, switch events, and the metrics derived from them.

A run log is persisted as two files: `<name>.csv` holding the per-step rows
in a fixed column order, and `<name>.meta.json` holding run-level fields
(status, seed, selected radii, switch events, docking references). Floats
are written with full precision so a parsed log reproduces the in-memory
arrays exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .guidance import GuidanceMode, SwitchEvent
from .quat import error_quat, quat_angle

CSV_COLUMNS = [
    "t",
    "true_x", "true_y", "true_z",
    "true_vx", "true_vy", "true_vz",
    "true_q0", "true_q1", "true_q2", "true_q3",
    "true_wx", "true_wy", "true_wz",
    "est_x", "est_y", "est_z",
    "est_vx", "est_vy", "est_vz",
    "est_q0", "est_q1", "est_q2", "est_q3",
    "sig_x", "sig_y", "sig_z",
    "mode",
    "fx", "fy", "fz",
    "tx", "ty", "tz",
    "range_anchor", "range_d2", "range_accepted",
    "feat_d2", "feat_accepted",
    "d_smooth", "r_est",
]

STATUS_DOCKED = "Docked"
STATUS_TIMEOUT = "Timeout"
STATUS_DIVERGED = "Diverged"


@dataclass
class RunLog:
    """Column arrays (one row per control step) plus run-level outcomes."""

    t: np.ndarray
    true_pos: np.ndarray
    true_vel: np.ndarray
    true_quat: np.ndarray
    true_omega: np.ndarray
    est_pos: np.ndarray
    est_vel: np.ndarray
    est_quat: np.ndarray
    sigma_pos: np.ndarray
    mode: np.ndarray
    force: np.ndarray
    torque: np.ndarray
    range_anchor: np.ndarray
    range_d2: np.ndarray
    range_accepted: np.ndarray
    feat_d2: np.ndarray
    feat_accepted: np.ndarray
    d_smooth: np.ndarray
    r_est: np.ndarray
    status: str
    dock_time: float  # nan unless docked
    seed: int
    arm: str
    dt: float
    r1_final: float
    r2_final: float
    r1_selected: bool
    r2_selected: bool
    dock_point: np.ndarray
    dock_quat: np.ndarray
    events: list[SwitchEvent] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return self.t.shape[0]

    def row_matrix(self) -> np.ndarray:
        cols = [
            self.t,
            self.true_pos[:, 0], self.true_pos[:, 1], self.true_pos[:, 2],
            self.true_vel[:, 0], self.true_vel[:, 1], self.true_vel[:, 2],
            self.true_quat[:, 0], self.true_quat[:, 1], self.true_quat[:, 2], self.true_quat[:, 3],
            self.true_omega[:, 0], self.true_omega[:, 1], self.true_omega[:, 2],
            self.est_pos[:, 0], self.est_pos[:, 1], self.est_pos[:, 2],
            self.est_vel[:, 0], self.est_vel[:, 1], self.est_vel[:, 2],
            self.est_quat[:, 0], self.est_quat[:, 1], self.est_quat[:, 2], self.est_quat[:, 3],
            self.sigma_pos[:, 0], self.sigma_pos[:, 1], self.sigma_pos[:, 2],
            self.mode.astype(float),
            self.force[:, 0], self.force[:, 1], self.force[:, 2],
            self.torque[:, 0], self.torque[:, 1], self.torque[:, 2],
            self.range_anchor.astype(float), self.range_d2, self.range_accepted.astype(float),
            self.feat_d2, self.feat_accepted.astype(float),
            self.d_smooth, self.r_est,
        ]
        return np.column_stack(cols)


@dataclass
class Metrics:
    """Docking figures of merit; error fields are nan for non-docked runs."""

    status: str
    position_error_cm: float
    attitude_error_rad: float
    docking_time_s: float
    total_impulse_ns: float
    r1: float
    r2: float


def compute_metrics(log: RunLog) -> Metrics:
    """Terminal errors at dock declaration plus the whole-run force impulse."""
    impulse = float(np.sum(np.abs(log.force)) * log.dt)
    if log.status != STATUS_DOCKED or not math.isfinite(log.dock_time):
        return Metrics(log.status, math.nan, math.nan, math.nan, impulse, log.r1_final, log.r2_final)
    idx = int(np.searchsorted(log.t, log.dock_time))
    idx = min(idx, log.n_steps - 1)
    pos_err = float(np.linalg.norm(log.true_pos[idx] - log.dock_point)) * 100.0
    att_err = quat_angle(error_quat(log.true_quat[idx], log.dock_quat))
    return Metrics(
        status=log.status,
        position_error_cm=pos_err,
        attitude_error_rad=att_err,
        docking_time_s=log.dock_time,
        total_impulse_ns=impulse,
        r1=log.r1_final,
        r2=log.r2_final,
    )


def _event_to_dict(ev: SwitchEvent) -> dict:
    return {
        "time": ev.time,
        "from_mode": int(ev.from_mode),
        "to_mode": int(ev.to_mode),
        "r": ev.r,
        "trigger": ev.trigger,
        "trigger_value": ev.trigger_value,
        "radius_set": ev.radius_set,
    }


def _event_from_dict(d: dict) -> SwitchEvent:
    return SwitchEvent(
        time=d["time"],
        from_mode=GuidanceMode(d["from_mode"]),
        to_mode=GuidanceMode(d["to_mode"]),
        r=d["r"],
        trigger=d["trigger"],
        trigger_value=d["trigger_value"],
        radius_set=d["radius_set"],
    )


def save_run_log(log: RunLog, out_dir: str | Path, name: str) -> tuple[Path, Path]:
    """Write `<name>.csv` and `<name>.meta.json` under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    meta_path = out / f"{name}.meta.json"

    matrix = log.row_matrix()
    with csv_path.open("w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in matrix:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")

    meta = {
        "status": log.status,
        "dock_time": log.dock_time,
        "seed": log.seed,
        "arm": log.arm,
        "dt": log.dt,
        "r1_final": log.r1_final,
        "r2_final": log.r2_final,
        "r1_selected": log.r1_selected,
        "r2_selected": log.r2_selected,
        "dock_point": list(log.dock_point),
        "dock_quat": list(log.dock_quat),
        "events": [_event_to_dict(ev) for ev in log.events],
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return csv_path, meta_path


def load_run_log(out_dir: str | Path, name: str) -> RunLog:
    out = Path(out_dir)
    csv_path = out / f"{name}.csv"
    meta_path = out / f"{name}.meta.json"
    with csv_path.open() as fh:
        header = fh.readline().strip().split(",")
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected run-log columns in {csv_path}")
        matrix = np.array(
            [[float(v) for v in line.split(",")] for line in fh if line.strip()]
        ).reshape(-1, len(CSV_COLUMNS))
    meta = json.loads(meta_path.read_text())

    def cols(i: int, j: int) -> np.ndarray:
        return matrix[:, i:j].copy()

    return RunLog(
        t=matrix[:, 0].copy(),
        true_pos=cols(1, 4),
        true_vel=cols(4, 7),
        true_quat=cols(7, 11),
        true_omega=cols(11, 14),
        est_pos=cols(14, 17),
        est_vel=cols(17, 20),
        est_quat=cols(20, 24),
        sigma_pos=cols(24, 27),
        mode=matrix[:, 27].astype(int),
        force=cols(28, 31),
        torque=cols(31, 34),
        range_anchor=matrix[:, 34].astype(int),
        range_d2=matrix[:, 35].copy(),
        range_accepted=matrix[:, 36].astype(int),
        feat_d2=matrix[:, 37].copy(),
        feat_accepted=matrix[:, 38].astype(int),
        d_smooth=matrix[:, 39].copy(),
        r_est=matrix[:, 40].copy(),
        status=meta["status"],
        dock_time=meta["dock_time"],
        seed=meta["seed"],
        arm=meta["arm"],
        dt=meta["dt"],
        r1_final=meta["r1_final"],
        r2_final=meta["r2_final"],
        r1_selected=meta["r1_selected"],
        r2_selected=meta["r2_selected"],
        dock_point=np.array(meta["dock_point"]),
        dock_quat=np.array(meta["dock_quat"]),
        events=[_event_from_dict(d) for d in meta["events"]],
    )
