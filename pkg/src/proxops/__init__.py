"""Proximity-operations GNC simulation library.

Rigid-body relative motion, synthetic gyro/UWB/vision sensing, a tandem
translational + attitude-error EKF with outlier gating, quaternion and LQR
control, adaptive Markov-chain guidance switching, and a seeded Monte-Carlo
harness with a fixed-vs-adaptive comparison campaign.
"""

from .control import AttitudeGains, LqrDesign, attitude_control, lqr_design, translational_control
from .dynamics import (
    ControlInput,
    RigidBodyParams,
    TrueState,
    angular_accel,
    propagate_truth,
    relative_accel,
    sensor_point_state,
)
from .estimator import (
    AttitudeFilter,
    EstimateReport,
    GateConfig,
    PoseEstimator,
    TranslationalFilter,
    init_position_from_ranges,
)
from .guidance import (
    GuidanceInputs,
    GuidanceMode,
    SwitchingState,
    alignment_point,
    fixed_switching_step,
    los_stay_probability,
    reorient_transition_matrix,
    stationary_distribution,
    switching_step,
)
from .montecarlo import compare_fixed_adaptive, monte_carlo, placement_study
from .runlog import Metrics, RunLog, compute_metrics, load_run_log, save_run_log
from .scenario import ScenarioConfig, baseline_config, load_config, save_config
from .sensors import CameraSpec, GyroSpec, UwbAnchorSet, check_fov, measure_features, measure_gyro, measure_range
from .simrun import run_scenario

__version__ = "0.1.0"
