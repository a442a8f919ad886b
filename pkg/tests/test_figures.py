import numpy as np

from proxops.figures import (
    plot_comparison_trajectories,
    plot_placement,
    plot_run_overview,
    plot_switching_scatter,
)
from proxops.montecarlo import compare_fixed_adaptive, placement_study
from proxops.scenario import baseline_config
from proxops.simrun import run_scenario


def test_figures_render_to_files(tmp_path):
    cfg = baseline_config()
    report = compare_fixed_adaptive(cfg, 2, base_seed=1, keep_trajectories=True)

    p1 = plot_comparison_trajectories(
        report, np.array(cfg.target.position), np.array(cfg.uwb.anchors), tmp_path / "traj.png"
    )
    p2 = plot_switching_scatter(report.adaptive, tmp_path / "scatter.png")
    log = run_scenario(cfg, seed=0, arm="adaptive")
    p3 = plot_run_overview(log, tmp_path / "overview.png")
    pl = placement_study(
        cfg, {"baseline": np.array(cfg.uwb.anchors)}, np.array([[0.0, 1.0, 0.0]])
    )
    p4 = plot_placement(pl.per_layout(), tmp_path / "placement.png")
    for p in (p1, p2, p3, p4):
        assert p.exists() and p.stat().st_size > 0
