"""Command-line interface.

Subcommands:
  run         one scenario run; writes the run-log CSV + meta JSON and figures
  mc          Monte-Carlo campaign (fixed, adaptive, or paired comparison)
  placement   anchor-layout steady-state study
  emit-config write the baseline scenario config JSON

The output directory comes from --out, falling back to the PROXOPS_OUT
environment variable, then ./out. Exit codes: 0 success, 2 configuration
error, 3 run divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .figures import (
    plot_comparison_trajectories,
    plot_placement,
    plot_run_overview,
    plot_switching_scatter,
)
from .montecarlo import compare_fixed_adaptive, monte_carlo, placement_study
from .runlog import STATUS_DIVERGED, compute_metrics, save_run_log
from .scenario import ConfigError, baseline_config, config_to_dict, load_config, save_config
from .simrun import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("PROXOPS_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args):
    if args.config is None:
        return baseline_config()
    return load_config(args.config)


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    log = run_scenario(cfg, args.seed, args.arm)
    name = f"run_{args.arm}_seed{args.seed}"
    csv_path, meta_path = save_run_log(log, out, name)
    metrics = compute_metrics(log)
    summary = {
        "status": metrics.status,
        "position_error_cm": metrics.position_error_cm,
        "attitude_error_rad": metrics.attitude_error_rad,
        "docking_time_s": metrics.docking_time_s,
        "total_impulse_ns": metrics.total_impulse_ns,
        "r1": metrics.r1,
        "r2": metrics.r2,
    }
    (out / f"{name}.metrics.json").write_text(json.dumps(summary, indent=2) + "\n")
    if not args.no_figures:
        plot_run_overview(log, out / f"{name}.png")
    print(f"status={log.status} dock_time={log.dock_time:.2f}s "
          f"impulse={metrics.total_impulse_ns:.3f}Ns -> {csv_path}")
    return EXIT_DIVERGED if log.status == STATUS_DIVERGED else EXIT_OK


def _cmd_mc(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    keep = not args.no_figures
    if args.mode == "both":
        report = compare_fixed_adaptive(cfg, args.runs, args.seed, args.workers, keep_trajectories=keep)
        (out / "mc_comparison.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        _write_metrics_csv(out / "mc_adaptive.csv", report.adaptive)
        _write_metrics_csv(out / "mc_fixed.csv", report.fixed)
        if keep:
            plot_comparison_trajectories(
                report, np.array(cfg.target.position), np.array(cfg.uwb.anchors),
                out / "mc_trajectories.png",
            )
            plot_switching_scatter(report.adaptive, out / "mc_switching_scatter.png")
        print(
            f"adaptive: time={report.adaptive.mean_docking_time_s:.2f}s "
            f"impulse={report.adaptive.mean_total_impulse_ns:.3f}Ns "
            f"success={report.adaptive.success_rate:.3f}"
        )
        print(
            f"fixed:    time={report.fixed.mean_docking_time_s:.2f}s "
            f"impulse={report.fixed.mean_total_impulse_ns:.3f}Ns "
            f"success={report.fixed.success_rate:.3f}"
        )
        print(
            f"reductions: docking time {report.docking_time_reduction_pct:.1f}%, "
            f"total impulse {report.total_impulse_reduction_pct:.1f}%"
        )
    else:
        summary = monte_carlo(cfg, args.runs, args.seed, args.mode, args.workers, keep_trajectories=keep)
        (out / f"mc_{args.mode}.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
        _write_metrics_csv(out / f"mc_{args.mode}.csv", summary)
        if keep and args.mode == "adaptive":
            plot_switching_scatter(summary, out / "mc_switching_scatter.png")
        print(
            f"{args.mode}: time={summary.mean_docking_time_s:.2f}s "
            f"impulse={summary.mean_total_impulse_ns:.3f}Ns success={summary.success_rate:.3f}"
        )
    return EXIT_OK


def _write_metrics_csv(path: Path, summary) -> None:
    with path.open("w") as fh:
        fh.write("run,seed,status,position_error_cm,attitude_error_rad,"
                 "docking_time_s,total_impulse_ns,r1,r2\n")
        for rec in summary.records:
            m = rec.metrics
            fh.write(
                f"{rec.index},{rec.seed},{m.status},"
                f"{m.position_error_cm:.17g},{m.attitude_error_rad:.17g},"
                f"{m.docking_time_s:.17g},{m.total_impulse_ns:.17g},"
                f"{m.r1:.17g},{m.r2:.17g}\n"
            )


def _cmd_placement(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    if args.layouts:
        layouts_raw = json.loads(Path(args.layouts).read_text())
        layouts = {name: np.array(pos) for name, pos in layouts_raw.items()}
    else:
        layouts = {"baseline": np.array(cfg.uwb.anchors)}
    if args.probe_points:
        probes = np.array(json.loads(Path(args.probe_points).read_text()))
    else:
        # coarse grid between the chaser start and the target
        lo = np.minimum(cfg.chaser.initial_position, cfg.target.position)
        hi = np.maximum(cfg.chaser.initial_position, cfg.target.position)
        axes = [np.linspace(lo[i], hi[i], 3) for i in range(3)]
        probes = np.array([[x, y, z] for x in axes[0] for y in axes[1] for z in axes[2]])
    report = placement_study(cfg, layouts, probes)
    (out / "placement.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if not args.no_figures:
        plot_placement(report.per_layout(), out / "placement.png")
    for name, agg in report.per_layout().items():
        print(
            f"{name}: worst sigma={agg['worst_sigma_pos']*100:.2f}cm "
            f"align probability in [{agg['worst_pi_align']:.3f}, {agg['best_pi_align']:.3f}]"
        )
    return EXIT_OK


def _cmd_emit_config(args) -> int:
    cfg = baseline_config()
    if args.out_file == "-":
        print(json.dumps(config_to_dict(cfg), indent=2))
    else:
        save_config(cfg, args.out_file)
        print(f"wrote {args.out_file}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxops", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single scenario run")
    p_run.add_argument("--config", default=None, help="scenario JSON (default: built-in baseline)")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--arm", choices=["adaptive", "fixed"], default="adaptive")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--no-figures", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_mc = sub.add_parser("mc", help="Monte-Carlo campaign")
    p_mc.add_argument("--config", default=None)
    p_mc.add_argument("--runs", type=int, default=200)
    p_mc.add_argument("--seed", type=int, default=0)
    p_mc.add_argument("--mode", choices=["fixed", "adaptive", "both"], default="both")
    p_mc.add_argument("--workers", type=int, default=max(1, (os.cpu_count() or 1)))
    p_mc.add_argument("--out", default=None)
    p_mc.add_argument("--no-figures", action="store_true")
    p_mc.set_defaults(func=_cmd_mc)

    p_pl = sub.add_parser("placement", help="anchor placement study")
    p_pl.add_argument("--config", default=None)
    p_pl.add_argument("--layouts", default=None, help="JSON {name: [[x,y,z],...]}")
    p_pl.add_argument("--probe-points", default=None, help="JSON [[x,y,z],...]")
    p_pl.add_argument("--out", default=None)
    p_pl.add_argument("--no-figures", action="store_true")
    p_pl.set_defaults(func=_cmd_placement)

    p_cfg = sub.add_parser("emit-config", help="write the baseline scenario config")
    p_cfg.add_argument("out_file", nargs="?", default="scenario.json")
    p_cfg.set_defaults(func=_cmd_emit_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
