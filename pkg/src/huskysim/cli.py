"""Scenario runner CLI: execute configs, write artifacts, compare summaries.

Exit codes: 0 success, 2 the simulated run ended in a failure event,
1 config or IO error. Output directory resolution: --out flag, then the
HUSKY_OUT_DIR environment variable, then ./runs/<scenario name>.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import sim as sim_mod
from .gait import GaitConfig
from .mpc import MpcConfig
from .robot import RobotParams
from .sim import load_scenario, run
from .svgplot import line_chart

SUMMARY_SCHEMA = "huskysim-summary/1"

RECOVERY_ROLL_LIMIT = 0.05  # rad
RECOVERY_HOLD = 0.5  # s the roll must stay inside the limit
THRUST_SOFT_TARGET = 7.0  # N, reported against the peak, never gated


class ConfigInvalid(Exception):
    pass


def _bundled_scenario_path(name: str):
    return resources.files("huskysim").joinpath(f"scenarios/{name}.json")


def load_config(path):
    """Parse a scenario document into (scenario, params, mpc_cfg, gait_cfg)."""
    p = Path(path)
    if not p.exists():
        bundled = _bundled_scenario_path(str(path))
        if bundled.is_file():
            p = bundled
        else:
            raise ConfigInvalid(f"config file not found: {path}")
    try:
        doc = json.loads(Path(p).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: invalid JSON ({exc})") from exc
    try:
        scenario = load_scenario(doc)
        params = RobotParams.from_dict(doc.get("robot", {}))
        mpc_cfg = MpcConfig.from_dict(doc.get("mpc", {}))
        gait_cfg = GaitConfig.from_dict(doc.get("gait", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    if not scenario.thrusters_enabled:
        mpc_cfg.thrusters_enabled = False
    return scenario, params, mpc_cfg, gait_cfg


def _parse_csv(path):
    with open(path) as f:
        header = f.readline().strip().split(",")
        data = np.array([[float(v) for v in line.split(",")] for line in f if line.strip()])
    if data.size == 0:
        data = np.zeros((0, len(header)))
    return header, data


def _col(header, name):
    return header.index(name)


def summarize(log_csv_path, scenario: sim_mod.Scenario, outcome, mu_limit: float) -> dict:
    """Summary metrics computed from the serialized log, so a reader of the
    CSV reproduces them exactly."""
    header, data = _parse_csv(log_csv_path)
    summary = {
        "schema_version": SUMMARY_SCHEMA,
        "scenario": scenario.name,
        "seed": scenario.seed,
        "outcome": "success" if outcome is None else "failure",
        "failure": None
        if outcome is None
        else {"kind": outcome.kind, "t_s": outcome.t, "detail": outcome.detail},
        "mu_limit": mu_limit,
        "thrust_soft_target_n": THRUST_SOFT_TARGET,
    }
    if data.shape[0] == 0:
        summary.update(
            max_abs_roll_rad=0.0,
            max_abs_lateral_deviation_m=0.0,
            peak_thrust_n=[0.0] * 4,
            peak_thrust_within_soft_target=True,
            peak_friction_ratio=[0.0] * 4,
            recovery_time_s=None,
            mean_forward_speed_mps=0.0,
        )
        return summary

    t = data[:, _col(header, "t")]
    roll = data[:, _col(header, "roll")]
    py = data[:, _col(header, "py")]
    px = data[:, _col(header, "px")]
    thrust = data[:, _col(header, "thrust0") : _col(header, "thrust0") + 4]
    ratios = data[:, _col(header, "ratio0") : _col(header, "ratio0") + 4]

    summary["max_abs_roll_rad"] = float(np.abs(roll).max())
    summary["max_abs_lateral_deviation_m"] = float(np.abs(py - py[0]).max())
    summary["peak_thrust_n"] = [float(v) for v in thrust.max(axis=0)]
    summary["peak_thrust_within_soft_target"] = bool(thrust.max() <= THRUST_SOFT_TARGET)
    summary["peak_friction_ratio"] = [float(v) for v in ratios.max(axis=0)]
    span = t[-1] - t[0]
    summary["mean_forward_speed_mps"] = float((px[-1] - px[0]) / span) if span > 0 else 0.0

    recovery = None
    if scenario.disturbances:
        t_end = max(d.t_end for d in scenario.disturbances)
        calm = np.abs(roll) < RECOVERY_ROLL_LIMIT
        after = t >= t_end
        dt = t[1] - t[0] if t.size > 1 else 0.0
        hold = int(round(RECOVERY_HOLD / dt)) if dt > 0 else 1
        idx = np.flatnonzero(after & calm)
        for j in idx:
            j_hi = j + hold
            if j_hi <= calm.size and calm[j:j_hi].all():
                recovery = float(t[j] - t_end)  # time after the disturbance ended
                break
    summary["recovery_time_s"] = recovery
    return summary


def write_plots(log_csv_path, plots_dir, mu_limit: float):
    header, data = _parse_csv(log_csv_path)
    plots_dir = Path(plots_dir)
    plots_dir.mkdir(parents=True, exist_ok=True)
    if data.shape[0] == 0:
        data = np.zeros((1, len(header)))
    t = data[:, 0]

    line_chart(
        plots_dir / "position.svg",
        t,
        {n: data[:, _col(header, n)] for n in ("px", "py", "pz")},
        title="COM position",
        ylabel="m",
    )
    series = {n: data[:, _col(header, n)] for n in ("roll", "pitch", "yaw")}
    series.update({f"thrust{i} [N]": data[:, _col(header, f"thrust{i}")] for i in range(4)})
    line_chart(
        plots_dir / "attitude_thrust.svg",
        t,
        series,
        title="Attitude [rad] and thruster forces [N]",
        ylabel="rad / N",
    )
    line_chart(
        plots_dir / "friction.svg",
        t,
        {f"ratio{i}": data[:, _col(header, f"ratio{i}")] for i in range(4)},
        title="Tangential/normal force ratio per leg",
        ylabel="ratio",
        hlines=(mu_limit, -mu_limit),
    )


def run_scenario(config_path, out_dir=None, seed=None, no_thrusters=False) -> int:
    """Run one scenario and write log.csv, summary.json, and plots/*.svg."""
    try:
        scenario, params, mpc_cfg, gait_cfg = load_config(config_path)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if seed is not None:
        scenario.seed = seed
    if no_thrusters:
        scenario.thrusters_enabled = False
        mpc_cfg.thrusters_enabled = False

    if out_dir is None:
        out_dir = os.environ.get("HUSKY_OUT_DIR")
    out = Path(out_dir) if out_dir else Path("runs") / scenario.name
    try:
        out.mkdir(parents=True, exist_ok=True)
        log, outcome = run(scenario, params, mpc_cfg, gait_cfg)
        log.to_csv(out / "log.csv")
        mu_limit = scenario.mu_real if scenario.mu_real is not None else mpc_cfg.mu
        summary = summarize(out / "log.csv", scenario, outcome, mu_limit)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        write_plots(out / "log.csv", out / "plots", mu_limit)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if outcome is None:
        print(f"{scenario.name}: success ({len(log.rows)} steps)")
        return 0
    print(f"{scenario.name}: {outcome.kind} at t={outcome.t:.3f}s: {outcome.detail}")
    return 2


def compare_runs(summary_a_path, summary_b_path):
    """Per-metric deltas between two run summaries."""
    try:
        a = json.loads(Path(summary_a_path).read_text())
        b = json.loads(Path(summary_b_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read summaries: {exc}") from exc
    va, vb = a.get("schema_version"), b.get("schema_version")
    if va != vb:
        raise ConfigInvalid(f"summary schema mismatch: {va!r} vs {vb!r}")

    diff = {"a": a["scenario"], "b": b["scenario"], "deltas": {}, "recovered": {}}
    for key in (
        "max_abs_roll_rad",
        "max_abs_lateral_deviation_m",
        "mean_forward_speed_mps",
    ):
        diff["deltas"][key] = b[key] - a[key]
    diff["deltas"]["peak_thrust_n"] = [bb - aa for aa, bb in zip(a["peak_thrust_n"], b["peak_thrust_n"])]
    diff["deltas"]["peak_friction_ratio"] = [
        bb - aa for aa, bb in zip(a["peak_friction_ratio"], b["peak_friction_ratio"])
    ]
    for tag, s in (("a", a), ("b", b)):
        diff["recovered"][tag] = s["outcome"] == "success" and (
            s["recovery_time_s"] is not None or not s.get("failure")
        )
    return diff


def _run_one(args):
    return run_scenario(*args)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="huskysim", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run one or more scenario configs")
    p_run.add_argument("configs", nargs="+", help="scenario JSON path or bundled name")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--no-thrusters", action="store_true")
    p_run.add_argument("--sweep", action="store_true", help="run configs in parallel")

    p_cmp = sub.add_parser("compare", help="diff two summary.json files")
    p_cmp.add_argument("summary_a")
    p_cmp.add_argument("summary_b")

    args = parser.parse_args(argv)

    if args.cmd == "run":
        jobs = []
        for cfg in args.configs:
            out = args.out
            if out is not None and len(args.configs) > 1:
                out = str(Path(out) / Path(cfg).stem)
            jobs.append((cfg, out, args.seed, args.no_thrusters))
        if args.sweep and len(jobs) > 1:
            with ProcessPoolExecutor() as pool:
                codes = list(pool.map(_run_one, jobs))
        else:
            codes = [_run_one(j) for j in jobs]
        if 1 in codes:
            return 1
        return 2 if 2 in codes else 0

    try:
        diff = compare_runs(args.summary_a, args.summary_b)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for key, val in diff["deltas"].items():
        print(f"{key}: {val}")
    print(f"recovered: a={diff['recovered']['a']} b={diff['recovered']['b']}")
    print(json.dumps(diff, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
