"""Command-line interface: ``optadapt plan | simulate | benchmark | export-figures``.

Exit codes: 0 success, 1 input error (missing or malformed files, invalid
values), 2 the planner diverged or found no plan.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict, replace

import numpy as np

from .chain import ee_positions, load_model_file, reference_model
from .errors import DivergenceError, OptAdaptError
from .lq.solver import read_trajectory_csv, trajectory_csv
from .sim.benchmark import PLANNERS, DEFAULT_MODES, planner_name, plan_scenario, run_benchmark
from .sim.metrics import compute_metrics
from .sim.plant import PlantModel, read_execution_csv, simulate
from .sim.scenario import load_suite_file, with_seed

log = logging.getLogger("optadapt")

DEFAULT_OUT = "optadapt-out"
RUN_FILE = "run.json"
TRAJECTORY_FILE = "trajectory.csv"
EXECUTION_FILE = "execution.csv"


class InputError(Exception):
    pass


class PlanningFailed(Exception):
    pass


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the same directory and rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _out_dir(args) -> str:
    return args.out or os.environ.get("OPTADAPT_OUT") or DEFAULT_OUT


def _load_scenarios(args):
    if not os.path.isfile(args.scenario):
        raise InputError(f"{args.scenario}: no such scenario file")
    try:
        scenarios = load_suite_file(args.scenario)
    except OptAdaptError as exc:
        raise InputError(f"{args.scenario}: {exc}") from None
    if args.model is not None:
        if not os.path.isfile(args.model):
            raise InputError(f"{args.model}: no such model file")
        scenarios = [replace(s, model_ref=os.path.abspath(args.model)) for s in scenarios]
    if args.seed is not None:
        scenarios = [with_seed(s, args.seed) for s in scenarios]
    return scenarios


def _single(args):
    scenarios = _load_scenarios(args)
    if len(scenarios) != 1:
        raise InputError(f"{args.scenario}: expected one scenario, found {len(scenarios)}")
    scenario = scenarios[0]
    try:
        model = scenario.load_model()
    except OSError as exc:
        raise InputError(f"{scenario.model_ref}: {exc.strerror}") from None
    except OptAdaptError as exc:
        raise InputError(f"{scenario.model_ref}: {exc}") from None
    return scenario, model


def _plan(scenario, model, method):
    try:
        motion = plan_scenario(scenario, method, model=model)
    except DivergenceError as exc:
        raise PlanningFailed(f"{scenario.name}: {exc}") from None
    except OptAdaptError as exc:
        raise InputError(f"{scenario.name}: {exc}") from None
    if getattr(motion, "success", True) is False:
        raise PlanningFailed(f"{scenario.name}: {method} found no path")
    return motion


def _motion_csv(motion) -> str:
    if hasattr(motion, "to_csv") and not hasattr(motion, "x"):
        return motion.to_csv()
    return trajectory_csv(motion.x, motion.u, motion.dt)


def _plan_summary(scenario, method, motion) -> dict:
    doc = {"scenario": scenario.name, "method": method, "planning_time_s": motion.planning_time}
    result = getattr(motion, "result", None)
    if result is not None:
        doc.update(result.summary())
    else:
        doc["converged"] = bool(getattr(motion, "success", True))
    return doc


def _run_manifest(scenario, model, method, mode) -> dict:
    lo, hi = scenario.limits(model)
    return {
        "scenario": scenario.name,
        "method": method,
        "mode": mode,
        "model": scenario.model_ref if scenario.model_ref == "reference"
        else os.path.join(scenario.base_dir, scenario.model_ref),
        "goal": [float(v) for v in scenario.goal],
        "goal_joints": [float(v) for v in scenario.joint_goal(model)],
        "joint_min": [float(v) for v in lo],
        "joint_max": [float(v) for v in hi],
        "tightened_joints": sorted({int(j) for j, _, _ in scenario.limit_overrides}),
        "dt": model.dt,
        "seed": scenario.seed,
    }


def cmd_plan(args) -> int:
    scenario, model = _single(args)
    method = planner_name(args.planner)
    motion = _plan(scenario, model, method)
    out = _out_dir(args)
    write_atomic(os.path.join(out, TRAJECTORY_FILE), _motion_csv(motion))
    summary = _plan_summary(scenario, method, motion)
    write_atomic(os.path.join(out, "plan_summary.json"), _json(summary))
    write_atomic(os.path.join(out, RUN_FILE), _json(_run_manifest(scenario, model, method, None)))
    print(f"{scenario.name}: {method} converged={summary['converged']} -> {out}")
    return 0


def cmd_simulate(args) -> int:
    scenario, model = _single(args)
    method = planner_name(args.planner)
    mode = args.mode or DEFAULT_MODES[method]
    motion = _plan(scenario, model, method)
    lo, hi = scenario.limits(model)
    plant = PlantModel(model.with_limits(lo, hi), scenario.viscous_friction, scenario.input_disturbance,
                       scenario.actuation_delay)
    run = simulate(plant, motion, mode, seed=scenario.seeds()[0])
    metrics = compute_metrics(run, scenario.goal, lo, hi, scenario.joint_goal(model))
    out = _out_dir(args)
    write_atomic(os.path.join(out, TRAJECTORY_FILE), _motion_csv(motion))
    write_atomic(os.path.join(out, EXECUTION_FILE), run.to_csv())
    write_atomic(os.path.join(out, "plan_summary.json"), _json(_plan_summary(scenario, method, motion)))
    write_atomic(os.path.join(out, "metrics.json"), _json(asdict(metrics)))
    write_atomic(os.path.join(out, RUN_FILE), _json(_run_manifest(scenario, model, method, mode)))
    print(f"{scenario.name}: {method} ee_rmse={metrics.ee_rmse:.4f} m success={metrics.success} -> {out}")
    return 0


def cmd_benchmark(args) -> int:
    suite = _load_scenarios(args)
    planners = [planner_name(p) for p in (args.planner or PLANNERS)]

    def progress(rec):
        log.info("%s %s success=%s rmse=%.4f", rec.scenario, rec.method, rec.success, rec.ee_rmse)

    result = run_benchmark(suite, planners, mode=args.mode, progress=progress)
    out = _out_dir(args)
    write_atomic(os.path.join(out, "runs.csv"), result.runs_csv())
    write_atomic(os.path.join(out, "aggregate.csv"), result.aggregate_csv())
    report = {"aggregate": result.aggregate, "runs": [asdict(r) for r in result.runs]}
    write_atomic(os.path.join(out, "report.json"), _json(report).replace("NaN", "null"))
    print(result.table())
    return 0


def _long_csv(series: dict, t) -> str:
    """Long format ``t, series, value``; ``series`` maps names to arrays sampled at ``t``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "series", "value"])
    for name, values in series.items():
        for ti, v in zip(t, values):
            w.writerow([repr(float(ti)), name, repr(float(v))])
    return buf.getvalue()


def read_long_csv(text: str) -> dict:
    """Inverse of the long format: ``{series: (t, values)}``."""
    out = {}
    for row in csv.DictReader(io.StringIO(text)):
        ts, vs = out.setdefault(row["series"], ([], []))
        ts.append(float(row["t"]))
        vs.append(float(row["value"]))
    return {k: (np.array(a), np.array(b)) for k, (a, b) in out.items()}


def _figure(path, series: dict, t, title, ylabel):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for name, values in series.items():
        style = "--" if name in ("goal", "lower", "upper", "planned") else "-"
        ax.plot(t, values, style, label=name, linewidth=1.2)
    ax.set_title(title)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    tmp = path + ".tmp.png"
    fig.savefig(tmp, dpi=100, metadata={"Software": None})
    plt.close(fig)
    os.replace(tmp, path)


def _figure_sets(run, t, q, ee, planned_q, planned_ee):
    goal = np.asarray(run["goal"])
    q_goal = np.asarray(run["goal_joints"])
    sets = {}
    for k, axis in enumerate("xyz"):
        series = {"measured": ee[:, k], "goal": np.full(t.shape, goal[k])}
        if planned_ee is not None:
            series["planned"] = planned_ee[:, k]
        sets[f"ee_{axis}"] = (series, f"end-effector {axis}", "m")
    sets["joint_errors"] = ({f"joint{j}": q_goal[j] - q[:, j] for j in range(q.shape[1])},
                            "joint error to goal", "rad")
    err = ee - goal
    sets["ee_error"] = ({"x": err[:, 0], "y": err[:, 1], "z": err[:, 2], "norm": np.linalg.norm(err, axis=1)},
                        "end-effector error", "m")
    for j in run["tightened_joints"]:
        series = {"angle": q[:, j], "lower": np.full(t.shape, run["joint_min"][j]),
                  "upper": np.full(t.shape, run["joint_max"][j])}
        if planned_q is not None:
            series["planned"] = planned_q[:, j]
        sets[f"joint{j}_band"] = (series, f"joint {j} angle and limit band", "rad")
    return sets


def _pad(values, length):
    """Extend a planned series with its final value to cover the settle hold."""
    extra = length - values.shape[0]
    if extra <= 0:
        return values[:length]
    return np.concatenate([values, np.repeat(values[-1:], extra, axis=0)])


def cmd_export_figures(args) -> int:
    out = _out_dir(args)
    run_path = os.path.join(out, RUN_FILE)
    exec_path = os.path.join(out, EXECUTION_FILE)
    for path in (run_path, exec_path):
        if not os.path.isfile(path):
            raise InputError(f"{path}: missing run artifact (run 'optadapt simulate' first)")
    with open(run_path, encoding="utf-8") as fh:
        run = json.load(fh)
    with open(exec_path, encoding="utf-8") as fh:
        t, q, _, ee = read_execution_csv(fh.read())
    planned_q = planned_ee = None
    traj_path = os.path.join(out, TRAJECTORY_FILE)
    if os.path.isfile(traj_path):
        with open(traj_path, encoding="utf-8") as fh:
            _, x_plan, _ = read_trajectory_csv(fh.read())
        planned_q = _pad(x_plan, t.shape[0])
        model = reference_model() if run.get("model") == "reference" else load_model_file(run["model"])
        planned_ee = ee_positions(model, planned_q)
    fig_dir = os.path.join(out, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    written = []
    for name, (series, title, unit) in _figure_sets(run, t, q, ee, planned_q, planned_ee).items():
        write_atomic(os.path.join(fig_dir, f"{name}.csv"), _long_csv(series, t))
        if not args.no_png:
            _figure(os.path.join(fig_dir, f"{name}.png"), series, t, f"{run['method']}: {title}", unit)
        written.append(name)
    print(f"wrote {len(written)} figure sets to {fig_dir}: {', '.join(written)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optadapt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        p.add_argument("--out", help=f"output directory (default $OPTADAPT_OUT or ./{DEFAULT_OUT})")
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario or suite JSON file")
            p.add_argument("--model", help="model JSON file overriding the scenario's model")
            p.add_argument("--seed", type=int, help="master seed overriding the scenario's")

    p = sub.add_parser("plan", help="plan one scenario and write the trajectory")
    common(p)
    p.add_argument("--planner", default="optimal-adapt", help=f"one of {', '.join(PLANNERS)}")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="plan and execute one scenario on the mismatched plant")
    common(p)
    p.add_argument("--planner", default="optimal-adapt", help=f"one of {', '.join(PLANNERS)}")
    p.add_argument("--mode", choices=("open", "closed"), help="execution mode (default per planner)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run planners over a suite and write per-run and aggregate CSVs")
    common(p)
    p.add_argument("--planner", action="append", help="restrict to this planner (repeatable)")
    p.add_argument("--mode", choices=("open", "closed"), help="force one execution mode for all planners")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("export-figures", help="long-format CSVs and PNGs from a simulate run")
    common(p, scenario=False)
    p.add_argument("--no-png", action="store_true", help="write the CSVs only")
    p.set_defaults(func=cmd_export_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PlanningFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, OptAdaptError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
