"""Run every planner on every scenario of a suite and aggregate the results.

Model-based planners execute closed-loop with their own feedback; the
sampling planners replay their paths open-loop. Passing ``mode`` forces one
execution mode for all planners.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..errors import OptAdaptError
from ..planners import PlannerSettings, plan_adapt_only, plan_optimal_adapt, plan_optimal_lqr
from ..sampling import SamplingPlannerConfig, est_plan, rrt_plan
from .metrics import compute_metrics
from .plant import PlantModel, simulate
from .scenario import Scenario

PLANNERS = ("optimal-adapt", "adapt", "optimal-lqr", "rrt", "est")
DEFAULT_MODES = {"optimal-adapt": "closed", "adapt": "closed", "optimal-lqr": "closed", "rrt": "open", "est": "open"}
AGGREGATE_COLUMNS = ("method", "rmse_m", "completion_pct", "time_s", "std_s")
ALIASES = {"adapt-only": "adapt", "optimal-adaptive": "optimal-adapt"}


def planner_name(name: str) -> str:
    """Canonical planner name; accepts the aliases in :data:`ALIASES`."""
    name = ALIASES.get(name, name)
    if name not in PLANNERS:
        raise ValueError(f"unknown planner {name!r}; choose from {', '.join(PLANNERS)}")
    return name


@dataclass
class RunRecord:
    scenario: str
    method: str
    planned: bool
    executed: bool
    success: bool
    ee_rmse: float
    time_s: float
    planning_time_s: float
    violation_count: int
    max_violation: float
    terminal_joint_error: float
    iterations: int
    converged: bool
    message: str = ""


@dataclass
class BenchmarkResult:
    runs: List[RunRecord]
    aggregate: List[dict]

    def runs_csv(self) -> str:
        buf = io.StringIO()
        fields = list(RunRecord.__dataclass_fields__)
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in self.runs:
            w.writerow({k: _fmt(v) for k, v in asdict(r).items()})
        return buf.getvalue()

    def aggregate_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=AGGREGATE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.aggregate:
            w.writerow({k: _fmt(row[k]) for k in AGGREGATE_COLUMNS})
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'method':<14}{'rmse_m':>10}{'completion_pct':>16}{'time_s':>10}{'std_s':>10}"]
        for row in self.aggregate:
            lines.append(f"{row['method']:<14}{row['rmse_m']:>10.4f}{row['completion_pct']:>16.1f}"
                         f"{row['time_s']:>10.3f}{row['std_s']:>10.3f}")
        return "\n".join(lines)

    def by_method(self, method) -> dict:
        return next(r for r in self.aggregate if r["method"] == method)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _plan(method, model, scenario, q_start, q_goal, lo, hi, settings, sampling, clock):
    if method == "optimal-adapt":
        return plan_optimal_adapt(model, q_start, q_goal, scenario.barrier_set(model), settings, clock)
    if method == "adapt":
        return plan_adapt_only(model, q_start, q_goal, settings, clock)
    if method == "optimal-lqr":
        return plan_optimal_lqr(model, q_start, q_goal, scenario.barrier_set(model), settings, clock)
    _, rrt_seed, est_seed = scenario.seeds()
    if method == "rrt":
        fn, seed = rrt_plan, rrt_seed
    elif method == "est":
        fn, seed = est_plan, est_seed
    else:
        raise ValueError(f"unknown planner {method!r}")
    t0 = clock()
    cfg = SamplingPlannerConfig(**{**asdict(sampling), "rng_seed": seed})
    traj = fn(model, q_start, q_goal, cfg, joint_min=lo, joint_max=hi)
    traj.planning_time = clock() - t0
    return traj


def plan_scenario(scenario: Scenario, method: str, settings: PlannerSettings = PlannerSettings(),
                  sampling: SamplingPlannerConfig = SamplingPlannerConfig(),
                  clock: Callable[[], float] = time.perf_counter, model=None):
    """Plan one scenario without executing it; returns a ``Motion`` or a sampling ``Trajectory``."""
    method = planner_name(method)
    model = scenario.load_model() if model is None else model
    settings = PlannerSettings(**{**settings.__dict__, "horizon": scenario.horizon})
    lo, hi = scenario.limits(model)
    q_start = scenario.start_configuration(model)
    q_goal = scenario.joint_goal(model)
    return _plan(method, model, scenario, q_start, q_goal, lo, hi, settings, sampling, clock)


def run_scenario(scenario: Scenario, method: str, settings: PlannerSettings = PlannerSettings(),
                 sampling: SamplingPlannerConfig = SamplingPlannerConfig(), mode: Optional[str] = None,
                 clock: Callable[[], float] = time.perf_counter, model=None):
    """Plan and execute one scenario with one planner; returns ``(RunRecord, motion, log)``."""
    method = planner_name(method)
    model = scenario.load_model() if model is None else model
    settings = PlannerSettings(**{**settings.__dict__, "horizon": scenario.horizon})
    lo, hi = scenario.limits(model)
    q_start = scenario.start_configuration(model)
    empty = dict(scenario=scenario.name, method=method, executed=False, success=False, ee_rmse=float("nan"),
                 violation_count=0, max_violation=0.0, terminal_joint_error=float("nan"))
    t_start = clock()
    try:
        q_goal = scenario.joint_goal(model)
        motion = _plan(method, model, scenario, q_start, q_goal, lo, hi, settings, sampling, clock)
    except OptAdaptError as exc:
        elapsed = clock() - t_start
        rec = RunRecord(planned=False, time_s=elapsed, planning_time_s=elapsed, iterations=0, converged=False,
                        message=str(exc), **empty)
        return rec, None, None
    planning_time = motion.planning_time
    result = getattr(motion, "result", None)
    iterations = result.iterations if result is not None else 0
    converged = result.converged if result is not None else False
    if getattr(motion, "success", True) is False:
        rec = RunRecord(planned=False, time_s=planning_time, planning_time_s=planning_time, iterations=iterations,
                        converged=converged, message="planning failure", **empty)
        return rec, motion, None
    plant = PlantModel(model.with_limits(lo, hi), scenario.viscous_friction, scenario.input_disturbance,
                       scenario.actuation_delay)
    plant_seed = scenario.seeds()[0]
    run_mode = mode or DEFAULT_MODES.get(method, scenario.mode)
    log = simulate(plant, motion, run_mode, seed=plant_seed, clock=clock)
    log.planning_time = planning_time
    met = compute_metrics(log, scenario.goal, lo, hi, q_goal)
    rec = RunRecord(scenario=scenario.name, method=method, planned=True, executed=True, success=met.success,
                    ee_rmse=met.ee_rmse, time_s=met.total_time, planning_time_s=planning_time,
                    violation_count=met.violation_count, max_violation=met.max_violation,
                    terminal_joint_error=met.terminal_joint_error, iterations=iterations, converged=converged)
    return rec, motion, log


def aggregate(runs: Sequence[RunRecord], planners: Sequence[str]) -> List[dict]:
    """Per planner: mean RMSE over executed runs, completion %, mean and std of total time."""
    rows = []
    for method in planners:
        mine = [r for r in runs if r.method == method]
        executed = [r.ee_rmse for r in mine if r.executed and np.isfinite(r.ee_rmse)]
        times = np.array([r.time_s for r in mine], dtype=float)
        rows.append({
            "method": method,
            "rmse_m": float(np.mean(executed)) if executed else float("nan"),
            "completion_pct": 100.0 * sum(r.success for r in mine) / len(mine) if mine else float("nan"),
            "time_s": float(times.mean()) if times.size else float("nan"),
            "std_s": float(times.std()) if times.size else float("nan"),
        })
    return rows


def run_benchmark(suite: Sequence[Scenario], planners: Sequence[str] = PLANNERS,
                  settings: PlannerSettings = PlannerSettings(),
                  sampling: SamplingPlannerConfig = SamplingPlannerConfig(), mode: Optional[str] = None,
                  clock: Callable[[], float] = time.perf_counter,
                  progress: Optional[Callable[[RunRecord], None]] = None) -> BenchmarkResult:
    """Every planner on every scenario; failures become failed rows, never exceptions.

    Time columns are wall-clock and so vary between runs; pass a
    deterministic ``clock`` to make the whole result reproducible.
    """
    if not suite:
        raise ValueError("suite is empty")
    planners = [planner_name(p) for p in planners]
    models: Dict[str, object] = {}
    runs = []
    for scenario in suite:
        key = (scenario.model_ref, scenario.base_dir)
        if key not in models:
            models[key] = scenario.load_model()
        for method in planners:
            rec, _, _ = run_scenario(scenario, method, settings, sampling, mode, clock, models[key])
            runs.append(rec)
            if progress is not None:
                progress(rec)
    return BenchmarkResult(runs, aggregate(runs, planners))
