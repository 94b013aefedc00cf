"""Executable catalog of the worked examples each module promises.

Every entry is ``(name, tolerance_kind, fn)``; ``fn`` raises on failure.
Closed-form scalar checks use ``EXACT`` (1e-12), checks against the dense
oracle or finite differences use ``ORACLE`` (1e-6) unless they state their
own bound. Values marked frozen come from ``frozen.json``.
"""

from __future__ import annotations

import functools
import json
import os
import tempfile
import time

import numpy as np

from factories import chain, chain_doc, planar2, random_lq, single_z, vertical_link
from oracles import kkt_solve
from optadapt import cli
from optadapt.adaptive import AdaptiveState, adaptive_torque, estimate_path, lambda_fn
from optadapt.barriers import (JointLimitBarrier, LinearizedConstraints, barrier_gradient, barrier_max,
                               barrier_min, default_barriers, linearize_constraints)
from optadapt.chain import (ee_positions, forward_kinematics, gravity_term, inverse_kinematics, jacobian,
                            load_model, model_to_dict, reference_model)
from optadapt.errors import UnreachableGoalError, ValidationError
from optadapt.lq.linalg import nullspace_basis, pseudoinverse
from optadapt.lq.nullspace import build_tilde, constrained_component, reparametrize
from optadapt.lq.problem import LQCoefficients, ProblemSpec, expand_cost
from optadapt.lq.riccati import forward_pass, riccati_backward
from optadapt.lq.solver import iterate_plan
from optadapt.planners import PlannerSettings, plan_barriers, plan_optimal_adapt
from optadapt.sampling import SamplingPlannerConfig, est_plan, rrt_plan
from optadapt.sim.benchmark import AGGREGATE_COLUMNS, PLANNERS, run_benchmark, run_scenario
from optadapt.sim.metrics import compute_metrics
from optadapt.sim.plant import ExecutionLog, PlantModel, simulate
from optadapt.sim.scenario import Scenario, scenario_to_dict
from optadapt.sim.suites import REACH_GOAL, bundled

EXACT = 1e-12
ORACLE = 1e-6
HERE = os.path.dirname(os.path.abspath(__file__))


@functools.lru_cache(maxsize=None)
def frozen() -> dict:
    with open(os.path.join(HERE, "frozen.json"), encoding="utf-8") as fh:
        return json.load(fh)


def close(actual, expected, tol, what=""):
    actual = np.asarray(actual, float)
    expected = np.asarray(expected, float)
    assert actual.shape == expected.shape, f"{what}: shape {actual.shape} != {expected.shape}"
    err = float(np.max(np.abs(actual - expected), initial=0.0))
    assert err <= tol, f"{what}: max deviation {err:.3e} > {tol:.0e}"


# ---------------------------------------------------------------------------
# shared expensive runs (computed once per process)
# ---------------------------------------------------------------------------

SUITE_SECONDS = {}


@functools.lru_cache(maxsize=None)
def suite_result(name):
    t0 = time.perf_counter()
    result = run_benchmark(bundled(name))
    SUITE_SECONDS[name] = time.perf_counter() - t0
    return result


@functools.lru_cache(maxsize=None)
def reach_plan():
    sc = bundled("reach")[0]
    model = sc.load_model()
    q0, qg = sc.start_configuration(model), sc.joint_goal(model)
    return model, sc, plan_optimal_adapt(model, q0, qg, plan_barriers(*sc.limits(model), PlannerSettings()))


def adaptive_terminal_error():
    model = reference_model()
    qg = inverse_kinematics(model, REACH_GOAL, model.home_configuration)
    path = estimate_path(model, model.home_configuration, qg, 5000)
    return np.abs(path.x_des[-1] - qg)


def sampling_regression(fn):
    model = reference_model()
    sc = bundled("reach")[0]
    qg = sc.joint_goal(model)
    return fn(model, model.home_configuration, qg, SamplingPlannerConfig(max_samples=5000, rng_seed=11)), qg


def closed_vs_open_terminal_error():
    model, sc, motion = reach_plan()
    plant = PlantModel(model, sc.viscous_friction, sc.input_disturbance, sc.actuation_delay)
    qg = sc.joint_goal(model)
    seed = sc.seeds()[0]
    closed = simulate(plant, motion, "closed", seed=seed)
    opened = simulate(plant, motion, "open", seed=seed)
    return float(np.abs(closed.q[-1] - qg).max()), float(np.abs(opened.q[-1] - qg).max())


def measure_frozen() -> dict:
    """Values recorded on the first run and checked from then on."""
    model = reference_model()
    fk = forward_kinematics(model, model.home_configuration)
    _, _, motion = reach_plan()
    rrt, _ = sampling_regression(rrt_plan)
    est, _ = sampling_regression(est_plan)
    closed, opened = closed_vs_open_terminal_error()
    band = suite_result("band30")
    free = suite_result("free30")
    return {
        "home_pose": {"position": fk.position.tolist(), "orientation": fk.orientation.tolist()},
        "adaptive_terminal_error": adaptive_terminal_error().tolist(),
        "reach_plan": {"iterations": motion.result.iterations, "x_final": motion.x[-1].tolist()},
        "rrt": {"samples": rrt.samples, "nodes": rrt.nodes},
        "est": {"samples": est.samples, "nodes": est.nodes},
        "closed_loop_terminal_error": closed,
        "open_loop_terminal_error": opened,
        "free30": {r["method"]: {"rmse_m": r["rmse_m"], "completion_pct": r["completion_pct"]}
                   for r in free.aggregate},
        "band30": {r["method"]: {"rmse_m": r["rmse_m"], "completion_pct": r["completion_pct"]}
                   for r in band.aggregate},
    }


# ---------------------------------------------------------------------------
# chain model
# ---------------------------------------------------------------------------

def ex_load_fetch():
    assert reference_model().n_joints == 7


def ex_degenerate_bound():
    doc = chain_doc([(0, 0, 1)] * 4, [(0.1, 0, 0)] * 4)
    doc["joints"][3]["min"] = doc["joints"][3]["max"] = 0.5
    try:
        load_model(json.dumps(doc))
    except ValidationError:
        return
    raise AssertionError("equal joint bounds were accepted")


def ex_planar_model():
    assert planar2().n_joints == 2


def ex_fk_straight():
    close(forward_kinematics(planar2(), [0.0, 0.0]).position, [2, 0, 0], EXACT, "fk")


def ex_fk_quarter_turn():
    close(forward_kinematics(planar2(), [np.pi / 2, 0.0]).position, [0, 2, 0], EXACT, "fk")


def ex_fk_home_pose():
    model = reference_model()
    fk = forward_kinematics(model, model.home_configuration)
    close(fk.position, model.home_pose.position, 1e-9, "home position")
    close(fk.orientation, model.home_pose.orientation, 1e-9, "home orientation")
    close(fk.position, frozen()["home_pose"]["position"], 1e-9, "frozen home position")


def ex_jacobian_planar():
    J = jacobian(planar2(), [0.0, 0.0])
    close(J[:3, 0], [0, 2, 0], EXACT, "column 1")
    close(J[:3, 1], [0, 1, 0], EXACT, "column 2")


def _fd_jacobian(model, q, h=1e-6):
    cols = []
    for j in range(model.n_joints):
        dq = np.zeros_like(q)
        dq[j] = h
        cols.append((ee_positions(model, q + dq) - ee_positions(model, q - dq)) / (2 * h))
    return np.array(cols).T


def ex_jacobian_fd():
    model = reference_model()
    rng = np.random.default_rng(3)
    for _ in range(20):
        q = rng.uniform(model.joint_min, model.joint_max)
        close(jacobian(model, q)[:3], _fd_jacobian(model, q), 1e-5, "finite differences")


def ex_jacobian_single():
    close(jacobian(single_z(), [0.0])[:3, 0], [0, 1, 0], EXACT, "single joint")


def ex_ik_extended():
    close(inverse_kinematics(planar2(), [2, 0, 0], [0.1, -0.1]), [0, 0], 1e-4, "ik")


def ex_ik_unreachable():
    try:
        inverse_kinematics(planar2(), [2.5, 0, 0], [0.1, -0.1])
    except UnreachableGoalError:
        return
    raise AssertionError("goal outside the workspace was accepted")


def ex_ik_fetch_goal():
    model = reference_model()
    q = inverse_kinematics(model, REACH_GOAL, model.home_configuration)
    assert np.linalg.norm(ee_positions(model, q) - REACH_GOAL) <= 1e-4
    assert model.within_limits(q)


def ex_gravity_horizontal():
    model = planar2(masses=[1.0, 1.0])
    close(gravity_term(model, [0.3, -0.7]), [0, 0], EXACT, "horizontal plane")


def ex_gravity_vertical_link():
    close(abs(gravity_term(vertical_link(), [np.pi / 2])[0]), 9.81, EXACT, "torque magnitude")


def ex_gravity_aligned():
    close(gravity_term(vertical_link(), [0.0]), [0.0], EXACT, "aligned link")


# ---------------------------------------------------------------------------
# adaptive estimator
# ---------------------------------------------------------------------------

def ex_lambda_zero():
    state = AdaptiveState.start([1.0, 2.0], 0.001, np.zeros(2))
    lam, _ = lambda_fn(state, np.zeros(2))
    close(lam, [0, 0], EXACT, "lambda")


def _unit_state():
    return AdaptiveState(np.array([1.0]), 1.0, np.array([0.0]), np.array([0.0]))


def ex_lambda_first_step():
    lam, state = lambda_fn(_unit_state(), np.array([1.0]))
    close(state.error_integral, [1.0], EXACT, "integral")
    close(lam, [3.0], EXACT, "lambda")


def ex_lambda_odd():
    rng = np.random.default_rng(5)
    errors = rng.normal(size=(6, 3))
    a = AdaptiveState.start(np.ones(3), 0.01, np.zeros(3))
    b = AdaptiveState.start(np.ones(3), 0.01, np.zeros(3))
    for e in errors:
        la, a = lambda_fn(a, e)
        lb, b = lambda_fn(b, -e)
        close(lb, -la, EXACT, "odd symmetry")


def ex_torque_at_goal():
    g = np.array([0.4, -1.2])
    tau, _ = adaptive_torque(AdaptiveState.start([3.0, 3.0], 0.001, np.zeros(2)), [0.2, 0.1], [0.2, 0.1], g)
    close(tau, g, EXACT, "tau")


def ex_torque_zero_gain():
    g = np.array([0.4, -1.2])
    tau, _ = adaptive_torque(AdaptiveState.start([0.0, 0.0], 0.001, np.zeros(2)), [0.0, 0.0], [1.0, -2.0], g)
    close(tau, g, EXACT, "tau")


def ex_torque_scalar():
    state = AdaptiveState(np.array([2.0]), 1.0, np.array([0.0]), np.array([0.0]))
    tau, _ = adaptive_torque(state, [0.0], [1.0], [0.5])
    close(tau, [6.5], EXACT, "tau")


def ex_path_fixed_point():
    model = planar2()
    x0 = np.array([0.3, -0.4])
    path = estimate_path(model, x0, x0, 50, gamma=[2.0, 2.0])
    close(path.x_des, np.broadcast_to(x0, path.x_des.shape), EXACT, "x_des")
    close(path.u_des, np.zeros_like(path.u_des), EXACT, "u_des")


def ex_path_decoupled_input():
    model = load_model(json.dumps(chain_doc([(0, 0, 1)], [(1, 0, 0)], A=[[1.0]], B=[[0.0]])))
    path = estimate_path(model, [0.2], [1.0], 100, gamma=[5.0])
    close(path.x_des, np.full_like(path.x_des, 0.2), EXACT, "x_des")


def ex_path_fetch_terminal():
    err = adaptive_terminal_error()
    assert np.all(err <= 0.05), f"terminal error {err.max():.3f} rad"
    close(err, frozen()["adaptive_terminal_error"], 1e-9, "frozen terminal error")


# ---------------------------------------------------------------------------
# constraint fields
# ---------------------------------------------------------------------------

_B = JointLimitBarrier(0, -1.0, 1.0, 0.1, 0.1, 1.0, 1e9)


def ex_barrier_min_boundary():
    close(barrier_min(-1.0 + 0.1, _B), 0.0, EXACT, "at rho0")


def ex_barrier_min_outside():
    close(barrier_min(-1.0 + 0.2, _B), 0.0, EXACT, "at 2 rho0")


def ex_barrier_min_value():
    close(barrier_min(-1.0 + 0.05, _B), 4000.0, 1e-9, "inside band")
    capped = JointLimitBarrier(0, -1.0, 1.0, 0.1, 0.1, 1.0, 100.0)
    close(barrier_min(-1.0 + 0.05, capped), 100.0, EXACT, "capped")


def ex_barrier_max_boundary():
    close(barrier_max(1.0 - 0.1, _B), 0.0, EXACT, "at rho0")


def ex_barrier_max_value():
    close(barrier_max(1.0 - 0.05, _B), -4000.0, 1e-9, "inside band")


def ex_barrier_midrange():
    close([barrier_min(0.0, _B), barrier_max(0.0, _B)], [0.0, 0.0], EXACT, "mid-range")


def ex_gradient_inactive():
    close(barrier_gradient(0.0, _B, "min"), 0.0, EXACT, "inactive")


def ex_gradient_value():
    x = -1.0 + 0.05
    close(barrier_gradient(x, _B, "min"), -320000.0, 1e-6, "hand derivative")
    h = 1e-7
    fd = (barrier_min(x + h, _B) - barrier_min(x - h, _B)) / (2 * h)
    assert abs(fd - (-320000.0)) / 320000.0 <= 1e-6


def ex_gradient_plateau():
    capped = JointLimitBarrier(0, -1.0, 1.0, 0.1, 0.1, 1.0, 100.0)
    close(barrier_gradient(-1.0 + 0.01, capped, "min"), 0.0, EXACT, "plateau")


def ex_linearize_inactive():
    x = np.zeros((20, 3))
    lin = linearize_constraints(default_barriers([-1.0] * 3, [1.0] * 3), x)
    assert lin.total_rows() == 0


def ex_linearize_crossing():
    barriers = default_barriers([-0.1, -2.0], [0.1, 2.0])
    t = np.linspace(0.0, 0.095, 40)
    x = np.column_stack([t, np.zeros_like(t)])
    lin = linearize_constraints(barriers, x)
    expected = np.flatnonzero(0.1 - t <= barriers[0].rho0_max)
    assert expected.size and expected.size < t.size
    np.testing.assert_array_equal(lin.active_steps(), expected)


def ex_linearize_single_row():
    barriers = default_barriers([-1.0, -1.0], [1.0, 1.0])
    x = np.zeros((5, 2))
    x[2, 1] = -1.0 + 0.045
    lin = linearize_constraints(barriers, x)
    assert lin.D[2].shape == (1, 2) and lin.C[2].shape[0] == 0
    assert lin.total_rows() == 1
    close(lin.D[2][0, 0], 0.0, EXACT, "other column")
    close(lin.D[2][0, 1], barrier_gradient(x[2, 1], barriers[1], "min"), EXACT, "gradient entry")


# ---------------------------------------------------------------------------
# LQ optimizer
# ---------------------------------------------------------------------------

def _scalar_spec(w=2.0, goal=0.5, N=3):
    return ProblemSpec.regulate([0.0], [goal], N, 0.1, [[w]], [[1.0]], [[1.0]])


def ex_expand_at_goal():
    spec = ProblemSpec.regulate([0.2, 0.1], [0.2, 0.1], 4, 0.1, np.eye(2), np.eye(2), np.eye(2))
    c = expand_cost(spec, (np.tile([0.2, 0.1], (5, 1)), np.zeros((4, 2))))
    close(c.q, np.zeros((4, 2)), EXACT, "q")
    close(c.r, np.zeros((4, 2)), EXACT, "r")


def ex_expand_separable():
    spec = ProblemSpec.regulate([0.0, 0.0], [1.0, 1.0], 4, 0.1, np.eye(2), np.eye(2), np.eye(2))
    c = expand_cost(spec, (np.random.default_rng(1).normal(size=(5, 2)), np.ones((4, 2))))
    close(c.P, np.zeros((4, 2, 2)), EXACT, "P")


def ex_expand_scalar():
    w, goal, delta = 2.0, 0.5, 0.3
    c = expand_cost(_scalar_spec(w, goal), (np.full((4, 1), goal + delta), np.zeros((3, 1))))
    close(c.q, np.full((3, 1), w * delta), EXACT, "q")


def ex_pinv_identity():
    close(pseudoinverse(np.eye(4)), np.eye(4), EXACT, "identity")


def ex_pinv_zero():
    close(pseudoinverse(np.zeros((2, 3))), np.zeros((3, 2)), EXACT, "zero")


def ex_pinv_row():
    M = np.array([[1.0, 1.0]])
    Mp = pseudoinverse(M)
    close(Mp, [[0.5], [0.5]], EXACT, "row")
    close(M @ Mp @ M, M, EXACT, "M M+ M")


def ex_null_identity():
    assert nullspace_basis(np.eye(2)).shape == (2, 0)


def ex_null_empty():
    close(nullspace_basis(np.zeros((0, 3))), np.eye(3), EXACT, "empty")


def ex_null_row():
    N = nullspace_basis(np.array([[1.0, 1.0]]))
    assert N.shape == (2, 1)
    close(np.array([[1.0, 1.0]]) @ N, [[0.0]], EXACT, "annihilation")
    close(np.linalg.norm(N), 1.0, EXACT, "unit norm")
    close(abs(N[:, 0]), [2 ** -0.5] * 2, EXACT, "direction")


def _one_step(n=1, m=1, N=1, A=1.0, B=1.0, Q=1.0, R=1.0):
    return LQCoefficients(o=np.zeros(N), q=np.zeros((N, n)), r=np.zeros((N, m)),
                          Q=np.full((N, n, n), Q), R=np.full((N, m, m), R), P=np.zeros((N, m, n)),
                          oN=0.0, qN=np.zeros(n), QN=np.eye(n), A=np.full((N, n, n), A), B=np.full((N, n, m), B))


def _rows(blocks, n):
    D = [np.asarray(b[0], float).reshape(-1, n) for b in blocks]
    e = [np.asarray(b[1], float).reshape(-1) for b in blocks]
    empty = [np.zeros((0, n))] * len(blocks)
    return LinearizedConstraints(D, e, empty, [np.zeros(0)] * len(blocks))


def ex_constrained_empty():
    du, G, T = constrained_component(_rows([([], []), ([], [])], 1), _one_step(), 0, np.array([0.4]))
    close(du, [0.0], EXACT, "du")
    close(G, [[0.0]], EXACT, "Gamma")
    close(T, [0.0], EXACT, "Theta")


def ex_constrained_feedforward():
    coeffs = _one_step(n=2, m=2, A=0.0, B=0.0)
    coeffs.A[0] = np.eye(2)
    coeffs.B[0] = np.array([[1.0, 0.5], [0.0, 2.0]])
    D, e = np.array([[0.3, -1.0]]), np.array([0.7])
    lin = _rows([([], []), (D, e)], 2)
    du, _, _ = constrained_component(lin, coeffs, 0, np.zeros(2))
    close(du, pseudoinverse(D @ coeffs.B[0]) @ e, EXACT, "feedforward")


def ex_constrained_scalar():
    lin = _rows([([], []), ([[1.0]], [0.3])], 1)
    dx = np.array([0.1])
    du, _, _ = constrained_component(lin, _one_step(), 0, dx)
    close(du, [0.2], EXACT, "du_c")
    close(1.0 * (1.0 * dx + 1.0 * du), [0.3], EXACT, "propagated row")


def ex_reparam_identity():
    rng = np.random.default_rng(2)
    coeffs, _ = random_lq(rng, n=3, m=2, N=1)
    step = coeffs.step(0)
    t = reparametrize(step, np.zeros((2, 3)), np.zeros(2), np.eye(2))
    for key in ("A", "B", "q", "r", "Q", "R", "P"):
        close(getattr(t, key), step[key], EXACT, key)
    close(t.o, step["o"], EXACT, "o")
    close(t.k, np.zeros(3), EXACT, "k")


def ex_reparam_offset():
    step = dict(o=0.7, q=np.zeros(2), r=np.zeros(2), Q=np.eye(2), R=np.eye(2), P=np.zeros((2, 2)),
                A=np.eye(2), B=np.eye(2))
    theta = np.array([0.3, -0.4])
    t = reparametrize(step, np.zeros((2, 2)), theta, nullspace_basis(np.eye(2)))
    close(t.o, 0.7 + 0.5 * theta @ theta, EXACT, "o tilde")


def ex_reparam_no_free_inputs():
    step = dict(o=0.0, q=np.zeros(2), r=np.ones(2), Q=np.eye(2), R=np.eye(2), P=np.ones((2, 2)),
                A=np.eye(2), B=np.eye(2))
    t = reparametrize(step, np.zeros((2, 2)), np.zeros(2), np.zeros((2, 0)))
    assert t.R.shape == (0, 0) and t.r.shape == (0,) and t.P.shape == (0, 2) and t.free_inputs == 0


def ex_riccati_no_free_inputs():
    rng = np.random.default_rng(4)
    coeffs, _ = random_lq(rng, n=2, m=2, N=4, max_rows=0)
    full = _rows([(np.eye(2), rng.normal(size=2)) if i else ([], []) for i in range(5)], 2)
    tilde = build_tilde(coeffs, full)
    Ks, ks, state = riccati_backward(tilde)
    assert all(t.free_inputs == 0 for t in tilde.steps) and all(k.shape == (0,) for k in ks)
    S = tilde.QN
    for i in range(3, -1, -1):
        t = tilde.steps[i]
        S = t.Q + t.A.T @ S @ t.A
        close(state.S[i], S, 1e-9, f"S[{i}]")


def ex_riccati_scalar():
    Ks, _, _ = riccati_backward(build_tilde(_one_step(), _rows([([], []), ([], [])], 1)))
    close(Ks[0], [[0.5]], EXACT, "K0")


def ex_riccati_vs_kkt():
    coeffs, lin = random_lq(np.random.default_rng(8), n=3, m=3, N=10)
    tilde = build_tilde(coeffs, lin)
    Ks, ks, _ = riccati_backward(tilde)
    du, _, _ = forward_pass(tilde, Ks, ks, coeffs.A, coeffs.B)
    du_ref, _ = kkt_solve(coeffs, lin)
    close(du, du_ref, ORACLE, "du")


class _LinearModel:
    def __init__(self, n, dt):
        self.A = np.eye(n)
        self.B = dt * np.eye(n)
        self.velocity_limit = np.full(n, 1e9)


def ex_iterate_quadratic():
    n, N, dt = 3, 30, 0.05
    rng = np.random.default_rng(6)
    spec = ProblemSpec.regulate(rng.normal(size=n), rng.normal(size=n), N, dt, dt * np.eye(n),
                                dt * np.eye(n), 10 * np.eye(n))
    u0 = np.zeros((N, n))
    x0 = np.tile(spec.x0, (N + 1, 1))
    result = iterate_plan(_LinearModel(n, dt), spec, (x0, u0))
    assert result.converged and result.iterations == 1
    du_ref, _ = kkt_solve(expand_cost(spec, (x0, u0)), _rows([([], [])] * (N + 1), n))
    close(result.u_final, u0 + du_ref, ORACLE, "plan vs oracle")


def ex_iterate_band():
    sc = bundled("banded-reach")[0]
    rec, motion, _ = run_scenario(sc, "optimal-adapt")
    assert np.all(np.abs(motion.x[:, 0]) <= 0.1), "joint left the band"


def ex_iterate_fetch():
    _, _, motion = reach_plan()
    assert motion.result.converged and motion.result.iterations <= 20
    assert motion.result.iterations == frozen()["reach_plan"]["iterations"]
    close(motion.x[-1], frozen()["reach_plan"]["x_final"], 1e-8, "frozen final state")


# ---------------------------------------------------------------------------
# baseline planners
# ---------------------------------------------------------------------------

def ex_rrt_trivial():
    model = reference_model()
    q = model.home_configuration
    traj = rrt_plan(model, q, q, SamplingPlannerConfig())
    assert traj.success and traj.q.shape[0] == 1 and traj.samples == 0


def ex_rrt_regression():
    traj, qg = sampling_regression(rrt_plan)
    assert traj.success
    assert np.linalg.norm(traj.waypoints[-2] - qg) <= 0.05
    assert (traj.samples, traj.nodes) == (frozen()["rrt"]["samples"], frozen()["rrt"]["nodes"])


def ex_rrt_excluded_goal():
    model = reference_model()
    home = model.home_configuration
    lo, hi = model.joint_min.copy(), model.joint_max.copy()
    lo[0], hi[0] = -0.1, 0.1
    goal = home.copy()
    goal[0] = 0.5
    assert not rrt_plan(model, home, goal, SamplingPlannerConfig(), lo, hi).success


def ex_est_trivial():
    model = reference_model()
    q = model.home_configuration
    traj = est_plan(model, q, q, SamplingPlannerConfig())
    assert traj.success and traj.q.shape[0] == 1


def ex_est_regression():
    traj, qg = sampling_regression(est_plan)
    rrt, _ = sampling_regression(rrt_plan)
    assert traj.success
    assert np.linalg.norm(traj.waypoints[-2] - qg) <= 0.05
    assert (traj.samples, traj.nodes) == (frozen()["est"]["samples"], frozen()["est"]["nodes"])
    assert traj.nodes != rrt.nodes


def ex_est_zero_samples():
    model = reference_model()
    home = model.home_configuration
    traj = est_plan(model, home, home + 0.5 * (model.joint_max - home), SamplingPlannerConfig(max_samples=0))
    assert not traj.success and traj.samples == 0


# ---------------------------------------------------------------------------
# simulation and metrics
# ---------------------------------------------------------------------------

def ex_ideal_open_loop():
    model = planar2()
    rng = np.random.default_rng(9)
    u = rng.uniform(-1, 1, size=(40, 2))
    x = np.vstack([[0.1, 0.2], [0.1, 0.2] + np.cumsum(model.dt * u, axis=0)])
    from optadapt.planners import Motion

    log = simulate(PlantModel.ideal(model), Motion("test", x, u, model.dt, 0.0), "open", settle_time=0.0)
    close(log.q, x, EXACT, "integration")


def ex_friction_steady_state():
    model = single_z()
    f, c = 0.1, 0.8
    from optadapt.planners import Motion

    u = np.full((400, 1), c)
    x = np.vstack([[0.0], np.cumsum(model.dt * u, axis=0)])
    log = simulate(PlantModel(model, f, 0.0, 0), Motion("test", x, u, model.dt, 0.0), "open", settle_time=0.0)
    v = np.diff(log.q[:, 0]) / model.dt
    close(v[-1], c / (1 + f), 1e-12, "steady-state velocity")
    assert v[-1] < c


def ex_closed_beats_open():
    closed, opened = closed_vs_open_terminal_error()
    assert closed < opened
    close([closed, opened], [frozen()["closed_loop_terminal_error"], frozen()["open_loop_terminal_error"]],
          1e-9, "frozen terminal errors")


def _log(q, ee, dt=0.001):
    return ExecutionLog(q=q, u=np.zeros((q.shape[0] - 1, q.shape[1])), ee=ee, dt=dt, planning_time=0.0,
                        execution_time=0.0, mode="open")


def ex_metrics_at_goal():
    goal = np.array([0.5, 0.1, 0.7])
    met = compute_metrics(_log(np.zeros((1000, 2)), np.tile(goal, (1000, 1))), goal, [-1, -1], [1, 1])
    assert met.ee_rmse == 0.0 and met.success


def ex_metrics_band_violation():
    q = np.zeros((600, 7))
    q[300, 0] = 0.12
    lo, hi = np.full(7, -3.0), np.full(7, 3.0)
    lo[0], hi[0] = -0.1, 0.1
    met = compute_metrics(_log(q, np.zeros((600, 3))), np.zeros(3), lo, hi)
    assert met.violation_count >= 1 and not met.success


def ex_metrics_constant_offset():
    goal = np.array([0.5, 0.1, 0.7])
    ee = np.tile(goal + [0.0, 0.1, 0.0], (800, 1))
    met = compute_metrics(_log(np.zeros((800, 2)), ee), goal, [-1, -1], [1, 1])
    close(met.ee_rmse, 0.1, EXACT, "rmse")


def ex_benchmark_columns():
    result = suite_result("free30")
    assert [row["method"] for row in result.aggregate] == list(PLANNERS)
    for row in result.aggregate:
        assert set(AGGREGATE_COLUMNS) <= set(row)
    assert result.aggregate_csv().splitlines()[0] == ",".join(AGGREGATE_COLUMNS)
    assert len(result.runs) == 30 * len(PLANNERS)


def trivial_scenario():
    model = reference_model()
    home = model.home_configuration
    return Scenario(name="at-goal", start=home, goal=ee_positions(model, home), goal_joints=home, horizon=500)


def ex_benchmark_trivial():
    result = run_benchmark([trivial_scenario()])
    for row in result.aggregate:
        assert row["completion_pct"] == 100.0, row
        assert row["rmse_m"] <= 1e-3, row
        assert row["time_s"] <= 5.0, row


def ex_benchmark_constrained():
    result = suite_result("band30")
    for row in result.aggregate:
        expect = frozen()["band30"][row["method"]]
        close(row["rmse_m"], expect["rmse_m"], 1e-9, f"{row['method']} rmse")
        assert row["completion_pct"] == expect["completion_pct"], row


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

DATA = os.path.join(os.path.dirname(os.path.abspath(cli.__file__)), "data")


def _write(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return path


def ex_cli_plan():
    with tempfile.TemporaryDirectory() as out:
        code = cli.main(["plan", "--scenario", os.path.join(DATA, "scenario_reach.json"), "--out", out])
        assert code == 0
        with open(os.path.join(out, "plan_summary.json"), encoding="utf-8") as fh:
            summary = json.load(fh)
        assert summary["converged"] is True
        assert summary["iterations"] == frozen()["reach_plan"]["iterations"]
        with open(os.path.join(out, "trajectory.csv"), encoding="utf-8") as fh:
            assert fh.readline().startswith("step,t,x0")


def ex_cli_missing_model():
    with tempfile.TemporaryDirectory() as out:
        code = cli.main(["plan", "--scenario", os.path.join(DATA, "scenario_reach.json"),
                         "--model", os.path.join(out, "nope.json"), "--out", out])
        assert code == 1


def ex_cli_start_outside_limits():
    with tempfile.TemporaryDirectory() as out:
        doc = scenario_to_dict(bundled("reach")[0])
        doc["start"] = [5.0] + [0.0] * 6
        code = cli.main(["plan", "--scenario", _write(os.path.join(out, "s.json"), doc), "--out", out])
        assert code == 1


def ex_cli_benchmark_suite():
    with tempfile.TemporaryDirectory() as out:
        code = cli.main(["benchmark", "--scenario", os.path.join(DATA, "suite_free30.json"), "--out", out])
        assert code == 0
        with open(os.path.join(out, "aggregate.csv"), encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        assert lines[0] == "method,rmse_m,completion_pct,time_s,std_s"
        assert len(lines) == 1 + len(PLANNERS)


def ex_cli_empty_suite():
    with tempfile.TemporaryDirectory() as out:
        path = _write(os.path.join(out, "empty.json"), {"schema": "optadapt.suite/1", "scenarios": []})
        assert cli.main(["benchmark", "--scenario", path, "--out", out]) == 1


def ex_cli_one_scenario():
    with tempfile.TemporaryDirectory() as out:
        doc = {"schema": "optadapt.suite/1", "scenarios": [scenario_to_dict(trivial_scenario(), with_schema=False)]}
        path = _write(os.path.join(out, "one.json"), doc)
        assert cli.main(["benchmark", "--scenario", path, "--out", out]) == 0
        with open(os.path.join(out, "aggregate.csv"), encoding="utf-8") as fh:
            methods = [line.split(",")[0] for line in fh.read().splitlines()[1:]]
        assert methods == ["optimal-adapt", "adapt", "optimal-lqr", "rrt", "est"]


def ex_cli_export_constrained():
    with tempfile.TemporaryDirectory() as out:
        assert cli.main(["simulate", "--scenario", os.path.join(DATA, "scenario_banded_reach.json"), "--out", out]) == 0
        assert cli.main(["export-figures", "--out", out, "--no-png"]) == 0
        with open(os.path.join(out, "figures", "joint0_band.csv"), encoding="utf-8") as fh:
            series = cli.read_long_csv(fh.read())
        close(series["lower"][1], np.full_like(series["lower"][1], -0.1), EXACT, "lower band")
        close(series["upper"][1], np.full_like(series["upper"][1], 0.1), EXACT, "upper band")
        assert "angle" in series


def ex_cli_export_unconstrained():
    with tempfile.TemporaryDirectory() as out:
        assert cli.main(["simulate", "--scenario", os.path.join(DATA, "scenario_reach.json"), "--out", out]) == 0
        assert cli.main(["export-figures", "--out", out, "--no-png"]) == 0
        names = sorted(f for f in os.listdir(os.path.join(out, "figures")) if f.startswith("ee_") and "error" not in f)
        assert names == ["ee_x.csv", "ee_y.csv", "ee_z.csv"]


def ex_cli_export_empty():
    with tempfile.TemporaryDirectory() as out:
        assert cli.main(["export-figures", "--out", out]) == 1


EXAMPLES = [
    (name[3:], EXACT if name in {
        "ex_fk_straight", "ex_fk_quarter_turn", "ex_jacobian_planar", "ex_jacobian_single",
        "ex_gravity_horizontal", "ex_gravity_vertical_link", "ex_gravity_aligned", "ex_lambda_zero",
        "ex_lambda_first_step", "ex_lambda_odd", "ex_torque_at_goal", "ex_torque_zero_gain", "ex_torque_scalar",
        "ex_barrier_min_boundary", "ex_barrier_min_outside", "ex_barrier_max_boundary", "ex_barrier_midrange",
        "ex_gradient_inactive", "ex_gradient_plateau", "ex_expand_at_goal", "ex_expand_scalar",
        "ex_pinv_identity", "ex_pinv_zero", "ex_pinv_row", "ex_null_empty", "ex_null_row",
        "ex_constrained_empty", "ex_constrained_feedforward", "ex_constrained_scalar", "ex_reparam_identity",
        "ex_reparam_offset", "ex_riccati_scalar", "ex_metrics_constant_offset", "ex_friction_steady_state",
        "ex_ideal_open_loop",
    } else ORACLE, fn)
    for name, fn in list(globals().items()) if name.startswith("ex_") and callable(fn)
]
