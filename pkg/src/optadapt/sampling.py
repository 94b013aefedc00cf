"""Joint-space RRT and EST baselines.

Validity is joint-limit membership only (limits are hard here, unlike the
soft barriers of the optimizer). Paths are not smoothed. A found path is
time-parameterized so that no joint exceeds its velocity limit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, ValidationError


@dataclass(frozen=True)
class SamplingPlannerConfig:
    step_size: float = 0.1  # rad
    goal_bias: float = 0.05
    max_samples: int = 2000
    rng_seed: int = 0
    goal_tolerance: float = 0.05  # rad, Euclidean in joint space
    bucket_size: float = 0.2  # rad, EST density grid

    def __post_init__(self):
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValidationError("goal_bias must lie in [0, 1]")
        if self.step_size <= 0:
            raise ValidationError("step_size must be positive")
        if self.max_samples < 0:
            raise ValidationError("max_samples must be non-negative")
        if self.goal_tolerance <= 0 or self.bucket_size <= 0:
            raise ValidationError("goal_tolerance and bucket_size must be positive")


@dataclass
class Trajectory:
    """Joint positions sampled every ``dt`` seconds.

    ``success`` is False for a planning failure, in which case ``q`` holds
    only the start configuration.
    """

    q: np.ndarray  # (T, n)
    dt: float
    success: bool = True
    samples: int = 0
    nodes: int = 1
    waypoints: Optional[np.ndarray] = None
    planning_time: float = 0.0

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.q.shape[0]) * self.dt

    @property
    def velocities(self) -> np.ndarray:
        """Commanded velocities ``(T - 1, n)`` that reproduce ``q`` by integration."""
        return np.diff(self.q, axis=0) / self.dt

    def to_csv(self) -> str:
        n = self.q.shape[1]
        u = self.velocities
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "t"] + [f"x{j}" for j in range(n)] + [f"u{j}" for j in range(n)])
        for i in range(self.q.shape[0]):
            ui = u[i] if i < u.shape[0] else np.zeros(n)
            w.writerow([i, repr(i * self.dt)] + [repr(float(v)) for v in self.q[i]] + [repr(float(v)) for v in ui])
        return buf.getvalue()


def time_parameterize(waypoints, velocity_limit, dt) -> np.ndarray:
    """Straight-line interpolation between waypoints at the velocity limit of the slowest joint."""
    waypoints = np.asarray(waypoints, float)
    out = [waypoints[:1]]
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        delta = b - a
        duration = float(np.max(np.abs(delta) / velocity_limit))
        steps = max(1, math.ceil(duration / dt - 1e-9))
        s = np.arange(1, steps + 1)[:, None] / steps
        out.append(a + s * delta)
    q = np.vstack(out)
    q[-1] = waypoints[-1]
    return q


class _Tree:
    def __init__(self, root, capacity):
        self.q = np.empty((capacity + 1, root.shape[0]))
        self.parent = np.empty(capacity + 1, dtype=np.int64)
        self.q[0] = root
        self.parent[0] = -1
        self.size = 1

    def add(self, q, parent):
        self.q[self.size] = q
        self.parent[self.size] = parent
        self.size += 1
        return self.size - 1

    def nearest(self, target):
        d = np.linalg.norm(self.q[:self.size] - target, axis=1)
        return int(np.argmin(d))

    def path_to(self, idx):
        out = []
        while idx >= 0:
            out.append(self.q[idx])
            idx = self.parent[idx]
        return np.array(out[::-1])


def _limits(model, joint_min, joint_max):
    lo = model.joint_min if joint_min is None else np.asarray(joint_min, float)
    hi = model.joint_max if joint_max is None else np.asarray(joint_max, float)
    return lo, hi


def _prepare(model, q_start, q_goal, joint_min, joint_max):
    n = model.n_joints
    q_start = np.asarray(q_start, float)
    q_goal = np.asarray(q_goal, float)
    if q_start.shape != (n,) or q_goal.shape != (n,):
        raise DimensionError(f"start and goal must have length {n}")
    lo, hi = _limits(model, joint_min, joint_max)
    if np.any(q_start < lo) or np.any(q_start > hi):
        raise ValidationError("start configuration violates the joint limits")
    return q_start, q_goal, lo, hi


def _valid(q, lo, hi):
    return bool(np.all(q >= lo) and np.all(q <= hi))


def _finish(model, tree, idx, q_goal, lo, hi, samples):
    path = tree.path_to(idx)
    if _valid(q_goal, lo, hi) and not np.array_equal(path[-1], q_goal):
        path = np.vstack([path, q_goal])
    q = time_parameterize(path, model.velocity_limit, model.dt)
    return Trajectory(q, model.dt, True, samples, tree.size, path)


def _failure(model, q_start, samples, nodes):
    return Trajectory(q_start[None, :].copy(), model.dt, False, samples, nodes, q_start[None, :].copy())


def rrt_plan(model, q_start, q_goal, config: SamplingPlannerConfig = SamplingPlannerConfig(),
             joint_min=None, joint_max=None) -> Trajectory:
    """Single-tree RRT with goal bias; limits default to the model's."""
    q_start, q_goal, lo, hi = _prepare(model, q_start, q_goal, joint_min, joint_max)
    if np.linalg.norm(q_goal - q_start) <= config.goal_tolerance:
        return _finish(model, _Tree(q_start, 0), 0, q_goal, lo, hi, 0)
    if not _valid(q_goal, lo, hi):
        return _failure(model, q_start, 0, 1)
    rng = np.random.default_rng(config.rng_seed)
    tree = _Tree(q_start, config.max_samples)
    for k in range(config.max_samples):
        target = q_goal if rng.random() < config.goal_bias else rng.uniform(lo, hi)
        near = tree.nearest(target)
        delta = target - tree.q[near]
        dist = float(np.linalg.norm(delta))
        if dist == 0.0:
            continue
        new = tree.q[near] + delta * min(1.0, config.step_size / dist)
        if not _valid(new, lo, hi):
            continue
        idx = tree.add(new, near)
        if np.linalg.norm(new - q_goal) <= config.goal_tolerance:
            return _finish(model, tree, idx, q_goal, lo, hi, k + 1)
    return _failure(model, q_start, config.max_samples, tree.size)


def est_plan(model, q_start, q_goal, config: SamplingPlannerConfig = SamplingPlannerConfig(),
             joint_min=None, joint_max=None) -> Trajectory:
    """Expansive-space tree.

    Nodes are chosen with probability inversely proportional to the number of
    tree nodes in their grid bucket and expanded in a random direction by a
    random length up to ``step_size``. With probability ``goal_bias`` the node
    nearest the goal is expanded toward it instead.
    """
    q_start, q_goal, lo, hi = _prepare(model, q_start, q_goal, joint_min, joint_max)
    if np.linalg.norm(q_goal - q_start) <= config.goal_tolerance:
        return _finish(model, _Tree(q_start, 0), 0, q_goal, lo, hi, 0)
    if not _valid(q_goal, lo, hi):
        return _failure(model, q_start, 0, 1)
    rng = np.random.default_rng(config.rng_seed)
    tree = _Tree(q_start, config.max_samples)
    n = q_start.shape[0]
    bucket_ids = {}
    counts = np.zeros(config.max_samples + 1)
    node_bucket = np.empty(config.max_samples + 1, dtype=np.int64)

    def register(idx, q):
        key = tuple(np.floor(q / config.bucket_size).astype(np.int64).tolist())
        b = bucket_ids.setdefault(key, len(bucket_ids))
        counts[b] += 1
        node_bucket[idx] = b

    register(0, q_start)
    for k in range(config.max_samples):
        if rng.random() < config.goal_bias:
            node = tree.nearest(q_goal)
            delta = q_goal - tree.q[node]
            dist = float(np.linalg.norm(delta))
            new = tree.q[node] + delta * min(1.0, config.step_size / max(dist, 1e-300))
        else:
            weights = 1.0 / counts[node_bucket[:tree.size]]
            node = int(rng.choice(tree.size, p=weights / weights.sum()))
            direction = rng.normal(size=n)
            direction /= np.linalg.norm(direction)
            new = tree.q[node] + direction * config.step_size * rng.random()
        if not _valid(new, lo, hi):
            continue
        idx = tree.add(new, node)
        register(idx, new)
        if np.linalg.norm(new - q_goal) <= config.goal_tolerance:
            return _finish(model, tree, idx, q_goal, lo, hi, k + 1)
    return _failure(model, q_start, config.max_samples, tree.size)
