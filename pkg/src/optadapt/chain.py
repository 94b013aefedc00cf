"""Serial-chain manipulator model: geometry, limits, estimated linear dynamics.

Kinematic convention: joint ``j`` rotates about its own ``axis`` (expressed in
the frame of the previous link) and then carries a rigid link whose end sits
at ``offset`` in the rotated frame. Joint 0 is located at ``base_offset``.
The end-effector is the end of the last link.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DimensionError, SchemaError, UnreachableGoalError, ValidationError

GRAVITY = 9.81
MODEL_SCHEMA = "optadapt.model/1"

_TOP_FIELDS = {
    "schema", "name", "n_joints", "dt", "base_offset", "joints", "A", "B", "G",
    "gravity_axis", "home_configuration", "home_pose", "adaptive_gain",
}
_JOINT_FIELDS = {"name", "axis", "offset", "min", "max", "velocity_limit", "mass"}


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    orientation: np.ndarray  # unit quaternion (w, x, y, z)

    def __post_init__(self):
        q = np.asarray(self.orientation, dtype=float)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValidationError("pose orientation must be a unit quaternion")


@dataclass(frozen=True, eq=False)
class ChainModel:
    """Immutable manipulator description.

    ``output_matrix`` is ``None`` unless the model file stores ``G``; in that
    case the initial path uses finite-difference joint velocities.
    """

    name: str
    axes: np.ndarray  # (n, 3) unit vectors
    offsets: np.ndarray  # (n, 3) link vectors, meters
    joint_min: np.ndarray
    joint_max: np.ndarray
    velocity_limit: np.ndarray
    masses: np.ndarray
    dt: float
    A: np.ndarray
    B: np.ndarray
    output_matrix: Optional[np.ndarray] = None
    base_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gravity_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    home_configuration: Optional[np.ndarray] = None
    home_pose: Optional[Pose] = None
    adaptive_gain: Optional[np.ndarray] = None
    joint_names: tuple = ()

    def __post_init__(self):
        for name in ("axes", "offsets", "joint_min", "joint_max", "velocity_limit",
                     "masses", "A", "B", "output_matrix", "base_offset", "gravity_axis",
                     "home_configuration", "adaptive_gain"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        self._validate()

    @property
    def n_joints(self) -> int:
        return self.axes.shape[0]

    def _validate(self):
        n = self.axes.shape[0]
        if n < 1:
            raise ValidationError("n_joints must be at least 1")
        shapes = {
            "offsets": (n, 3), "joint_min": (n,), "joint_max": (n,),
            "velocity_limit": (n,), "masses": (n,), "A": (n, n), "B": (n, n),
            "base_offset": (3,), "gravity_axis": (3,),
        }
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise ValidationError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.output_matrix is not None and self.output_matrix.shape != (n, n):
            raise ValidationError("G must be n_joints x n_joints")
        if not np.allclose(np.linalg.norm(self.axes, axis=1), 1.0, atol=1e-9):
            raise ValidationError("joint axes must be unit vectors")
        bad = np.flatnonzero(self.joint_min >= self.joint_max)
        if bad.size:
            raise ValidationError(f"joint {bad[0]}: joint_min must be below joint_max")
        if np.any(self.velocity_limit <= 0):
            raise ValidationError("velocity_limit must be strictly positive")
        if np.any(self.masses < 0):
            raise ValidationError("link masses must be non-negative")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        for name in ("home_configuration", "adaptive_gain"):
            value = getattr(self, name)
            if value is not None and value.shape != (n,):
                raise ValidationError(f"{name} must have length {n}")
        if self.home_configuration is not None and not self.within_limits(self.home_configuration):
            raise ValidationError("home_configuration violates joint limits")

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape[-1:] != (self.n_joints,):
            raise DimensionError(f"joint vector has length {q.shape[-1:]}, model has {self.n_joints} joints")
        return q

    def within_limits(self, q, tol=0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= self.joint_min - tol) and np.all(q <= self.joint_max + tol))

    def with_limits(self, joint_min, joint_max) -> "ChainModel":
        """Copy of the model with replaced joint bounds."""
        return _replace(self, joint_min=np.asarray(joint_min, float), joint_max=np.asarray(joint_max, float))

    @property
    def reach(self) -> float:
        """Upper bound on the distance from joint 0 to the end-effector."""
        return float(np.linalg.norm(self.offsets, axis=1).sum())


def _replace(model, **changes):
    from dataclasses import replace
    return replace(model, **changes)


def default_dynamics(n, dt):
    """Velocity-integrator estimate: ``A = I``, ``B = dt * I``."""
    return np.eye(n), dt * np.eye(n)


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def _vector(doc, key, length, where):
    value = doc.get(key)
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(f"{where}{key}", "expected a numeric array") from None
    if arr.shape != (length,):
        raise SchemaError(f"{where}{key}", f"expected {length} numbers")
    return arr


def _matrix(doc, key, n):
    value = doc.get(key)
    if value is None:
        return None
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(key, "expected a numeric array") from None
    if arr.shape == (n * n,):
        arr = arr.reshape(n, n)
    if arr.shape != (n, n):
        raise SchemaError(key, f"expected {n}x{n} values (row-major)")
    return arr


def _number(doc, key, where=""):
    value = doc.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}{key}", "expected a number")
    return float(value)


def model_from_dict(doc: dict) -> ChainModel:
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "model document must be an object")
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown field")
    if doc.get("schema", MODEL_SCHEMA) != MODEL_SCHEMA:
        raise SchemaError("schema", f"expected {MODEL_SCHEMA!r}")
    n = doc.get("n_joints")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SchemaError("n_joints", "expected a positive integer")
    joints = doc.get("joints")
    if not isinstance(joints, list) or len(joints) != n:
        raise SchemaError("joints", f"expected a list of {n} joint objects")
    axes, offsets, lo, hi, vel, mass, names = [], [], [], [], [], [], []
    for j, joint in enumerate(joints):
        where = f"joints[{j}]."
        if not isinstance(joint, dict):
            raise SchemaError(f"joints[{j}]", "expected an object")
        unknown = set(joint) - _JOINT_FIELDS
        if unknown:
            raise SchemaError(where + sorted(unknown)[0], "unknown field")
        axis = _vector(joint, "axis", 3, where)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValidationError(f"{where}axis must be a unit vector")
        axes.append(axis)
        offsets.append(_vector(joint, "offset", 3, where))
        lo.append(_number(joint, "min", where))
        hi.append(_number(joint, "max", where))
        vel.append(_number(joint, "velocity_limit", where))
        mass.append(_number(joint, "mass", where) if "mass" in joint else 0.0)
        names.append(str(joint.get("name", f"joint{j + 1}")))
    dt = _number(doc, "dt") if "dt" in doc else 0.001
    A0, B0 = default_dynamics(n, dt)
    A = _matrix(doc, "A", n)
    B = _matrix(doc, "B", n)
    home_pose = None
    if doc.get("home_pose") is not None:
        hp = doc["home_pose"]
        if not isinstance(hp, dict) or set(hp) - {"position", "orientation"}:
            raise SchemaError("home_pose", "expected {position, orientation}")
        home_pose = Pose(_vector(hp, "position", 3, "home_pose."),
                         _vector(hp, "orientation", 4, "home_pose."))
    return ChainModel(
        name=str(doc.get("name", "chain")),
        axes=np.array(axes), offsets=np.array(offsets),
        joint_min=np.array(lo), joint_max=np.array(hi),
        velocity_limit=np.array(vel), masses=np.array(mass), dt=dt,
        A=A0 if A is None else A, B=B0 if B is None else B,
        output_matrix=_matrix(doc, "G", n),
        base_offset=_vector(doc, "base_offset", 3, "") if "base_offset" in doc else np.zeros(3),
        gravity_axis=_vector(doc, "gravity_axis", 3, "") if "gravity_axis" in doc else np.array([0.0, 0.0, -1.0]),
        home_configuration=_vector(doc, "home_configuration", n, "") if "home_configuration" in doc else None,
        home_pose=home_pose,
        adaptive_gain=_vector(doc, "adaptive_gain", n, "") if "adaptive_gain" in doc else None,
        joint_names=tuple(names),
    )


def load_model(source: str) -> ChainModel:
    """Parse model-file content (JSON text) into a validated ChainModel."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return model_from_dict(doc)


def load_model_file(path) -> ChainModel:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())


def model_to_dict(model: ChainModel) -> dict:
    n = model.n_joints
    joints = []
    for j in range(n):
        joints.append({
            "name": model.joint_names[j] if j < len(model.joint_names) else f"joint{j + 1}",
            "axis": model.axes[j].tolist(),
            "offset": model.offsets[j].tolist(),
            "min": float(model.joint_min[j]),
            "max": float(model.joint_max[j]),
            "velocity_limit": float(model.velocity_limit[j]),
            "mass": float(model.masses[j]),
        })
    doc = {
        "schema": MODEL_SCHEMA,
        "name": model.name,
        "n_joints": n,
        "dt": model.dt,
        "base_offset": model.base_offset.tolist(),
        "gravity_axis": model.gravity_axis.tolist(),
        "joints": joints,
        "A": model.A.tolist(),
        "B": model.B.tolist(),
    }
    if model.output_matrix is not None:
        doc["G"] = model.output_matrix.tolist()
    if model.home_configuration is not None:
        doc["home_configuration"] = model.home_configuration.tolist()
    if model.home_pose is not None:
        doc["home_pose"] = {"position": model.home_pose.position.tolist(),
                            "orientation": model.home_pose.orientation.tolist()}
    if model.adaptive_gain is not None:
        doc["adaptive_gain"] = model.adaptive_gain.tolist()
    return doc


def dump_model(model: ChainModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def reference_model() -> ChainModel:
    """The bundled Fetch-like 7-joint arm."""
    text = resources.files("optadapt.data").joinpath("fetch_arm.json").read_text(encoding="utf-8")
    return load_model(text)


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------

def _axis_rotations(axis, angles):
    """Rodrigues rotation matrices about ``axis`` for a batch of angles."""
    K = np.array([[0.0, -axis[2], axis[1]],
                  [axis[2], 0.0, -axis[0]],
                  [-axis[1], axis[0], 0.0]])
    s = np.sin(angles)[..., None, None]
    c = np.cos(angles)[..., None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def _chain_frames(model, q):
    """Joint origins, world joint axes, link-end points and final rotation.

    Works on any leading batch shape of ``q``.
    """
    q = model.check_q(q)
    batch = q.shape[:-1]
    R = np.broadcast_to(np.eye(3), batch + (3, 3))
    p = np.broadcast_to(model.base_offset, batch + (3,))
    origins, axes, ends = [], [], []
    for j in range(model.n_joints):
        origins.append(p)
        axes.append(R @ model.axes[j])
        R = R @ _axis_rotations(model.axes[j], q[..., j])
        p = p + R @ model.offsets[j]
        ends.append(p)
    return np.stack(origins, -2), np.stack(axes, -2), np.stack(ends, -2), R


def ee_positions(model: ChainModel, q) -> np.ndarray:
    """End-effector positions for a (..., n) batch of configurations."""
    return _chain_frames(model, q)[2][..., -1, :]


def forward_kinematics(model: ChainModel, q) -> Pose:
    q = model.check_q(q)
    if q.ndim != 1:
        raise DimensionError("forward_kinematics expects a single joint vector")
    _, _, ends, R = _chain_frames(model, q)
    x, y, z, w = Rotation.from_matrix(R).as_quat()
    quat = np.array([w, x, y, z])
    return Pose(position=ends[-1].copy(), orientation=quat / np.linalg.norm(quat))


def jacobian(model: ChainModel, q) -> np.ndarray:
    """Geometric Jacobian (6 x n): linear rows first, then angular rows."""
    q = model.check_q(q)
    if q.ndim != 1:
        raise DimensionError("jacobian expects a single joint vector")
    origins, axes, ends, _ = _chain_frames(model, q)
    ee = ends[-1]
    J = np.empty((6, model.n_joints))
    J[:3] = np.cross(axes, ee - origins).T
    J[3:] = axes.T
    return J


def inverse_kinematics(model: ChainModel, goal, seed, tol=1e-10, max_iter=500, damping=0.02) -> np.ndarray:
    """Position-only damped least squares, clamping to the joint limits each step.

    The damping shrinks with the residual once it drops below ``damping``,
    which keeps convergence fast next to singular configurations.
    """
    goal = np.asarray(goal, dtype=float)
    q = np.clip(model.check_q(seed).astype(float), model.joint_min, model.joint_max)
    if np.linalg.norm(goal - model.base_offset) > model.reach + tol:
        raise UnreachableGoalError(f"goal {goal.tolist()} lies outside the workspace radius {model.reach:.3f} m")
    for _ in range(max_iter):
        err = goal - ee_positions(model, q)
        dist = np.linalg.norm(err)
        if dist <= tol:
            return q
        lam2 = min(damping, dist) ** 2
        Jp = jacobian(model, q)[:3]
        dq = Jp.T @ np.linalg.solve(Jp @ Jp.T + lam2 * np.eye(3), err)
        step = np.max(np.abs(dq))
        if step > 0.2:
            dq *= 0.2 / step
        q = np.clip(q + dq, model.joint_min, model.joint_max)
    if np.linalg.norm(goal - ee_positions(model, q)) <= tol:
        return q
    raise UnreachableGoalError(f"inverse kinematics did not converge to {goal.tolist()} in {max_iter} iterations")


def gravity_term(model: ChainModel, q) -> np.ndarray:
    """Gravity compensation torques from point masses at the link ends."""
    q = model.check_q(q)
    origins, axes, ends, _ = _chain_frames(model, q)
    weight = GRAVITY * model.gravity_axis
    eta = np.empty(q.shape)
    for j in range(model.n_joints):
        arms = ends[..., j:, :] - origins[..., j:j + 1, :]
        moment = np.cross(arms, model.masses[j:, None] * weight).sum(axis=-2)
        eta[..., j] = -np.sum(axes[..., j, :] * moment, axis=-1)
    return eta


__all__ = [
    "ChainModel", "Pose", "load_model", "load_model_file", "dump_model", "model_from_dict",
    "model_to_dict", "reference_model", "forward_kinematics", "ee_positions", "jacobian",
    "inverse_kinematics", "gravity_term", "default_dynamics",
]
