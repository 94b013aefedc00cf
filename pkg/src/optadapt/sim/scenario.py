"""Scenario and suite files (JSON).

A scenario names the model, the start configuration, a Cartesian goal and
optionally its joint-space solution, limit overrides, barrier settings,
plant mismatch and a master seed. A suite is a named list of scenarios.

Seed split: ``np.random.SeedSequence(seed).spawn(3)`` gives the plant,
RRT and EST streams, in that order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from ..barriers import DEFAULT_CAP, DEFAULT_ETA, DEFAULT_RHO0, JointLimitBarrier
from ..chain import ChainModel, inverse_kinematics, load_model_file, reference_model
from ..errors import SchemaError, ValidationError

SCENARIO_SCHEMA = "optadapt.scenario/1"
SUITE_SCHEMA = "optadapt.suite/1"

_SCENARIO_FIELDS = {
    "schema", "name", "model", "start", "goal", "goal_joints", "horizon", "limit_overrides",
    "barriers", "plant", "seed", "mode",
}
_PLANT_FIELDS = {"viscous_friction", "input_disturbance", "actuation_delay"}
_BARRIER_FIELDS = {"joint_index", "x_min", "x_max", "rho0", "eta", "cap"}
_OVERRIDE_FIELDS = {"joint", "min", "max"}


@dataclass(frozen=True)
class BarrierSpec:
    joint_index: Optional[int] = None  # None: the default applied to every joint
    x_min: Optional[float] = None  # None: the effective joint limit
    x_max: Optional[float] = None
    rho0: float = DEFAULT_RHO0
    eta: float = DEFAULT_ETA
    cap: float = DEFAULT_CAP


@dataclass(frozen=True)
class Scenario:
    name: str
    start: Optional[np.ndarray]  # None: the model's home configuration
    goal: np.ndarray  # (3,) meters
    goal_joints: Optional[np.ndarray] = None
    model_ref: str = "reference"
    horizon: int = 5000
    limit_overrides: Tuple[Tuple[int, float, float], ...] = ()
    barriers: Tuple[BarrierSpec, ...] = ()
    viscous_friction: float = 0.1
    input_disturbance: float = 0.01
    actuation_delay: int = 0
    seed: int = 0
    mode: str = "closed"
    base_dir: str = field(default=".", compare=False)

    def load_model(self) -> ChainModel:
        if self.model_ref == "reference":
            return reference_model()
        path = self.model_ref
        if not os.path.isabs(path):
            path = os.path.join(self.base_dir, path)
        return load_model_file(path)

    def limits(self, model: ChainModel):
        """Effective ``(joint_min, joint_max)`` after overrides."""
        lo = model.joint_min.copy()
        hi = model.joint_max.copy()
        for j, a, b in self.limit_overrides:
            if not 0 <= j < model.n_joints:
                raise ValidationError(f"limit override names joint {j}, model has {model.n_joints}")
            lo[j], hi[j] = a, b
        if np.any(lo >= hi):
            raise ValidationError("limit override leaves joint_min >= joint_max")
        return lo, hi

    def start_configuration(self, model: ChainModel) -> np.ndarray:
        if self.start is None:
            if model.home_configuration is None:
                raise ValidationError("scenario has no start and the model has no home configuration")
            return model.home_configuration.copy()
        q = model.check_q(self.start)
        lo, hi = self.limits(model)
        if np.any(q < lo) or np.any(q > hi):
            bad = int(np.flatnonzero((q < lo) | (q > hi))[0])
            raise ValidationError(f"start configuration violates the limits of joint {bad}")
        return q

    def joint_goal(self, model: ChainModel) -> np.ndarray:
        """Stored joint goal, else position IK from the start under the nominal model limits."""
        if self.goal_joints is not None:
            return model.check_q(self.goal_joints)
        return inverse_kinematics(model, self.goal, self.start_configuration(model))

    def barrier_set(self, model: ChainModel) -> List[JointLimitBarrier]:
        lo, hi = self.limits(model)
        default = BarrierSpec()
        per_joint = {}
        for spec in self.barriers:
            if spec.joint_index is None:
                default = spec
            else:
                per_joint[spec.joint_index] = spec
        out = []
        for j in range(model.n_joints):
            spec = per_joint.get(j, default)
            x_min = lo[j] if spec.x_min is None else spec.x_min
            x_max = hi[j] if spec.x_max is None else spec.x_max
            out.append(JointLimitBarrier(j, float(x_min), float(x_max), spec.rho0, spec.rho0, spec.eta, spec.cap))
        return out

    def seeds(self):
        """Integer seeds for the plant, RRT and EST streams."""
        children = np.random.SeedSequence(self.seed).spawn(3)
        return tuple(int(c.generate_state(1)[0]) for c in children)


def _num(doc, key, where, kind=float):
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(where + key, "expected a number")
    if kind is int:
        if int(value) != value:
            raise SchemaError(where + key, "expected an integer")
        return int(value)
    return float(value)


def _vec(doc, key, where, length=None):
    value = doc[key]
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise SchemaError(where + key, "expected a list of numbers")
    if length is not None and len(value) != length:
        raise SchemaError(where + key, f"expected {length} entries")
    return np.array(value, dtype=float)


def scenario_from_dict(doc: dict, base_dir=".", where="") -> Scenario:
    if not isinstance(doc, dict):
        raise SchemaError(where or "<root>", "scenario must be an object")
    unknown = set(doc) - _SCENARIO_FIELDS
    if unknown:
        raise SchemaError(where + sorted(unknown)[0], "unknown field")
    if doc.get("schema", SCENARIO_SCHEMA) != SCENARIO_SCHEMA:
        raise SchemaError(where + "schema", f"expected {SCENARIO_SCHEMA!r}")
    if "goal" not in doc:
        raise SchemaError(where + "goal", "missing required field")
    kw = {"name": str(doc.get("name", "scenario")), "goal": _vec(doc, "goal", where, 3), "base_dir": base_dir}
    if "model" in doc:
        if not isinstance(doc["model"], str):
            raise SchemaError(where + "model", "expected 'reference' or a model file path")
        kw["model_ref"] = doc["model"]
    if "start" in doc and doc["start"] != "home":
        kw["start"] = _vec(doc, "start", where)
    else:
        kw["start"] = None
    if "goal_joints" in doc:
        kw["goal_joints"] = _vec(doc, "goal_joints", where)
    if "horizon" in doc:
        kw["horizon"] = _num(doc, "horizon", where, int)
        if kw["horizon"] < 1:
            raise ValidationError(f"{where}horizon must be at least 1")
    overrides = []
    for k, item in enumerate(doc.get("limit_overrides", [])):
        w = f"{where}limit_overrides[{k}]."
        if not isinstance(item, dict) or set(item) - _OVERRIDE_FIELDS or set(item) != _OVERRIDE_FIELDS:
            raise SchemaError(w[:-1], "expected {joint, min, max}")
        overrides.append((_num(item, "joint", w, int), _num(item, "min", w), _num(item, "max", w)))
    kw["limit_overrides"] = tuple(overrides)
    barriers = []
    for k, item in enumerate(doc.get("barriers", [])):
        w = f"{where}barriers[{k}]."
        if not isinstance(item, dict):
            raise SchemaError(w[:-1], "expected an object")
        unknown = set(item) - _BARRIER_FIELDS
        if unknown:
            raise SchemaError(w + sorted(unknown)[0], "unknown field")
        fields = {}
        if "joint_index" in item and item["joint_index"] is not None:
            fields["joint_index"] = _num(item, "joint_index", w, int)
        for key in ("x_min", "x_max", "rho0", "eta", "cap"):
            if key in item and item[key] is not None:
                fields[key] = _num(item, key, w)
        spec = BarrierSpec(**fields)
        if spec.rho0 <= 0 or spec.eta <= 0 or spec.cap <= 0:
            raise ValidationError(f"{w[:-1]}: rho0, eta and cap must be positive")
        barriers.append(spec)
    kw["barriers"] = tuple(barriers)
    plant = doc.get("plant", {})
    if not isinstance(plant, dict):
        raise SchemaError(where + "plant", "expected an object")
    unknown = set(plant) - _PLANT_FIELDS
    if unknown:
        raise SchemaError(f"{where}plant.{sorted(unknown)[0]}", "unknown field")
    for key in ("viscous_friction", "input_disturbance"):
        if key in plant:
            kw[key] = _num(plant, key, where + "plant.")
    if "actuation_delay" in plant:
        kw["actuation_delay"] = _num(plant, "actuation_delay", where + "plant.", int)
    if "seed" in doc:
        kw["seed"] = _num(doc, "seed", where, int)
    if "mode" in doc:
        if doc["mode"] not in ("open", "closed"):
            raise SchemaError(where + "mode", "expected 'open' or 'closed'")
        kw["mode"] = doc["mode"]
    return Scenario(**kw)


def scenario_to_dict(s: Scenario, with_schema=True) -> dict:
    doc = {"schema": SCENARIO_SCHEMA} if with_schema else {}
    doc.update({"name": s.name, "model": s.model_ref})
    doc["start"] = "home" if s.start is None else [float(v) for v in s.start]
    doc["goal"] = [float(v) for v in s.goal]
    if s.goal_joints is not None:
        doc["goal_joints"] = [float(v) for v in s.goal_joints]
    doc["horizon"] = s.horizon
    if s.limit_overrides:
        doc["limit_overrides"] = [{"joint": j, "min": a, "max": b} for j, a, b in s.limit_overrides]
    if s.barriers:
        doc["barriers"] = [{k: v for k, v in vars(b).items() if v is not None} for b in s.barriers]
    doc["plant"] = {"viscous_friction": s.viscous_friction, "input_disturbance": s.input_disturbance,
                    "actuation_delay": s.actuation_delay}
    doc["seed"] = s.seed
    doc["mode"] = s.mode
    return doc


def _parse_json(text, name):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(name, f"invalid JSON ({exc.msg} at line {exc.lineno})") from None


def load_scenario(text: str, base_dir=".") -> Scenario:
    return scenario_from_dict(_parse_json(text, "<scenario>"), base_dir)


def load_suite(text: str, base_dir=".") -> List[Scenario]:
    """A suite document, or a single scenario document as a one-element suite."""
    doc = _parse_json(text, "<suite>")
    if isinstance(doc, dict) and doc.get("schema") == SUITE_SCHEMA:
        unknown = set(doc) - {"schema", "name", "scenarios"}
        if unknown:
            raise SchemaError(sorted(unknown)[0], "unknown field")
        items = doc.get("scenarios")
        if not isinstance(items, list):
            raise SchemaError("scenarios", "expected a list")
        if not items:
            raise ValidationError("suite contains no scenarios")
        return [scenario_from_dict(item, base_dir, f"scenarios[{k}].") for k, item in enumerate(items)]
    return [scenario_from_dict(doc, base_dir)]


def load_suite_file(path) -> List[Scenario]:
    with open(path, encoding="utf-8") as fh:
        return load_suite(fh.read(), os.path.dirname(os.path.abspath(path)))


def suite_to_dict(name: str, scenarios: List[Scenario]) -> dict:
    return {"schema": SUITE_SCHEMA, "name": name,
            "scenarios": [scenario_to_dict(s, with_schema=False) for s in scenarios]}


def with_seed(s: Scenario, seed: int) -> Scenario:
    return replace(s, seed=int(seed))
