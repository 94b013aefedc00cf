"""Generators for the bundled benchmark suites (their output is frozen under ``optadapt/data``)."""

from __future__ import annotations

import json
import os
from importlib import resources
from typing import List

import numpy as np

from ..barriers import DEFAULT_RHO0
from ..chain import ChainModel, ee_positions, inverse_kinematics, reference_model
from ..errors import UnreachableGoalError
from .scenario import Scenario, load_suite, scenario_to_dict, suite_to_dict

REACH_GOAL = (0.81, -0.05, 0.8)
BAND = 0.1  # rad, half-width of a tightened joint range


def random_goals(model: ChainModel, count: int, seed: int, margin: float = DEFAULT_RHO0) -> List[tuple]:
    """``count`` (goal position, joint goal) pairs reachable by IK from the home configuration.

    Goals are end-effector positions of uniformly sampled joint configurations;
    the joint goal is the IK solution seeded at home, which may differ from
    the sampled configuration. IK runs on limits shrunk by ``margin`` so the
    joint goal stays clear of the barrier bands; goals without such a solution
    are resampled.
    """
    rng = np.random.default_rng(seed)
    home = model.home_configuration
    interior = model.with_limits(model.joint_min + margin, model.joint_max - margin)
    out = []
    while len(out) < count:
        q = rng.uniform(model.joint_min, model.joint_max)
        goal = ee_positions(model, q)
        try:
            q_goal = inverse_kinematics(interior, goal, home)
        except UnreachableGoalError:
            continue
        out.append((goal, q_goal))
    return out


def unconstrained_suite(model=None, count=30, seed=2024) -> List[Scenario]:
    model = reference_model() if model is None else model
    return [Scenario(name=f"free-{k:02d}", start=None, goal=g, goal_joints=qg, seed=seed + k)
            for k, (g, qg) in enumerate(random_goals(model, count, seed))]


def constrained_suite(model=None, count=30, seed=2024) -> List[Scenario]:
    """Same goals as :func:`unconstrained_suite`; scenario ``k`` confines joint ``k mod n``
    to ``BAND`` radians around its start value."""
    model = reference_model() if model is None else model
    home = model.home_configuration
    out = []
    for k, (g, qg) in enumerate(random_goals(model, count, seed)):
        j = k % model.n_joints
        lo = max(model.joint_min[j], home[j] - BAND)
        hi = min(model.joint_max[j], home[j] + BAND)
        out.append(Scenario(name=f"band-{k:02d}-j{j}", start=None, goal=g, goal_joints=qg,
                            limit_overrides=((j, float(lo), float(hi)),), seed=seed + k))
    return out


def reach_scenario(seed=7) -> Scenario:
    return Scenario(name="reach", start=None, goal=np.array(REACH_GOAL), seed=seed)


def banded_reach_scenario(seed=7) -> Scenario:
    """The reach goal with the first joint confined to (-0.1, 0.1) rad."""
    return Scenario(name="banded-reach", start=None, goal=np.array(REACH_GOAL),
                    limit_overrides=((0, -BAND, BAND),), seed=seed)


def bundled(name: str) -> List[Scenario]:
    """Load a frozen suite shipped with the package: ``free30``, ``band30``, ``reach`` or ``banded-reach``."""
    files = {"free30": "suite_free30.json", "band30": "suite_band30.json",
             "reach": "scenario_reach.json", "banded-reach": "scenario_banded_reach.json"}
    text = resources.files("optadapt.data").joinpath(files[name]).read_text(encoding="utf-8")
    return load_suite(text)


def freeze_bundled(directory) -> None:
    """Regenerate the frozen suite files in ``directory``."""
    docs = {
        "suite_free30.json": suite_to_dict("free30", unconstrained_suite()),
        "suite_band30.json": suite_to_dict("band30", constrained_suite()),
        "scenario_reach.json": scenario_to_dict(reach_scenario()),
        "scenario_banded_reach.json": scenario_to_dict(banded_reach_scenario()),
    }
    for fname, doc in docs.items():
        with open(os.path.join(directory, fname), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
