"""Scenario configuration and its JSON form (matrices as row-major nested lists)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import LinSys
from .geometry import Polytope

DEFAULT_ALPHA = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class ControlPolicy:
    """Input applied while the landmark is in range.

    ``kind`` is ``"zero"`` or ``"bounded_random"``; the latter draws each input
    component uniformly from ``[-scale, scale]``.
    """

    kind: str = "zero"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "bounded_random"):
            raise ValueError(f"unknown control policy {self.kind!r}")
        if self.scale < 0:
            raise ValueError("policy scale must be nonnegative")

    def draw(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(m)
        return rng.uniform(-self.scale, self.scale, size=m)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale": self.scale}


def box_distance(P: Polytope, Q: Polytope) -> float:
    """Euclidean distance between two axis-aligned boxes."""
    (a0, a1), (b0, b1) = P.bounds, Q.bounds
    gap = np.maximum(0.0, np.maximum(b0 - a1, a0 - b1))
    return float(np.linalg.norm(gap))


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to run closed-loop localization trials.

    Attributes
    ----------
    sys : LinSys
    r : float
        Sensing radius.
    X0_box, M_box : Polytope
        Axis-aligned priors on the initial state and the landmark.
    alpha : float
        Coverage level of the partition used for recovery.
    seed : int
    max_steps : int
    trials : int
    arbitrary_control_policy : ControlPolicy
    grid_resolution : int
        Landmark grid points per axis.
    c_growth : float
        Exponent constant of the inverse-growth bound.
    """

    sys: LinSys
    r: float
    X0_box: Polytope
    M_box: Polytope
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    max_steps: int = 500
    trials: int = 40
    arbitrary_control_policy: ControlPolicy = field(default_factory=ControlPolicy)
    grid_resolution: int = 201
    c_growth: float = 0.5

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.X0_box.n != self.sys.n or self.M_box.n != self.sys.n:
            raise ValueError("box dimensions must match the system")
        if box_distance(self.X0_box, self.M_box) > self.r:
            raise ValueError("no initial state can see the landmark: X0_box and M_box are more than r apart")
        if not 0.0 < self.c_growth < 1.0:
            raise ValueError("c_growth must lie in (0, 1)")
        if self.max_steps < 1 or self.trials < 1:
            raise ValueError("max_steps and trials must be positive")

    @property
    def n(self) -> int:
        return self.sys.n

    def to_dict(self) -> dict:
        def box(P):
            lo, hi = P.bounds
            return {"lo": lo.tolist(), "hi": hi.tolist()}

        return {
            "sys": self.sys.to_dict(),
            "r": self.r,
            "X0_box": box(self.X0_box),
            "M_box": box(self.M_box),
            "alpha": self.alpha,
            "seed": self.seed,
            "max_steps": self.max_steps,
            "trials": self.trials,
            "arbitrary_control_policy": self.arbitrary_control_policy.to_dict(),
            "grid_resolution": self.grid_resolution,
            "c_growth": self.c_growth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        def box(b):
            if "lo" in b:
                return Polytope.from_bounds(b["lo"], b["hi"])
            return Polytope.box(b["center"], b["side"])

        pol = d.get("arbitrary_control_policy", {"kind": "zero"})
        if isinstance(pol, str):
            pol = {"kind": pol}
        return cls(
            sys=LinSys.from_dict(d["sys"]),
            r=float(d["r"]),
            X0_box=box(d["X0_box"]),
            M_box=box(d["M_box"]),
            alpha=float(d.get("alpha", DEFAULT_ALPHA)),
            seed=int(d.get("seed", 0)),
            max_steps=int(d.get("max_steps", 500)),
            trials=int(d.get("trials", 40)),
            arbitrary_control_policy=ControlPolicy(pol.get("kind", "zero"), float(pol.get("scale", 0.0))),
            grid_resolution=int(d.get("grid_resolution", 201)),
            c_growth=float(d.get("c_growth", 0.5)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def reference_template(setup: int = 1, **overrides) -> dict:
    """Box priors and radius of the two reference setups, without a system.

    Setup 1 and setup 2 share the geometry (r = 2, X0 box of side 3.5 centred
    at (0.2, -0.2), landmark box of side 1 centred at (0.5, 0.5)); they differ
    in the instability level passed to the system generator (1.014 and 1.01).
    """
    if setup not in (1, 2):
        raise ValueError("setup must be 1 or 2")
    t = {
        "r": 2.0,
        "X0_box": {"center": [0.2, -0.2], "side": 3.5},
        "M_box": {"center": [0.5, 0.5], "side": 1.0},
        "max_steps": 500,
        "trials": 40,
        "grid_resolution": 201,
        "lambda_target": 1.014 if setup == 1 else 1.01,
    }
    t.update(overrides)
    return t


__all__ = ["ControlPolicy", "DEFAULT_ALPHA", "ScenarioConfig", "box_distance", "reference_template"]
