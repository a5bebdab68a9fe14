"""Active localization of unstable linear systems from one-bit landmark proximity measurements."""

from .config import ControlPolicy, ScenarioConfig, reference_template
from .dynamics import (
    GrowthBound,
    LinSys,
    controllability_index,
    fit_growth_bound,
    gramian,
    lambda_min,
    offsets,
    reach,
    step,
)
from .estimator import EstimatorState, estimate, initial_estimates, pair_ellipsoid, recovery_ball
from .experiment import random_feasible_system, run_experiment
from .geometry import Ball, Ellipsoid, EstimateSet, Polytope, cloud_diameter, jung_radius, min_enclosing_ball
from .localize import TrialTrace, active_localize, sense, theoretical_bound
from .recovery import (
    check_landmark_condition,
    check_radius_condition,
    check_recovery_condition,
    generalized_rcs,
    max_deviation,
    rcs,
)
from .svp import SVP, find_svp, max_alignment, vec_opt

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "ControlPolicy",
    "Ellipsoid",
    "EstimateSet",
    "EstimatorState",
    "GrowthBound",
    "LinSys",
    "Polytope",
    "SVP",
    "ScenarioConfig",
    "TrialTrace",
    "active_localize",
    "check_landmark_condition",
    "check_radius_condition",
    "check_recovery_condition",
    "cloud_diameter",
    "controllability_index",
    "estimate",
    "find_svp",
    "fit_growth_bound",
    "generalized_rcs",
    "gramian",
    "initial_estimates",
    "jung_radius",
    "lambda_min",
    "max_alignment",
    "max_deviation",
    "min_enclosing_ball",
    "offsets",
    "pair_ellipsoid",
    "rcs",
    "reach",
    "random_feasible_system",
    "recovery_ball",
    "reference_template",
    "run_experiment",
    "sense",
    "step",
    "theoretical_bound",
    "vec_opt",
]
