"""Processor-sharing queues with soft deadlines.

Event-driven simulation of the GI/GI/1 processor-sharing queue whose
jobs carry deadlines, the invariant (lifted) measures the scaled state
collapses to in heavy traffic, reflected-Brownian limit objects, and a
harness that measures the collapse along a ladder of scaling parameters.
"""

from .distributions import (
    AssumptionCheck,
    AssumptionReport,
    Deterministic,
    EmpiricalJoint,
    Exponential,
    HyperExponential,
    JointDistribution,
    LinearJoint,
    PointMassZero,
    ProductJoint,
    ScalarDistribution,
    Uniform,
    check_assumptions,
    excess_lifetime_survival,
    joint_from_spec,
    joint_to_spec,
    quadrant_survival,
    scalar_from_spec,
    scalar_to_spec,
)
from .engine import (
    JobRecord,
    PathLog,
    ScenarioConfig,
    SimOutput,
    busy_rate_check,
    run,
    verify_dynamic_equation,
)
from .errors import ConfigError, SimulationError
from .harness import (
    CollapseReport,
    SweepConfig,
    SweepRow,
    build_scenario,
    collapse_error,
    lateness_fraction,
    run_sweep,
    sojourn_snapshot_experiment,
)
from .manifold import (
    HeavyTrafficParams,
    InvariantMeasure,
    ht_params,
    lead_profile_product,
    lift,
    linear_deadline_profile,
    sojourn_limit_cdf,
    time_in_queue_profile,
)
from .measures import (
    LeadProfile,
    PointMeasure,
    QuadrantFunction,
    QuadrantGrid,
    default_grid,
    discretize_quadrant_function,
    mass_moment_chi,
    project_lead,
    quadrant_distance,
    quadrant_mass,
    scale_diffusion,
    scale_fluid,
)
from .naive import step_simulate
from .rbm import RBMPath, RBMSpec, deadline_quantile, simulate, stationary_cdf

__version__ = "0.1.0"
