"""Distributed MPC for multi-agent point-to-point transitions.

Agents modeled as double integrators coordinate through a consensus scheme
(local solves, averaging, multiplier updates) while pairwise collision
avoidance is enforced through dual polytope certificates against each agent's
cube footprint.
"""

from .consensus import ADMMConfig, ADMMResult, average, consensus_residual, dual_update, run_admm
from .copies import CopyVector
from .costs import (
    CostWeights,
    GoalSpec,
    augmented_lagrangian,
    global_cost,
    stage_cost,
    terminal_cost,
    trajectory_cost,
)
from .dynamics import (
    ContinuousModel,
    DiscreteModel,
    Trajectory,
    discretize,
    make_double_integrator,
    rollout,
    step,
)
from .geometry import (
    DistanceThresholds,
    DualCertificate,
    Polytope,
    agent_cube_polytope,
    contains,
    dist_oracle,
    hard_certificate_value,
    max_certified_distance,
    pairwise_constraint_residual,
    pen_oracle,
    sdf_oracle,
    soft_certificate_check,
)
from .harness import (
    AgentSpec,
    CompareReport,
    PlannerSettings,
    RunReport,
    Scenario,
    StepLog,
    SweepReport,
    collision_metrics,
    compare_modes,
    goal_reached,
    run_dmpc,
    sweep_delta,
)
from .local_solver import (
    LocalProblem,
    LocalSolution,
    Mode,
    SolverOptions,
    SolveStatus,
    WarmStart,
    kkt_residual,
    objective_gradient,
    objective_value_and_gradient,
    solve_local,
)
from .planner import PlannedPath, PlannerConfig, initial_guess_from_path, rrt_plan

__version__ = "0.1.0"
