"""Quadratic tracking costs and the consensus augmented-Lagrangian objective."""

from dataclasses import dataclass

import numpy as np

from .copies import CopyVector
from .dynamics import Trajectory

__all__ = [
    "CostWeights",
    "GoalSpec",
    "stage_cost",
    "terminal_cost",
    "trajectory_cost",
    "global_cost",
    "augmented_lagrangian",
]


@dataclass(frozen=True)
class CostWeights:
    """Stage weight Q (PSD), input weight R (PD), terminal weight Q_f (PSD),
    and the slack penalty kappa used in soft mode."""

    Q: np.ndarray
    R: np.ndarray
    Q_f: np.ndarray
    kappa: float = 100.0

    def __post_init__(self):
        for name in ("Q", "R", "Q_f"):
            M = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, M)
            if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
                raise ValueError(f"{name} must be square and symmetric")
        if np.linalg.eigvalsh(self.Q).min() < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(self.Q_f).min() < -1e-12:
            raise ValueError("Q_f must be positive semidefinite")
        if np.linalg.eigvalsh(self.R).min() <= 0:
            raise ValueError("R must be positive definite")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    @classmethod
    def from_scales(cls, n: int, q: float, r: float, qf: float, kappa: float = 100.0) -> "CostWeights":
        """Scalar-times-identity weights for an n-dimensional double integrator."""
        return cls(Q=q * np.eye(2 * n), R=r * np.eye(n), Q_f=qf * np.eye(2 * n), kappa=kappa)


@dataclass(frozen=True)
class GoalSpec:
    """Target state; by default a position to be reached at rest."""

    s_g: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s_g", np.asarray(self.s_g, dtype=float).ravel())

    @classmethod
    def from_position(cls, position: np.ndarray) -> "GoalSpec":
        position = np.asarray(position, dtype=float).ravel()
        return cls(s_g=np.concatenate([position, np.zeros_like(position)]))

    @property
    def position(self) -> np.ndarray:
        n = self.s_g.shape[0] // 2
        return self.s_g[:n]


def stage_cost(s: np.ndarray, u: np.ndarray, goal: GoalSpec, w: CostWeights) -> float:
    """(s - s_g)^T Q (s - s_g) + u^T R u."""
    s = np.asarray(s, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if s.shape != goal.s_g.shape or s.shape[0] != w.Q.shape[0]:
        raise ValueError("state dimension does not match goal/weights")
    if u.shape[0] != w.R.shape[0]:
        raise ValueError("input dimension does not match weights")
    e = s - goal.s_g
    return float(e @ w.Q @ e + u @ w.R @ u)


def terminal_cost(s: np.ndarray, goal: GoalSpec, w: CostWeights) -> float:
    """(s - s_g)^T Q_f (s - s_g)."""
    s = np.asarray(s, dtype=float).ravel()
    if s.shape != goal.s_g.shape or s.shape[0] != w.Q_f.shape[0]:
        raise ValueError("state dimension does not match goal/weights")
    e = s - goal.s_g
    return float(e @ w.Q_f @ e)


def trajectory_cost(traj: Trajectory, goal: GoalSpec, w: CostWeights, slacks=None) -> float:
    """Sum of stage costs plus terminal cost, plus kappa * sum(slacks) if given."""
    total = sum(
        stage_cost(traj.states[k], traj.inputs[k], goal, w) for k in range(traj.horizon)
    )
    total += terminal_cost(traj.states[-1], goal, w)
    if slacks is not None:
        slacks = np.asarray(slacks, dtype=float).ravel()
        if np.any(slacks < 0):
            raise ValueError("slacks must be nonnegative")
        total += w.kappa * float(slacks.sum())
    return float(total)


def global_cost(trajs, goals, w: CostWeights) -> float:
    """Sum of per-agent trajectory costs (the objective is separable)."""
    trajs = list(trajs)
    goals = list(goals)
    if len(trajs) != len(goals):
        raise ValueError(f"{len(trajs)} trajectories but {len(goals)} goals")
    return float(sum(trajectory_cost(t, g, w) for t, g in zip(trajs, goals)))


def augmented_lagrangian(
    v: CopyVector,
    v_bar: CopyVector,
    gamma: CopyVector,
    rho: float,
    goal: GoalSpec,
    w: CostWeights,
    own: int,
) -> float:
    """Consensus-augmented objective for one agent's copy vector.

    Only the agent's own block enters the tracking cost; every block enters the
    linear multiplier term gamma^T (v - v_bar) and the proximal penalty
    (rho/2) ||v - v_bar||^2.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    d_states = v.states - v_bar.states
    d_inputs = v.inputs - v_bar.inputs
    if gamma.states.shape != d_states.shape or gamma.inputs.shape != d_inputs.shape:
        raise ValueError("copy vector shapes do not match")
    own_cost = trajectory_cost(v.agent_trajectory(own), goal, w)
    linear = float((gamma.states * d_states).sum() + (gamma.inputs * d_inputs).sum())
    quad = 0.5 * rho * float((d_states**2).sum() + (d_inputs**2).sum())
    return own_cost + linear + quad
