"""Sampling-based initial guesses: a seeded RRT over positions plus the
conversion of its first waypoints into a dynamically consistent warm start."""

from dataclasses import dataclass

import numpy as np

from .costs import GoalSpec
from .dynamics import Trajectory
from .local_solver import WarmStart

__all__ = ["PlannerConfig", "PlannedPath", "rrt_plan", "initial_guess_from_path"]


@dataclass(frozen=True)
class PlannerConfig:
    workspace_lo: np.ndarray
    workspace_hi: np.ndarray
    step: float = 0.2
    goal_bias: float = 0.1
    max_iters: int = 5000
    goal_tolerance: float = 0.1
    seed: int = 0

    def __post_init__(self):
        lo = np.asarray(self.workspace_lo, dtype=float).ravel()
        hi = np.asarray(self.workspace_hi, dtype=float).ravel()
        object.__setattr__(self, "workspace_lo", lo)
        object.__setattr__(self, "workspace_hi", hi)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("workspace bounds must satisfy lo < hi componentwise")
        if self.step <= 0:
            raise ValueError("step size must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal bias must lie in [0, 1]")


@dataclass(frozen=True)
class PlannedPath:
    """Ordered waypoints from start toward goal; consecutive spacing <= step."""

    waypoints: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "waypoints", np.atleast_2d(np.asarray(self.waypoints, dtype=float)))


def _clear(point: np.ndarray, obstacles) -> bool:
    return all(not ob.contains_batch(point[None, :])[0] for ob in obstacles)


def rrt_plan(start: np.ndarray, goal: np.ndarray, obstacles, cfg: PlannerConfig) -> PlannedPath:
    """Grow a rapidly exploring random tree from start toward goal.

    Every accepted waypoint and every segment midpoint is collision-free. On
    iteration exhaustion the best partial path (closest node to goal) is
    returned. Deterministic for a fixed seed.
    """
    start = np.asarray(start, dtype=float).ravel()
    goal = np.asarray(goal, dtype=float).ravel()
    if not _clear(start, obstacles):
        raise ValueError("planner start lies inside an obstacle")
    if np.linalg.norm(start - goal) <= cfg.goal_tolerance:
        return PlannedPath(waypoints=start[None, :])

    rng = np.random.default_rng(cfg.seed)
    dim = start.shape[0]
    nodes = np.empty((cfg.max_iters + 1, dim))
    nodes[0] = start
    parents = [-1]
    count = 1
    goal_idx = None

    for _ in range(cfg.max_iters):
        if rng.random() < cfg.goal_bias:
            sample = goal
        else:
            sample = rng.uniform(cfg.workspace_lo, cfg.workspace_hi)
        dists = np.linalg.norm(nodes[:count] - sample, axis=1)
        near = int(np.argmin(dists))
        gap = dists[near]
        if gap < 1e-12:
            continue
        new = nodes[near] + min(cfg.step, gap) / gap * (sample - nodes[near])
        mid = 0.5 * (nodes[near] + new)
        if not (_clear(new, obstacles) and _clear(mid, obstacles)):
            continue
        nodes[count] = new
        parents.append(near)
        count += 1
        if np.linalg.norm(new - goal) <= cfg.goal_tolerance:
            goal_idx = count - 1
            break

    if goal_idx is None:
        goal_idx = int(np.argmin(np.linalg.norm(nodes[:count] - goal, axis=1)))
    path = []
    idx = goal_idx
    while idx >= 0:
        path.append(nodes[idx])
        idx = parents[idx]
    return PlannedPath(waypoints=np.array(path[::-1]))


def initial_guess_from_path(path: PlannedPath, N: int, dt: float, goal: GoalSpec) -> WarmStart:
    """Turn the first N+1 waypoints into a warm start.

    Velocities come from finite differences of positions over dt (final
    velocity taken from the goal state), inputs from finite differences of
    velocities. Paths shorter than N+1 are padded with their last waypoint.
    Certificate warm starts are left to the solver's own initialization rule.
    """
    wp = path.waypoints
    if wp.shape[0] == 0:
        raise ValueError("path must contain at least one waypoint")
    dim = wp.shape[1]
    if wp.shape[0] < N + 1:
        pad = np.repeat(wp[-1:], N + 1 - wp.shape[0], axis=0)
        wp = np.vstack([wp, pad])
    else:
        wp = wp[: N + 1]

    vel = np.zeros((N + 1, dim))
    vel[:-1] = (wp[1:] - wp[:-1]) / dt
    vel[-1] = goal.s_g[dim:]
    states = np.hstack([wp, vel])
    inputs = (vel[1:] - vel[:-1]) / dt
    return WarmStart(own_trajectory=Trajectory(states=states, inputs=inputs))
