"""Closed-loop receding-horizon driver and the comparison experiments.

Each step plans per-agent initial guesses, runs the consensus coordinator,
applies every agent's first consensus input through the true discrete
dynamics, and logs safety and convergence metrics. The true plant is the
nominal model (no mismatch, no noise).
"""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .consensus import ADMMConfig, run_admm
from .copies import CopyVector
from .costs import CostWeights, GoalSpec, stage_cost
from .dynamics import DiscreteModel, discretize, make_double_integrator, step
from .geometry import agent_cube_polytope
from .local_solver import LocalProblem, Mode, SolveStatus, WarmStart
from .planner import PlannerConfig, initial_guess_from_path, rrt_plan

__all__ = [
    "AgentSpec",
    "PlannerSettings",
    "Scenario",
    "StepLog",
    "RunReport",
    "SweepReport",
    "CompareReport",
    "collision_metrics",
    "goal_reached",
    "run_dmpc",
    "sweep_delta",
    "compare_modes",
]

log = logging.getLogger(__name__)

RRT_EVERY_STEP = "every_step"
RRT_ON_FAILURE = "on_failure"
RRT_OFF = "off"


@dataclass(frozen=True)
class AgentSpec:
    """Start and goal states (positions padded with zero velocity if needed)."""

    start: np.ndarray
    goal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float).ravel())
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float).ravel())


@dataclass(frozen=True)
class PlannerSettings:
    step: float = 0.2
    goal_bias: float = 0.1
    max_iters: int = 800
    goal_tolerance: float = 0.1
    policy: str = RRT_EVERY_STEP

    def __post_init__(self):
        if self.policy not in (RRT_EVERY_STEP, RRT_ON_FAILURE, RRT_OFF):
            raise ValueError(f"unknown planner policy {self.policy!r}")


@dataclass(frozen=True)
class Scenario:
    """Complete description of one closed-loop experiment."""

    name: str
    dim: int
    dt: float
    horizon: int
    delta: float
    mode: Mode
    agents: tuple
    q: float = 0.1
    r: float = 1.0
    qf: float = 1.0
    kappa: float = 100.0
    admm: ADMMConfig = field(default_factory=ADMMConfig)
    planner: PlannerSettings = field(default_factory=PlannerSettings)
    max_steps: int = 300
    goal_tol_pos: float = 0.05
    goal_tol_vel: float = 0.05
    seed: int = 0
    workspace: tuple | None = None
    enforce_workspace: bool = False
    input_bound: float | None = None
    d_min: float = 0.0
    p_max: float = 0.01
    soft_fallback: bool = True
    plan_violation_tol: float = 1e-3

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.dt <= 0 or self.horizon < 1 or self.max_steps < 1:
            raise ValueError("dt, horizon, and max_steps must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        agents = []
        for idx, a in enumerate(self.agents):
            start, goal = _pad_state(a.start, self.dim), _pad_state(a.goal, self.dim)
            agents.append(AgentSpec(start=start, goal=goal))
        object.__setattr__(self, "agents", tuple(agents))
        if not agents:
            raise ValueError("scenario needs at least one agent")
        positions = np.array([a.start[: self.dim] for a in agents])
        for i in range(len(agents)):
            for j in range(i + 1, len(agents)):
                gap = np.abs(positions[i] - positions[j]).max()
                if gap <= self.delta:
                    raise ValueError(
                        f"agents {i} and {j} start {gap:.3f} apart (inf-norm); "
                        f"must exceed delta={self.delta}"
                    )
        if self.workspace is not None:
            lo = np.asarray(self.workspace[0], dtype=float).ravel()
            hi = np.asarray(self.workspace[1], dtype=float).ravel()
            if lo.shape != (self.dim,) or hi.shape != (self.dim,) or np.any(lo >= hi):
                raise ValueError("workspace must be (lo, hi) with lo < hi, length dim")
            object.__setattr__(self, "workspace", (lo, hi))

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def weights(self) -> CostWeights:
        return CostWeights.from_scales(self.dim, self.q, self.r, self.qf, self.kappa)

    def goals(self) -> list:
        return [GoalSpec(s_g=a.goal) for a in self.agents]

    def workspace_bounds(self) -> tuple:
        if self.workspace is not None:
            return self.workspace
        pts = np.vstack(
            [a.start[: self.dim] for a in self.agents] + [a.goal[: self.dim] for a in self.agents]
        )
        margin = max(1.0, 3.0 * self.delta)
        return pts.min(axis=0) - margin, pts.max(axis=0) + margin


def _pad_state(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape == (dim,):
        return np.concatenate([x, np.zeros(dim)])
    if x.shape == (2 * dim,):
        return x
    raise ValueError(f"agent state must have length {dim} or {2 * dim}, got {x.shape[0]}")


@dataclass(frozen=True)
class StepLog:
    step: int
    states: np.ndarray
    applied_inputs: np.ndarray
    own_first_inputs: np.ndarray
    rounds: int
    residual: float
    residual_history: tuple
    min_inf_dist: float
    statuses: tuple
    events: tuple
    fallback_used: bool
    max_alpha: float
    wall_time: float


@dataclass(frozen=True)
class RunReport:
    scenario: Scenario
    success: bool
    reason: str
    steps: int
    cost_no_slack: float
    cost_with_slack: float
    min_pairwise_distance: float
    initial_min_distance: float
    mean_admm_rounds: float
    infeasibility_events: int
    max_alpha: float
    total_solve_time: float
    mean_step_time: float
    final_goal_errors: tuple
    step_logs: tuple


@dataclass(frozen=True)
class SweepReport:
    entries: tuple  # of (delta, RunReport | None, error message | None)


@dataclass(frozen=True)
class CompareReport:
    hard: RunReport
    soft: RunReport


def collision_metrics(states: np.ndarray, delta: float | None = None) -> tuple[float, list]:
    """Minimum pairwise inf-norm position distance and the pairs below delta."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    M = states.shape[0]
    if M < 2:
        return np.inf, []
    n = states.shape[1] // 2
    positions = states[:, :n]
    min_dist = np.inf
    violating = []
    for i in range(M):
        for j in range(i + 1, M):
            d = float(np.abs(positions[i] - positions[j]).max())
            min_dist = min(min_dist, d)
            if delta is not None and d < delta:
                violating.append((i, j))
    return min_dist, violating


def goal_reached(states: np.ndarray, goals, tol_pos: float, tol_vel: float) -> bool:
    """True iff every agent is within tol_pos of its goal position at speed <= tol_vel."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[1] // 2
    for s, goal in zip(states, goals):
        if np.linalg.norm(s[:n] - goal.s_g[:n]) > tol_pos:
            return False
        if np.linalg.norm(s[n:]) > tol_vel:
            return False
    return True


def _child_seed(run_seed: int, agent: int, step_index: int) -> int:
    return int(np.random.SeedSequence([run_seed, agent, step_index]).generate_state(1)[0])


def _shift_certs(arr: np.ndarray) -> np.ndarray:
    return np.concatenate([arr[:, 1:], arr[:, -1:]], axis=1)


def _plan_min_distance(consensus: CopyVector, n: int) -> float:
    """Min pairwise inf-norm distance over the consensus plan, steps 1..N."""
    pos = consensus.states[:, 1:, :n]
    M = pos.shape[0]
    worst = np.inf
    for i in range(M):
        for j in range(i + 1, M):
            worst = min(worst, float(np.abs(pos[i] - pos[j]).max(axis=-1).min()))
    return worst


def run_dmpc(sc: Scenario) -> RunReport:
    """Run the closed loop until all goals are reached or the step cap hits."""
    model = discretize(make_double_integrator(sc.dim), sc.dt)
    weights = sc.weights()
    goals = sc.goals()
    M, N, n = sc.n_agents, sc.horizon, sc.dim
    lo, hi = sc.workspace_bounds()
    cube = agent_cube_polytope(sc.delta, n)
    thresholds = _thresholds(sc)

    states = np.array([a.start for a in sc.agents])
    initial_min = collision_metrics(states)[0]
    min_dist = initial_min
    prev = None  # (solutions, consensus, gammas, converged)
    logs = []
    cost = 0.0
    slack_cost = 0.0
    events_total = 0
    max_alpha = 0.0
    success = False
    reason = "max_steps"

    for t in range(sc.max_steps):
        if goal_reached(states, goals, sc.goal_tol_pos, sc.goal_tol_vel):
            success = True
            reason = "goals_reached"
            break

        warms, v_bar0, gamma0 = _build_warm_starts(sc, model, states, goals, prev, t, lo, hi, cube)
        problems = [
            LocalProblem(
                agent_id=i,
                model=model,
                horizon=N,
                s0=states[i],
                goal=goals[i],
                weights=weights,
                delta=sc.delta,
                mode=sc.mode,
                n_agents=M,
                v_bar=v_bar0 if v_bar0 is not None else CopyVector.zeros(M, N, n),
                gamma=CopyVector.zeros(M, N, n),
                rho=sc.admm.rho,
                thresholds=thresholds,
                workspace=(lo, hi) if sc.enforce_workspace else None,
                input_bound=sc.input_bound,
            )
            for i in range(M)
        ]

        t0 = time.perf_counter()
        result = run_admm(problems, warms, sc.admm, v_bar0, gamma0)
        step_events = []
        fallback = False
        if sc.mode is Mode.HARD:
            if result.infeasible_round is not None:
                step_events.append("local_infeasible")
            if M > 1 and _plan_min_distance(result.consensus, n) < sc.delta - sc.plan_violation_tol:
                step_events.append("plan_violation")
            if step_events and sc.soft_fallback:
                soft_problems = [replace(p, mode=Mode.SOFT) for p in problems]
                result = run_admm(soft_problems, warms, sc.admm, v_bar0, gamma0)
                fallback = True
            elif "local_infeasible" in step_events:
                events_total += len(step_events)
                reason = "hard_infeasible"
                log.warning("step %d: unrecoverable hard-mode infeasibility", t)
                break
        wall = time.perf_counter() - t0

        applied = result.consensus.inputs[:, 0, :].copy()
        own_first = np.array([result.solutions[i].v_plus.inputs[i, 0] for i in range(M)])
        new_states = np.array([step(model, states[i], applied[i]) for i in range(M)])
        d_new, _ = collision_metrics(new_states)
        if sc.mode is Mode.HARD and not fallback and d_new < sc.delta - sc.plan_violation_tol:
            step_events.append("state_violation")

        step_alpha = max(
            (float(s.alpha.max()) for s in result.solutions if s.alpha.size), default=0.0
        )
        max_alpha = max(max_alpha, step_alpha)
        for i in range(M):
            cost += stage_cost(states[i], applied[i], goals[i], weights)
        slack_cost += weights.kappa * sum(
            float(s.alpha[:, 0].sum()) for s in result.solutions if s.alpha.size
        )
        events_total += len(step_events)
        min_dist = min(min_dist, d_new)

        logs.append(
            StepLog(
                step=t,
                states=new_states,
                applied_inputs=applied,
                own_first_inputs=own_first,
                rounds=result.rounds_used,
                residual=result.final_residual,
                residual_history=tuple(r.primal_residual for r in result.history),
                min_inf_dist=d_new,
                statuses=tuple(s.status.value for s in result.solutions),
                events=tuple(step_events),
                fallback_used=fallback,
                max_alpha=step_alpha,
                wall_time=wall,
            )
        )
        states = new_states
        prev = (result.solutions, result.consensus, result.gammas, result.converged)
        log.info(
            "step %d: rounds=%d residual=%.2e min_dist=%.3f", t, result.rounds_used,
            result.final_residual, d_new,
        )

    goal_errors = tuple(
        float(np.linalg.norm(states[i][:n] - goals[i].s_g[:n])) for i in range(M)
    )
    walls = [rec.wall_time for rec in logs]
    rounds = [rec.rounds for rec in logs]
    return RunReport(
        scenario=sc,
        success=success,
        reason=reason,
        steps=len(logs),
        cost_no_slack=cost,
        cost_with_slack=cost + slack_cost,
        min_pairwise_distance=min_dist,
        initial_min_distance=initial_min,
        mean_admm_rounds=float(np.mean(rounds)) if rounds else 0.0,
        infeasibility_events=events_total,
        max_alpha=max_alpha,
        total_solve_time=float(np.sum(walls)) if walls else 0.0,
        mean_step_time=float(np.mean(walls)) if walls else 0.0,
        final_goal_errors=goal_errors,
        step_logs=tuple(logs),
    )


def _thresholds(sc: Scenario):
    from .geometry import DistanceThresholds

    return DistanceThresholds(d_min=sc.d_min, p_max=sc.p_max)


def _build_warm_starts(sc, model, states, goals, prev, t, lo, hi, cube):
    """RRT and/or shifted-previous warm starts, plus shifted consensus state."""
    M, N, n = sc.n_agents, sc.horizon, sc.dim
    if prev is not None:
        sols_prev, v_bar_prev, gammas_prev, converged_prev = prev
        v_bar0 = v_bar_prev.shifted()
        gamma0 = [g.shifted() for g in gammas_prev]
    else:
        sols_prev, converged_prev = None, True
        v_bar0, gamma0 = None, None

    policy = sc.planner.policy
    run_rrt = policy == RRT_EVERY_STEP or (policy == RRT_ON_FAILURE and not converged_prev)
    warms = []
    for i in range(M):
        own_traj = None
        if run_rrt:
            obstacles = [cube.translate(states[j][:n]) for j in range(M) if j != i]
            start_pos = states[i][:n]
            if all(not ob.contains_batch(start_pos[None, :])[0] for ob in obstacles):
                cfg = PlannerConfig(
                    workspace_lo=lo,
                    workspace_hi=hi,
                    step=sc.planner.step,
                    goal_bias=sc.planner.goal_bias,
                    max_iters=sc.planner.max_iters,
                    goal_tolerance=sc.planner.goal_tolerance,
                    seed=_child_seed(sc.seed, i, t),
                )
                path = rrt_plan(start_pos, goals[i].s_g[:n], obstacles, cfg)
                guess = initial_guess_from_path(path, N, sc.dt, goals[i])
                own_traj = guess.own_trajectory
            else:
                log.debug("step %d agent %d: start inside an obstacle, skipping RRT", t, i)
        if sols_prev is not None:
            warms.append(
                WarmStart(
                    own_trajectory=own_traj,
                    full_copy=sols_prev[i].v_plus.shifted(),
                    lam=_shift_certs(sols_prev[i].lam),
                    alpha=_shift_certs(sols_prev[i].alpha) if sols_prev[i].alpha.size else None,
                )
            )
        else:
            warms.append(WarmStart(own_trajectory=own_traj))
    return warms, v_bar0, gamma0


def sweep_delta(sc: Scenario, deltas) -> SweepReport:
    """Re-run the scenario for each cube half-width with identical seeds."""
    entries = []
    for d in deltas:
        try:
            report = run_dmpc(replace(sc, delta=float(d)))
            entries.append((float(d), report, None))
        except Exception as exc:  # noqa: BLE001 - record and continue the sweep
            log.error("sweep delta=%s failed: %s", d, exc)
            entries.append((float(d), None, str(exc)))
    return SweepReport(entries=tuple(entries))


def compare_modes(sc: Scenario) -> CompareReport:
    """Run the scenario in hard and soft mode with identical seeds."""
    hard = run_dmpc(replace(sc, mode=Mode.HARD))
    soft = run_dmpc(replace(sc, mode=Mode.SOFT))
    return CompareReport(hard=hard, soft=soft)
