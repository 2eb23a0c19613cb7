"""Consensus coordinator: local solves, averaging, and multiplier updates.

One round = a parallel phase of independent local solves, a barrier, then a
deterministic sequential averaging and dual update. The coordinator owns the
copies and multipliers between rounds; local solves see immutable snapshots.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .copies import CopyVector
from .local_solver import (
    LocalProblem,
    LocalSolution,
    SolverOptions,
    SolveStatus,
    WarmStart,
    solve_local,
)

__all__ = [
    "ADMMConfig",
    "RoundRecord",
    "ADMMResult",
    "average",
    "dual_update",
    "consensus_residual",
    "run_admm",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ADMMConfig:
    rho: float = 1.0
    max_rounds: int = 20
    tolerance: float = 1e-3
    solver: SolverOptions = field(default_factory=SolverOptions)
    parallel: bool = False

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.tolerance <= 0:
            raise ValueError("consensus tolerance must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    per_agent_residual: tuple
    primal_residual: float
    objectives: tuple
    statuses: tuple


@dataclass(frozen=True)
class ADMMResult:
    consensus: CopyVector
    solutions: list
    gammas: list
    rounds_used: int
    history: list
    converged: bool
    infeasible_round: int | None = None

    @property
    def final_residual(self) -> float:
        return self.history[-1].primal_residual


def average(copies) -> CopyVector:
    """Blockwise arithmetic mean, accumulated in ascending agent order."""
    copies = list(copies)
    if not copies:
        raise ValueError("need at least one copy vector")
    states = copies[0].states.copy()
    inputs = copies[0].inputs.copy()
    for cv in copies[1:]:
        if cv.states.shape != states.shape or cv.inputs.shape != inputs.shape:
            raise ValueError("copy vector shapes do not match")
        states += cv.states
        inputs += cv.inputs
    m = float(len(copies))
    return CopyVector(states=states / m, inputs=inputs / m)


def dual_update(gamma: CopyVector, v_plus: CopyVector, v_bar_plus: CopyVector, rho: float) -> CopyVector:
    """gamma + rho * (v - v_bar), elementwise."""
    return gamma + (v_plus - v_bar_plus).scale(rho)


def consensus_residual(copies, v_bar: CopyVector) -> tuple[float, list]:
    """Max and per-agent values of ||v^i - v_bar||_2."""
    per_agent = [(cv - v_bar).norm() for cv in copies]
    return max(per_agent), per_agent


def run_admm(
    problems: list,
    warm_starts: list | None = None,
    cfg: ADMMConfig | None = None,
    v_bar0: CopyVector | None = None,
    gamma0: list | None = None,
) -> ADMMResult:
    """Iterate local solves, averaging, and dual updates until the primal
    consensus residual drops below tolerance or the round cap is reached.

    ``v_bar0`` and ``gamma0`` default to zero (cold start); a receding-horizon
    caller passes shifted values from the previous step instead.
    """
    cfg = cfg or ADMMConfig()
    M = len(problems)
    if M < 1:
        raise ValueError("need at least one agent")
    base = problems[0]
    for p in problems:
        if p.horizon != base.horizon or p.model.n != base.model.n or p.n_agents != M:
            raise ValueError("all agents must share horizon, dimension, and count")

    N, n = base.horizon, base.model.n
    v_bar = v_bar0 if v_bar0 is not None else CopyVector.zeros(M, N, n)
    gammas = list(gamma0) if gamma0 is not None else [CopyVector.zeros(M, N, n) for _ in range(M)]
    warms = list(warm_starts) if warm_starts is not None else [None] * M

    history: list = []
    solutions: list = []
    converged = False
    infeasible_round = None
    rounds = 0

    for rnd in range(1, cfg.max_rounds + 1):
        rounds = rnd
        round_problems = [
            replace(p, v_bar=v_bar, gamma=gammas[i], rho=cfg.rho) for i, p in enumerate(problems)
        ]

        def _solve(i: int) -> LocalSolution:
            return solve_local(round_problems[i], warms[i], cfg.solver)

        if cfg.parallel and M > 1:
            with ThreadPoolExecutor(max_workers=M) as pool:
                solutions = list(pool.map(_solve, range(M)))
        else:
            solutions = [_solve(i) for i in range(M)]

        copies = [s.v_plus for s in solutions]
        v_bar = average(copies)
        primal, per_agent = consensus_residual(copies, v_bar)
        gammas = [dual_update(gammas[i], copies[i], v_bar, cfg.rho) for i in range(M)]
        warms = [
            WarmStart(full_copy=s.v_plus, lam=s.lam, alpha=s.alpha if s.alpha.size else None)
            for s in solutions
        ]
        history.append(
            RoundRecord(
                round_index=rnd,
                per_agent_residual=tuple(per_agent),
                primal_residual=primal,
                objectives=tuple(s.objective for s in solutions),
                statuses=tuple(s.status for s in solutions),
            )
        )
        log.debug("round %d: primal residual %.3e", rnd, primal)

        if any(s.status is SolveStatus.INFEASIBLE for s in solutions):
            infeasible_round = rnd
            break
        if primal <= cfg.tolerance:
            converged = True
            break

    return ADMMResult(
        consensus=v_bar,
        solutions=solutions,
        gammas=gammas,
        rounds_used=rounds,
        history=history,
        converged=converged,
        infeasible_round=infeasible_round,
    )
