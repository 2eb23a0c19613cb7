"""One agent's nonconvex finite-horizon problem inside the consensus loop.

The decision variables stack the agent's own states and inputs over the
horizon, its copies of every neighbor's positions, and the separation
certificates (multipliers ``lam`` plus, in soft mode, slacks ``alpha``).
Constraints are the agent's own discrete dynamics and, per neighbor and step,
the certified-separation inequality together with the unit-norm condition on
``G^T lam``.

Constraint handling: an augmented-Lagrangian outer loop (equalities and
inequalities with multiplier estimates and a growing penalty) around a bounded
quasi-Newton inner minimization (L-BFGS-B), which enforces ``lam >= 0``,
``alpha >= 0`` and any box bounds by projection. The nonconvex norm equality
is split into two penalized inequalities.
"""

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import Bounds, minimize

from .copies import CopyVector
from .costs import CostWeights, GoalSpec, augmented_lagrangian
from .dynamics import DiscreteModel, Trajectory, rollout
from .geometry import DistanceThresholds, DualCertificate

__all__ = [
    "Mode",
    "SolveStatus",
    "SolverOptions",
    "LocalProblem",
    "WarmStart",
    "ALMultipliers",
    "LocalSolution",
    "face_aligned_lambda",
    "solve_local",
    "kkt_residual",
    "objective_gradient",
    "objective_value_and_gradient",
]

_NORM_GUARD = 1e-12
_MULTIPLIER_CAP = 1e10


class Mode(enum.Enum):
    HARD = "hard"
    SOFT = "soft"


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverOptions:
    max_outer_iters: int = 12
    max_inner_iters: int = 250
    constraint_tolerance: float = 1e-6
    stationarity_tolerance: float = 1e-4
    penalty_initial: float = 10.0
    penalty_growth: float = 10.0
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.constraint_tolerance <= 0 or self.stationarity_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.penalty_initial <= 0 or self.fd_step <= 0:
            raise ValueError("penalty and step parameters must be positive")
        if self.penalty_growth <= 1:
            raise ValueError("penalty growth factor must exceed 1")


@dataclass(frozen=True)
class LocalProblem:
    """Immutable description of one agent's horizon problem for one round."""

    agent_id: int
    model: DiscreteModel
    horizon: int
    s0: np.ndarray
    goal: GoalSpec
    weights: CostWeights
    delta: float
    mode: Mode
    n_agents: int
    v_bar: CopyVector
    gamma: CopyVector
    rho: float
    thresholds: DistanceThresholds = field(default_factory=DistanceThresholds)
    workspace: tuple | None = None
    input_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "s0", np.asarray(self.s0, dtype=float).ravel())
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.delta <= 0:
            raise ValueError("cube half-width must be positive")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if not np.isfinite(self.s0).all() or self.s0.shape != (self.model.state_dim,):
            raise ValueError("initial state must be finite with shape (2n,)")
        for cv in (self.v_bar, self.gamma):
            if cv.n_agents != self.n_agents or cv.horizon != self.horizon or cv.n != self.model.n:
                raise ValueError("consensus vectors do not match the problem shape")
        if not 0 <= self.agent_id < self.n_agents:
            raise ValueError("agent_id out of range")

    @property
    def neighbors(self) -> tuple:
        return tuple(j for j in range(self.n_agents) if j != self.agent_id)


@dataclass(frozen=True)
class WarmStart:
    """Initial guess: an own-block trajectory and/or full copies, plus certificates."""

    own_trajectory: Trajectory | None = None
    full_copy: CopyVector | None = None
    lam: np.ndarray | None = None
    alpha: np.ndarray | None = None


@dataclass(frozen=True)
class ALMultipliers:
    """Constraint multiplier estimates produced by the outer loop."""

    mu: float
    nu_eq: np.ndarray      # (N, 2n) dynamics equalities
    nu_cert: np.ndarray    # (n_nb, N) separation inequalities
    nu_lo: np.ndarray      # (n_nb, N) 1 - ||G^T lam|| >= 0
    nu_hi: np.ndarray      # (n_nb, N) ||G^T lam|| - 1 >= 0


@dataclass(frozen=True)
class LocalSolution:
    v_plus: CopyVector
    lam: np.ndarray        # (n_nb, N, 2n)
    alpha: np.ndarray      # (n_nb, N); all zero in hard mode
    status: SolveStatus
    feasibility: float
    stationarity: float
    objective: float
    multipliers: ALMultipliers

    def certificate(self, problem: LocalProblem, j: int, k: int) -> DualCertificate:
        """Certificate for neighbor j at horizon step k (1-based, k in 1..N)."""
        jj = problem.neighbors.index(j)
        return DualCertificate(lam=self.lam[jj, k - 1], alpha=float(self.alpha[jj, k - 1]))


class _Layout:
    """Index bookkeeping for the stacked inner decision vector."""

    def __init__(self, problem: LocalProblem):
        self.N = problem.horizon
        self.n = problem.model.n
        self.m = problem.model.state_dim
        self.l = 2 * self.n
        self.neighbors = problem.neighbors
        self.n_nb = len(self.neighbors)
        self.soft = problem.mode is Mode.SOFT
        N, n, m, l, n_nb = self.N, self.n, self.m, self.l, self.n_nb
        self.i_states = slice(0, N * m)
        self.i_inputs = slice(N * m, N * m + N * n)
        off = N * m + N * n
        self.i_nbpos = slice(off, off + n_nb * N * n)
        off += n_nb * N * n
        self.i_lam = slice(off, off + n_nb * N * l)
        off += n_nb * N * l
        self.i_alpha = slice(off, off + (n_nb * N if self.soft else 0))
        self.size = off + (n_nb * N if self.soft else 0)

    def views(self, z: np.ndarray):
        N, n, m, l, n_nb = self.N, self.n, self.m, self.l, self.n_nb
        S = z[self.i_states].reshape(N, m)
        U = z[self.i_inputs].reshape(N, n)
        P = z[self.i_nbpos].reshape(n_nb, N, n)
        lam = z[self.i_lam].reshape(n_nb, N, l)
        alpha = z[self.i_alpha].reshape(n_nb, N) if self.soft else np.zeros((n_nb, N))
        return S, U, P, lam, alpha


def face_aligned_lambda(rel: np.ndarray) -> np.ndarray:
    """One-hot multiplier on the cube face whose outward normal best aligns
    with the relative position; already satisfies ``||G^T lam||_2 = 1``."""
    rel = np.asarray(rel, dtype=float)
    scores = np.concatenate([rel, -rel], axis=-1)
    idx = np.argmax(scores, axis=-1)
    lam = np.zeros(scores.shape)
    np.put_along_axis(lam, np.expand_dims(idx, -1), 1.0, axis=-1)
    return lam


def _prox_copy(problem: LocalProblem) -> CopyVector:
    """Unconstrained optimum of the consensus terms: v_bar - gamma / rho."""
    if problem.rho > 0:
        return problem.v_bar - problem.gamma.scale(1.0 / problem.rho)
    return problem.v_bar.copy()


def _zeros_multipliers(layout: _Layout, mu: float) -> ALMultipliers:
    return ALMultipliers(
        mu=mu,
        nu_eq=np.zeros((layout.N, layout.m)),
        nu_cert=np.zeros((layout.n_nb, layout.N)),
        nu_lo=np.zeros((layout.n_nb, layout.N)),
        nu_hi=np.zeros((layout.n_nb, layout.N)),
    )


def _build_bounds(problem: LocalProblem, layout: _Layout) -> Bounds:
    lb = np.full(layout.size, -np.inf)
    ub = np.full(layout.size, np.inf)
    if problem.workspace is not None:
        lo, hi = problem.workspace
        S_lb = lb[layout.i_states].reshape(layout.N, layout.m)
        S_ub = ub[layout.i_states].reshape(layout.N, layout.m)
        S_lb[:, : layout.n] = np.asarray(lo, dtype=float)
        S_ub[:, : layout.n] = np.asarray(hi, dtype=float)
    if problem.input_bound is not None:
        lb[layout.i_inputs] = -float(problem.input_bound)
        ub[layout.i_inputs] = float(problem.input_bound)
    lb[layout.i_lam] = 0.0
    if layout.soft:
        lb[layout.i_alpha] = 0.0
    return Bounds(lb, ub)


def _start_point(problem: LocalProblem, warm: WarmStart | None, layout: _Layout) -> np.ndarray:
    i = problem.agent_id
    prox = _prox_copy(problem)
    traj = None
    if warm is not None and warm.own_trajectory is not None:
        traj = warm.own_trajectory
    elif warm is not None and warm.full_copy is not None:
        traj = warm.full_copy.agent_trajectory(i)
    if traj is None or traj.horizon != layout.N:
        traj = rollout(problem.model, problem.s0, np.zeros((layout.N, layout.n)))

    z = np.zeros(layout.size)
    S, U, P, lam, alpha = layout.views(z)
    S[:] = traj.states[1:]
    U[:] = traj.inputs
    for jj, j in enumerate(layout.neighbors):
        if warm is not None and warm.full_copy is not None:
            P[jj] = warm.full_copy.states[j, 1:, : layout.n]
        else:
            P[jj] = prox.states[j, 1:, : layout.n]

    if warm is not None and warm.lam is not None and warm.lam.shape == lam.shape:
        lam[:] = np.clip(warm.lam, 0.0, None)
    else:
        rel = S[None, :, : layout.n] - P
        lam[:] = face_aligned_lambda(rel)
    if layout.soft:
        if warm is not None and warm.alpha is not None and warm.alpha.shape == alpha.shape:
            a0 = np.clip(warm.alpha, 0.0, None)
        else:
            rel = S[None, :, : layout.n] - P
            gap = np.concatenate([rel, -rel], axis=-1) - problem.delta
            a0 = np.clip(-(gap * lam).sum(axis=-1), 0.0, None)
        z[layout.i_alpha] = a0.ravel()
    return z


def _constraints(problem: LocalProblem, layout: _Layout, z: np.ndarray):
    """Dynamics equality residuals and separation/norm inequality values."""
    S, U, P, lam, alpha = layout.views(z)
    model = problem.model
    states_full = np.vstack([problem.s0[None, :], S])
    h = states_full[1:] - states_full[:-1] @ model.A_k.T - U @ model.B_k.T

    rel = S[None, :, : layout.n] - P            # (n_nb, N, n)
    gap = np.concatenate([rel, -rel], axis=-1) - problem.delta
    if layout.soft:
        c_cert = (gap * lam).sum(axis=-1) + alpha
    else:
        c_cert = (gap * lam).sum(axis=-1) - problem.thresholds.d_min
    w = lam[..., : layout.n] - lam[..., layout.n:]  # G^T lam
    nrm = np.linalg.norm(w, axis=-1)
    return h, c_cert, 1.0 - nrm, nrm - 1.0, (rel, gap, w, nrm)


def _feasibility(h, c_cert, c_lo, c_hi) -> float:
    worst = float(np.abs(h).max(initial=0.0))
    for c in (c_cert, c_lo, c_hi):
        if c.size:
            worst = max(worst, float(np.clip(-c, 0.0, None).max()))
    return worst


def objective_value_and_gradient(
    problem: LocalProblem,
    z: np.ndarray,
    penalty: ALMultipliers | None = None,
) -> tuple[float, np.ndarray]:
    """Consensus objective (cost + multiplier + proximal terms, plus slack
    penalties in soft mode) and its gradient; with ``penalty`` given, the
    augmented-Lagrangian constraint terms are included as well.

    With ``penalty.mu == 0`` the constraint terms reduce to the plain
    Lagrangian, which is what the KKT stationarity check needs.
    """
    layout = _Layout(problem)
    z = np.asarray(z, dtype=float)
    if z.shape != (layout.size,):
        raise ValueError(f"point must have shape ({layout.size},), got {z.shape}")
    S, U, P, lam, alpha = layout.views(z)
    i = problem.agent_id
    w = problem.weights
    n = layout.n

    grad = np.zeros(layout.size)
    gS = grad[layout.i_states].reshape(layout.N, layout.m)
    gU = grad[layout.i_inputs].reshape(layout.N, layout.n)
    gP = grad[layout.i_nbpos].reshape(layout.n_nb, layout.N, layout.n)
    gL = grad[layout.i_lam].reshape(layout.n_nb, layout.N, layout.l)

    # Tracking cost on the own block (stage terms k=0..N-1, terminal at N).
    states_full = np.vstack([problem.s0[None, :], S])
    E = states_full - problem.goal.s_g
    val = float(np.einsum("ki,ij,kj->", E[:-1], w.Q, E[:-1]))
    val += float(np.einsum("ki,ij,kj->", U, w.R, U))
    val += float(E[-1] @ w.Q_f @ E[-1])
    gS[:-1] += 2.0 * E[1:-1] @ w.Q
    gS[-1] += 2.0 * w.Q_f @ E[-1]
    gU += 2.0 * U @ w.R

    # Consensus terms over the optimized coordinates.
    rho = problem.rho
    dS = S - problem.v_bar.states[i, 1:]
    gamS = problem.gamma.states[i, 1:]
    val += float((gamS * dS).sum() + 0.5 * rho * (dS**2).sum())
    gS += gamS + rho * dS
    dU = U - problem.v_bar.inputs[i]
    gamU = problem.gamma.inputs[i]
    val += float((gamU * dU).sum() + 0.5 * rho * (dU**2).sum())
    gU += gamU + rho * dU
    for jj, j in enumerate(layout.neighbors):
        dP = P[jj] - problem.v_bar.states[j, 1:, :n]
        gamP = problem.gamma.states[j, 1:, :n]
        val += float((gamP * dP).sum() + 0.5 * rho * (dP**2).sum())
        gP[jj] += gamP + rho * dP

    if layout.soft:
        val += w.kappa * float(alpha.sum())
        grad[layout.i_alpha] += w.kappa

    if penalty is None:
        return val, grad

    h, c_cert, c_lo, c_hi, (rel, gap, wvec, nrm) = _constraints(problem, layout, z)
    mu = penalty.mu
    if mu > 0:
        val += float((penalty.nu_eq * h).sum() + 0.5 * mu * (h**2).sum())
        for c, nu in ((c_cert, penalty.nu_cert), (c_lo, penalty.nu_lo), (c_hi, penalty.nu_hi)):
            shifted = np.clip(nu - mu * c, 0.0, None)
            val += float(((shifted**2) - nu**2).sum()) / (2.0 * mu)
    else:
        val += float((penalty.nu_eq * h).sum())
        val -= float(
            (penalty.nu_cert * c_cert).sum()
            + (penalty.nu_lo * c_lo).sum()
            + (penalty.nu_hi * c_hi).sum()
        )

    # Equality contribution: h_k = s_{k+1} - A_k s_k - B_k u_k.
    w_eq = penalty.nu_eq + mu * h
    gS += w_eq
    gS[:-1] -= w_eq[1:] @ problem.model.A_k
    gU -= w_eq @ problem.model.B_k

    if layout.n_nb:
        coef_cert = -np.clip(penalty.nu_cert - mu * c_cert, 0.0, None)
        coef_lo = -np.clip(penalty.nu_lo - mu * c_lo, 0.0, None)
        coef_hi = -np.clip(penalty.nu_hi - mu * c_hi, 0.0, None)
        gS[:, :n] += np.einsum("jk,jkd->kd", coef_cert, wvec)
        gP -= coef_cert[..., None] * wvec
        gL += coef_cert[..., None] * gap
        if layout.soft:
            gA = grad[layout.i_alpha].reshape(layout.n_nb, layout.N)
            gA += coef_cert
        safe = np.where(nrm > _NORM_GUARD, nrm, 1.0)
        direction = wvec / safe[..., None]
        direction[nrm <= _NORM_GUARD] = 0.0
        direction[nrm <= _NORM_GUARD, 0] = 1.0
        d_full = np.concatenate([direction, -direction], axis=-1)
        gL += (coef_hi - coef_lo)[..., None] * d_full
    return val, grad


def objective_gradient(
    problem: LocalProblem, z: np.ndarray, penalty: ALMultipliers | None = None
) -> np.ndarray:
    return objective_value_and_gradient(problem, z, penalty)[1]


def _projected_gradient_norm(grad: np.ndarray, z: np.ndarray, bounds: Bounds) -> float:
    pg = grad.copy()
    at_lb = z <= bounds.lb + 1e-12
    at_ub = z >= bounds.ub - 1e-12
    pg[at_lb] = np.minimum(pg[at_lb], 0.0)
    pg[at_ub] = np.maximum(pg[at_ub], 0.0)
    return float(np.abs(pg).max(initial=0.0))


def _assemble_solution(
    problem: LocalProblem,
    layout: _Layout,
    z: np.ndarray,
    status: SolveStatus,
    feas: float,
    stat: float,
    mults: ALMultipliers,
) -> LocalSolution:
    S, U, P, lam, alpha = layout.views(z)
    prox = _prox_copy(problem)
    states = prox.states.copy()
    inputs = prox.inputs.copy()
    i = problem.agent_id
    states[i] = np.vstack([problem.s0[None, :], S])
    inputs[i] = U
    for jj, j in enumerate(layout.neighbors):
        states[j, 1:, : layout.n] = P[jj]
    v_plus = CopyVector(states=states, inputs=inputs)
    obj = augmented_lagrangian(
        v_plus, problem.v_bar, problem.gamma, problem.rho, problem.goal, problem.weights, own=i
    )
    if layout.soft:
        obj += problem.weights.kappa * float(alpha.sum())
    return LocalSolution(
        v_plus=v_plus,
        lam=lam.copy(),
        alpha=alpha.copy(),
        status=status,
        feasibility=feas,
        stationarity=stat,
        objective=obj,
        multipliers=mults,
    )


def solve_local(
    problem: LocalProblem,
    warm_start: WarmStart | None = None,
    opts: SolverOptions | None = None,
) -> LocalSolution:
    """Minimize the consensus-augmented objective subject to dynamics and
    separation-certificate constraints; returns the best iterate found."""
    opts = opts or SolverOptions()
    layout = _Layout(problem)
    bounds = _build_bounds(problem, layout)
    z = np.clip(_start_point(problem, warm_start, layout), bounds.lb, bounds.ub)

    mu = opts.penalty_initial
    mults = _zeros_multipliers(layout, mu)
    gtol = max(0.5 * opts.stationarity_tolerance, 1e-12)
    best = None
    prev_feas = np.inf

    for _ in range(opts.max_outer_iters):
        res = minimize(
            objective_value_and_gradient,
            z,
            args=(mults,),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxiter": opts.max_inner_iters,
                "maxfun": 10 * opts.max_inner_iters,
                "ftol": 1e-14,
                "gtol": gtol,
            },
        )
        z = np.clip(res.x, bounds.lb, bounds.ub)
        h, c_cert, c_lo, c_hi, _ = _constraints(problem, layout, z)
        feas = _feasibility(h, c_cert, c_lo, c_hi)
        stat = _projected_gradient_norm(np.asarray(res.jac), z, bounds)

        mults = ALMultipliers(
            mu=mu,
            nu_eq=np.clip(mults.nu_eq + mu * h, -_MULTIPLIER_CAP, _MULTIPLIER_CAP),
            nu_cert=np.clip(mults.nu_cert - mu * c_cert, 0.0, _MULTIPLIER_CAP),
            nu_lo=np.clip(mults.nu_lo - mu * c_lo, 0.0, _MULTIPLIER_CAP),
            nu_hi=np.clip(mults.nu_hi - mu * c_hi, 0.0, _MULTIPLIER_CAP),
        )
        fval = objective_value_and_gradient(problem, z)[0]
        cand = (z.copy(), mults, feas, stat, fval)
        best = _pick_better(best, cand, opts.constraint_tolerance)

        if feas <= opts.constraint_tolerance and stat <= opts.stationarity_tolerance:
            return _assemble_solution(
                problem, layout, z, SolveStatus.CONVERGED, feas, stat, mults
            )
        if feas > 0.25 * prev_feas:
            mu = min(mu * opts.penalty_growth, 1e12)
            mults = replace(mults, mu=mu)
        prev_feas = min(prev_feas, feas)

    z, mults, feas, stat, _ = best
    status = SolveStatus.MAX_ITERS if feas <= opts.constraint_tolerance else SolveStatus.INFEASIBLE
    return _assemble_solution(problem, layout, z, status, feas, stat, mults)


def _pick_better(best, cand, eps_con):
    if best is None:
        return cand
    _, _, bf, _, bv = best
    _, _, cf, _, cv = cand
    b_ok, c_ok = bf <= eps_con, cf <= eps_con
    if c_ok and not b_ok:
        return cand
    if c_ok and b_ok:
        return cand if cv < bv else best
    if not c_ok and not b_ok:
        return cand if cf < bf else best
    return best


def pack_solution(problem: LocalProblem, sol: LocalSolution) -> np.ndarray:
    """Rebuild the stacked inner decision vector from a solution."""
    layout = _Layout(problem)
    z = np.zeros(layout.size)
    S, U, P, lam, _ = layout.views(z)
    i = problem.agent_id
    S[:] = sol.v_plus.states[i, 1:]
    U[:] = sol.v_plus.inputs[i]
    for jj, j in enumerate(layout.neighbors):
        P[jj] = sol.v_plus.states[j, 1:, : layout.n]
    lam[:] = sol.lam
    if layout.soft:
        z[layout.i_alpha] = sol.alpha.ravel()
    return z


def kkt_residual(problem: LocalProblem, candidate: LocalSolution) -> tuple[float, float]:
    """(feasibility, stationarity) of a candidate solution.

    Feasibility is the worst violation over dynamics equalities, separation
    and norm inequalities, and the sign constraints on ``lam``/``alpha``.
    Stationarity is the max-norm of the bound-projected Lagrangian gradient,
    evaluated with the candidate's own multiplier estimates.
    """
    layout = _Layout(problem)
    z = pack_solution(problem, candidate)
    h, c_cert, c_lo, c_hi, _ = _constraints(problem, layout, z)
    feas = _feasibility(h, c_cert, c_lo, c_hi)
    feas = max(feas, float(np.clip(-candidate.lam, 0.0, None).max(initial=0.0)))
    feas = max(feas, float(np.clip(-candidate.alpha, 0.0, None).max(initial=0.0)))
    lagr = replace(candidate.multipliers, mu=0.0)
    grad = objective_value_and_gradient(problem, z, lagr)[1]
    bounds = _build_bounds(problem, layout)
    return feas, _projected_gradient_norm(grad, z, bounds)
