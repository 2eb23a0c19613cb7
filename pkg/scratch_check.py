"""Dev scratch: FD gradient check + M=1 LQR comparison. Not part of the package."""
import numpy as np

from dmpc import (
    CopyVector, CostWeights, GoalSpec, LocalProblem, Mode, SolverOptions,
    discretize, make_double_integrator, solve_local,
)
from dmpc.local_solver import ALMultipliers, _Layout, objective_value_and_gradient

rng = np.random.default_rng(0)

n, N, M = 2, 10, 3
model = discretize(make_double_integrator(n), 0.1)
w = CostWeights.from_scales(n, 0.1, 1.0, 1.0, kappa=100.0)
goal = GoalSpec.from_position(np.array([2.0, 0.0]))

for mode in (Mode.HARD, Mode.SOFT):
    prob = LocalProblem(
        agent_id=0, model=model, horizon=N, s0=np.array([0.0, 0.0, 0.0, 0.0]),
        goal=goal, weights=w, delta=0.1, mode=mode, n_agents=M,
        v_bar=CopyVector(states=rng.normal(size=(M, N + 1, 2 * n)), inputs=rng.normal(size=(M, N, n))),
        gamma=CopyVector(states=0.1 * rng.normal(size=(M, N + 1, 2 * n)), inputs=0.1 * rng.normal(size=(M, N, n))),
        rho=1.3,
    )
    layout = _Layout(prob)
    errs = []
    for trial in range(5):
        z = rng.normal(size=layout.size)
        pen = ALMultipliers(
            mu=3.7,
            nu_eq=rng.normal(size=(N, 2 * n)),
            nu_cert=np.abs(rng.normal(size=(len(prob.neighbors), N))),
            nu_lo=np.abs(rng.normal(size=(len(prob.neighbors), N))),
            nu_hi=np.abs(rng.normal(size=(len(prob.neighbors), N))),
        )
        for p in (None, pen):
            f0, g = objective_value_and_gradient(prob, z, p)
            fd = np.zeros_like(g)
            h = 1e-6
            for k in range(layout.size):
                zp = z.copy(); zp[k] += h
                zm = z.copy(); zm[k] -= h
                fd[k] = (objective_value_and_gradient(prob, zp, p)[0] - objective_value_and_gradient(prob, zm, p)[0]) / (2 * h)
            rel = np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(g))
            errs.append(rel)
    print(mode, "max rel grad err:", max(errs))

# M=1 LQR vs Riccati
def riccati_tracking(A, B, Q, R, Qf, s0, sg, N):
    m = A.shape[0]
    c = (A - np.eye(m)) @ sg
    P, q = Qf.copy(), np.zeros(m)
    Ks, ds = [], []
    for _ in range(N):
        H = R + B.T @ P @ B
        K = np.linalg.solve(H, B.T @ P @ A)
        d = np.linalg.solve(H, B.T @ (P @ c + q))
        q = K.T @ R @ d + (A - B @ K).T @ (P @ (c - B @ d) + q)
        P = Q + K.T @ R @ K + (A - B @ K).T @ P @ (A - B @ K)
        Ks.append(K); ds.append(d)
    Ks.reverse(); ds.reverse()
    states = np.zeros((N + 1, m)); states[0] = s0
    inputs = np.zeros((N, B.shape[1]))
    e = s0 - sg
    for k in range(N):
        u = -Ks[k] @ e - ds[k]
        inputs[k] = u
        e = A @ e + B @ u + c
        states[k + 1] = e + sg
    return states, inputs

s0 = np.array([0.0, 0.0, 0.0, 0.0])
prob1 = LocalProblem(
    agent_id=0, model=model, horizon=N, s0=s0, goal=goal, weights=w,
    delta=0.1, mode=Mode.HARD, n_agents=1,
    v_bar=CopyVector.zeros(1, N, n), gamma=CopyVector.zeros(1, N, n), rho=0.0,
)
opts = SolverOptions(max_outer_iters=15, max_inner_iters=800,
                     constraint_tolerance=1e-9, stationarity_tolerance=1e-8)
sol = solve_local(prob1, opts=opts)
S_r, U_r = riccati_tracking(model.A_k, model.B_k, w.Q, w.R, w.Q_f, s0, goal.s_g, N)
S_s = sol.v_plus.states[0]
U_s = sol.v_plus.inputs[0]
diff = np.sqrt(np.sum((S_s - S_r) ** 2) + np.sqrt(np.sum((U_s - U_r) ** 2)))
print("status:", sol.status, "feas:", sol.feasibility, "stat:", sol.stationarity)
print("traj diff vs riccati:", np.linalg.norm(np.hstack([(S_s - S_r).ravel(), (U_s - U_r).ravel()])))
print("riccati final state:", S_r[-1])
