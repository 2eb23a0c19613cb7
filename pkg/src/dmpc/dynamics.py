"""Double-integrator models in 2D/3D, Euler discretization, and rollout.

States stack position on top of velocity (length 2n); inputs are commanded
accelerations (length n). Both are plain float arrays.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ContinuousModel",
    "DiscreteModel",
    "Trajectory",
    "make_double_integrator",
    "discretize",
    "step",
    "rollout",
]


@dataclass(frozen=True)
class ContinuousModel:
    """Continuous-time point mass ds/dt = A s + B u in n spatial dimensions."""

    n: int
    A: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class DiscreteModel:
    """Forward-Euler discretization s_{k+1} = A_k s_k + B_k u_k."""

    n: int
    A_k: np.ndarray
    B_k: np.ndarray
    dt: float

    @property
    def state_dim(self) -> int:
        return 2 * self.n

    @property
    def input_dim(self) -> int:
        return self.n


@dataclass(frozen=True)
class Trajectory:
    """K+1 states and the K inputs that connect them.

    ``states`` has shape (K+1, 2n), ``inputs`` shape (K, n).
    """

    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.size == 0:
            inputs = inputs.reshape(0, states.shape[1] // 2)
        inputs = np.atleast_2d(inputs)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        if self.states.shape[0] != self.inputs.shape[0] + 1:
            raise ValueError(
                f"need K+1 states for K inputs, got {self.states.shape[0]} "
                f"states and {self.inputs.shape[0]} inputs"
            )
        if self.states.shape[1] != 2 * self.inputs.shape[1]:
            raise ValueError("state dimension must be twice the input dimension")
        if not (np.isfinite(self.states).all() and np.isfinite(self.inputs).all()):
            raise ValueError("trajectory entries must be finite")

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, : self.inputs.shape[1]]

    def is_consistent(self, model: DiscreteModel, tol: float = 1e-9) -> bool:
        """True when every consecutive state pair satisfies the discrete dynamics."""
        pred = self.states[:-1] @ model.A_k.T + self.inputs @ model.B_k.T
        return bool(np.abs(pred - self.states[1:]).max(initial=0.0) <= tol)


def make_double_integrator(n: int) -> ContinuousModel:
    """Build the n-dimensional double integrator (n in {2, 3})."""
    if n not in (2, 3):
        raise ValueError(f"spatial dimension must be 2 or 3, got {n}")
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    B = np.zeros((2 * n, n))
    B[n:, :] = np.eye(n)
    return ContinuousModel(n=n, A=A, B=B)


def discretize(model: ContinuousModel, dt: float) -> DiscreteModel:
    """First-order Euler discretization: A_k = A dt + I, B_k = B dt."""
    if dt <= 0:
        raise ValueError(f"timestep must be positive, got {dt}")
    n2 = model.A.shape[0]
    return DiscreteModel(n=model.n, A_k=model.A * dt + np.eye(n2), B_k=model.B * dt, dt=dt)


def step(model: DiscreteModel, s: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Advance one timestep: A_k s + B_k u."""
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    if s.shape != (model.state_dim,):
        raise ValueError(f"state must have shape ({model.state_dim},), got {s.shape}")
    if u.shape != (model.input_dim,):
        raise ValueError(f"input must have shape ({model.input_dim},), got {u.shape}")
    return model.A_k @ s + model.B_k @ u


def rollout(model: DiscreteModel, s0: np.ndarray, inputs) -> Trajectory:
    """Simulate the discrete dynamics from s0 under the given input sequence."""
    s0 = np.asarray(s0, dtype=float)
    inputs = np.asarray(inputs, dtype=float).reshape(-1, model.input_dim)
    states = np.empty((inputs.shape[0] + 1, model.state_dim))
    states[0] = s0
    for k in range(inputs.shape[0]):
        states[k + 1] = step(model, states[k], inputs[k])
    return Trajectory(states=states, inputs=inputs)
