"""Stacked per-agent copies of every agent's horizon trajectory.

A copy vector holds, for each agent j, a block of N+1 states and N inputs.
The same container serves three roles in the coordinator: an agent's local
copies, the network average, and the consensus multiplier (all share shape).
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory

__all__ = ["CopyVector"]


@dataclass(frozen=True)
class CopyVector:
    """states: (M, N+1, 2n); inputs: (M, N, n). Treated as immutable."""

    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        inputs = np.asarray(self.inputs, dtype=float)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        if states.ndim != 3 or inputs.ndim != 3:
            raise ValueError("states and inputs must be 3-d arrays")
        if states.shape[0] != inputs.shape[0]:
            raise ValueError("states and inputs must cover the same agents")
        if states.shape[1] != inputs.shape[1] + 1:
            raise ValueError("need N+1 states for N inputs per block")
        if states.shape[2] != 2 * inputs.shape[2]:
            raise ValueError("state dimension must be twice the input dimension")

    @classmethod
    def zeros(cls, n_agents: int, horizon: int, n: int) -> "CopyVector":
        return cls(
            states=np.zeros((n_agents, horizon + 1, 2 * n)),
            inputs=np.zeros((n_agents, horizon, n)),
        )

    @property
    def n_agents(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.inputs.shape[1]

    @property
    def n(self) -> int:
        return self.inputs.shape[2]

    @property
    def size(self) -> int:
        return self.states.size + self.inputs.size

    def agent_trajectory(self, j: int) -> Trajectory:
        return Trajectory(states=self.states[j], inputs=self.inputs[j])

    def __add__(self, other: "CopyVector") -> "CopyVector":
        return CopyVector(self.states + other.states, self.inputs + other.inputs)

    def __sub__(self, other: "CopyVector") -> "CopyVector":
        return CopyVector(self.states - other.states, self.inputs - other.inputs)

    def scale(self, factor: float) -> "CopyVector":
        return CopyVector(factor * self.states, factor * self.inputs)

    def norm(self) -> float:
        return float(np.sqrt((self.states**2).sum() + (self.inputs**2).sum()))

    def copy(self) -> "CopyVector":
        return CopyVector(self.states.copy(), self.inputs.copy())

    def shifted(self) -> "CopyVector":
        """Receding-horizon shift: drop index 0, repeat the final entry."""
        states = np.concatenate([self.states[:, 1:], self.states[:, -1:]], axis=1)
        inputs = np.concatenate([self.inputs[:, 1:], self.inputs[:, -1:]], axis=1)
        return CopyVector(states, inputs)

    def allclose(self, other: "CopyVector", tol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.states, other.states, atol=tol)
            and np.allclose(self.inputs, other.inputs, atol=tol)
        )
