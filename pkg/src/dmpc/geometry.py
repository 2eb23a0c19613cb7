"""Polytope obstacle sets, signed-distance oracles, and dual separation certificates.

An obstacle is the convex set {x : G x <= g}. Distance/penetration oracles here
are deliberately independent of the certificate machinery they are used to
validate: projections are computed by exhaustive active-set enumeration, not by
solving the dual problem.

A certificate is a multiplier vector lam >= 0 scored by (G x - g)^T lam. With
``||G^T lam||_2 <= 1`` that score is a lower bound on the Euclidean distance
from x to the set; maximizing it recovers the distance exactly.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize

__all__ = [
    "Polytope",
    "DualCertificate",
    "DistanceThresholds",
    "contains",
    "dist_oracle",
    "pen_oracle",
    "sdf_oracle",
    "hard_certificate_value",
    "soft_certificate_check",
    "max_certified_distance",
    "agent_cube_polytope",
    "pairwise_constraint_residual",
]

_CONTAIN_TOL = 1e-12


@dataclass(frozen=True)
class Polytope:
    """Convex set {x : G x <= g} with G (l, n) and g (l,)."""

    G: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        g = np.asarray(self.g, dtype=float).ravel()
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)
        if G.shape[0] != g.shape[0]:
            raise ValueError(f"G has {G.shape[0]} rows but g has {g.shape[0]} entries")
        row_norms = np.linalg.norm(G, axis=1)
        if np.any(row_norms == 0.0):
            raise ValueError("every row of G must be nonzero")
        # Nonemptiness via a zero-objective feasibility solve.
        res = linprog(
            c=np.zeros(G.shape[1]), A_ub=G, b_ub=g,
            bounds=[(None, None)] * G.shape[1], method="highs",
        )
        if not res.success:
            raise ValueError("polytope is empty")

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def n_rows(self) -> int:
        return self.G.shape[0]

    def translate(self, center: np.ndarray) -> "Polytope":
        """The same set shifted so that x=center plays the role of the old origin."""
        center = np.asarray(center, dtype=float)
        return Polytope(G=self.G, g=self.g + self.G @ center)

    def contains_batch(self, points: np.ndarray, tol: float = _CONTAIN_TOL) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all(points @ self.G.T <= self.g + tol, axis=1)


@dataclass(frozen=True)
class DualCertificate:
    """Separation certificate: multipliers lam >= 0 and slack alpha >= 0."""

    lam: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).ravel()
        object.__setattr__(self, "lam", lam)
        if np.any(lam < -1e-9):
            raise ValueError("certificate multipliers must be nonnegative")
        if self.alpha < -1e-9:
            raise ValueError("certificate slack must be nonnegative")


@dataclass(frozen=True)
class DistanceThresholds:
    """Separation targets: d_min for hard mode, p_max as a soft-mode reporting bound."""

    d_min: float = 0.0
    p_max: float = 0.01

    def __post_init__(self):
        if self.d_min < 0 or self.p_max < 0:
            raise ValueError("distance thresholds must be nonnegative")


def _check_point(P: Polytope, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float).ravel()
    if s.shape != (P.n,):
        raise ValueError(f"point must have shape ({P.n},), got {s.shape}")
    return s


def contains(P: Polytope, s: np.ndarray, tol: float = _CONTAIN_TOL) -> bool:
    """True iff G s <= g componentwise; boundary points count as contained."""
    s = _check_point(P, s)
    return bool(np.all(P.G @ s <= P.g + tol))


def _strictly_inside(P: Polytope, s: np.ndarray, tol: float = _CONTAIN_TOL) -> bool:
    return bool(np.all(P.G @ s < P.g - tol))


def dist_oracle(P: Polytope, s: np.ndarray) -> float:
    """Euclidean distance from an exterior (or boundary) point to the set.

    Computed by projecting s onto every face subspace (all active-row subsets
    of size <= n) and keeping the closest feasible candidate. This is the
    testing oracle; it never touches the certificate path.
    """
    s = _check_point(P, s)
    if _strictly_inside(P, s):
        raise ValueError("dist_oracle requires a point outside or on the boundary")
    if contains(P, s):
        return 0.0
    best = np.inf
    rows = range(P.n_rows)
    for size in range(1, P.n + 1):
        for subset in itertools.combinations(rows, size):
            Gs = P.G[list(subset)]
            gs = P.g[list(subset)]
            # Projection onto the affine subspace {x : Gs x = gs}.
            x = s + np.linalg.pinv(Gs) @ (gs - Gs @ s)
            if np.abs(Gs @ x - gs).max() > 1e-9:
                continue  # inconsistent (rank-deficient) subset
            if np.all(P.G @ x <= P.g + 1e-9):
                best = min(best, float(np.linalg.norm(x - s)))
    return best


def pen_oracle(P: Polytope, s: np.ndarray) -> float:
    """Minimum translation norm that moves an interior point out of the set."""
    s = _check_point(P, s)
    residuals = P.g - P.G @ s
    if np.any(residuals < -_CONTAIN_TOL):
        raise ValueError("pen_oracle requires a point inside the set")
    # Cheapest exit is across the nearest supporting hyperplane.
    return float(np.min(residuals / np.linalg.norm(P.G, axis=1)))


def sdf_oracle(P: Polytope, s: np.ndarray) -> float:
    """Signed distance: positive outside, negative inside, zero on the boundary."""
    s = _check_point(P, s)
    if contains(P, s):
        return -pen_oracle(P, s)
    return dist_oracle(P, s)


def hard_certificate_value(P: Polytope, s: np.ndarray, lam: np.ndarray) -> float:
    """Evaluate (G s - g)^T lam for a feasible certificate.

    Requires lam >= 0 and ||G^T lam||_2 <= 1; by weak duality the value is then
    a lower bound on the distance from s to the set whenever s is outside.
    """
    s = _check_point(P, s)
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.shape != (P.n_rows,):
        raise ValueError(f"lam must have shape ({P.n_rows},), got {lam.shape}")
    if np.any(lam < -1e-9):
        raise ValueError("certificate multipliers must be nonnegative")
    norm = np.linalg.norm(P.G.T @ lam)
    if norm > 1.0 + 1e-9:
        raise ValueError(f"||G^T lam||_2 = {norm:.3e} exceeds 1")
    return float((P.G @ s - P.g) @ lam)


def soft_certificate_check(P: Polytope, s: np.ndarray, lam: np.ndarray, alpha: float) -> bool:
    """True iff ||G^T lam||_2 = 1 (within 1e-6) and (G s - g)^T lam >= -alpha."""
    s = _check_point(P, s)
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.shape != (P.n_rows,) or np.any(lam < 0):
        return False
    if abs(np.linalg.norm(P.G.T @ lam) - 1.0) > 1e-6:
        return False
    return bool((P.G @ s - P.g) @ lam >= -alpha - 1e-12)


def _aligned_face_multiplier(P: Polytope, s: np.ndarray) -> np.ndarray:
    """Indicator of the row most violated by s, rescaled to unit ||G^T lam||."""
    scores = (P.G @ s - P.g) / np.linalg.norm(P.G, axis=1)
    r = int(np.argmax(scores))
    lam = np.zeros(P.n_rows)
    lam[r] = 1.0 / np.linalg.norm(P.G[r])
    return lam


def max_certified_distance(P: Polytope, s: np.ndarray) -> float:
    """Best certified distance: max of (G s - g)^T lam over feasible lam.

    Solved as a small smooth convex program (linear objective, quadratic norm
    cap, nonnegativity bounds). For exterior points strong duality makes the
    optimum equal the true Euclidean distance to the set.
    """
    s = _check_point(P, s)
    if _strictly_inside(P, s):
        raise ValueError("max_certified_distance requires a point outside the set")
    c = P.G @ s - P.g
    GGT = P.G @ P.G.T

    def neg_value(lam):
        return -c @ lam, -c

    def norm_slack(lam):
        return 1.0 - lam @ GGT @ lam

    def norm_slack_jac(lam):
        return -2.0 * GGT @ lam

    res = minimize(
        neg_value,
        _aligned_face_multiplier(P, s),
        jac=True,
        method="SLSQP",
        bounds=[(0.0, None)] * P.n_rows,
        constraints=[{"type": "ineq", "fun": norm_slack, "jac": norm_slack_jac}],
        options={"ftol": 1e-14, "maxiter": 300},
    )
    # Polish back into the feasible set so the value stays a true lower bound.
    lam = np.clip(res.x, 0.0, None)
    norm = np.linalg.norm(P.G.T @ lam)
    if norm > 1.0:
        lam = lam / norm
    return max(0.0, float(c @ lam))


def agent_cube_polytope(delta: float, n: int) -> Polytope:
    """Axis-aligned cube of half-width delta in center-relative coordinates.

    Rows are the signed axis directions [I; -I], so evaluating the cube at a
    relative position r tests ||r||_inf <= delta.
    """
    if delta <= 0:
        raise ValueError(f"cube half-width must be positive, got {delta}")
    G = np.vstack([np.eye(n), -np.eye(n)])
    return Polytope(G=G, g=np.full(2 * n, float(delta)))


def pairwise_constraint_residual(
    s_i: np.ndarray,
    s_j: np.ndarray,
    delta: float,
    lam: np.ndarray,
    alpha: float = 0.0,
) -> tuple[float, float]:
    """Residuals of the pairwise separation certificate between two agents.

    Returns ``(ineq_residual, norm_residual)`` where the first is
    (G (s_i - s_j) - delta)^T lam + alpha (feasible iff >= 0) and the second is
    ||G^T lam||_2 - 1 (feasible iff zero), G being the agent-cube matrix.
    """
    s_i = np.asarray(s_i, dtype=float).ravel()
    s_j = np.asarray(s_j, dtype=float).ravel()
    if s_i.shape != s_j.shape:
        raise ValueError("positions must have matching shapes")
    lam = np.asarray(lam, dtype=float).ravel()
    n = s_i.shape[0]
    if lam.shape != (2 * n,):
        raise ValueError(f"lam must have shape ({2 * n},), got {lam.shape}")
    if np.any(lam < -1e-9):
        raise ValueError("certificate multipliers must be nonnegative")
    rel = s_i - s_j
    g_rel = np.concatenate([rel, -rel])  # [I; -I] @ rel
    ineq = float((g_rel - delta) @ lam + alpha)
    norm_res = float(np.linalg.norm(lam[:n] - lam[n:]) - 1.0)
    return ineq, norm_res
