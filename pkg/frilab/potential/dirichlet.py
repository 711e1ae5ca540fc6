"""
Discrete Dirichlet problems on an l-infinity ball.

Solves (I - P) u = f on the free cells of B(center, r), with u = 0 outside
the ball and u = value on a fixed set, where P is the simple random walk
kernel. The operator is applied matrix-free on the dense grid and inverted
with conjugate gradients (it is symmetric positive definite on the free
cells).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from ..errors import BudgetExhaustedError, MemoryCapError
from ..lattice.points import PointSet, unit_moves, validate_dimension

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10
MAX_GRID_CELLS = 5 * 10 ** 7


def green_constant(d: int) -> float:
    """a_d with g(0, x) ~ a_d |x|_2^(2-d)."""
    return (d / 2) * math.gamma(d / 2 - 1) * math.pi ** (-d / 2)


def exit_bias_bound(d: int, distance: float) -> float:
    """Upper bound on g(z, y) for |z - y|_inf >= distance (twice the asymptotic value)."""
    return 2.0 * green_constant(d) * max(distance, 1.0) ** (2 - d)


def neighbor_sum(u: np.ndarray) -> np.ndarray:
    """Sum of the 2d nearest-neighbor values, zero outside the grid."""
    out = np.zeros_like(u)
    for axis in range(u.ndim):
        head = [slice(None)] * u.ndim
        tail = [slice(None)] * u.ndim
        head[axis] = slice(1, None)
        tail[axis] = slice(None, -1)
        out[tuple(head)] += u[tuple(tail)]
        out[tuple(tail)] += u[tuple(head)]
    return out


@dataclass
class DirichletSolution:
    """Solution grid on B(center, radius)."""
    values: np.ndarray
    center: np.ndarray
    radius: int
    iterations: int
    residual: float

    @property
    def d(self) -> int:
        return self.values.ndim

    def inside(self, points: np.ndarray) -> np.ndarray:
        offsets = np.asarray(points, dtype=np.int64).reshape(-1, self.d) - self.center
        return np.all(np.abs(offsets) <= self.radius, axis=1)

    def value_at(self, points: np.ndarray) -> np.ndarray:
        """Solution values at the given points, 0 outside the ball."""
        points = np.asarray(points, dtype=np.int64).reshape(-1, self.d)
        out = np.zeros(len(points))
        mask = self.inside(points)
        idx = (points[mask] - self.center + self.radius).T
        out[mask] = self.values[tuple(idx)]
        return out


def solve_ball(d: int, radius: int, center: np.ndarray, source: Optional[np.ndarray] = None,
               fixed: Optional[PointSet] = None, fixed_value: float = 1.0,
               tol: float = DEFAULT_TOLERANCE, maxiter: Optional[int] = None) -> DirichletSolution:
    """
    Solve the Dirichlet problem on B(center, radius).

    Args:
        d: Dimension
        radius: Ball radius r
        center: Ball center
        source: Points carrying a unit source term (Green's function columns)
        fixed: Cells held at `fixed_value`
        fixed_value: Boundary value on `fixed`
        tol: Relative residual target
        maxiter: CG iteration cap (default 50 * (2r + 1))

    Returns:
        DirichletSolution with the full grid
    """
    d = validate_dimension(d)
    side = 2 * radius + 1
    if side ** d > MAX_GRID_CELLS:
        raise MemoryCapError(f"Dirichlet grid of {side}^{d} cells exceeds {MAX_GRID_CELLS}")
    center = np.asarray(center, dtype=np.int64)
    shape = (side,) * d

    fixed_grid = np.zeros(shape)
    if fixed is not None and len(fixed):
        pts = fixed.to_array() - center + radius
        if np.any(pts < 0) or np.any(pts >= side):
            raise ValueError("fixed set must lie inside the ball")
        fixed_grid[tuple(pts.T)] = 1.0
    free = 1.0 - fixed_grid

    rhs = np.zeros(shape)
    if source is not None:
        pts = np.asarray(source, dtype=np.int64).reshape(-1, d) - center + radius
        if np.any(pts < 0) or np.any(pts >= side):
            raise ValueError("source points must lie inside the ball")
        np.add.at(rhs, tuple(pts.T), 1.0)
    rhs = free * (rhs + fixed_value * neighbor_sum(fixed_grid) / (2 * d))

    def matvec(v: np.ndarray) -> np.ndarray:
        grid = v.reshape(shape)
        return (grid - free * neighbor_sum(free * grid) / (2 * d)).ravel()

    operator = LinearOperator((side ** d, side ** d), matvec=matvec, dtype=float)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    maxiter = maxiter or 50 * side
    solution, info = cg(operator, rhs.ravel(), rtol=tol, atol=0.0, maxiter=maxiter, callback=count)
    if info > 0:
        raise BudgetExhaustedError(f"CG did not reach residual {tol} within {maxiter} iterations "
                                   f"(d={d}, r={radius})")
    norm = np.linalg.norm(rhs)
    residual = float(np.linalg.norm(rhs.ravel() - matvec(solution)) / norm) if norm else 0.0
    values = solution.reshape(shape) * free + fixed_value * fixed_grid
    logger.debug(f"Dirichlet solve d={d} r={radius}: {iterations} iterations, residual {residual:.2e}")
    return DirichletSolution(values, center, radius, iterations, residual)


def green_column(d: int, y: np.ndarray, radius: int, tol: float = DEFAULT_TOLERANCE) -> DirichletSolution:
    """g_r(., y): expected visits to y before leaving B(y, r)."""
    y = np.asarray(y, dtype=np.int64)
    return solve_ball(d, radius, y, source=y.reshape(1, d), tol=tol)


def hitting_before_exit(A: PointSet, radius: int, center: np.ndarray,
                        tol: float = DEFAULT_TOLERANCE) -> DirichletSolution:
    """h_r(x) = P^x[H_A < exit time of B(center, r)]."""
    return solve_ball(A.d, radius, center, fixed=A, fixed_value=1.0, tol=tol)


def escape_before_exit(A: PointSet, solution: DirichletSolution) -> np.ndarray:
    """
    P^x[leave the ball before H~_A] for x in A, from the hitting solution.

    One step to a neighbor z, then escape with probability 1 - h_r(z).
    """
    d = A.d
    points = A.to_array()
    nbrs = points[:, None, :] + unit_moves(d)[None, :, :]
    h = solution.value_at(nbrs.reshape(-1, d)).reshape(len(points), 2 * d)
    return 1.0 - h.mean(axis=1)