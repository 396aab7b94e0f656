"""Tridiagonal solves, compact finite differences, and a generic RK4 stepper."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "TridiagonalSystem",
    "UniformGrid",
    "thomas_solve",
    "compact_first_derivative",
    "compact_second_derivative",
    "rk4_step",
]


@dataclass(frozen=True)
class TridiagonalSystem:
    """Tridiagonal matrix stored as its three diagonals.

    Attributes
    ----------
    lower, diag, upper : ndarray
        Sub-, main, and super-diagonal entries of lengths n-1, n, n-1.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        n = self.diag.size
        if self.lower.size != n - 1 or self.upper.size != n - 1:
            raise ValueError(
                f"off-diagonal lengths {self.lower.size}/{self.upper.size} "
                f"do not fit a diagonal of length {n}"
            )

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, y: np.ndarray) -> np.ndarray:
        """Multiply the matrix with a vector."""
        y = np.asarray(y)
        if y.size != self.n:
            raise ValueError(f"vector length {y.size} does not match system size {self.n}")
        out = self.diag * y
        out[:-1] = out[:-1] + self.upper * y[1:]
        out[1:] = out[1:] + self.lower * y[:-1]
        return out

    def dense(self) -> np.ndarray:
        """Expand to a dense matrix; intended for small systems."""
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)


def thomas_solve(sys: TridiagonalSystem, rhs: np.ndarray) -> np.ndarray:
    """Solve a tridiagonal system by forward elimination and back substitution.

    The elimination is pivoting-free, so it is the caller's job to supply a
    system whose leading minors do not vanish.  All arithmetic happens in the
    common dtype of the inputs; extended-precision data stays extended.

    Parameters
    ----------
    sys : TridiagonalSystem
        Coefficient matrix.
    rhs : ndarray
        Right-hand side of the same length as ``sys.diag``.

    Returns
    -------
    ndarray
        Solution y with ``sys.matvec(y) == rhs`` up to round-off.

    Raises
    ------
    ValueError
        On length mismatch or when elimination hits a zero pivot.
    """
    rhs = np.asarray(rhs)
    n = sys.n
    if rhs.size != n:
        raise ValueError(f"rhs length {rhs.size} does not match system size {n}")
    dtype = np.result_type(sys.diag.dtype, rhs.dtype, np.float64)
    cp = np.empty(n - 1, dtype=dtype) if n > 1 else np.empty(0, dtype=dtype)
    dp = np.empty(n, dtype=dtype)
    if sys.diag[0] == 0:
        raise ValueError("zero pivot in row 0")
    dp[0] = rhs[0] / sys.diag[0]
    if n == 1:
        return dp
    cp[0] = sys.upper[0] / sys.diag[0]
    for i in range(1, n - 1):
        den = sys.diag[i] - sys.lower[i - 1] * cp[i - 1]
        if den == 0:
            raise ValueError(f"zero pivot in row {i}")
        cp[i] = sys.upper[i] / den
        dp[i] = (rhs[i] - sys.lower[i - 1] * dp[i - 1]) / den
    den = sys.diag[n - 1] - sys.lower[n - 2] * cp[n - 2]
    if den == 0:
        raise ValueError(f"zero pivot in row {n - 1}")
    dp[n - 1] = (rhs[n - 1] - sys.lower[n - 2] * dp[n - 2]) / den
    y = np.empty(n, dtype=dtype)
    y[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        y[i] = dp[i] - cp[i] * y[i + 1]
    return y


@dataclass(frozen=True)
class UniformGrid:
    """Uniformly spaced points x_i = i * spacing starting at zero."""

    n_points: int
    spacing: float

    def __post_init__(self) -> None:
        if self.n_points < 2:
            raise ValueError("grid needs at least two points")
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")

    @classmethod
    def unit(cls, n_points: int) -> "UniformGrid":
        """Grid of ``n_points`` covering [0, 1]."""
        return cls(n_points, 1.0 / (n_points - 1))

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) * self.spacing


# Interior stencils: the fourth-order tridiagonal members of the compact
# family.  First derivative
#   (1/4) u'_{i-1} + u'_i + (1/4) u'_{i+1} = (3/4h)(u_{i+1} - u_{i-1}),
# second derivative
#   (1/10) u''_{i-1} + u''_i + (1/10) u''_{i+1} = (6/5h^2)(u_{i+1} - 2u_i + u_{i-1}).
_D1_ALPHA = 0.25
_D1_RHS = 0.75
_D2_ALPHA = 0.1
_D2_RHS = 1.2

# One-sided closure rows keeping the left-hand side tridiagonal.
# First derivative, third order:
#   u'_0 + 2 u'_1 = (1/h)(-5/2 u_0 + 2 u_1 + 1/2 u_2).
_D1_BOUNDARY_ALPHA = 2.0
_D1_BOUNDARY = np.array([-2.5, 2.0, 0.5])
# Second derivative, exact for polynomials through x^5:
#   u''_0 + 12 u''_1 = (1/h^2)(55/4 u_0 - 167/6 u_1 + 83/6 u_2 + u_3
#                              - 11/12 u_4 + 1/6 u_5).
# The coupling weight 12 keeps the second pivot of unpivoted elimination at
# 1 - 12/10 = -0.2; the five-point closure of the same order has weight 10,
# which would make that pivot vanish exactly.
_D2_BOUNDARY_ALPHA = 12.0
_D2_BOUNDARY = np.array(
    [55.0 / 4.0, -167.0 / 6.0, 83.0 / 6.0, 1.0, -11.0 / 12.0, 1.0 / 6.0]
)


def _lhs_system(n: int, alpha: float, alpha_b: float, dtype) -> TridiagonalSystem:
    lower = np.full(n - 1, alpha, dtype=dtype)
    diag = np.ones(n, dtype=dtype)
    upper = np.full(n - 1, alpha, dtype=dtype)
    upper[0] = alpha_b
    lower[-1] = alpha_b
    return TridiagonalSystem(lower, diag, upper)


@lru_cache(maxsize=16)
def _banded_lhs(n: int, alpha: float, alpha_b: float) -> np.ndarray:
    sys = _lhs_system(n, alpha, alpha_b, np.float64)
    ab = np.zeros((3, n))
    ab[0, 1:] = sys.upper
    ab[1, :] = sys.diag
    ab[2, :-1] = sys.lower
    return ab


def _solve_compact(alpha: float, alpha_b: float, rhs: np.ndarray) -> np.ndarray:
    # LAPACK only covers float64; other dtypes go through the generic
    # elimination so extended-precision evaluations stay extended.
    if rhs.dtype == np.float64:
        ab = _banded_lhs(rhs.size, alpha, alpha_b)
        return solve_banded((1, 1), ab, rhs, check_finite=False)
    return thomas_solve(_lhs_system(rhs.size, alpha, alpha_b, rhs.dtype), rhs)


def _as_float_array(u: np.ndarray, grid: UniformGrid, min_points: int) -> np.ndarray:
    u = np.asarray(u)
    if u.ndim != 1 or u.size != grid.n_points:
        raise ValueError(f"field has shape {u.shape}, expected ({grid.n_points},)")
    if u.size < min_points:
        raise ValueError(f"need at least {min_points} points for the boundary stencil")
    if not np.issubdtype(u.dtype, np.floating):
        u = u.astype(np.float64)
    return u


def compact_first_derivative(u: np.ndarray, grid: UniformGrid) -> np.ndarray:
    """First derivative of a grid function, fourth-order compact interior.

    Parameters
    ----------
    u : ndarray
        Point values on ``grid``.
    grid : UniformGrid
        Grid carrying the spacing.

    Returns
    -------
    ndarray
        Approximation of du/dx at every grid point, in the dtype of ``u``.
    """
    u = _as_float_array(u, grid, 5)
    h = u.dtype.type(grid.spacing)
    rhs = np.empty_like(u)
    rhs[1:-1] = u.dtype.type(_D1_RHS) * (u[2:] - u[:-2]) / h
    cb = _D1_BOUNDARY.astype(u.dtype)
    rhs[0] = (cb @ u[:3]) / h
    rhs[-1] = -(cb @ u[-1:-4:-1]) / h
    return _solve_compact(_D1_ALPHA, _D1_BOUNDARY_ALPHA, rhs)


def compact_second_derivative(u: np.ndarray, grid: UniformGrid) -> np.ndarray:
    """Second derivative of a grid function, fourth-order compact interior.

    Same calling convention as :func:`compact_first_derivative`; the
    one-sided closure needs six points.
    """
    u = _as_float_array(u, grid, 6)
    h = u.dtype.type(grid.spacing)
    rhs = np.empty_like(u)
    rhs[1:-1] = u.dtype.type(_D2_RHS) * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
    cb = _D2_BOUNDARY.astype(u.dtype)
    rhs[0] = (cb @ u[:6]) / h**2
    rhs[-1] = (cb @ u[-1:-7:-1]) / h**2
    return _solve_compact(_D2_ALPHA, _D2_BOUNDARY_ALPHA, rhs)


def rk4_step(
    rhs: Callable[[np.ndarray], np.ndarray], state: np.ndarray, dt: float
) -> np.ndarray:
    """Advance a state vector by one classical fourth-order Runge-Kutta step.

    Parameters
    ----------
    rhs : callable
        Maps a state vector to its time derivative.
    state : ndarray
        Current state.
    dt : float
        Step size, must be positive.

    Returns
    -------
    ndarray
        ``state + (dt/6)(g1 + 2 g2 + 2 g3 + g4)``.

    Raises
    ------
    ValueError
        If ``dt <= 0`` or a stage returns the wrong shape.
    FloatingPointError
        If any stage produces non-finite values.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    state = np.asarray(state)

    def stage(y: np.ndarray) -> np.ndarray:
        g = np.asarray(rhs(y))
        if g.shape != state.shape:
            raise ValueError(f"rhs returned shape {g.shape}, expected {state.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite values in an RK4 stage")
        return g

    g1 = stage(state)
    g2 = stage(state + 0.5 * dt * g1)
    g3 = stage(state + 0.5 * dt * g2)
    g4 = stage(state + dt * g3)
    return state + (dt / 6.0) * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
