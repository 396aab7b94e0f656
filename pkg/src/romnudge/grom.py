"""Galerkin reduced-order model: precomputed operators and modal time stepping."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import (
    UniformGrid,
    compact_first_derivative,
    compact_second_derivative,
    rk4_step,
)
from .pod import ModalState, PodBasis

__all__ = [
    "GromOperators",
    "precompute_operators",
    "grom_rhs",
    "grom_step",
    "save_operators",
    "load_operators",
]

OPERATORS_MAGIC = b"RNGROM1"


@dataclass(frozen=True)
class GromOperators:
    """Offline-stage Galerkin operators of the reduced Burgers dynamics.

    Attributes
    ----------
    linear : numpy.ndarray
        R x R matrix with entry (i, k) equal to dot(phi_i'', phi_k).
    quadratic : numpy.ndarray
        R x R x R tensor with entry (i, j, k) equal to
        dot(-phi_i * phi_j', phi_k).
    nu : float
        Viscosity multiplying the linear term in the modal equations.
    """

    linear: np.ndarray
    quadratic: np.ndarray
    nu: float

    def __post_init__(self) -> None:
        r = self.linear.shape[0] if self.linear.ndim == 2 else -1
        if self.linear.shape != (r, r):
            raise ValueError(f"linear operator has shape {self.linear.shape}")
        if self.quadratic.shape != (r, r, r):
            raise ValueError(
                f"quadratic operator has shape {self.quadratic.shape}, "
                f"expected ({r}, {r}, {r})"
            )
        if not (np.all(np.isfinite(self.linear))
                and np.all(np.isfinite(self.quadratic))):
            raise ValueError("operator entries must be finite")
        if not np.isfinite(self.nu) or self.nu < 0.0:
            raise ValueError(f"viscosity must be finite and nonnegative, got {self.nu}")

    @property
    def r(self) -> int:
        return self.linear.shape[0]


def precompute_operators(basis: PodBasis, grid: UniformGrid,
                         nu: float) -> GromOperators:
    """Assemble the modal operators from a basis by compact differentiation.

    Every mode is differentiated once and twice with the compact schemes,
    then contracted against the basis with plain dot products.

    Parameters
    ----------
    basis : PodBasis
        Spatial modes, one per column.
    grid : UniformGrid
        Grid the modes are sampled on.
    nu : float
        Viscosity stored with the operators.
    """
    if basis.n_points != grid.n_points:
        raise ValueError(
            f"basis has {basis.n_points} points but grid has {grid.n_points}"
        )
    modes = basis.modes
    d1 = np.column_stack(
        [compact_first_derivative(modes[:, k], grid) for k in range(basis.r)]
    )
    d2 = np.column_stack(
        [compact_second_derivative(modes[:, k], grid) for k in range(basis.r)]
    )
    linear = d2.T @ modes
    quadratic = -np.einsum("xi,xj,xk->ijk", modes, d1, modes)
    return GromOperators(linear, quadratic, float(nu))


def _rhs_raw(a: np.ndarray, ops: GromOperators) -> np.ndarray:
    # k-th component: nu * sum_i L[i,k] a_i + sum_ij N[i,j,k] a_i a_j.
    # The einsum runs as a single C-level pass, keeping the online cost
    # at the advertised O(R^3).
    return ops.nu * (a @ ops.linear) + np.einsum(
        "ijk,i,j->k", ops.quadratic, a, a
    )


def grom_rhs(state: ModalState, ops: GromOperators) -> np.ndarray:
    """Tensorial right-hand side of the modal ODE system."""
    if state.a.shape != (ops.r,):
        raise ValueError(
            f"state has {state.a.shape[0]} coefficients, operators expect {ops.r}"
        )
    out = _rhs_raw(state.a, ops)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite modal rhs at t={state.t}")
    return out


def grom_step(state: ModalState, ops: GromOperators, dt: float) -> ModalState:
    """Advance the modal coefficients by one RK4 step of size dt."""
    if state.a.shape != (ops.r,):
        raise ValueError(
            f"state has {state.a.shape[0]} coefficients, operators expect {ops.r}"
        )
    a_next = rk4_step(lambda a: _rhs_raw(a, ops), state.a, dt)
    return ModalState(state.t + dt, a_next)


def save_operators(ops: GromOperators, path: str | Path) -> None:
    """Write operators to the flat binary format (k fastest in the tensor)."""
    with open(path, "wb") as f:
        f.write(OPERATORS_MAGIC)
        np.array([ops.r], dtype="<i8").tofile(f)
        np.array([ops.nu], dtype="<f8").tofile(f)
        ops.linear.astype("<f8").tofile(f)
        ops.quadratic.astype("<f8").tofile(f)


def load_operators(path: str | Path) -> GromOperators:
    """Read operators written by :func:`save_operators`."""
    with open(path, "rb") as f:
        magic = f.read(len(OPERATORS_MAGIC))
        if magic != OPERATORS_MAGIC:
            raise ValueError(f"{path}: not an operators file (bad magic {magic!r})")
        header = np.fromfile(f, dtype="<i8", count=1)
        nu_arr = np.fromfile(f, dtype="<f8", count=1)
        if header.size != 1 or nu_arr.size != 1:
            raise ValueError(f"{path}: truncated operators file")
        r = int(header[0])
        nu = float(nu_arr[0])
        linear = np.fromfile(f, dtype="<f8", count=r * r)
        quadratic = np.fromfile(f, dtype="<f8", count=r * r * r)
    if linear.size != r * r or quadratic.size != r * r * r:
        raise ValueError(f"{path}: truncated operators file")
    return GromOperators(
        linear.reshape((r, r)), quadratic.reshape((r, r, r)), nu
    )
