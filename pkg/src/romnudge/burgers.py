"""Full-order solver for the 1D viscous Burgers equation with Dirichlet walls."""

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

__all__ = [
    "FomConfig",
    "FieldState",
    "SnapshotSet",
    "square_wave_ic",
    "burgers_rhs",
    "solve_fom",
    "save_snapshots",
    "load_snapshots",
]

SNAPSHOT_MAGIC = b"RNSNAP1"

# Fields are physically O(1); anything beyond this is a diverging run.
BLOWUP_LIMIT = 1.0e3


@dataclass(frozen=True)
class FomConfig:
    """Parameters of a full-order run.

    Attributes
    ----------
    nu : float
        Kinematic viscosity (inverse Reynolds number).
    grid : UniformGrid
        Spatial grid.
    dt : float
        Time step.
    t_final : float
        End time of the simulation.
    snapshot_stride : int
        Number of steps between stored snapshots.
    """

    nu: float
    grid: UniformGrid
    dt: float
    t_final: float
    snapshot_stride: int

    def __post_init__(self) -> None:
        if self.nu <= 0:
            raise ValueError("viscosity must be positive")
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be at least 1")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-8 * max(steps, 1.0):
            raise ValueError(
                f"t_final {self.t_final} is not an integer number of steps of {self.dt}"
            )
        if round(steps) % self.snapshot_stride != 0:
            raise ValueError("snapshot stride does not divide the step count")

    @property
    def n_steps(self) -> int:
        return round(self.t_final / self.dt)


@dataclass(frozen=True)
class FieldState:
    """Velocity field on the grid at one time instant."""

    t: float
    u: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.u)):
            raise ValueError("field contains non-finite values")
        if self.u[0] != 0.0 or self.u[-1] != 0.0:
            raise ValueError("field violates the zero Dirichlet boundary values")


@dataclass(frozen=True)
class SnapshotSet:
    """Stored trajectory: column n of ``fields`` is the field at ``times[n]``."""

    times: np.ndarray
    fields: np.ndarray

    def __post_init__(self) -> None:
        if self.fields.ndim != 2 or self.times.size != self.fields.shape[1]:
            raise ValueError("times and snapshot columns disagree")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("snapshot times must be strictly increasing")
        if np.any(self.fields[0, :] != 0.0) or np.any(self.fields[-1, :] != 0.0):
            raise ValueError("snapshots violate the zero Dirichlet boundary values")

    @property
    def n_snapshots(self) -> int:
        return self.times.size

    def state(self, n: int) -> FieldState:
        """Return snapshot ``n`` as a FieldState."""
        return FieldState(float(self.times[n]), self.fields[:, n].copy())


def square_wave_ic(grid: UniformGrid) -> FieldState:
    """Unit square wave: one on (0, 0.5], zero elsewhere, zero at the walls."""
    x = grid.x
    u = np.where((x > 0.0) & (x <= 0.5), 1.0, 0.0)
    u[0] = 0.0
    u[-1] = 0.0
    return FieldState(0.0, u)


def _rhs_raw(u: np.ndarray, nu: float, grid: UniformGrid) -> np.ndarray:
    # Skew-symmetric splitting of u u_x: half advective, half conservative.
    du = compact_first_derivative(u, grid)
    duu = compact_first_derivative(u * u, grid)
    ddu = compact_second_derivative(u, grid)
    out = nu * ddu - 0.5 * u * du - 0.25 * duu
    out[0] = 0.0
    out[-1] = 0.0
    return out


def burgers_rhs(state: FieldState, cfg: FomConfig) -> np.ndarray:
    """Time derivative of the velocity field.

    Computes ``nu u_xx - (1/2) u u_x - (1/4) (u^2)_x`` with the compact
    derivative operators and zeroes the wall entries.
    """
    if state.u.size != cfg.grid.n_points:
        raise ValueError("state does not live on the configured grid")
    out = _rhs_raw(state.u, cfg.nu, cfg.grid)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite values in the Burgers right-hand side")
    return out


def solve_fom(cfg: FomConfig, ic: FieldState) -> SnapshotSet:
    """March the full-order model with RK4 and collect snapshots.

    The initial state is stored as the first column; afterwards every
    ``snapshot_stride``-th step is stored, so the result has
    ``n_steps / snapshot_stride + 1`` columns.

    Raises
    ------
    FloatingPointError
        If the solution exceeds the blow-up guard or turns non-finite.
    """
    if ic.u.size != cfg.grid.n_points:
        raise ValueError("initial condition does not live on the configured grid")
    n_steps = cfg.n_steps
    stride = cfg.snapshot_stride
    n_cols = n_steps // stride + 1
    fields = np.empty((cfg.grid.n_points, n_cols))
    times = np.empty(n_cols)

    u = np.array(ic.u, dtype=np.float64, copy=True)
    fields[:, 0] = u
    times[0] = ic.t
    rhs = lambda v: _rhs_raw(v, cfg.nu, cfg.grid)

    col = 1
    for step in range(1, n_steps + 1):
        u = rk4_step(rhs, u, cfg.dt)
        u[0] = 0.0
        u[-1] = 0.0
        peak = np.max(np.abs(u))
        if peak > BLOWUP_LIMIT:
            raise FloatingPointError(
                f"solution blow-up at step {step} "
                f"(t = {ic.t + step * cfg.dt:.6f}): max|u| = {peak:.3e}"
            )
        if step % stride == 0:
            fields[:, col] = u
            times[col] = ic.t + step * cfg.dt
            col += 1
    return SnapshotSet(times, fields)


def save_snapshots(snapshots: SnapshotSet, path: str | Path) -> None:
    """Write a snapshot set to the columnar binary format."""
    m, n = snapshots.fields.shape
    with open(path, "wb") as f:
        f.write(SNAPSHOT_MAGIC)
        np.array([m, n], dtype="<i8").tofile(f)
        snapshots.times.astype("<f8").tofile(f)
        snapshots.fields.astype("<f8").ravel(order="F").tofile(f)


def load_snapshots(path: str | Path) -> SnapshotSet:
    """Read a snapshot set written by :func:`save_snapshots`."""
    with open(path, "rb") as f:
        magic = f.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a snapshot file (bad magic {magic!r})")
        m, n = (int(v) for v in np.fromfile(f, dtype="<i8", count=2))
        times = np.fromfile(f, dtype="<f8", count=n)
        data = np.fromfile(f, dtype="<f8", count=m * n)
    if times.size != n or data.size != m * n:
        raise ValueError(f"{path}: truncated snapshot file")
    return SnapshotSet(times, data.reshape((m, n), order="F"))
