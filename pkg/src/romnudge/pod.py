"""Orthonormal basis extraction from snapshots and modal projections."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .burgers import SnapshotSet

__all__ = [
    "PodBasis",
    "ModalState",
    "compute_basis",
    "project",
    "reconstruct",
    "save_basis",
    "load_basis",
]

BASIS_MAGIC = b"RNBASIS1"

ORTHONORMALITY_TOL = 1e-10


@dataclass(frozen=True)
class PodBasis:
    """Truncated orthonormal modes with the full singular-value spectrum.

    Attributes
    ----------
    modes : ndarray
        M x R matrix whose columns are the retained spatial modes.
    singular_values : ndarray
        All N singular values of the snapshot matrix, nonincreasing.
    r : int
        Number of retained modes.
    """

    modes: np.ndarray
    singular_values: np.ndarray
    r: int

    def __post_init__(self) -> None:
        if self.modes.ndim != 2 or self.modes.shape[1] != self.r:
            raise ValueError("mode matrix does not match the retained count")
        if self.r > self.singular_values.size:
            raise ValueError("more retained modes than singular values")
        sv = self.singular_values
        if np.any(sv < 0) or np.any(np.diff(sv) > 1e-12 * max(sv[0], 1.0)):
            raise ValueError("singular values must be nonincreasing and nonnegative")
        gram = self.modes.T @ self.modes
        dev = np.max(np.abs(gram - np.eye(self.r)))
        if dev > ORTHONORMALITY_TOL:
            raise ValueError(f"modes not orthonormal (max deviation {dev:.2e})")

    @property
    def n_points(self) -> int:
        return self.modes.shape[0]

    @property
    def retained_energy(self) -> float:
        """Fraction of squared singular values captured by the first r modes."""
        total = float(np.sum(self.singular_values**2))
        kept = float(np.sum(self.singular_values[: self.r] ** 2))
        return kept / total if total > 0 else 1.0


@dataclass(frozen=True)
class ModalState:
    """Modal coefficient vector at one time instant."""

    t: float
    a: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.a)):
            raise ValueError("modal coefficients contain non-finite values")


def compute_basis(snapshots: SnapshotSet, r: int) -> PodBasis:
    """Extract the leading r modes by the method of snapshots.

    The N x N Gram matrix of the snapshot columns is diagonalized, the
    modes are recovered as A V / sigma, and a QR pass re-orthonormalizes
    them so the basis invariant holds even when trailing sigma values sit
    at the round-off floor.  Each mode's sign is then fixed so its entry
    of largest magnitude is positive, making bases reproducible.

    Parameters
    ----------
    snapshots : SnapshotSet
        Snapshot matrix supplier.
    r : int
        Number of modes to retain, 1 <= r <= N.

    Warns
    -----
    UserWarning
        When the snapshot matrix is numerically rank deficient below r.
    """
    a_mat = snapshots.fields
    n = a_mat.shape[1]
    if not 1 <= r <= n:
        raise ValueError(f"retained mode count {r} outside 1..{n}")
    gram = a_mat.T @ a_mat
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    sigma = np.sqrt(np.clip(evals[order], 0.0, None))
    evecs = evecs[:, order]
    if sigma[r - 1] < 1e-13 * sigma[0]:
        warnings.warn(
            f"snapshot matrix numerically rank deficient: sigma_{r} / sigma_1 = "
            f"{sigma[r - 1] / sigma[0]:.2e}",
            stacklevel=2,
        )
    denom = np.where(sigma[:r] > 0.0, sigma[:r], 1.0)
    modes = (a_mat @ evecs[:, :r]) / denom
    # Gram-route modes drift from orthonormality as sigma_k approaches the
    # round-off floor; QR restores it while moving well-conditioned modes
    # only at the eps level.
    modes, _ = np.linalg.qr(modes)
    peaks = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[peaks, np.arange(r)])
    signs[signs == 0] = 1.0
    return PodBasis(modes * signs, sigma, r)


def project(u: np.ndarray, basis: PodBasis, t: float = 0.0) -> ModalState:
    """Project a full field onto the modal subspace: a_k = dot(u, phi_k)."""
    u = np.asarray(u)
    if u.shape != (basis.n_points,):
        raise ValueError(f"field has shape {u.shape}, expected ({basis.n_points},)")
    return ModalState(t, basis.modes.T @ u)


def reconstruct(state: ModalState, basis: PodBasis) -> np.ndarray:
    """Superpose modes with the given coefficients: u = sum_k a_k phi_k."""
    if state.a.shape != (basis.r,):
        raise ValueError(f"coefficients have shape {state.a.shape}, expected ({basis.r},)")
    return basis.modes @ state.a


def save_basis(basis: PodBasis, path: str | Path) -> None:
    """Write a basis to the binary format."""
    m = basis.n_points
    n = basis.singular_values.size
    with open(path, "wb") as f:
        f.write(BASIS_MAGIC)
        np.array([m, n, basis.r], dtype="<i8").tofile(f)
        basis.singular_values.astype("<f8").tofile(f)
        basis.modes.astype("<f8").ravel(order="F").tofile(f)


def load_basis(path: str | Path) -> PodBasis:
    """Read a basis written by :func:`save_basis`."""
    with open(path, "rb") as f:
        magic = f.read(len(BASIS_MAGIC))
        if magic != BASIS_MAGIC:
            raise ValueError(f"{path}: not a basis file (bad magic {magic!r})")
        m, n, r = (int(v) for v in np.fromfile(f, dtype="<i8", count=3))
        sigma = np.fromfile(f, dtype="<f8", count=n)
        data = np.fromfile(f, dtype="<f8", count=m * r)
    if sigma.size != n or data.size != m * r:
        raise ValueError(f"{path}: truncated basis file")
    return PodBasis(data.reshape((m, r), order="F"), sigma, r)
