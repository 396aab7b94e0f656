"""Tests for basis extraction, projection, and reconstruction."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from romnudge.burgers import FomConfig, SnapshotSet, solve_fom, square_wave_ic
from romnudge.numerics import UniformGrid
from romnudge.pod import (
    ModalState,
    PodBasis,
    compute_basis,
    load_basis,
    project,
    reconstruct,
    save_basis,
)

RNG = np.random.default_rng(42)


def _zero_walled(v: np.ndarray) -> np.ndarray:
    """Zero the endpoints so vectors satisfy the snapshot wall condition."""
    out = v.copy()
    out[0] = 0.0
    out[-1] = 0.0
    return out


def _snapshot_set(fields: np.ndarray) -> SnapshotSet:
    return SnapshotSet(np.arange(fields.shape[1], dtype=float), fields)


@pytest.fixture(scope="module")
def burgers_basis():
    """Six-mode basis from a coarse Re=100 run."""
    grid = UniformGrid.unit(129)
    cfg = FomConfig(nu=0.01, grid=grid, dt=1e-3, t_final=0.5, snapshot_stride=20)
    snaps = solve_fom(cfg, square_wave_ic(grid))
    return snaps, compute_basis(snaps, 6)


class TestComputeBasis:
    def test_rank_one(self):
        v = _zero_walled(RNG.normal(size=40))
        basis = compute_basis(_snapshot_set(v[:, None]), 1)
        assert_allclose(basis.singular_values[0], np.linalg.norm(v), rtol=1e-12)
        aligned = basis.modes[:, 0] * np.sign(np.dot(basis.modes[:, 0], v))
        assert_allclose(aligned, v / np.linalg.norm(v), atol=1e-12)

    def test_synthetic_rank_two(self):
        """A = 3 q1 w1^T + q2 w2^T recovers sigma = [3, 1] and the q's."""
        m, n = 60, 9
        q, _ = np.linalg.qr(np.column_stack([_zero_walled(RNG.normal(size=m))
                                             for _ in range(2)]))
        # QR leaves O(1e-18) dust on the walled entries; restore exact zeros.
        q[0, :] = 0.0
        q[-1, :] = 0.0
        w, _ = np.linalg.qr(RNG.normal(size=(n, 2)))
        fields = 3.0 * np.outer(q[:, 0], w[:, 0]) + np.outer(q[:, 1], w[:, 1])
        basis = compute_basis(_snapshot_set(fields), 3)
        assert_allclose(basis.singular_values[:2], [3.0, 1.0], atol=1e-8)
        assert basis.singular_values[2] < 1e-6
        assert abs(np.dot(basis.modes[:, 0], q[:, 0])) == pytest.approx(1.0, abs=1e-8)
        assert abs(np.dot(basis.modes[:, 1], q[:, 1])) == pytest.approx(1.0, abs=1e-8)
        # The third mode is an orthonormal completion even though sigma_3
        # is pure round-off.
        gram = basis.modes.T @ basis.modes
        assert np.max(np.abs(gram - np.eye(3))) < 1e-10

    def test_rank_deficiency_warns_not_raises(self):
        cols = [_zero_walled(RNG.normal(size=12)) for _ in range(2)]
        fields = np.column_stack(cols + [np.zeros(12)])
        with pytest.warns(UserWarning, match="rank deficient"):
            basis = compute_basis(_snapshot_set(fields), 3)
        assert basis.singular_values[2] == 0.0

    def test_orthonormality(self, burgers_basis):
        _, basis = burgers_basis
        gram = basis.modes.T @ basis.modes
        assert np.max(np.abs(gram - np.eye(basis.r))) < 1e-10

    def test_singular_values_nonincreasing(self, burgers_basis):
        _, basis = burgers_basis
        assert np.all(np.diff(basis.singular_values) <= 1e-12 * basis.singular_values[0])

    def test_energy_fraction_nondecreasing_in_r(self, burgers_basis):
        snaps, _ = burgers_basis
        fractions = [compute_basis(snaps, r).retained_energy for r in (1, 3, 6)]
        assert fractions[0] <= fractions[1] <= fractions[2] <= 1.0 + 1e-12

    def test_sign_convention(self, burgers_basis):
        _, basis = burgers_basis
        for k in range(basis.r):
            peak = np.argmax(np.abs(basis.modes[:, k]))
            assert basis.modes[peak, k] > 0

    def test_r_out_of_range_rejected(self, burgers_basis):
        snaps, _ = burgers_basis
        with pytest.raises(ValueError):
            compute_basis(snaps, 0)
        with pytest.raises(ValueError):
            compute_basis(snaps, snaps.n_snapshots + 1)

    def test_deterministic(self, burgers_basis):
        snaps, basis = burgers_basis
        again = compute_basis(snaps, basis.r)
        np.testing.assert_array_equal(again.modes, basis.modes)


class TestProjectReconstruct:
    def test_project_single_mode(self, burgers_basis):
        _, basis = burgers_basis
        state = project(basis.modes[:, 1], basis)
        expected = np.zeros(basis.r)
        expected[1] = 1.0
        assert_allclose(state.a, expected, atol=1e-12)

    def test_project_linear_combination(self, burgers_basis):
        _, basis = burgers_basis
        u = 2.0 * basis.modes[:, 0] - basis.modes[:, 2]
        assert_allclose(project(u, basis).a, [2.0, 0.0, -1.0, 0.0, 0.0, 0.0], atol=1e-12)

    def test_zero_coefficients(self, burgers_basis):
        _, basis = burgers_basis
        assert_allclose(reconstruct(ModalState(0.0, np.zeros(basis.r)), basis),
                        np.zeros(basis.n_points))

    def test_round_trip_inside_span(self, burgers_basis):
        _, basis = burgers_basis
        u = basis.modes[:, 0]
        assert_allclose(reconstruct(project(u, basis), basis), u, atol=1e-12)

    def test_modal_round_trip_identity(self, burgers_basis):
        _, basis = burgers_basis
        a = RNG.normal(size=basis.r)
        back = project(reconstruct(ModalState(0.0, a), basis), basis).a
        assert_allclose(back, a, atol=1e-12)

    def test_projector_idempotent(self, burgers_basis):
        snaps, basis = burgers_basis
        u = snaps.fields[:, -1]
        once = reconstruct(project(u, basis), basis)
        twice = reconstruct(project(once, basis), basis)
        assert np.max(np.abs(twice - once)) < 1e-10

    def test_residual_nonincreasing_in_r(self, burgers_basis):
        snaps, _ = burgers_basis
        u = snaps.fields[:, -1]
        residuals = []
        for r in range(1, snaps.n_snapshots + 1):
            basis = compute_basis(snaps, r)
            residuals.append(np.linalg.norm(u - reconstruct(project(u, basis), basis)))
        assert all(b <= a + 1e-10 for a, b in zip(residuals, residuals[1:]))
        assert residuals[-1] < 1e-10 * np.linalg.norm(u)

    def test_full_rank_reconstruction_is_exact(self):
        """With a flat spectrum the r = N basis reproduces every snapshot."""
        m, n = 40, 7
        fields = np.column_stack([_zero_walled(RNG.normal(size=m))
                                  for _ in range(n)])
        snaps = _snapshot_set(fields)
        basis = compute_basis(snaps, n)
        for col in (0, 3, n - 1):
            u = snaps.fields[:, col]
            residual = np.linalg.norm(u - reconstruct(project(u, basis), basis))
            assert residual < 1e-10 * np.linalg.norm(u)

    def test_dimension_mismatch_rejected(self, burgers_basis):
        _, basis = burgers_basis
        with pytest.raises(ValueError):
            project(np.zeros(basis.n_points + 1), basis)
        with pytest.raises(ValueError):
            reconstruct(ModalState(0.0, np.zeros(basis.r + 1)), basis)


class TestBasisValidation:
    def test_non_orthonormal_rejected(self):
        modes = np.ones((10, 2))
        with pytest.raises(ValueError, match="orthonormal"):
            PodBasis(modes, np.array([2.0, 1.0]), 2)

    def test_increasing_singular_values_rejected(self):
        q, _ = np.linalg.qr(RNG.normal(size=(10, 2)))
        with pytest.raises(ValueError):
            PodBasis(q, np.array([1.0, 2.0]), 2)


class TestBasisIo:
    def test_round_trip(self, burgers_basis, tmp_path):
        _, basis = burgers_basis
        path = tmp_path / "basis.bin"
        save_basis(basis, path)
        back = load_basis(path)
        np.testing.assert_array_equal(back.modes, basis.modes)
        np.testing.assert_array_equal(back.singular_values, basis.singular_values)
        assert back.r == basis.r

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"WRONGMAG" + b"\x00" * 32)
        with pytest.raises(ValueError, match="magic"):
            load_basis(path)
