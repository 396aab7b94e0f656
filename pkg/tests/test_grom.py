"""Tests for the Galerkin operators and the modal time stepper."""

import itertools
import time
from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from romnudge.grom import (
    GromOperators,
    grom_rhs,
    grom_step,
    load_operators,
    precompute_operators,
    save_operators,
)
from romnudge.numerics import UniformGrid, compact_first_derivative
from romnudge.pod import ModalState, PodBasis

RNG = np.random.default_rng(198273)


def _sine_basis(m):
    """Two discrete-normalized sine modes on the unit grid."""
    grid = UniformGrid.unit(m)
    cols = []
    for k in (1, 2):
        s = np.sin(k * np.pi * grid.x)
        s[-1] = 0.0
        cols.append(s / np.linalg.norm(s))
    return grid, PodBasis(np.column_stack(cols), np.array([1.0, 1.0]), 2)


@pytest.fixture(scope="module")
def sine_ops():
    grid, basis = _sine_basis(257)
    return grid, basis, precompute_operators(basis, grid, nu=0.01)


def _random_ops(r, nu=0.5):
    return GromOperators(RNG.normal(size=(r, r)), RNG.normal(size=(r, r, r)), nu)


class TestGromOperatorsValidation:
    def test_nonsquare_linear_rejected(self):
        with pytest.raises(ValueError):
            GromOperators(np.zeros((3, 4)), np.zeros((3, 3, 3)), 0.1)

    def test_wrong_tensor_shape_rejected(self):
        with pytest.raises(ValueError):
            GromOperators(np.zeros((3, 3)), np.zeros((3, 3, 2)), 0.1)

    def test_nonfinite_entries_rejected(self):
        quad = np.zeros((2, 2, 2))
        quad[1, 0, 1] = np.nan
        with pytest.raises(ValueError):
            GromOperators(np.zeros((2, 2)), quad, 0.1)

    def test_negative_viscosity_rejected(self):
        with pytest.raises(ValueError):
            GromOperators(np.zeros((2, 2)), np.zeros((2, 2, 2)), -1e-4)


class TestPrecomputeOperators:
    def test_sine_linear_diagonal(self, sine_ops):
        """Sine modes are eigenfunctions: L is diag(-(k pi)^2) up to truncation."""
        _, _, ops = sine_ops
        for k in (1, 2):
            target = -((k * np.pi) ** 2)
            rel = abs(ops.linear[k - 1, k - 1] - target) / abs(target)
            assert rel < 1e-3
        assert abs(ops.linear[0, 1]) < 1e-3 * np.pi**2
        assert abs(ops.linear[1, 0]) < 1e-3 * np.pi**2

    def test_quadratic_matches_direct_evaluation(self, sine_ops):
        grid, basis, ops = sine_ops
        d1 = np.column_stack(
            [compact_first_derivative(basis.modes[:, j], grid) for j in range(2)]
        )
        for i, j, k in itertools.product(range(2), repeat=3):
            ref = np.dot(-basis.modes[:, i] * d1[:, j], basis.modes[:, k])
            assert ops.quadratic[i, j, k] == pytest.approx(ref, abs=1e-13)

    def test_quadratic_quadrature_crosscheck(self, sine_ops):
        """Entries agree with fine-grid integrals of the continuous modes."""
        grid, basis, ops = sine_ops
        norms = [np.linalg.norm(np.sin(k * np.pi * grid.x)) for k in (1, 2)]
        xf = np.linspace(0.0, 1.0, 200001)
        for i, j, k in itertools.product(range(2), repeat=3):
            integrand = (
                -(np.sin((i + 1) * np.pi * xf) / norms[i])
                * ((j + 1) * np.pi * np.cos((j + 1) * np.pi * xf) / norms[j])
                * (np.sin((k + 1) * np.pi * xf) / norms[k])
            )
            quad = np.trapezoid(integrand, xf) / grid.spacing
            assert ops.quadratic[i, j, k] == pytest.approx(quad, abs=1e-6)

    def test_zero_mode_rows_and_columns_vanish(self):
        # A genuine PodBasis cannot hold a zero mode (orthonormality), so a
        # bare stand-in carries the padded basis here.
        grid, basis = _sine_basis(65)
        padded = SimpleNamespace(
            modes=np.column_stack([basis.modes, np.zeros(65)]),
            r=3,
            n_points=65,
        )
        ops = precompute_operators(padded, grid, nu=0.01)
        assert np.all(ops.linear[2, :] == 0.0)
        assert np.all(ops.linear[:, 2] == 0.0)
        assert np.all(ops.quadratic[2, :, :] == 0.0)
        assert np.all(ops.quadratic[:, 2, :] == 0.0)
        assert np.all(ops.quadratic[:, :, 2] == 0.0)

    def test_grid_mismatch_rejected(self, sine_ops):
        _, basis, _ = sine_ops
        with pytest.raises(ValueError):
            precompute_operators(basis, UniformGrid.unit(129), nu=0.01)


class TestGromRhs:
    def test_zero_state(self):
        ops = _random_ops(4)
        out = grom_rhs(ModalState(0.0, np.zeros(4)), ops)
        assert_allclose(out, np.zeros(4))

    def test_linear_only_decay(self):
        lam = np.array([-1.0, -2.5, 0.5])
        ops = GromOperators(np.diag(lam), np.zeros((3, 3, 3)), 0.25)
        a = np.array([2.0, -1.0, 4.0])
        out = grom_rhs(ModalState(0.0, a), ops)
        assert_allclose(out, 0.25 * lam * a, rtol=1e-14)

    def test_matches_triple_loop(self):
        """The contracted rhs equals the naive three-index summation."""
        r = 3
        ops = _random_ops(r, nu=0.37)
        a = RNG.normal(size=r)
        got = grom_rhs(ModalState(0.0, a), ops)
        ref = np.zeros(r)
        for k in range(r):
            for i in range(r):
                ref[k] += ops.nu * ops.linear[i, k] * a[i]
                for j in range(r):
                    ref[k] += ops.quadratic[i, j, k] * a[i] * a[j]
        assert_allclose(got, ref, rtol=1e-12, atol=1e-12)

    def test_energy_conserved_by_skew_tensor(self):
        """nu = 0 with a symmetrization-free tensor gives dot(a, f(a)) = 0."""
        r = 4
        raw = RNG.normal(size=(r, r, r))
        sym = np.zeros_like(raw)
        for perm in itertools.permutations(range(3)):
            sym += np.transpose(raw, perm)
        ops = GromOperators(RNG.normal(size=(r, r)), raw - sym / 6.0, 0.0)
        for _ in range(5):
            a = RNG.normal(size=r)
            assert abs(np.dot(a, grom_rhs(ModalState(0.0, a), ops))) < 1e-12

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            grom_rhs(ModalState(0.0, np.zeros(3)), _random_ops(4))

    def test_overflow_raises(self):
        ops = _random_ops(3)
        with pytest.raises(FloatingPointError):
            grom_rhs(ModalState(0.0, np.full(3, 1e200)), ops)


class TestOnlineCost:
    def test_rhs_work_scales_cubically(self):
        """Doubling R makes one rhs evaluation roughly 8x more expensive."""

        def best_time(r, calls=60):
            ops = GromOperators(
                RNG.normal(size=(r, r)) * 0.01,
                RNG.normal(size=(r, r, r)) * 0.01,
                0.5,
            )
            state = ModalState(0.0, RNG.normal(size=r) * 0.01)
            grom_rhs(state, ops)
            best = np.inf
            for _ in range(calls):
                start = time.perf_counter()
                grom_rhs(state, ops)
                best = min(best, time.perf_counter() - start)
            return best

        ratio = best_time(192) / best_time(96)
        assert 8.0 / 1.3 < ratio < 8.0 * 1.3


class TestGromStep:
    def test_zero_dynamics_identity(self):
        ops = GromOperators(np.zeros((3, 3)), np.zeros((3, 3, 3)), 0.1)
        a = np.array([1.0, -2.0, 0.5])
        out = grom_step(ModalState(0.3, a), ops, 0.01)
        assert_allclose(out.a, a)
        assert out.t == pytest.approx(0.31)

    def test_exponential_decay_oracle(self):
        """A diagonal linear system integrates to exp(nu lam t) at RK4 accuracy."""
        lam = np.array([-1.0, -4.0])
        ops = GromOperators(np.diag(lam), np.zeros((2, 2, 2)), 0.5)
        state = ModalState(0.0, np.array([1.0, 2.0]))
        for _ in range(100):
            state = grom_step(state, ops, 0.01)
        exact = np.array([1.0, 2.0]) * np.exp(0.5 * lam)
        assert_allclose(state.a, exact, rtol=1e-7)
        assert state.t == pytest.approx(1.0)

    def test_nonpositive_dt_rejected(self):
        ops = _random_ops(2)
        with pytest.raises(ValueError):
            grom_step(ModalState(0.0, np.zeros(2)), ops, 0.0)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            grom_step(ModalState(0.0, np.zeros(5)), _random_ops(4), 0.01)


class TestOperatorsIo:
    def test_round_trip(self, tmp_path):
        ops = _random_ops(5, nu=0.0137)
        target = tmp_path / "ops.bin"
        save_operators(ops, target)
        back = load_operators(target)
        assert back.r == 5
        assert back.nu == ops.nu
        assert np.array_equal(back.linear, ops.linear)
        assert np.array_equal(back.quadratic, ops.quadratic)

    def test_bad_magic_rejected(self, tmp_path):
        target = tmp_path / "ops.bin"
        target.write_bytes(b"NOTGROM" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            load_operators(target)

    def test_truncated_rejected(self, tmp_path):
        ops = _random_ops(4)
        target = tmp_path / "ops.bin"
        save_operators(ops, target)
        data = target.read_bytes()
        target.write_bytes(data[: len(data) // 2])
        with pytest.raises(ValueError, match="truncated"):
            load_operators(target)
