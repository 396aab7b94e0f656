"""Tests for the full-order Burgers solver and snapshot handling."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from romnudge.burgers import (
    FieldState,
    FomConfig,
    SnapshotSet,
    burgers_rhs,
    load_snapshots,
    save_snapshots,
    solve_fom,
    square_wave_ic,
)
from romnudge.numerics import UniformGrid, compact_second_derivative


@pytest.fixture(scope="module")
def small_run():
    """Re=100 run on a coarse grid, enough steps for the shock to form."""
    grid = UniformGrid.unit(129)
    cfg = FomConfig(nu=0.01, grid=grid, dt=1e-3, t_final=0.2, snapshot_stride=20)
    return cfg, solve_fom(cfg, square_wave_ic(grid))


class TestFomConfig:
    def test_misaligned_t_final_rejected(self):
        grid = UniformGrid.unit(65)
        with pytest.raises(ValueError):
            FomConfig(nu=0.01, grid=grid, dt=0.3, t_final=1.0, snapshot_stride=1)

    def test_stride_not_dividing_rejected(self):
        grid = UniformGrid.unit(65)
        with pytest.raises(ValueError):
            FomConfig(nu=0.01, grid=grid, dt=1e-3, t_final=0.2, snapshot_stride=30)

    def test_nonpositive_params_rejected(self):
        grid = UniformGrid.unit(65)
        for bad in (dict(nu=0.0), dict(dt=-1e-3), dict(t_final=0.0), dict(snapshot_stride=0)):
            kw = dict(nu=0.01, grid=grid, dt=1e-3, t_final=0.2, snapshot_stride=20)
            kw.update(bad)
            with pytest.raises(ValueError):
                FomConfig(**kw)


class TestFieldState:
    def test_boundary_violation_rejected(self):
        with pytest.raises(ValueError):
            FieldState(0.0, np.ones(8))

    def test_nonfinite_rejected(self):
        u = np.zeros(8)
        u[3] = np.nan
        with pytest.raises(ValueError):
            FieldState(0.0, u)


class TestSquareWaveIc:
    def test_plateau_and_tail_values(self):
        grid = UniformGrid.unit(9)
        state = square_wave_ic(grid)
        x = grid.x
        assert state.u[x == 0.25][0] == 1.0
        assert state.u[x == 0.75][0] == 0.0
        assert state.u[x == 0.5][0] == 1.0

    def test_wall_values(self):
        state = square_wave_ic(UniformGrid.unit(9))
        assert state.u[0] == 0.0
        assert state.u[-1] == 0.0


class TestBurgersRhs:
    def test_zero_field(self):
        grid = UniformGrid.unit(33)
        cfg = FomConfig(nu=0.01, grid=grid, dt=1e-3, t_final=0.1, snapshot_stride=10)
        out = burgers_rhs(FieldState(0.0, np.zeros(33)), cfg)
        assert_allclose(out, np.zeros(33))

    def test_sine_field_analytic(self):
        """For u = sin(pi x), nu = 1 the right-hand side has a closed form."""
        grid = UniformGrid.unit(257)
        x = grid.x
        cfg = FomConfig(nu=1.0, grid=grid, dt=1e-5, t_final=1e-3, snapshot_stride=10)
        u = np.sin(np.pi * x)
        u[-1] = 0.0
        out = burgers_rhs(FieldState(0.0, u), cfg)
        # u u_x = (pi/2) sin(2 pi x), in both splitting branches
        exact = -np.pi**2 * np.sin(np.pi * x) - 0.5 * np.pi * np.sin(2.0 * np.pi * x)
        assert np.max(np.abs(out[1:-1] - exact[1:-1])) < 1e-5

    def test_small_amplitude_is_diffusion_dominated(self):
        """At amplitude 1e-3 the quadratic term is negligible against nu u_xx."""
        grid = UniformGrid.unit(257)
        u = 1e-3 * np.sin(np.pi * grid.x)
        u[-1] = 0.0
        cfg = FomConfig(nu=1.0, grid=grid, dt=1e-5, t_final=1e-3, snapshot_stride=10)
        out = burgers_rhs(FieldState(0.0, u), cfg)
        diffusion = cfg.nu * compact_second_derivative(u, grid)
        diffusion[0] = diffusion[-1] = 0.0
        rel = np.max(np.abs(out - diffusion)) / np.max(np.abs(diffusion))
        assert rel < 0.002

    def test_wrong_grid_rejected(self):
        cfg = FomConfig(nu=0.01, grid=UniformGrid.unit(33), dt=1e-3, t_final=0.1,
                        snapshot_stride=10)
        with pytest.raises(ValueError):
            burgers_rhs(FieldState(0.0, np.zeros(17)), cfg)


class TestSolveFom:
    def test_snapshot_count_and_times(self, small_run):
        cfg, snaps = small_run
        assert snaps.n_snapshots == cfg.n_steps // cfg.snapshot_stride + 1
        assert_allclose(snaps.times, np.linspace(0.0, cfg.t_final, snaps.n_snapshots),
                        atol=1e-12)

    def test_dirichlet_exact_at_every_snapshot(self, small_run):
        _, snaps = small_run
        assert np.all(snaps.fields[0, :] == 0.0)
        assert np.all(snaps.fields[-1, :] == 0.0)

    def test_energy_nonincreasing(self, small_run):
        cfg, snaps = small_run
        energy = cfg.grid.spacing * np.sum(snaps.fields**2, axis=0)
        assert np.all(np.diff(energy) <= 1e-14)

    def test_solution_bounded(self, small_run):
        _, snaps = small_run
        assert snaps.fields.min() >= -0.05
        assert snaps.fields.max() <= 1.05

    def test_front_moves_right(self, small_run):
        """The half-height point of the shock advects toward larger x."""
        cfg, snaps = small_run
        x = cfg.grid.x

        def front(col):
            above = np.where(snaps.fields[:, col] > 0.5)[0]
            return x[above[-1]]

        assert front(snaps.n_snapshots - 1) > front(0)

    def test_high_viscosity_decay(self):
        """At Re=1 the square wave is nearly gone by t=1."""
        grid = UniformGrid.unit(65)
        cfg = FomConfig(nu=1.0, grid=grid, dt=1e-4, t_final=1.0, snapshot_stride=1000)
        snaps = solve_fom(cfg, square_wave_ic(grid))
        assert np.max(np.abs(snaps.fields[:, -1])) < 0.1

    def test_dt_refinement(self):
        """Halving dt changes the final field by far less than 1e-6 RMS."""
        grid = UniformGrid.unit(257)
        ic = square_wave_ic(grid)
        finals = []
        for dt in (2e-4, 1e-4):
            cfg = FomConfig(nu=5e-3, grid=grid, dt=dt, t_final=0.05,
                            snapshot_stride=round(0.05 / dt))
            finals.append(solve_fom(cfg, ic).fields[:, -1])
        rms = np.sqrt(np.mean((finals[0] - finals[1]) ** 2))
        assert rms < 1e-6

    def test_blowup_aborts(self):
        grid = UniformGrid.unit(65)
        cfg = FomConfig(nu=1e-4, grid=grid, dt=0.5, t_final=5.0, snapshot_stride=1)
        with pytest.raises(FloatingPointError):
            solve_fom(cfg, square_wave_ic(grid))


class TestSnapshotIo:
    def test_round_trip(self, small_run, tmp_path):
        _, snaps = small_run
        path = tmp_path / "run.snap"
        save_snapshots(snaps, path)
        back = load_snapshots(path)
        np.testing.assert_array_equal(back.times, snaps.times)
        np.testing.assert_array_equal(back.fields, snaps.fields)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.snap"
        path.write_bytes(b"NOTASNAP" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            load_snapshots(path)

    def test_truncated_file_rejected(self, small_run, tmp_path):
        _, snaps = small_run
        path = tmp_path / "run.snap"
        save_snapshots(snaps, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ValueError, match="truncated"):
            load_snapshots(path)


class TestSnapshotSetValidation:
    def test_nonmonotone_times_rejected(self):
        fields = np.zeros((8, 3))
        with pytest.raises(ValueError):
            SnapshotSet(np.array([0.0, 0.2, 0.1]), fields)

    def test_boundary_violation_rejected(self):
        fields = np.ones((8, 2))
        with pytest.raises(ValueError):
            SnapshotSet(np.array([0.0, 0.1]), fields)
