"""Twin-experiment machinery: sparse noisy observations, training-set assembly,
and the corrected reduced-order forecast loops."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .burgers import SnapshotSet
from .grom import GromOperators, grom_step
from .lstm import KNOWN_OBSERVABLES, LstmNetwork, TrainingSet, predict_correction
from .pod import ModalState, PodBasis, project, reconstruct
from .rng import standard_normal

__all__ = [
    "ObservationOperator",
    "NoiseModel",
    "ObservationRecord",
    "RunResult",
    "equally_spaced_sensors",
    "sample_sensors",
    "perturb_field",
    "observe_snapshots",
    "build_training_set",
    "lstm_nudge_run",
    "gain_nudge_run",
    "rmse_series",
    "write_trajectory_csv",
    "write_rmse_csv",
    "write_field_csv",
]

_TIME_ATOL = 1e-9


def equally_spaced_sensors(n_points: int, s_freq: int) -> np.ndarray:
    """Sensor grid indices 0, s_freq, 2 s_freq, ... below n_points."""
    if s_freq < 1:
        raise ValueError(f"sensor spacing must be at least 1, got {s_freq}")
    return np.arange(0, n_points, s_freq)


@dataclass(frozen=True)
class ObservationOperator:
    """What is measured, where, and how often.

    Attributes
    ----------
    sensor_indices : numpy.ndarray
        Strictly increasing grid indices of the sensors.
    quantity : str
        "velocity" or "velocity_squared".
    t_freq : int
        Reduced-model steps between measurement signals.
    """

    sensor_indices: np.ndarray
    quantity: str
    t_freq: int

    def __post_init__(self) -> None:
        idx = self.sensor_indices
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("sensor_indices must be a nonempty vector")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("sensor_indices must be strictly increasing")
        if idx[0] < 0:
            raise ValueError("sensor_indices must be nonnegative")
        if self.quantity not in KNOWN_OBSERVABLES:
            raise ValueError(f"unknown observed quantity {self.quantity!r}")
        if self.t_freq < 1:
            raise ValueError(f"t_freq must be at least 1, got {self.t_freq}")

    @property
    def n_sensors(self) -> int:
        return self.sensor_indices.size


@dataclass(frozen=True)
class NoiseModel:
    """Standard deviations of the initial-state and measurement noise."""

    sigma_b: float
    sigma_m: float
    seed: int

    def __post_init__(self) -> None:
        if self.sigma_b < 0.0 or self.sigma_m < 0.0:
            raise ValueError("noise standard deviations must be nonnegative")


@dataclass(frozen=True)
class ObservationRecord:
    """Noisy sensor readings at the measurement instants tau, 2 tau, ..."""

    times: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        if self.times.ndim != 1 or self.z.ndim != 2:
            raise ValueError("times must be 1-D and z 2-D")
        if self.z.shape[0] != self.times.size:
            raise ValueError(
                f"{self.z.shape[0]} measurement rows for {self.times.size} times"
            )
        if self.times.size and np.any(np.diff(self.times) <= 0.0):
            raise ValueError("observation times must be strictly increasing")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.z))):
            raise ValueError("observation record must be finite")

    @property
    def n_times(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class RunResult:
    """Trajectories and field-space errors of one assimilation experiment.

    The three trajectories share the time axis: the projection of the
    reference run (the best the basis can do), the uncorrected forecast,
    and the corrected forecast.  nudge_events holds one row per
    correction: (t, rmse before, rmse after).
    """

    times: np.ndarray
    true_projection: np.ndarray
    background: np.ndarray
    nudged: np.ndarray
    rmse_true_projection: np.ndarray
    rmse_background: np.ndarray
    rmse_nudged: np.ndarray
    nudge_events: np.ndarray
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = self.times.size
        for name in ("true_projection", "background", "nudged"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} trajectory length mismatch")
        for name in ("rmse_true_projection", "rmse_background", "rmse_nudged"):
            series = getattr(self, name)
            if series.shape != (n,):
                raise ValueError(f"{name} length mismatch")
            if np.any(series < 0.0) or not np.all(np.isfinite(series)):
                raise ValueError(f"{name} must be finite and nonnegative")
        if self.nudge_events.ndim != 2 or self.nudge_events.shape[1] != 3:
            raise ValueError("nudge_events must have rows (t, before, after)")


def sample_sensors(u: np.ndarray, op: ObservationOperator, noise: NoiseModel,
                   rng: np.random.Generator) -> np.ndarray:
    """Gather the observed quantity at the sensors and add measurement noise."""
    u = np.asarray(u, dtype=float)
    if op.sensor_indices[-1] >= u.size:
        raise ValueError(
            f"sensor index {op.sensor_indices[-1]} outside field of {u.size} points"
        )
    values = u[op.sensor_indices]
    if op.quantity == "velocity_squared":
        values = values**2
    if noise.sigma_m == 0.0:
        return values
    return values + noise.sigma_m * standard_normal(rng, op.n_sensors)


def perturb_field(u: np.ndarray, noise: NoiseModel,
                  rng: np.random.Generator) -> np.ndarray:
    """Add independent Gaussian noise of std sigma_b to every grid point."""
    u = np.asarray(u, dtype=float)
    if noise.sigma_b == 0.0:
        return u.copy()
    return u + noise.sigma_b * standard_normal(rng, u.size)


def observe_snapshots(snapshots: SnapshotSet, op: ObservationOperator,
                      noise: NoiseModel,
                      rng: np.random.Generator) -> ObservationRecord:
    """Manufacture the measurement stream from truth snapshots.

    Every t_freq-th snapshot after the initial one is observed, so the
    record covers {tau, 2 tau, ..., T}.
    """
    picks = np.arange(op.t_freq, snapshots.n_snapshots, op.t_freq)
    if picks.size == 0:
        raise ValueError("no snapshots fall on the measurement schedule")
    rows = [sample_sensors(snapshots.fields[:, k], op, noise, rng)
            for k in picks]
    return ObservationRecord(snapshots.times[picks], np.array(rows))


def _window_spacing(times: np.ndarray) -> float:
    """Spacing of a uniform time grid, validated."""
    if times.size < 2:
        raise ValueError("need at least two snapshot times")
    tau = times[1] - times[0]
    if not np.allclose(np.diff(times), tau, rtol=0.0, atol=_TIME_ATOL):
        raise ValueError("snapshot times are not uniformly spaced")
    return float(tau)


def build_training_set(snapshots: SnapshotSet, basis: PodBasis,
                       ops: GromOperators, obs_op: ObservationOperator,
                       noise: NoiseModel, ensemble_size: int,
                       rng: np.random.Generator) -> TrainingSet:
    """Assemble (background, measurement) -> correction training pairs.

    For every ensemble member and every measurement window the truth
    snapshot at the window start is perturbed, projected, and integrated
    t_freq reduced steps; the resulting background coefficients plus the
    noisy measurements at the window end form one input row, and the
    projection mismatch there is the target.

    The snapshots must be sampled exactly at {0, tau, ..., T}.
    """
    if ensemble_size < 1:
        raise ValueError("ensemble_size must be at least 1")
    if basis.n_points != snapshots.fields.shape[0]:
        raise ValueError("basis and snapshots disagree on grid size")
    tau = _window_spacing(snapshots.times)
    if abs(snapshots.times[0]) > _TIME_ATOL:
        raise ValueError("snapshot times must start at 0")
    dt_rom = tau / obs_op.t_freq
    n_windows = snapshots.n_snapshots - 1

    # Separate child streams keep the initial-state draws independent of
    # the measurement draws.
    rng_b, rng_m = rng.spawn(2)

    # Contiguous copies so truth and perturbed fields take the same BLAS
    # path; with zero noise the two projections are then bitwise equal.
    truth_coeffs = [project(snapshots.fields[:, n].copy(), basis).a
                    for n in range(snapshots.n_snapshots)]
    inputs = np.empty((ensemble_size * n_windows,
                       basis.r + obs_op.n_sensors))
    targets = np.empty((ensemble_size * n_windows, basis.r))
    row = 0
    for _ in range(ensemble_size):
        for n in range(n_windows):
            u_err = perturb_field(snapshots.fields[:, n], noise, rng_b)
            state = ModalState(float(snapshots.times[n]), project(u_err, basis).a)
            for _ in range(obs_op.t_freq):
                state = grom_step(state, ops, dt_rom)
            z = sample_sensors(snapshots.fields[:, n + 1], obs_op, noise, rng_m)
            inputs[row, :basis.r] = state.a
            inputs[row, basis.r:] = z
            targets[row] = truth_coeffs[n + 1] - state.a
            row += 1
    return TrainingSet(inputs, targets)


def rmse_series(reference_fields: np.ndarray,
                reconstructed_fields: np.ndarray) -> np.ndarray:
    """Column-wise root-mean-square mismatch between two field histories."""
    if reference_fields.shape != reconstructed_fields.shape:
        raise ValueError(
            f"field shapes differ: {reference_fields.shape} vs "
            f"{reconstructed_fields.shape}"
        )
    diff = reference_fields - reconstructed_fields
    return np.sqrt(np.mean(diff**2, axis=0))


def _rmse_single(reference: np.ndarray, reconstructed: np.ndarray) -> float:
    return float(np.sqrt(np.mean((reference - reconstructed) ** 2)))


def _scheduled_observations(obs: ObservationRecord, times: np.ndarray,
                            t_freq: int) -> dict[int, np.ndarray]:
    """Map correction step -> measurement row, insisting on full coverage."""
    steps = range(t_freq, times.size, t_freq)
    table = {}
    for pos, step in enumerate(steps):
        expected = times[step]
        if pos >= obs.n_times or abs(obs.times[pos] - expected) > _TIME_ATOL:
            raise ValueError(f"missing observation at t={expected!r}")
        table[step] = obs.z[pos]
    return table


def _assimilation_run(a0: ModalState, ops: GromOperators, basis: PodBasis,
                      obs: ObservationRecord, obs_op: ObservationOperator,
                      reference: SnapshotSet, correct, echo: dict) -> RunResult:
    """March background and corrected trajectories against a reference run."""
    if a0.a.shape != (basis.r,) or ops.r != basis.r:
        raise ValueError("initial state, basis, and operators disagree on R")
    if reference.fields.shape[0] != basis.n_points:
        raise ValueError("reference snapshots do not match the basis grid")
    times = reference.times
    dt = _window_spacing(times)
    if abs(a0.t - times[0]) > _TIME_ATOL:
        raise ValueError("initial state time does not match the reference")
    table = _scheduled_observations(obs, times, obs_op.t_freq)

    n_steps = times.size - 1
    r = basis.r
    nudged = np.empty((n_steps + 1, r))
    background = np.empty((n_steps + 1, r))
    nudged[0] = background[0] = a0.a
    events = []

    state = a0
    free_state = a0
    for step in range(1, n_steps + 1):
        free_state = grom_step(free_state, ops, dt)
        background[step] = free_state.a
        a_b = grom_step(state, ops, dt)
        if step in table:
            truth = reference.fields[:, step]
            before = _rmse_single(truth, reconstruct(a_b, basis))
            state = ModalState(a_b.t, a_b.a + correct(a_b, table[step]))
            after = _rmse_single(truth, reconstruct(state, basis))
            events.append((times[step], before, after))
        else:
            state = a_b
        nudged[step] = state.a

    true_projection = np.column_stack(
        [project(reference.fields[:, k], basis).a for k in range(times.size)]
    ).T
    recon = {
        "true_projection": true_projection,
        "background": background,
        "nudged": nudged,
    }
    rmse = {}
    for name, traj in recon.items():
        fields = basis.modes @ traj.T
        rmse[name] = rmse_series(reference.fields, fields)
    return RunResult(
        times=times.copy(),
        true_projection=true_projection,
        background=background,
        nudged=nudged,
        rmse_true_projection=rmse["true_projection"],
        rmse_background=rmse["background"],
        rmse_nudged=rmse["nudged"],
        nudge_events=np.array(events).reshape(-1, 3),
        config_echo=echo,
    )


def lstm_nudge_run(a0: ModalState, ops: GromOperators, basis: PodBasis,
                   obs: ObservationRecord, obs_op: ObservationOperator,
                   net: LstmNetwork, reference: SnapshotSet) -> RunResult:
    """Forecast with learned corrections at every measurement instant.

    Between instants the trajectory is the pure reduced-model iterate; at
    an instant the free step is corrected by the network's prediction from
    the background coefficients and the raw measurements.
    """
    if net.input_dim != basis.r + obs_op.n_sensors:
        raise ValueError(
            f"network expects {net.input_dim} features but run supplies "
            f"{basis.r + obs_op.n_sensors}"
        )
    if net.output_dim != basis.r:
        raise ValueError("network output dimension does not match the basis")
    echo = {"corrector": "lstm", "t_freq": obs_op.t_freq,
            "quantity": obs_op.quantity, "n_sensors": obs_op.n_sensors,
            "r": basis.r}
    return _assimilation_run(
        a0, ops, basis, obs, obs_op, reference,
        lambda a_b, z: predict_correction(net, a_b, z), echo,
    )


def gain_nudge_run(a0: ModalState, ops: GromOperators, basis: PodBasis,
                   obs: ObservationRecord, obs_op: ObservationOperator,
                   gain: np.ndarray, reference: SnapshotSet) -> RunResult:
    """Constant-gain baseline: correction = G (z - h(a_b)).

    h reconstructs the background field and samples the observed quantity
    at the sensors (the explicit innovation form).
    """
    gain = np.asarray(gain, dtype=float)
    if gain.shape != (basis.r, obs_op.n_sensors):
        raise ValueError(
            f"gain has shape {gain.shape}, expected "
            f"{(basis.r, obs_op.n_sensors)}"
        )

    def correct(a_b: ModalState, z: np.ndarray) -> np.ndarray:
        predicted = reconstruct(a_b, basis)[obs_op.sensor_indices]
        if obs_op.quantity == "velocity_squared":
            predicted = predicted**2
        return gain @ (z - predicted)

    echo = {"corrector": "gain", "t_freq": obs_op.t_freq,
            "quantity": obs_op.quantity, "n_sensors": obs_op.n_sensors,
            "r": basis.r}
    return _assimilation_run(a0, ops, basis, obs, obs_op, reference,
                             correct, echo)


def write_trajectory_csv(times: np.ndarray, coefficients: np.ndarray,
                         path: str | Path) -> None:
    """Emit one trajectory as rows (t, a_1, ..., a_R)."""
    r = coefficients.shape[1]
    lines = ["t," + ",".join(f"a_{k + 1}" for k in range(r))]
    for t, row in zip(times, coefficients):
        lines.append(f"{float(t)!r}," + ",".join(f"{float(v)!r}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_rmse_csv(times: np.ndarray, rmse_true_projection: np.ndarray,
                   rmse_background: np.ndarray, rmse_nudged: np.ndarray,
                   path: str | Path) -> None:
    """Emit the three error series side by side."""
    lines = ["t,rmse_true_projection,rmse_background,rmse_nudged"]
    for t, a, b, c in zip(times, rmse_true_projection, rmse_background,
                          rmse_nudged):
        lines.append(f"{float(t)!r},{float(a)!r},{float(b)!r},{float(c)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_field_csv(x: np.ndarray, u: np.ndarray, path: str | Path) -> None:
    """Emit a single field as rows (x, u)."""
    lines = ["x,u"]
    for xi, ui in zip(x, u):
        lines.append(f"{float(xi)!r},{float(ui)!r}")
    Path(path).write_text("\n".join(lines) + "\n")
