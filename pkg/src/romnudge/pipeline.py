"""Staged experiment driver: full-order run, basis extraction, training,
and the assimilation experiment, with content-hash caching of artifacts."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assimilation import (
    NoiseModel,
    ObservationOperator,
    build_training_set,
    equally_spaced_sensors,
    lstm_nudge_run,
    observe_snapshots,
    perturb_field,
    write_field_csv,
    write_rmse_csv,
    write_trajectory_csv,
)
from .burgers import (
    FomConfig,
    SnapshotSet,
    load_snapshots,
    save_snapshots,
    solve_fom,
    square_wave_ic,
)
from .config import ExperimentConfig
from .grom import load_operators, precompute_operators, save_operators
from .lstm import (
    TrainingConfig,
    initialize_network,
    load_network,
    save_network,
    train,
    write_loss_history,
)
from .numerics import UniformGrid
from .pod import compute_basis, load_basis, project, save_basis
from .rng import substream

__all__ = [
    "HIDDEN_DIM",
    "STAGES",
    "StageError",
    "ExperimentReport",
    "run_pipeline",
    "write_report",
    "load_report",
    "aggregate_reports",
]

# One LSTM layer of this width is ample for the R + n_sensors -> R map.
HIDDEN_DIM = 40

STAGES = ("fom", "pod", "train", "assimilate")

_STAGE_FILES = {
    "fom": ("snapshots.bin",),
    "pod": ("basis.bin", "operators.bin"),
    "train": ("network.bin", "loss_history.csv"),
    "assimilate": (
        "trajectory_true_projection.csv",
        "trajectory_background.csv",
        "trajectory_nudged.csv",
        "rmse.csv",
        "final_field_fom.csv",
        "final_field_true_projection.csv",
        "final_field_background.csv",
        "final_field_nudged.csv",
    ),
}


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@dataclass(frozen=True)
class ExperimentReport:
    """What a run produced and how it went."""

    output_dir: str
    files: tuple
    summary: dict
    config_echo: dict
    timings: dict = field(default_factory=dict)

    def verify_files(self) -> None:
        """Raise if any referenced file is missing."""
        root = Path(self.output_dir)
        for name in self.files:
            if not (root / name).is_file():
                raise FileNotFoundError(f"report references missing file {name}")


def write_report(report: ExperimentReport, path: Path) -> None:
    payload = {
        "output_dir": report.output_dir,
        "files": list(report.files),
        "summary": report.summary,
        "config": report.config_echo,
        "timings": report.timings,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_report(path: str | Path) -> ExperimentReport:
    payload = json.loads(Path(path).read_text())
    return ExperimentReport(
        output_dir=payload["output_dir"],
        files=tuple(payload["files"]),
        summary=payload["summary"],
        config_echo=payload["config"],
        timings=payload["timings"],
    )


def _config_echo(cfg: ExperimentConfig) -> dict:
    return {
        "re": cfg.fom.re,
        "grid_intervals": cfg.fom.grid_intervals,
        "r": cfg.rom.r,
        "s_freq": cfg.obs.s_freq,
        "t_freq": cfg.obs.t_freq,
        "quantity": cfg.obs.quantity,
        "sigma_b": cfg.noise.sigma_b,
        "sigma_m": cfg.noise.sigma_m,
        "ensemble_size": cfg.train.ensemble_size,
        "seed": cfg.seed,
    }


class _Manifest:
    """Cache bookkeeping stored beside the artifacts."""

    def __init__(self, outdir: Path):
        self.path = outdir / "manifest.json"
        self.outdir = outdir
        if self.path.is_file():
            self.stages = json.loads(self.path.read_text())
        else:
            self.stages = {}

    def fresh(self, stage: str, key: str) -> bool:
        entry = self.stages.get(stage)
        if entry is None or entry.get("key") != key:
            return False
        return all((self.outdir / f).is_file() for f in _STAGE_FILES[stage])

    def record(self, stage: str, key: str) -> None:
        self.stages[stage] = {"key": key, "files": list(_STAGE_FILES[stage])}
        self.path.write_text(json.dumps(self.stages, indent=2, sort_keys=True) + "\n")


def _fom_config(cfg: ExperimentConfig) -> FomConfig:
    grid = UniformGrid.unit(cfg.n_points)
    return FomConfig(cfg.nu, grid, cfg.fom.dt, cfg.fom.t_final,
                     cfg.fom.snapshot_stride)


def _obs_operator(cfg: ExperimentConfig) -> ObservationOperator:
    return ObservationOperator(
        equally_spaced_sensors(cfg.n_points, cfg.obs.s_freq),
        cfg.obs.quantity, cfg.obs.t_freq)


def _stage_fom(cfg: ExperimentConfig, outdir: Path,
               manifest: _Manifest) -> SnapshotSet:
    path = outdir / "snapshots.bin"
    key = cfg.stage_key("fom")
    if manifest.fresh("fom", key):
        return load_snapshots(path)
    fom_cfg = _fom_config(cfg)
    snaps = solve_fom(fom_cfg, square_wave_ic(fom_cfg.grid))
    save_snapshots(snaps, path)
    manifest.record("fom", key)
    return snaps


def _stage_pod(cfg: ExperimentConfig, outdir: Path, manifest: _Manifest,
               snaps: SnapshotSet):
    key = cfg.stage_key("pod")
    if manifest.fresh("pod", key):
        return load_basis(outdir / "basis.bin"), load_operators(outdir / "operators.bin")
    basis = compute_basis(snaps, cfg.rom.r)
    ops = precompute_operators(basis, UniformGrid.unit(cfg.n_points), cfg.nu)
    save_basis(basis, outdir / "basis.bin")
    save_operators(ops, outdir / "operators.bin")
    manifest.record("pod", key)
    return basis, ops


def _epochs_used(outdir: Path) -> int:
    lines = (outdir / "loss_history.csv").read_text().splitlines()
    # Header plus the epoch-0 row precede the actual training epochs.
    return max(len(lines) - 2, 0)


def _stage_train(cfg: ExperimentConfig, outdir: Path, manifest: _Manifest,
                 snaps: SnapshotSet, basis, ops):
    key = cfg.stage_key("train")
    path = outdir / "network.bin"
    if manifest.fresh("train", key):
        net, _ = load_network(path, expected_quantity=cfg.obs.quantity)
        return net
    obs_op = _obs_operator(cfg)
    window = SnapshotSet(snaps.times[::cfg.obs.t_freq],
                         snaps.fields[:, ::cfg.obs.t_freq])
    noise = NoiseModel(cfg.noise.sigma_b, cfg.noise.sigma_m, cfg.seed)
    data = build_training_set(window, basis, ops, obs_op, noise,
                              cfg.train.ensemble_size,
                              substream(cfg.seed, "train-noise"))
    net0 = initialize_network(basis.r + obs_op.n_sensors, HIDDEN_DIM, basis.r,
                              substream(cfg.seed, "lstm-init"))
    hyper = TrainingConfig(cfg.train.lr, cfg.train.batch_size,
                           cfg.train.max_epochs, cfg.train.val_fraction,
                           cfg.train.patience, cfg.seed)
    trained, history = train(net0, data, hyper)
    save_network(trained, path, quantity=cfg.obs.quantity)
    write_loss_history(history, outdir / "loss_history.csv")
    manifest.record("train", key)
    return trained


def _final_rmse_from_csv(outdir: Path) -> dict:
    rows = np.loadtxt(outdir / "rmse.csv", delimiter=",", skiprows=1, ndmin=2)
    return {
        "final_rmse_true_projection": float(rows[-1, 1]),
        "final_rmse_background": float(rows[-1, 2]),
        "final_rmse_nudged": float(rows[-1, 3]),
        "mean_rmse_true_projection": float(rows[:, 1].mean()),
        "mean_rmse_background": float(rows[:, 2].mean()),
        "mean_rmse_nudged": float(rows[:, 3].mean()),
    }


def _stage_assimilate(cfg: ExperimentConfig, outdir: Path, manifest: _Manifest,
                      snaps: SnapshotSet, basis, ops, net) -> dict:
    key = cfg.stage_key("assimilate")
    if manifest.fresh("assimilate", key):
        return _final_rmse_from_csv(outdir)
    obs_op = _obs_operator(cfg)
    noise = NoiseModel(cfg.noise.sigma_b, cfg.noise.sigma_m, cfg.seed)
    u0 = perturb_field(snaps.fields[:, 0].copy(), noise,
                       substream(cfg.seed, "test-background"))
    a0 = project(u0, basis, t=float(snaps.times[0]))
    obs = observe_snapshots(snaps, obs_op, noise,
                            substream(cfg.seed, "test-measurement"))
    result = lstm_nudge_run(a0, ops, basis, obs, obs_op, net, snaps)

    write_trajectory_csv(result.times, result.true_projection,
                         outdir / "trajectory_true_projection.csv")
    write_trajectory_csv(result.times, result.background,
                         outdir / "trajectory_background.csv")
    write_trajectory_csv(result.times, result.nudged,
                         outdir / "trajectory_nudged.csv")
    write_rmse_csv(result.times, result.rmse_true_projection,
                   result.rmse_background, result.rmse_nudged,
                   outdir / "rmse.csv")
    x = UniformGrid.unit(cfg.n_points).x
    write_field_csv(x, snaps.fields[:, -1], outdir / "final_field_fom.csv")
    for name, traj in (("true_projection", result.true_projection),
                       ("background", result.background),
                       ("nudged", result.nudged)):
        write_field_csv(x, basis.modes @ traj[-1],
                        outdir / f"final_field_{name}.csv")
    manifest.record("assimilate", key)
    return _final_rmse_from_csv(outdir)


def run_pipeline(cfg: ExperimentConfig,
                 last_stage: str = "assimilate") -> ExperimentReport:
    """Run the experiment through ``last_stage``, reusing cached artifacts.

    A stage is reused when the content hash of the config subsections it
    depends on matches the manifest entry and its files are present.
    Failures are re-raised as :class:`StageError` with the stage name.
    """
    if last_stage not in STAGES:
        raise ValueError(f"unknown stage {last_stage!r}")
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(outdir)
    depth = STAGES.index(last_stage)
    timings: dict = {}
    summary: dict = {}
    files = ["manifest.json", "report.json"]

    state: dict = {}
    for stage in STAGES[:depth + 1]:
        started = time.perf_counter()
        try:
            if stage == "fom":
                state["snaps"] = _stage_fom(cfg, outdir, manifest)
            elif stage == "pod":
                state["basis"], state["ops"] = _stage_pod(
                    cfg, outdir, manifest, state["snaps"])
                sv = state["basis"].singular_values
                energy = sv**2
                summary["retained_energy"] = float(
                    energy[:cfg.rom.r].sum() / energy.sum())
            elif stage == "train":
                state["net"] = _stage_train(cfg, outdir, manifest,
                                            state["snaps"], state["basis"],
                                            state["ops"])
                summary["epochs_used"] = _epochs_used(outdir)
            elif stage == "assimilate":
                summary.update(_stage_assimilate(
                    cfg, outdir, manifest, state["snaps"], state["basis"],
                    state["ops"], state["net"]))
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
        timings[stage] = time.perf_counter() - started
        files.extend(_STAGE_FILES[stage])

    report = ExperimentReport(str(outdir), tuple(files), summary,
                              _config_echo(cfg), timings)
    write_report(report, outdir / "report.json")
    report.verify_files()
    return report


def aggregate_reports(parent: str | Path, path: Path | None = None) -> Path:
    """Collect child run reports under ``parent`` into one comparison table.

    Emits ``summary.csv`` with one row per child: the distinguishing
    config values and the final background/nudged errors.
    """
    parent = Path(parent)
    reports = sorted(parent.glob("*/report.json"))
    if not reports:
        raise FileNotFoundError(f"no child reports under {parent}")
    lines = ["run,sigma_m,sigma_b,s_freq,t_freq,quantity,"
             "final_rmse_background,final_rmse_nudged"]
    for rp in reports:
        rep = load_report(rp)
        cfg = rep.config_echo
        s = rep.summary
        lines.append(
            f"{rp.parent.name},{cfg['sigma_m']!r},{cfg['sigma_b']!r},"
            f"{cfg['s_freq']},{cfg['t_freq']},{cfg['quantity']},"
            f"{s['final_rmse_background']!r},{s['final_rmse_nudged']!r}"
        )
    out = path if path is not None else parent / "summary.csv"
    out.write_text("\n".join(lines) + "\n")
    return out
