"""Experiment configuration: INI parsing, validation, and sweep expansion."""

from __future__ import annotations

import configparser
import hashlib
import itertools
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .lstm import KNOWN_OBSERVABLES

__all__ = [
    "FomSection",
    "RomSection",
    "ObsSection",
    "NoiseSection",
    "TrainSection",
    "ExperimentConfig",
    "load_config",
    "expand_sweep",
]

_REL_TOL = 1e-12


@dataclass(frozen=True)
class FomSection:
    re: float = 1.0e4
    grid_intervals: int = 4096
    dt: float = 1.0e-4
    t_final: float = 1.0
    snapshot_stride: int = 100

    def __post_init__(self) -> None:
        if self.re <= 0.0:
            raise ValueError("re must be positive")
        if self.grid_intervals < 4:
            raise ValueError("grid_intervals must be at least 4")
        if self.dt <= 0.0 or self.t_final <= 0.0:
            raise ValueError("dt and t_final must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be at least 1")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-8 * max(steps, 1.0):
            raise ValueError(
                f"t_final {self.t_final} is not a whole number of steps of {self.dt}"
            )
        if round(steps) % self.snapshot_stride != 0:
            raise ValueError("snapshot_stride does not divide the step count")


@dataclass(frozen=True)
class RomSection:
    r: int = 6
    dt: float = 1.0e-2

    def __post_init__(self) -> None:
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if self.dt <= 0.0:
            raise ValueError("rom dt must be positive")


@dataclass(frozen=True)
class ObsSection:
    s_freq: int = 256
    t_freq: int = 10
    quantity: str = "velocity"

    def __post_init__(self) -> None:
        if self.s_freq < 1 or self.t_freq < 1:
            raise ValueError("s_freq and t_freq must be at least 1")
        if self.quantity not in KNOWN_OBSERVABLES:
            raise ValueError(f"unknown observed quantity {self.quantity!r}")


@dataclass(frozen=True)
class NoiseSection:
    sigma_b: float = 1.0
    sigma_m: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma_b < 0.0 or self.sigma_m < 0.0:
            raise ValueError("noise standard deviations must be nonnegative")


@dataclass(frozen=True)
class TrainSection:
    ensemble_size: int = 100
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 500
    val_fraction: float = 0.2
    patience: int = 20

    def __post_init__(self) -> None:
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be at least 1")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs, patience must be at least 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie strictly between 0 and 1")


_SECTION_TYPES = {
    "fom": FomSection,
    "rom": RomSection,
    "obs": ObsSection,
    "noise": NoiseSection,
    "train": TrainSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete declarative description of one experiment.

    Beyond per-section range checks, construction enforces the time-grid
    alignment the assimilation stage relies on: the reduced step must
    equal the snapshot spacing, and the measurement interval
    rom.dt * t_freq must divide the run length.
    """

    fom: FomSection = FomSection()
    rom: RomSection = RomSection()
    obs: ObsSection = ObsSection()
    noise: NoiseSection = NoiseSection()
    train: TrainSection = TrainSection()
    seed: int = 1
    output_dir: str = "out"

    def __post_init__(self) -> None:
        spacing = self.fom.dt * self.fom.snapshot_stride
        if abs(self.rom.dt - spacing) > _REL_TOL * spacing:
            raise ValueError(
                f"misaligned time grids: rom dt {self.rom.dt} must equal the "
                f"snapshot spacing {spacing}"
            )
        n_steps = round(self.fom.t_final / self.rom.dt)
        if n_steps % self.obs.t_freq != 0:
            raise ValueError(
                f"misaligned measurement schedule: {n_steps} reduced steps "
                f"are not a whole number of windows of t_freq={self.obs.t_freq}"
            )
        if not isinstance(self.seed, int):
            raise ValueError("seed must be an integer")

    @property
    def n_points(self) -> int:
        return self.fom.grid_intervals + 1

    @property
    def nu(self) -> float:
        return 1.0 / self.fom.re

    @property
    def tau(self) -> float:
        """Measurement interval in time units."""
        return self.rom.dt * self.obs.t_freq

    @property
    def n_rom_steps(self) -> int:
        return round(self.fom.t_final / self.rom.dt)

    def section_blob(self, name: str) -> str:
        """Canonical key=value text of one section, for cache hashing."""
        if name == "seed":
            return f"seed={self.seed!r}"
        section = getattr(self, name)
        pairs = [f"{f.name}={getattr(section, f.name)!r}"
                 for f in fields(section)]
        return f"[{name}]\n" + "\n".join(pairs)

    def stage_key(self, stage: str) -> str:
        """Content hash over the config subsections a stage depends on."""
        upstream = {
            "fom": ("fom",),
            "pod": ("fom", "rom"),
            "train": ("fom", "rom", "obs", "noise", "train", "seed"),
            "assimilate": ("fom", "rom", "obs", "noise", "train", "seed"),
        }
        blob = "\n".join(self.section_blob(s) for s in upstream[stage])
        return hashlib.sha256(blob.encode()).hexdigest()


def _convert(section: str, key: str, raw: str):
    """Parse one raw string to the field's declared type."""
    cls = _SECTION_TYPES[section]
    types = {f.name: f.type for f in fields(cls)}
    if key not in types:
        raise ValueError(f"unknown key {key!r} in section [{section}]")
    kind = types[key]
    if kind in ("int", int):
        return int(raw)
    if kind in ("float", float):
        return float(raw)
    return raw


def _read_ini(path: str | Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"config file {path} not found or unreadable")
    for section in parser.sections():
        if section not in _SECTION_TYPES and section != "run":
            raise ValueError(f"unknown config section [{section}]")
    return parser


def _build_config(parser: configparser.ConfigParser,
                  values: dict[tuple[str, str], str]) -> ExperimentConfig:
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        kwargs = {}
        if parser.has_section(name):
            for key in parser[name]:
                raw = values.get((name, key), parser[name][key])
                kwargs[key] = _convert(name, key, raw)
        sections[name] = cls(**kwargs)
    seed = 1
    output_dir = "out"
    if parser.has_section("run"):
        for key in parser["run"]:
            raw = values.get(("run", key), parser["run"][key])
            if key == "seed":
                seed = int(raw)
            elif key == "output_dir":
                output_dir = raw
            else:
                raise ValueError(f"unknown key {key!r} in section [run]")
    return ExperimentConfig(seed=seed, output_dir=output_dir, **sections)


def load_config(path: str | Path, output_dir: str | None = None,
                seed: int | None = None) -> ExperimentConfig:
    """Read one experiment from an INI file, with optional overrides.

    Any value containing a comma is a sweep list and is rejected here;
    use :func:`expand_sweep` for those files.
    """
    parser = _read_ini(path)
    for section in parser.sections():
        for key, raw in parser[section].items():
            if "," in raw:
                raise ValueError(
                    f"value list {raw!r} for {section}.{key}; "
                    "this file needs sweep expansion"
                )
    cfg = _build_config(parser, {})
    if output_dir is not None:
        cfg = replace(cfg, output_dir=str(output_dir))
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg


def expand_sweep(path: str | Path, output_dir: str | None = None,
                 seed: int | None = None) -> list[tuple[str, ExperimentConfig]]:
    """Expand comma-separated value lists into the cross product of runs.

    Returns (label, config) pairs; each child writes under
    ``<output_dir>/<label>`` where the label joins the varied key=value
    choices.
    """
    parser = _read_ini(path)
    swept = []
    for section in parser.sections():
        for key, raw in parser[section].items():
            if "," in raw:
                choices = [v.strip() for v in raw.split(",") if v.strip()]
                if len(choices) < 2:
                    raise ValueError(f"sweep list {raw!r} needs two or more values")
                swept.append(((section, key), choices))
    if not swept:
        raise ValueError(f"no value lists to sweep in {path}")

    base = _build_config(parser, {(s, k): c[0] for (s, k), c in swept})
    root = Path(output_dir if output_dir is not None else base.output_dir)
    runs = []
    for combo in itertools.product(*(choices for _, choices in swept)):
        values = {pair: val for (pair, _), val in zip(swept, combo)}
        label = "__".join(f"{k}={v}" for (_, k), v in values.items())
        cfg = _build_config(parser, values)
        cfg = replace(cfg, output_dir=str(root / label))
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        runs.append((label, cfg))
    return runs
