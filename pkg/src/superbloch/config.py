"""Run configuration: parsing, validation, serialization, hashing.

One human-readable YAML file drives every CLI command.  Parsing and
serialization round-trip exactly; the canonical serialized form is hashed
and stamped into every output file so results can be traced to the inputs
that produced them.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import yaml

from .errors import ConfigurationError
from .linalg import SpectralWindow
from .model import (
    PeriodicPotential,
    PlaneWaveTruncation,
    drive_from_config,
)

__all__ = ["RunConfig", "load_config", "config_hash", "SCHEMA_VERSION"]

SCHEMA_VERSION = "superbloch-v1"


@dataclass
class RunConfig:
    """Validated run configuration; mirrors the YAML layout."""

    period: float = 2.0 * math.pi
    mass: float = 1.0
    cutoff: int = 12
    potential: dict = field(default_factory=lambda: {1: 0.3})
    band_indices: tuple = (0,)
    drive_kind: str = "cosine"
    drive_params: dict = field(default_factory=dict)
    s_count: int = 41
    s_max: float = 1.0
    k_points: int = 16
    contour_nodes: int = 24
    circle_nodes: int = 64
    n_bands: int = 6
    n_max: int = 2
    epsilons: tuple = ()
    a_values: tuple = (0.0,)
    mode: str = "fixed-t"
    t_value: float | None = None
    s_eval: float | None = None
    w_tol: float = 1e-7
    gap_min: float = 1e-6
    workers: int = 1

    def __post_init__(self):
        if self.mode not in ("fixed-s", "fixed-t"):
            raise ConfigurationError(
                f"mode must be 'fixed-s' or 'fixed-t', got {self.mode!r}")
        if self.mode == "fixed-t":
            if self.t_value is None or self.t_value <= 0:
                raise ConfigurationError("fixed-t mode requires a positive t")
            worst = max(self.epsilons, default=0.0) * self.t_value
            if worst > self.s_max + 1e-12:
                raise ConfigurationError(
                    f"epsilon_max * t = {worst:.3g} exceeds s_max={self.s_max}")
        else:
            if self.s_eval is None:
                self.s_eval = self.s_max
            if not (0.0 < self.s_eval <= self.s_max + 1e-12):
                raise ConfigurationError("s_eval must lie in (0, s_max]")
        for eps in self.epsilons:
            if not (0.0 < eps < 1.0):
                raise ConfigurationError(f"epsilon {eps} outside (0, 1)")
        if not (0 <= self.n_max <= 4):
            raise ConfigurationError("n_max must be between 0 and 4")
        for name in ("w_tol", "gap_min"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"tolerance {name} must be positive")
        if self.k_points < 1 or self.s_count < 17:
            raise ConfigurationError("need k_points >= 1 and s_count >= 17")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        self.epsilons = tuple(float(e) for e in self.epsilons)
        self.a_values = tuple(float(a) for a in self.a_values)
        self.band_indices = tuple(int(b) for b in self.band_indices)

    # -- construction of model objects --------------------------------------

    def make_potential(self) -> PeriodicPotential:
        return PeriodicPotential(self.period, dict(self.potential))

    def make_truncation(self) -> PlaneWaveTruncation:
        return PlaneWaveTruncation(self.cutoff, self.mass)

    def make_drive(self):
        return drive_from_config(self.drive_kind, **self.drive_params)

    def make_window(self, gap: float | None = None) -> SpectralWindow:
        return SpectralWindow(self.band_indices, gap or self.gap_min)

    def refined(self) -> "RunConfig":
        """Doubled grids (s nodes, contour nodes, k points) for audits."""
        d = self.to_dict()
        d["grids"]["s_count"] = 2 * self.s_count
        d["grids"]["contour_nodes"] = 2 * self.contour_nodes
        d["grids"]["circle_nodes"] = 2 * self.circle_nodes
        d["grids"]["k_points"] = 2 * self.k_points
        return RunConfig.from_dict(d)

    # -- serialization -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        try:
            model = data.get("model", {})
            band = data.get("band", {})
            drive = data.get("drive", {})
            grids = data.get("grids", {})
            sweep = data.get("sweep", {})
            tols = data.get("tolerances", {})
            kwargs = dict(
                period=float(model.get("period", 2.0 * math.pi)),
                mass=float(model.get("mass", 1.0)),
                cutoff=int(model.get("cutoff", 12)),
                potential={int(k): float(v)
                           for k, v in model.get("potential", {1: 0.3}).items()},
                band_indices=tuple(band.get("indices", (0,))),
                drive_kind=str(drive.get("kind", "cosine")),
                drive_params=dict(drive.get("params", {})),
                s_count=int(grids.get("s_count", 41)),
                s_max=float(grids.get("s_max", 1.0)),
                k_points=int(grids.get("k_points", 16)),
                contour_nodes=int(grids.get("contour_nodes", 24)),
                circle_nodes=int(grids.get("circle_nodes", 64)),
                n_bands=int(grids.get("n_bands", 6)),
                n_max=int(sweep.get("n_max", 2)),
                epsilons=tuple(sweep.get("epsilons", ())),
                a_values=tuple(sweep.get("a_values", (0.0,))),
                mode=str(sweep.get("mode", "fixed-t")),
                t_value=(None if sweep.get("t") is None else float(sweep["t"])),
                s_eval=(None if sweep.get("s_eval") is None
                        else float(sweep["s_eval"])),
                w_tol=float(tols.get("w_tol", 1e-7)),
                gap_min=float(tols.get("gap_min", 1e-6)),
                workers=int(data.get("workers", 1)),
            )
        except (TypeError, ValueError, KeyError, AttributeError) as exc:
            raise ConfigurationError(f"malformed config: {exc}") from exc
        return cls(**kwargs)

    def to_dict(self) -> dict:
        sweep = {
            "n_max": self.n_max,
            "epsilons": list(self.epsilons),
            "a_values": list(self.a_values),
            "mode": self.mode,
        }
        if self.t_value is not None:
            sweep["t"] = self.t_value
        if self.s_eval is not None:
            sweep["s_eval"] = self.s_eval
        return {
            "model": {
                "period": self.period,
                "mass": self.mass,
                "cutoff": self.cutoff,
                "potential": {int(k): float(v) for k, v in self.potential.items()},
            },
            "band": {"indices": list(self.band_indices)},
            "drive": {"kind": self.drive_kind, "params": dict(self.drive_params)},
            "grids": {
                "s_count": self.s_count,
                "s_max": self.s_max,
                "k_points": self.k_points,
                "contour_nodes": self.contour_nodes,
                "circle_nodes": self.circle_nodes,
                "n_bands": self.n_bands,
            },
            "sweep": sweep,
            "tolerances": {"w_tol": self.w_tol, "gap_min": self.gap_min},
            "workers": self.workers,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @property
    def hash(self) -> str:
        return config_hash(self)


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(config.to_yaml().encode()).hexdigest()[:16]


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping")
    return RunConfig.from_dict(data)
