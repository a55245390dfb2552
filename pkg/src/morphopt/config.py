"""Versioned, strict campaign configuration (YAML or JSON on disk)."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import ConfigurationError
from .geometry import PanelChainSpec, VehicleGeometry
from .optimizer import GaConfig
from .rig.synthetic import TABLE_SPEEDS, LocalMinimum, SyntheticDragModel
from .traces import RigConditions

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GaSettings(_Strict):
    initial_population: int = 50
    generation_size: int = 20
    elite_count: int = 4
    crossover_points: int = 4
    mutation_rate: float = 0.05
    stall_generations: int = 5
    max_generations: int = 50
    remeasure_elites: bool = False
    deduplicate: bool = False
    retry_cap: int = 1000
    gene_coding: Literal["gray", "binary"] = "gray"


class SecondaryMinimumSettings(_Strict):
    center: tuple[float, float, float]
    depth: float
    widths: tuple[float, float, float] = (5.0, 5.0, 5.0)


class SyntheticSettings(_Strict):
    planted_optimum: tuple[float, float, float] = (-15.0, 6.5, 12.5)
    max_reduction_fraction: float = 0.085
    bowl_widths: tuple[float, float, float] = (8.0, 10.0, 10.0)
    ar_coefficient: float = 0.95
    noise_scale: float = 1.0
    drift_std: float = 0.002
    transducer_offset: float = 0.0
    wind_off_noise_std: float = 0.002
    secondary_minimum: SecondaryMinimumSettings | None = None
    n_jobs: int = 1


class ReplaySettings(_Strict):
    directory: str | None = None


class RemoteSettings(_Strict):
    host: str = "127.0.0.1"
    port: int = 5555
    timeout: float = 60.0


class RigSettings(_Strict):
    backend: Literal["synthetic", "replay", "remote"] = "synthetic"
    realtime: bool = False
    averaging_window: float = 10.0
    synthetic: SyntheticSettings = Field(default_factory=SyntheticSettings)
    replay: ReplaySettings = Field(default_factory=ReplaySettings)
    remote: RemoteSettings = Field(default_factory=RemoteSettings)


class ConditionSettings(_Strict):
    wind_speed: float = 7.33
    air_density: float = 1.225
    kinematic_viscosity: float = 1.48e-5
    temperature: float = 15.0


class ChainSettings(_Strict):
    panel_length: float = 0.070
    panel_width: float = 0.241
    panel_count: int = 3
    mount_height_above_bed: float = 0.105
    max_rise_above_roof: float = 0.020
    min_bed_clearance: float = 0.005
    unconstrained: bool = False


class VehicleSettings(_Strict):
    length: float = 0.7811
    width: float = 0.2540
    height: float = 0.2095
    frontal_area: float = 5.321e-2
    test_section_area: float | None = 1.25 * 1.25


class GeometrySettings(_Strict):
    chain: ChainSettings = Field(default_factory=ChainSettings)
    vehicle: VehicleSettings = Field(default_factory=VehicleSettings)


class Exp1Settings(_Strict):
    speeds: tuple[float, ...] = TABLE_SPEEDS
    trials: int = 5
    trial_duration: float = 30.0
    wind_off_duration: float = 10.0
    alpha: float = 0.01
    save_traces: bool = False


class ValidationSettings(_Strict):
    elites: list[tuple[int, int, int]] | None = None
    trials: int = 4
    hold_before: float = 10.0
    transition: float = 2.0
    hold_after: float = 15.0
    alpha: float = 0.01


class SignalSettings(_Strict):
    cutoff: float = 5.0
    order: int = 4
    bin_window: float = 1.0
    sliding: bool = False


class CampaignConfig(_Strict):
    schema_version: int = SCHEMA_VERSION
    mode: Literal["exp1-baseline", "exp2-optimize", "dynamic-validate", "enumerate"] = "exp2-optimize"
    seed: int = 0
    output_dir: str = "morphopt-out"
    ga: GaSettings = Field(default_factory=GaSettings)
    rig: RigSettings = Field(default_factory=RigSettings)
    conditions: ConditionSettings = Field(default_factory=ConditionSettings)
    geometry: GeometrySettings = Field(default_factory=GeometrySettings)
    exp1: Exp1Settings = Field(default_factory=Exp1Settings)
    validation: ValidationSettings = Field(default_factory=ValidationSettings)
    signal: SignalSettings = Field(default_factory=SignalSettings)

    @field_validator("schema_version")
    @classmethod
    def _known_schema(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value}; this build reads {SCHEMA_VERSION}")
        return value

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, value: int) -> int:
        if not 0 <= value < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return value

    @model_validator(mode="after")
    def _files_exist(self):
        if self.rig.backend == "replay":
            directory = self.rig.replay.directory
            if directory is None or not Path(directory).is_dir():
                raise ValueError(f"replay directory {directory!r} does not exist")
        return self

    # -- builders -------------------------------------------------------

    def ga_config(self) -> GaConfig:
        return GaConfig(rng_seed=self.seed, **self.ga.model_dump())

    def rig_conditions(self, wind_speed: float | None = None) -> RigConditions:
        params = self.conditions.model_dump()
        if wind_speed is not None:
            params["wind_speed"] = wind_speed
        return RigConditions(**params)

    def chain_spec(self) -> PanelChainSpec:
        params = self.geometry.chain.model_dump()
        if params.pop("unconstrained"):
            return PanelChainSpec.unconstrained(**{k: v for k, v in params.items()
                                                   if k not in ("mount_height_above_bed", "max_rise_above_roof")})
        return PanelChainSpec(**params)

    def vehicle(self) -> VehicleGeometry:
        return VehicleGeometry(**self.geometry.vehicle.model_dump())

    def drag_model(self) -> SyntheticDragModel:
        params = self.rig.synthetic.model_dump()
        params.pop("n_jobs")
        secondary = params.pop("secondary_minimum")
        if secondary is not None:
            secondary = LocalMinimum(**secondary)
        return SyntheticDragModel(secondary_minimum=secondary, seed=self.seed, **params)

    def experiment_dict(self) -> dict:
        """Everything that determines the results; the output location does not."""
        return self.model_dump(mode="json", exclude={"output_dir"})

    def config_hash(self) -> str:
        canonical = json.dumps(self.experiment_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def with_overrides(self, **overrides) -> "CampaignConfig":
        data = self.model_dump()
        for dotted, value in overrides.items():
            if value is None:
                continue
            target = data
            *parents, leaf = dotted.split(".")
            for key in parents:
                target = target[key]
            target[leaf] = value
        return validate_config(data)


def validate_config(data: dict) -> CampaignConfig:
    try:
        return CampaignConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path: str | Path | None) -> CampaignConfig:
    if path is None:
        return CampaignConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be a mapping")
    return validate_config(data)
