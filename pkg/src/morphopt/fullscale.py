"""Full-size panel sizing and fuel/emission estimates.

The panels are treated as a cantilever loaded by its own weight; lift is
neglected, which is conservative.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .exceptions import ConfigurationError

LITRES_PER_GALLON = 3.785411784
KM_PER_MILE = 1.609344
MODEL_FRONTAL_AREA = 5.321e-2
SCALE_FACTOR = 8


@dataclass(frozen=True)
class MaterialSpec:
    name: str
    E: float
    sigma_u: float
    rho: float

    def __post_init__(self):
        if min(self.E, self.sigma_u, self.rho) <= 0:
            raise ConfigurationError(f"material {self.name!r}: E, sigma_u and rho must be positive")


#: Fibre-reinforced polymer candidates: (E [Pa], sigma_u [Pa], rho [kg/m^3]).
CANDIDATE_MATERIALS = (
    MaterialSpec("CFRP (70% fibers in epoxy)", 181e9, 1500e6, 1.6e3),
    MaterialSpec("CFRP (80% fibers in polyetherimide)", 130e9, 517e6, 1.25e3),
    MaterialSpec("GFRP (35% fibers in epoxy)", 34e9, 157e6, 1.47e3),
    MaterialSpec("AFRP (60% fibers in epoxy)", 75e9, 1400e6, 1.4e3),
)


@dataclass(frozen=True)
class FullScalePanelSpec:
    l: float = 1.68
    w: float = 1.93
    gamma: float = 0.05
    g: float = 9.8

    def __post_init__(self):
        if self.l <= 0 or self.w <= 0 or self.g <= 0:
            raise ConfigurationError("l, w and g must be positive")
        if not self.gamma > 0:
            raise ConfigurationError("gamma must be positive")


@dataclass(frozen=True)
class EconomicsSpec:
    """Fuel and emission inputs.

    The defaults are the US-unit figures ($2.5/gal, 20 mpg, 8.88 kg CO2/gal)
    converted exactly; they print as $0.66/l, 8.5 km/l and 2.35 kg/l.
    """

    fuel_price: float = 2.5 / LITRES_PER_GALLON
    fuel_economy: float = 20 * KM_PER_MILE / LITRES_PER_GALLON
    annual_distance: float = 18_215.0
    co2_per_litre: float = 8.88 / LITRES_PER_GALLON
    drag_reduction: float = 0.085
    cruise_speed: float = 20.0
    motor_efficiency: float = 0.5
    air_density: float = 1.225

    def __post_init__(self):
        for name in ("fuel_price", "fuel_economy", "annual_distance", "co2_per_litre", "cruise_speed",
                     "air_density"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0 <= self.drag_reduction <= 1:
            raise ConfigurationError("drag_reduction must lie in [0, 1]")
        if not 0 < self.motor_efficiency <= 1:
            raise ConfigurationError("motor_efficiency must lie in (0, 1]")

    @classmethod
    def metric_rounded(cls, **overrides) -> "EconomicsSpec":
        """Same inputs rounded to the metric values as usually quoted."""
        params = dict(fuel_price=0.66, fuel_economy=8.5, co2_per_litre=2.35)
        params.update(overrides)
        return cls(**params)


@dataclass(frozen=True)
class ThicknessBound:
    h_min: float
    stress_bound: float
    deflection_bound: float
    governing: str

    @property
    def thickness(self) -> float:
        return 2.0 * self.h_min


def max_bending_stress(material: MaterialSpec, spec: FullScalePanelSpec, h: float) -> float:
    """Clamped-end fibre stress, ``3 rho g l^2 / (2h)``, in Pa."""
    if h <= 0:
        raise ValueError("half-thickness must be positive")
    return 3.0 * material.rho * spec.g * spec.l**2 / (2.0 * h)


def max_deflection(material: MaterialSpec, spec: FullScalePanelSpec, h: float) -> float:
    """Free-end deflection, ``3 rho g l^4 / (8 E h^2)``, in m."""
    if h <= 0:
        raise ValueError("half-thickness must be positive")
    return 3.0 * material.rho * spec.g * spec.l**4 / (8.0 * material.E * h**2)


def min_half_thickness(material: MaterialSpec, spec: FullScalePanelSpec) -> ThicknessBound:
    stress = 3.0 * material.rho * spec.g * spec.l**2 / (2.0 * material.sigma_u)
    deflection = math.sqrt(3.0 * material.rho * spec.g * spec.l**3 / (8.0 * material.E * spec.gamma))
    if deflection >= stress:
        return ThicknessBound(deflection, stress, deflection, "deflection")
    return ThicknessBound(stress, stress, deflection, "stress")


def actuation_torque(material: MaterialSpec, spec: FullScalePanelSpec, h: float) -> float:
    """Clamped-end moment of the panel weight, ``rho g l^2 w h``, in N m."""
    return material.rho * spec.g * spec.l**2 * spec.w * h


def fuel_and_emissions(spec: EconomicsSpec | None = None) -> dict[str, float]:
    """Savings assume fuel use scales one-to-one with drag."""
    spec = spec or EconomicsSpec()
    litres_per_km = spec.drag_reduction / spec.fuel_economy
    saving_per_km = litres_per_km * spec.fuel_price
    co2_per_km = litres_per_km * spec.co2_per_litre
    return {
        "saving_per_km": saving_per_km,
        "annual_saving": saving_per_km * spec.annual_distance,
        "co2_per_km": co2_per_km,
        "annual_co2": co2_per_km * spec.annual_distance,
    }


def morph_energy(material: MaterialSpec, spec: FullScalePanelSpec, h: float, motor_efficiency: float) -> float:
    """Electrical energy to lift the panels from hanging vertically to horizontal, J."""
    mass = material.rho * spec.l * spec.w * 2.0 * h
    return mass * spec.g * (spec.l / 2.0) / motor_efficiency


def morph_energy_recovery_distance(material: MaterialSpec, spec: FullScalePanelSpec | None = None,
                                   econ: EconomicsSpec | None = None, model_Cd: float = 1.1,
                                   fullscale_area: float = SCALE_FACTOR**2 * MODEL_FRONTAL_AREA,
                                   h: float | None = None) -> float:
    """Distance (m) over which the drag saving repays one full morph."""
    spec = spec or FullScalePanelSpec()
    econ = econ or EconomicsSpec()
    if h is None:
        h = min_half_thickness(material, spec).h_min
    energy = morph_energy(material, spec, h, econ.motor_efficiency)
    saved_force = econ.drag_reduction * 0.5 * econ.air_density * model_Cd * fullscale_area * econ.cruise_speed**2
    if saved_force == 0:
        return math.inf
    return energy / saved_force


def material_table(materials=CANDIDATE_MATERIALS, spec: FullScalePanelSpec | None = None,
                   econ: EconomicsSpec | None = None, model_Cd: float = 1.1,
                   fullscale_area: float = SCALE_FACTOR**2 * MODEL_FRONTAL_AREA) -> list[dict]:
    spec = spec or FullScalePanelSpec()
    rows = []
    for material in materials:
        bound = min_half_thickness(material, spec)
        rows.append({
            "name": material.name,
            "E_GPa": material.E / 1e9,
            "sigma_u_MPa": material.sigma_u / 1e6,
            "rho_kg_m3": material.rho,
            "two_h_min_mm": bound.thickness * 1e3,
            "torque_Nm": actuation_torque(material, spec, bound.h_min),
            "governing": bound.governing,
            "recovery_distance_m": morph_energy_recovery_distance(material, spec, econ, model_Cd,
                                                                  fullscale_area, bound.h_min),
        })
    return rows


def read_materials_csv(path: str | Path) -> list[MaterialSpec]:
    """Parse ``name,E_GPa,sigma_u_MPa,rho_kg_m3`` rows."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"name", "E_GPa", "sigma_u_MPa", "rho_kg_m3"}
        if reader.fieldnames is None or not expected <= set(reader.fieldnames):
            raise ConfigurationError(f"materials CSV needs columns {sorted(expected)}")
        return [MaterialSpec(row["name"], float(row["E_GPa"]) * 1e9, float(row["sigma_u_MPa"]) * 1e6,
                             float(row["rho_kg_m3"])) for row in reader]
