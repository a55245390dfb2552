"""Drag coefficient and Reynolds number."""

from __future__ import annotations

from .traces import RigConditions


def _speed(conditions) -> float:
    return conditions.wind_speed if isinstance(conditions, RigConditions) else float(conditions)


def compute_drag_coefficient(mean_drag: float, conditions: RigConditions | float, frontal_area: float,
                             air_density: float | None = None) -> float:
    """``Cd = 2 F / (rho U^2 A)``.

    ``conditions`` may be a :class:`RigConditions` or a bare wind speed, in
    which case ``air_density`` defaults to 1.225 kg/m^3.
    """
    speed = _speed(conditions)
    if air_density is None:
        air_density = conditions.air_density if isinstance(conditions, RigConditions) else 1.225
    if speed == 0 or frontal_area == 0:
        raise ValueError("wind speed and frontal area must be non-zero")
    return 2.0 * mean_drag / (air_density * speed**2 * frontal_area)


def compute_reynolds(conditions: RigConditions | float, characteristic_length: float,
                     kinematic_viscosity: float | None = None) -> float:
    """``Re = L U / nu``."""
    speed = _speed(conditions)
    if kinematic_viscosity is None:
        kinematic_viscosity = (conditions.kinematic_viscosity if isinstance(conditions, RigConditions)
                               else 1.48e-5)
    return characteristic_length * speed / kinematic_viscosity
