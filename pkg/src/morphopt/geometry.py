"""Hinged-panel kinematics, the discretized angle grid and the feasible domain."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .exceptions import ConfigurationError, GridIndexError

N_AXES = 3
GRID_INTERVALS = 64
GRID_MAX_INDEX = GRID_INTERVALS
GRID_POINTS = GRID_INTERVALS + 1

#: Admissible relative rotation per panel, degrees (min, max).
ANGLE_RANGES_DEG: tuple[tuple[float, float], ...] = ((-20.0, 13.0), (-30.0, 15.0), (-30.0, 15.0))
ANGLE_MIN_DEG = np.array([lo for lo, _ in ANGLE_RANGES_DEG])
ANGLE_MAX_DEG = np.array([hi for _, hi in ANGLE_RANGES_DEG])
RESOLUTION_DEG = (ANGLE_MAX_DEG - ANGLE_MIN_DEG) / GRID_INTERVALS

GRID_CSV_HEADER = ("i1", "i2", "i3", "theta1_deg", "theta2_deg", "theta3_deg", "admissible")

_ANGLE_TOL = 1e-9


@dataclass(frozen=True)
class MorphShape:
    """Panel rotation angles (degrees) together with their grid indices."""

    theta: tuple[float, float, float]
    indices: tuple[int, int, int]

    @classmethod
    def neutral(cls) -> "MorphShape":
        """All panels horizontal.

        Zero is not a grid point on every axis, so the neutral shape carries the
        indices of the nearest grid points while its angles are exactly zero.
        """
        return cls((0.0, 0.0, 0.0), indices_from_angles((0.0, 0.0, 0.0)))

    def to_dict(self) -> dict:
        return {"theta_deg": [float(t) for t in self.theta], "indices": [int(i) for i in self.indices]}

    @classmethod
    def from_dict(cls, data: dict) -> "MorphShape":
        if "indices" in data:
            shape = decode_indices(data["indices"])
            if "theta_deg" in data and not np.allclose(shape.theta, data["theta_deg"], atol=1e-6):
                return cls(tuple(float(t) for t in data["theta_deg"]), shape.indices)
            return shape
        theta = tuple(float(t) for t in data["theta_deg"])
        return cls(theta, indices_from_angles(theta))


@dataclass(frozen=True)
class PanelChainSpec:
    """Dimensions of the hinged chain and the two geometric clearance limits (metres)."""

    panel_length: float = 0.070
    panel_width: float = 0.241
    panel_count: int = 3
    mount_height_above_bed: float = 0.105
    max_rise_above_roof: float = 0.020
    min_bed_clearance: float = 0.005

    def __post_init__(self):
        for name in ("panel_length", "panel_width", "mount_height_above_bed", "min_bed_clearance"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigurationError(f"{name} must be strictly positive, got {value}")
        if not self.max_rise_above_roof >= 0:
            raise ConfigurationError(f"max_rise_above_roof must be non-negative, got {self.max_rise_above_roof}")
        if self.panel_count != N_AXES:
            raise ConfigurationError(f"panel_count must be {N_AXES}, got {self.panel_count}")

    @classmethod
    def unconstrained(cls, **overrides) -> "PanelChainSpec":
        """A chain for which neither clearance bound can bind."""
        params = dict(mount_height_above_bed=math.inf, max_rise_above_roof=math.inf)
        params.update(overrides)
        return cls(**params)

    @property
    def bed_floor_z(self) -> float:
        """Lowest admissible z of any joint, relative to the mount."""
        return -self.mount_height_above_bed + self.min_bed_clearance

    @property
    def total_length(self) -> float:
        return self.panel_count * self.panel_length


@dataclass(frozen=True)
class VehicleGeometry:
    """Reduced-scale model dimensions (metres, square metres)."""

    length: float = 0.7811
    width: float = 0.2540
    height: float = 0.2095
    frontal_area: float = 5.321e-2
    blockage_ratio: float = 0.034
    test_section_area: float | None = field(default=None)

    def __post_init__(self):
        for name in ("length", "width", "height", "frontal_area"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be strictly positive")
        if self.test_section_area is not None:
            if not self.test_section_area > 0:
                raise ConfigurationError("test_section_area must be strictly positive")
            object.__setattr__(self, "blockage_ratio", self.frontal_area / self.test_section_area)


def _check_indices(indices) -> tuple[int, int, int]:
    values = tuple(int(i) for i in indices)
    if len(values) != N_AXES:
        raise ValueError(f"expected {N_AXES} indices, got {len(values)}")
    for axis, (raw, idx) in enumerate(zip(indices, values)):
        if idx != raw or not 0 <= idx <= GRID_MAX_INDEX:
            raise GridIndexError(axis, raw)
    return values


def decode_indices(indices) -> MorphShape:
    """Map three grid indices to their panel angles."""
    idx = _check_indices(indices)
    theta = tuple(float(ANGLE_MIN_DEG[a] + idx[a] * RESOLUTION_DEG[a]) for a in range(N_AXES))
    return MorphShape(theta, idx)


def angles_from_indices(indices: np.ndarray) -> np.ndarray:
    """Vectorised decode of an ``(n, 3)`` integer array, without range checks."""
    return ANGLE_MIN_DEG + np.asarray(indices) * RESOLUTION_DEG


def indices_from_angles(theta) -> tuple[int, int, int]:
    """Nearest grid indices for arbitrary angles (clipped to the grid)."""
    raw = np.rint((np.asarray(theta, dtype=float) - ANGLE_MIN_DEG) / RESOLUTION_DEG)
    return tuple(int(i) for i in np.clip(raw, 0, GRID_MAX_INDEX))


def chain_profile(shape: MorphShape | tuple, spec: PanelChainSpec | None = None) -> np.ndarray:
    """Joint coordinates ``(x, z)`` of the chain, mount first.

    Angles are relative rotations: segment ``i`` has absolute slope equal to the
    cumulative sum of the first ``i`` angles, positive upward.
    """
    spec = spec or PanelChainSpec()
    theta = shape.theta if isinstance(shape, MorphShape) else tuple(shape)
    slopes = np.radians(np.cumsum(theta))
    points = np.zeros((len(theta) + 1, 2))
    points[1:, 0] = np.cumsum(spec.panel_length * np.cos(slopes))
    points[1:, 1] = np.cumsum(spec.panel_length * np.sin(slopes))
    return points


def _joint_heights(theta: np.ndarray, panel_length: float) -> np.ndarray:
    return panel_length * np.cumsum(np.sin(np.radians(np.cumsum(theta, axis=-1))), axis=-1)


def _in_range(theta: np.ndarray) -> np.ndarray:
    return np.all((theta >= ANGLE_MIN_DEG - _ANGLE_TOL) & (theta <= ANGLE_MAX_DEG + _ANGLE_TOL), axis=-1)


def admissible_mask(theta, spec: PanelChainSpec | None = None) -> np.ndarray:
    """Vectorised admissibility for an ``(..., 3)`` array of angles in degrees."""
    spec = spec or PanelChainSpec()
    theta = np.asarray(theta, dtype=float)
    z = _joint_heights(theta, spec.panel_length)
    # the mount point itself sits at z = 0, which always satisfies both bounds
    geometric = np.all((z >= spec.bed_floor_z) & (z <= spec.max_rise_above_roof), axis=-1)
    return geometric & _in_range(theta)


def is_admissible(shape: MorphShape | tuple, spec: PanelChainSpec | None = None) -> bool:
    """True iff the angles are in range and the chain respects both clearance bounds."""
    theta = shape.theta if isinstance(shape, MorphShape) else tuple(shape)
    return bool(admissible_mask(np.asarray(theta, dtype=float), spec))


def grid_indices() -> np.ndarray:
    """All ``65**3`` index triples in lexicographic order, shape ``(274625, 3)``."""
    axis = np.arange(GRID_POINTS)
    return np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, N_AXES)


class DesignSpace:
    """The feasible domain: admissible grid shapes for one chain spec.

    Membership is precomputed once as a ``65 x 65 x 65`` boolean table so that
    rejection sampling and offspring screening are constant-time lookups.
    """

    def __init__(self, spec: PanelChainSpec | None = None):
        self.spec = spec or PanelChainSpec()
        self._indices = grid_indices()
        self._mask_flat = admissible_mask(angles_from_indices(self._indices), self.spec)
        self.mask = self._mask_flat.reshape(GRID_POINTS, GRID_POINTS, GRID_POINTS)
        self.size = int(self._mask_flat.sum())

    def __len__(self) -> int:
        return self.size

    def __contains__(self, indices) -> bool:
        i1, i2, i3 = (int(i) for i in indices)
        if not all(0 <= i <= GRID_MAX_INDEX for i in (i1, i2, i3)):
            return False
        return bool(self.mask[i1, i2, i3])

    def admissible_indices(self) -> np.ndarray:
        """Index triples of every admissible grid shape, lexicographic order."""
        return self._indices[self._mask_flat]

    def __iter__(self) -> Iterator[MorphShape]:
        for row in self.admissible_indices():
            yield decode_indices(row)


def enumerate_grid(spec: PanelChainSpec | None = None) -> Iterator[MorphShape]:
    """Yield every admissible grid shape once, in lexicographic index order."""
    return iter(DesignSpace(spec))


def write_grid_csv(spec: PanelChainSpec | None = None, stream: io.TextIOBase | None = None) -> str | None:
    """Export the full grid with an admissibility column.

    Returns the CSV text when no stream is given.
    """
    space = DesignSpace(spec)
    target = stream if stream is not None else io.StringIO()
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(GRID_CSV_HEADER)
    theta = angles_from_indices(space._indices)
    for idx, th, ok in zip(space._indices, theta, space._mask_flat):
        writer.writerow([*idx.tolist(), *(f"{t:.6f}" for t in th), int(ok)])
    if stream is None:
        return target.getvalue()
    return None
