"""Force traces, test conditions and their on-disk format."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError

DEFAULT_SAMPLE_RATE = 600.0
TRACE_CSV_HEADER = ("t_s", "force_N")
MODES = ("absolute", "delta")


@dataclass(frozen=True)
class RigConditions:
    wind_speed: float = 7.33
    air_density: float = 1.225
    kinematic_viscosity: float = 1.48e-5
    temperature: float = 15.0

    def __post_init__(self):
        for name in ("wind_speed", "air_density", "kinematic_viscosity"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be strictly positive")


@dataclass(frozen=True, eq=False)
class ForceTrace:
    """Uniformly sampled force record.

    ``filtered`` marks data that went through a smoothing filter; statistical
    routines refuse such traces.
    """

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    mode: str = "absolute"
    calibration_reference: float = 0.0
    conditions: RigConditions = field(default_factory=RigConditions)
    t0: float = 0.0
    filtered: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        object.__setattr__(self, "samples", samples)
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    def mean(self) -> float:
        return float(self.samples.mean())

    def with_samples(self, samples, **changes) -> "ForceTrace":
        return replace(self, samples=np.asarray(samples, dtype=float), **changes)

    def header(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate,
            "mode": self.mode,
            "calibration_reference_N": self.calibration_reference,
            "conditions": asdict(self.conditions),
            "t0_s": self.t0,
            "filtered": self.filtered,
            "metadata": self.metadata,
        }


def sample_count(duration: float, sample_rate: float = DEFAULT_SAMPLE_RATE) -> int:
    return int(round(duration * sample_rate))


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def write_trace(trace: ForceTrace, path: str | Path) -> Path:
    """Write ``t_s,force_N`` CSV plus a JSON header sidecar next to it."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_CSV_HEADER)
        for t, f in zip(trace.times, trace.samples):
            writer.writerow([f"{t:.6f}", repr(float(f))])
    sidecar_path(path).write_text(json.dumps(trace.header(), indent=2, sort_keys=True) + "\n")
    return path


def read_trace(path: str | Path) -> ForceTrace:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times, samples = data[:, 0], data[:, 1]
    side = sidecar_path(path)
    if side.exists():
        header = json.loads(side.read_text())
        return ForceTrace(
            samples,
            sample_rate=float(header.get("sample_rate_hz", DEFAULT_SAMPLE_RATE)),
            mode=header.get("mode", "absolute"),
            calibration_reference=float(header.get("calibration_reference_N", 0.0)),
            conditions=RigConditions(**header.get("conditions", {})),
            t0=float(header.get("t0_s", times[0] if times.size else 0.0)),
            filtered=bool(header.get("filtered", False)),
            metadata=header.get("metadata", {}),
        )
    if times.size < 2:
        raise ValueError(f"{path}: cannot infer the sample rate without a sidecar header")
    rate = 1.0 / float(np.median(np.diff(times)))
    return ForceTrace(samples, sample_rate=rate, t0=float(times[0]))
