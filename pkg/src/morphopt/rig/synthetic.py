"""Phenomenological drag surrogate and the virtual wind-tunnel rig built on it."""

from __future__ import annotations

import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from ..exceptions import ConfigurationError
from ..geometry import MorphShape
from ..seeding import make_rng
from ..traces import DEFAULT_SAMPLE_RATE, ForceTrace, RigConditions, sample_count
from .base import FitnessEvaluator

#: Tunnel speeds of the baseline campaign, m/s.
TABLE_SPEEDS = (5.79, 7.33, 8.65, 10.13)
#: Mean drag and raw-sample std, morphing vehicle in the neutral configuration, N.
NEUTRAL_MEAN = (1.259, 1.888, 2.621, 3.485)
NEUTRAL_STD = (0.383, 0.353, 0.513, 0.655)
#: Same for the base vehicle without the morphing structure, N.
BASE_MEAN = (1.227, 1.901, 2.703, 3.551)
BASE_STD = (0.263, 0.334, 0.468, 0.586)

CONFIGURATIONS = ("morphing", "base")


@dataclass(frozen=True)
class BaselineTable:
    """Mean drag and sample std versus wind speed.

    Linear interpolation inside the table; outside it both columns are scaled
    by ``(U / U_edge)**2`` from the nearest tabulated speed.
    """

    speeds: tuple[float, ...] = TABLE_SPEEDS
    mean: tuple[float, ...] = NEUTRAL_MEAN
    std: tuple[float, ...] = NEUTRAL_STD

    def __post_init__(self):
        speeds = np.asarray(self.speeds, dtype=float)
        if not (len(self.speeds) == len(self.mean) == len(self.std)) or len(self.speeds) == 0:
            raise ConfigurationError("baseline columns must be non-empty and of equal length")
        if np.any(np.diff(speeds) <= 0):
            raise ConfigurationError("baseline speeds must be strictly increasing")
        if np.any(np.diff(self.mean) <= 0):
            raise ConfigurationError("baseline drag must increase monotonically with speed")
        if min(self.mean) <= 0 or min(self.std) < 0:
            raise ConfigurationError("baseline drag must be positive and std non-negative")

    def at(self, wind_speed: float) -> tuple[float, float]:
        speeds = self.speeds
        if wind_speed < speeds[0]:
            scale = (wind_speed / speeds[0]) ** 2
            return self.mean[0] * scale, self.std[0] * scale
        if wind_speed > speeds[-1]:
            scale = (wind_speed / speeds[-1]) ** 2
            return self.mean[-1] * scale, self.std[-1] * scale
        return (float(np.interp(wind_speed, speeds, self.mean)),
                float(np.interp(wind_speed, speeds, self.std)))


def base_vehicle_table() -> BaselineTable:
    return BaselineTable(TABLE_SPEEDS, BASE_MEAN, BASE_STD)


@dataclass(frozen=True)
class LocalMinimum:
    """An extra Gaussian dip in the drag surface, as a fraction of baseline."""

    center: tuple[float, float, float]
    depth: float
    widths: tuple[float, float, float] = (5.0, 5.0, 5.0)


@dataclass(frozen=True)
class SyntheticDragModel:
    """Drag = baseline(U) * (1 - reduction(theta)) + AR(1) noise + drift.

    ``reduction`` is a single Gaussian bowl of depth ``max_reduction_fraction``
    centred at ``planted_optimum`` (degrees), optionally plus a shallower
    ``secondary_minimum``. Noise std at each speed follows the baseline table,
    multiplied by ``noise_scale``; ``drift_std`` is the random-walk intensity in
    N per root-second.
    """

    baseline_by_speed: BaselineTable = field(default_factory=BaselineTable)
    base_vehicle: BaselineTable = field(default_factory=base_vehicle_table)
    planted_optimum: tuple[float, float, float] = (-15.0, 6.5, 12.5)
    max_reduction_fraction: float = 0.085
    bowl_widths: tuple[float, float, float] = (8.0, 10.0, 10.0)
    ar_coefficient: float = 0.95
    noise_scale: float = 1.0
    drift_std: float = 0.002
    transducer_offset: float = 0.0
    wind_off_noise_std: float = 0.002
    secondary_minimum: LocalMinimum | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.max_reduction_fraction < 1:
            raise ConfigurationError("max_reduction_fraction must lie in (0, 1)")
        if not abs(self.ar_coefficient) < 1:
            raise ConfigurationError("AR coefficient magnitude must be < 1 for a stationary process")
        if min(self.bowl_widths) <= 0:
            raise ConfigurationError("bowl widths must be positive")
        if self.noise_scale < 0 or self.drift_std < 0 or self.wind_off_noise_std < 0:
            raise ConfigurationError("noise parameters must be non-negative")
        depth = self.max_reduction_fraction + (self.secondary_minimum.depth if self.secondary_minimum else 0.0)
        if depth >= 1:
            raise ConfigurationError("combined reduction depth must stay below 1")

    def noiseless(self) -> "SyntheticDragModel":
        return replace(self, noise_scale=0.0, drift_std=0.0, wind_off_noise_std=0.0)

    @property
    def is_noiseless(self) -> bool:
        return self.noise_scale == 0 and self.drift_std == 0 and self.wind_off_noise_std == 0

    def reduction(self, theta) -> np.ndarray | float:
        """Fractional drag reduction relative to the baseline; broadcasts over ``(..., 3)``."""
        theta = np.asarray(theta, dtype=float)
        z = (theta - np.asarray(self.planted_optimum)) / np.asarray(self.bowl_widths)
        out = self.max_reduction_fraction * np.exp(-0.5 * np.sum(z**2, axis=-1))
        if self.secondary_minimum is not None:
            sec = self.secondary_minimum
            z2 = (theta - np.asarray(sec.center)) / np.asarray(sec.widths)
            out = out + sec.depth * np.exp(-0.5 * np.sum(z2**2, axis=-1))
        return out

    def mean_drag(self, theta, wind_speed: float) -> np.ndarray | float:
        baseline, _ = self.baseline_by_speed.at(wind_speed)
        return baseline * (1.0 - self.reduction(theta))

    def base_vehicle_drag(self, wind_speed: float) -> float:
        return self.base_vehicle.at(wind_speed)[0]

    def noise_std(self, wind_speed: float, configuration: str = "morphing") -> float:
        table = self.base_vehicle if configuration == "base" else self.baseline_by_speed
        return table.at(wind_speed)[1] * self.noise_scale

    def innovation_std(self, wind_speed: float, configuration: str = "morphing") -> float:
        """Innovation std giving the tabulated stationary std for the AR(1) noise."""
        return self.noise_std(wind_speed, configuration) * np.sqrt(1.0 - self.ar_coefficient**2)


def ar1_noise(rng: np.random.Generator, n: int, std: float, phi: float) -> np.ndarray:
    """Stationary AR(1) series with marginal std ``std``, started from the stationary law."""
    if std == 0 or n == 0:
        return np.zeros(n)
    e = rng.normal(0.0, std * np.sqrt(1.0 - phi**2), size=n)
    e[0] = rng.normal(0.0, std)
    return lfilter([1.0], [1.0, -phi], e)


class DriftProcess:
    """Gaussian random walk sampled lazily, strictly forward in time."""

    def __init__(self, std_per_sqrt_s: float, rng: np.random.Generator):
        self.std = std_per_sqrt_s
        self.rng = rng
        self.time = 0.0
        self.value = 0.0

    def path(self, t_start: float, n: int, sample_rate: float) -> np.ndarray:
        if t_start < self.time - 1e-9:
            raise ValueError("drift can only be sampled forward in time")
        if self.std == 0:
            self.time = t_start + n / sample_rate
            return np.zeros(n)
        gap = t_start - self.time
        if gap > 0:
            self.value += self.rng.normal(0.0, self.std * np.sqrt(gap))
        steps = self.rng.normal(0.0, self.std / np.sqrt(sample_rate), size=n)
        steps[0] = 0.0
        values = self.value + np.cumsum(steps)
        self.value = float(values[-1]) + float(self.rng.normal(0.0, self.std / np.sqrt(sample_rate)))
        self.time = t_start + n / sample_rate
        return values


def _shape_key(theta) -> int:
    return zlib.crc32(np.round(np.asarray(theta, dtype=float), 6).tobytes())


def _theta_of(shape) -> np.ndarray:
    return np.asarray(shape.theta if isinstance(shape, MorphShape) else shape, dtype=float)


def synthesize_trace(model: SyntheticDragModel, shape, conditions: RigConditions | None = None,
                     duration: float = 10.0, *, counter: int = 0, sample_rate: float = DEFAULT_SAMPLE_RATE,
                     t0: float = 0.0, drift: DriftProcess | None = None, configuration: str = "morphing",
                     theta_path: np.ndarray | None = None) -> ForceTrace:
    """Aerodynamic force trace for one shape (or a per-sample ``theta_path``).

    Without an explicit ``drift`` process, drift starts from zero at ``t0`` and
    is drawn from a stream keyed on ``counter``, so the trace is a pure function
    of ``(model.seed, shape, counter)``.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if configuration not in CONFIGURATIONS:
        raise ValueError(f"configuration must be one of {CONFIGURATIONS}")
    conditions = conditions or RigConditions()
    n = sample_count(duration, sample_rate)
    speed = conditions.wind_speed
    if configuration == "base":
        mean = np.full(n, model.base_vehicle_drag(speed))
        key = zlib.crc32(b"base")
    elif theta_path is not None:
        theta_path = np.asarray(theta_path, dtype=float)
        if theta_path.shape != (n, 3):
            raise ValueError(f"theta_path must have shape ({n}, 3)")
        mean = model.mean_drag(theta_path, speed)
        key = _shape_key(theta_path[[0, -1]])
    else:
        mean = np.full(n, float(model.mean_drag(_theta_of(shape), speed)))
        key = _shape_key(_theta_of(shape))
    rng = make_rng(model.seed, "noise", counter, key)
    noise = ar1_noise(rng, n, model.noise_std(speed, configuration), model.ar_coefficient)
    if drift is None:
        drift = DriftProcess(model.drift_std, make_rng(model.seed, "drift", counter))
        drift.time = t0
    drift_path = drift.path(t0, n, sample_rate)
    return ForceTrace(mean + noise + drift_path, sample_rate=sample_rate, conditions=conditions, t0=t0,
                      metadata={"source": "synthetic", "counter": counter, "configuration": configuration})


class SyntheticRig(FitnessEvaluator):
    """Virtual wind tunnel: a stateful transducer over :class:`SyntheticDragModel`.

    The rig keeps a clock so the drift random walk carries over between
    acquisitions, which is what makes per-generation recalibration matter.
    ``mode="delta"`` reports drag change relative to the most recent neutral
    recalibration; ``mode="absolute"`` subtracts the wind-off tare only.
    """

    supports_concurrent = True

    def __init__(self, model: SyntheticDragModel | None = None, conditions: RigConditions | None = None,
                 mode: str = "delta", averaging_window: float = 10.0,
                 sample_rate: float = DEFAULT_SAMPLE_RATE, realtime: bool = False, n_jobs: int = 1):
        if mode not in ("absolute", "delta"):
            raise ConfigurationError("mode must be 'absolute' or 'delta'")
        self.model = model or SyntheticDragModel()
        self.conditions = conditions or RigConditions()
        self.mode = mode
        self.averaging_window = averaging_window
        self.sample_rate = sample_rate
        self.realtime = realtime
        self.n_jobs = n_jobs
        self.reset()

    def reset(self) -> None:
        self.clock = 0.0
        self.counter = 0
        self.shape: MorphShape = MorphShape.neutral()
        self.configuration = "morphing"
        self.calibration_reference = 0.0
        self.wind_off_reference = 0.0
        self.tared = False
        self.n_evaluations = 0
        self.last_trace: ForceTrace | None = None
        self._drift = DriftProcess(self.model.drift_std, make_rng(self.model.seed, "drift"))

    def set_shape(self, shape: MorphShape) -> None:
        self.shape = shape
        self.configuration = "morphing"

    def set_configuration(self, configuration: str) -> None:
        if configuration not in CONFIGURATIONS:
            raise ValueError(f"configuration must be one of {CONFIGURATIONS}")
        self.configuration = configuration

    def _claim(self, duration: float) -> tuple[int, float, np.ndarray]:
        n = sample_count(duration, self.sample_rate)
        counter, t0 = self.counter, self.clock
        drift = self._drift.path(t0, n, self.sample_rate)
        self.counter += 1
        self.clock = t0 + n / self.sample_rate
        if self.realtime:
            time.sleep(duration)
        return counter, t0, drift

    def _render(self, counter: int, t0: float, drift: np.ndarray, shape, configuration: str,
                duration: float, theta_path=None) -> ForceTrace:
        model = self.model
        n = drift.size
        trace = synthesize_trace(replace(model, drift_std=0.0), shape, self.conditions, duration,
                                 counter=counter, sample_rate=self.sample_rate, t0=t0,
                                 configuration=configuration, theta_path=theta_path)
        return trace.with_samples(trace.samples[:n] + drift + model.transducer_offset)

    def acquire(self, duration: float) -> ForceTrace:
        """Raw wind-on transducer reading for the current shape."""
        counter, t0, drift = self._claim(duration)
        return self._render(counter, t0, drift, self.shape, self.configuration, duration)

    def acquire_wind_off(self, duration: float = 10.0) -> ForceTrace:
        counter, t0, drift = self._claim(duration)
        rng = make_rng(self.model.seed, "wind-off", counter)
        noise = rng.normal(0.0, self.model.wind_off_noise_std, drift.size) if self.model.wind_off_noise_std else 0.0
        samples = self.model.transducer_offset + drift + noise
        return ForceTrace(samples, sample_rate=self.sample_rate, conditions=self.conditions, t0=t0,
                          metadata={"source": "synthetic", "counter": counter, "wind": "off"})

    def tare(self, duration: float = 10.0) -> float:
        self.wind_off_reference = self.acquire_wind_off(duration).mean()
        self.tared = True
        return self.wind_off_reference

    def recalibrate_neutral(self, duration: float = 10.0) -> float:
        """Acquire the neutral shape and store its mean as the delta-mode reference."""
        self.set_shape(MorphShape.neutral())
        self.calibration_reference = self.acquire(duration).mean()
        return self.calibration_reference

    def _reference(self) -> float:
        return self.calibration_reference if self.mode == "delta" else self.wind_off_reference

    def _finish(self, trace: ForceTrace) -> tuple[float, ForceTrace]:
        reference = self._reference()
        out = trace.with_samples(trace.samples - reference, mode=self.mode, calibration_reference=reference)
        self.n_evaluations += 1
        return float(out.samples.mean()), out

    def measure(self, shape: MorphShape) -> tuple[float, ForceTrace]:
        """Mean over the averaging window, with the calibrated trace."""
        self.set_shape(shape)
        value, trace = self._finish(self.acquire(self.averaging_window))
        self.last_trace = trace
        return value, trace

    def evaluate(self, shape: MorphShape) -> float:
        return self.measure(shape)[0]

    def evaluate_many(self, shapes: Sequence[MorphShape]) -> list[float]:
        if self.n_jobs <= 1 or len(shapes) < 2:
            return super().evaluate_many(shapes)
        # time slots and drift are claimed in order; only noise synthesis runs in parallel
        slots = [self._claim(self.averaging_window) for _ in shapes]
        with ThreadPoolExecutor(max_workers=self.n_jobs) as pool:
            traces = list(pool.map(lambda args: self._render(*args[0], args[1], "morphing", self.averaging_window),
                                   zip(slots, shapes)))
        self.shape = shapes[-1]
        return [self._finish(t)[0] for t in traces]

    def begin_generation(self, index: int) -> None:
        if self.mode == "delta":
            self.recalibrate_neutral()
        elif not self.tared:
            self.tare()

    def dynamic_morph_trace(self, from_shape: MorphShape, to_shape: MorphShape, hold_before: float = 10.0,
                            transition: float = 2.0, hold_after: float = 15.0) -> ForceTrace:
        """Hold ``from_shape``, morph linearly in angle space to ``to_shape``, hold it.

        The returned trace is tared against the wind-off reference.
        """
        duration = hold_before + transition + hold_after
        n = sample_count(duration, self.sample_rate)
        t = np.arange(n) / self.sample_rate
        frac = np.clip((t - hold_before) / transition, 0.0, 1.0) if transition > 0 else (t >= hold_before) * 1.0
        a, b = _theta_of(from_shape), _theta_of(to_shape)
        path = a + frac[:, None] * (b - a)
        self.set_shape(from_shape)
        counter, t0, drift = self._claim(duration)
        raw = self._render(counter, t0, drift, None, "morphing", duration, theta_path=path)
        self.shape = to_shape
        reference = self.wind_off_reference
        return raw.with_samples(raw.samples - reference, mode="absolute", calibration_reference=reference,
                                metadata={**raw.metadata, "hold_before_s": hold_before,
                                          "transition_s": transition, "hold_after_s": hold_after,
                                          "from_theta_deg": list(map(float, a)), "to_theta_deg": list(map(float, b))})
