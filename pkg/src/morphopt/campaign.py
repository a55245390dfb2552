"""Experiment orchestration: baseline drag, GA optimization, dynamic validation, enumeration."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from filelock import FileLock, Timeout

from .aero import compute_drag_coefficient, compute_reynolds
from .config import CampaignConfig
from .dsp import FilterSpec, calibrate_wind_off, lowpass, moving_average
from .exceptions import ConfigurationError
from .geometry import DesignSpace, MorphShape, angles_from_indices, decode_indices
from .optimizer import CampaignResult, GenerationRecord, run_campaign
from .rig import FitnessEvaluator, RemoteRig, ReplayRig, SyntheticRig
from .stats import TTestResult, t_test_one_sided
from .traces import ForceTrace, write_trace

logger = logging.getLogger(__name__)

GENERATION_CSV_HEADER = ("generation", "i1", "i2", "i3", "theta1_deg", "theta2_deg", "theta3_deg",
                         "fitness_N", "is_elite")
DRAG_TABLE_HEADER = ("U_m_s", "base_mean_N", "base_std_N", "neutral_mean_N", "neutral_std_N", "Cd_base",
                     "Cd_neutral", "Re", "t_statistic", "p_value", "reject_null")
ENUMERATION_HEADER = ("rank", "i1", "i2", "i3", "theta1_deg", "theta2_deg", "theta3_deg", "drag_N",
                      "reduction")
SERIES_HEADER = ("t_s", "value_N")


def _fmt(value: float) -> str:
    return repr(float(value))


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


class RunDirectory:
    """Output directory for one campaign: exclusive lock, artifacts, manifest.

    JSON artifacts embed the config hash and seed; CSV artifacts keep their
    exact headers and are covered by ``manifest.json`` together with their
    SHA-256 digests.
    """

    def __init__(self, path: str | Path, config: CampaignConfig):
        self.path = Path(path)
        self.config = config
        self.artifacts: dict[str, str] = {}

    def stamp(self, payload: dict) -> dict:
        return {"config_hash": self.config.config_hash(), "seed": self.config.seed, **payload}

    def file(self, name: str) -> Path:
        target = self.path / name
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def register(self, name: str) -> Path:
        target = self.path / name
        self.artifacts[name] = hashlib.sha256(target.read_bytes()).hexdigest()
        return target

    def write_text(self, name: str, text: str) -> Path:
        self.file(name).write_text(text)
        return self.register(name)

    def write_json(self, name: str, payload: dict) -> Path:
        return self.write_text(name, _json_text(self.stamp(payload)))

    def write_csv(self, name: str, header, rows) -> Path:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return self.write_text(name, buf.getvalue())

    def write_series(self, name: str, times, values) -> Path:
        return self.write_csv(name, SERIES_HEADER, ([f"{t:.6f}", _fmt(v)] for t, v in zip(times, values)))

    def write_manifest(self) -> Path:
        manifest = self.stamp({"mode": self.config.mode, "artifacts": dict(sorted(self.artifacts.items()))})
        target = self.file("manifest.json")
        target.write_text(_json_text(manifest))
        return target

    @contextmanager
    def session(self) -> Iterator["RunDirectory"]:
        self.path.mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(self.path / ".morphopt.lock"))
        try:
            lock.acquire(timeout=0)
        except Timeout:
            raise ConfigurationError(f"another campaign holds the lock on {self.path}") from None
        try:
            self.write_text("config.json", _json_text(self.config.experiment_dict()))
            yield self
        finally:
            self.write_manifest()
            lock.release()


def build_rig(config: CampaignConfig, mode: str = "delta", wind_speed: float | None = None) -> FitnessEvaluator:
    rig = config.rig
    conditions = config.rig_conditions(wind_speed)
    if rig.backend == "synthetic":
        return SyntheticRig(config.drag_model(), conditions, mode=mode, averaging_window=rig.averaging_window,
                            realtime=rig.realtime, n_jobs=rig.synthetic.n_jobs)
    if rig.backend == "replay":
        return ReplayRig.from_directory(rig.replay.directory, mode=mode, averaging_window=rig.averaging_window)
    return RemoteRig(rig.remote.host, rig.remote.port, mode=mode, averaging_window=rig.averaging_window,
                     timeout=rig.remote.timeout, conditions=conditions)


def _require_synthetic(rig: FitnessEvaluator, what: str) -> SyntheticRig:
    if not isinstance(rig, SyntheticRig):
        raise ConfigurationError(f"{what} requires the synthetic rig")
    return rig


# -- Exp 1: baseline drag ---------------------------------------------------

@dataclass
class Exp1Result:
    rows: list[dict]
    trials: list[dict]
    ttests: dict[float, TTestResult]
    traces: dict[tuple[float, str, int], ForceTrace] = field(default_factory=dict)

    def decision_pattern(self) -> list[bool]:
        return [self.ttests[row["U_m_s"]].reject_null for row in self.rows]


def run_exp1(config: CampaignConfig, rig: SyntheticRig | None = None, keep_traces: bool = False) -> Exp1Result:
    """Base vehicle vs neutral configuration, wind-off tared, at each tunnel speed.

    Configurations are measured in blocks (all base trials, then all neutral
    trials) at each speed. The one-sided test asks whether the base vehicle
    sees more drag than the neutral configuration.
    """
    settings = config.exp1
    rig = _require_synthetic(rig or build_rig(config, mode="absolute"), "the baseline experiment")
    vehicle = config.vehicle()
    rows, trials, ttests, traces = [], [], {}, {}
    for speed in settings.speeds:
        rig.conditions = config.rig_conditions(speed)
        pooled: dict[str, np.ndarray] = {}
        for configuration in ("base", "morphing"):
            chunks = []
            for trial in range(settings.trials):
                rig.set_shape(MorphShape.neutral())
                rig.set_configuration(configuration)
                reference = rig.acquire_wind_off(settings.wind_off_duration)
                trace = calibrate_wind_off(rig.acquire(settings.trial_duration), reference)
                chunks.append(trace.samples)
                label = "base" if configuration == "base" else "neutral"
                trials.append({"U_m_s": speed, "configuration": label, "trial": trial,
                               "mean_N": trace.mean(), "std_N": float(trace.samples.std(ddof=1)),
                               "wind_off_reference_N": trace.calibration_reference})
                if keep_traces:
                    traces[(speed, label, trial)] = trace
            pooled[configuration] = np.concatenate(chunks)
        base, neutral = pooled["base"], pooled["morphing"]
        result = t_test_one_sided(base, neutral, settings.alpha)
        ttests[speed] = result
        rows.append({
            "U_m_s": speed,
            "base_mean_N": float(base.mean()), "base_std_N": float(base.std(ddof=1)),
            "neutral_mean_N": float(neutral.mean()), "neutral_std_N": float(neutral.std(ddof=1)),
            "Cd_base": compute_drag_coefficient(float(base.mean()), rig.conditions, vehicle.frontal_area),
            "Cd_neutral": compute_drag_coefficient(float(neutral.mean()), rig.conditions, vehicle.frontal_area),
            "Re": compute_reynolds(rig.conditions, vehicle.length),
            "t_statistic": result.t_statistic, "p_value": result.p_value, "reject_null": result.reject_null,
        })
    return Exp1Result(rows, trials, ttests, traces)


def write_exp1(result: Exp1Result, run: RunDirectory) -> None:
    run.write_csv("drag_table.csv", DRAG_TABLE_HEADER,
                  ([_fmt(r[k]) if k != "reject_null" else int(r[k]) for k in DRAG_TABLE_HEADER] for r in result.rows))
    run.write_csv("trials.csv", ("U_m_s", "configuration", "trial", "mean_N", "std_N", "wind_off_reference_N"),
                  ([_fmt(t["U_m_s"]), t["configuration"], t["trial"], _fmt(t["mean_N"]), _fmt(t["std_N"]),
                    _fmt(t["wind_off_reference_N"])] for t in result.trials))
    for (speed, label, trial), trace in sorted(result.traces.items()):
        name = f"traces/U{speed:.2f}_{label}_trial{trial}.csv"
        write_trace(trace, run.file(name))
        run.register(name)
        run.register(str(Path(name).with_suffix(".json")))
    run.write_json("baseline_summary.json", {
        "block_order": ["base", "neutral"],
        "rows": result.rows,
        "ttests": {f"{speed:.2f}": t.to_dict() for speed, t in result.ttests.items()},
    })


# -- Exp 2: GA optimization ------------------------------------------------

def generation_rows(record: GenerationRecord) -> list[list]:
    elite_ids = {id(ind) for ind in record.elites}
    rows = []
    for ind in record.population:
        rows.append([record.index, *ind.shape.indices, *(f"{t:.6f}" for t in ind.shape.theta),
                     _fmt(ind.fitness), int(id(ind) in elite_ids)])
    return rows


@dataclass
class Exp2Result:
    campaign: CampaignResult
    summary: dict


def _individual_dict(ind) -> dict:
    return {**ind.shape.to_dict(), "fitness_N": ind.fitness, "chromosome": str(ind.chromosome),
            "evaluated_at": ind.evaluated_at}


def run_exp2(config: CampaignConfig, rig: FitnessEvaluator | None = None,
             run: RunDirectory | None = None) -> Exp2Result:
    """GA campaign in delta mode with neutral recalibration before each generation."""
    rig = rig or build_rig(config, mode="delta", wind_speed=config.conditions.wind_speed)
    domain = DesignSpace(config.chain_spec())
    handle = None
    if run is not None:
        handle = run.file("generations.csv").open("w", newline="")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(GENERATION_CSV_HEADER)

    def persist(record: GenerationRecord) -> None:
        if handle is not None:
            writer.writerows(generation_rows(record))
            handle.flush()

    try:
        if isinstance(rig, RemoteRig):
            rig.connect()
        campaign = run_campaign(config.ga_config(), rig, domain, on_generation=persist)
    finally:
        if handle is not None:
            handle.close()
            run.register("generations.csv")
        if isinstance(rig, RemoteRig):
            rig.close()
    summary = {
        "mode": "exp2-optimize",
        "termination_reason": campaign.termination_reason,
        "n_generations": campaign.n_generations,
        "n_evaluations": campaign.n_evaluations,
        "best": _individual_dict(campaign.best),
        "elites": [_individual_dict(ind) for ind in campaign.records[-1].elites],
        "fitness_history": campaign.fitness_history(),
        "rng_digests": [r.rng_digest for r in campaign.records],
    }
    if isinstance(rig, SyntheticRig):
        baseline, _ = rig.model.baseline_by_speed.at(rig.conditions.wind_speed)
        summary["true_reduction"] = float(rig.model.reduction(campaign.best.shape.theta))
        summary["measured_reduction"] = float(-campaign.best.fitness / baseline)
    if run is not None:
        run.write_csv("fitness_history.csv", ("generation", "elite1_N", "elite2_N", "elite3_N", "elite4_N",
                                              "population_mean_N"),
                      ([r.index, *(_fmt(e.fitness) for e in r.elites),
                        _fmt(np.mean([i.fitness for i in r.population]))] for r in campaign.records))
        run.write_json("summary.json", summary)
    return Exp2Result(campaign, summary)


# -- dynamic morphing validation --------------------------------------------

@dataclass
class ValidationTrial:
    elite: int
    trial: int
    shape: MorphShape
    trace: ForceTrace
    filtered: ForceTrace
    bins: tuple[np.ndarray, np.ndarray]
    ttest: TTestResult
    control: bool = False


def split_dynamic_trace(trace: ForceTrace, hold_before: float, transition: float) -> tuple[np.ndarray, np.ndarray]:
    """Raw samples before the morph starts and after it ends."""
    t = trace.times - trace.t0
    return trace.samples[t < hold_before], trace.samples[t >= hold_before + transition]


def run_dynamic_validation(config: CampaignConfig, elite_shapes: list[MorphShape] | None = None,
                           rig: SyntheticRig | None = None, control: bool = False) -> list[ValidationTrial]:
    """Neutral-to-elite morphing trials with a one-sided test on the raw samples.

    The test asks whether the neutral (pre-morph) drag exceeds the elite
    (post-morph) drag. ``control=True`` adds one neutral-to-neutral trial per
    elite slot.
    """
    settings = config.validation
    rig = _require_synthetic(rig or build_rig(config, mode="absolute"), "dynamic validation")
    if elite_shapes is None:
        elite_shapes = [decode_indices(e) for e in settings.elites] if settings.elites else [
            oracle_optimum(config)]
    domain = DesignSpace(config.chain_spec())
    for shape in elite_shapes:
        if shape.indices not in domain:
            raise ConfigurationError(f"elite shape {shape.indices} is not admissible")
    spec = FilterSpec(order=config.signal.order, cutoff=config.signal.cutoff)
    rig.tare()
    trials = []
    plan = [(k, shape, False) for k, shape in enumerate(elite_shapes)]
    if control:
        plan += [(k, MorphShape.neutral(), True) for k in range(len(elite_shapes))]
    for k, shape, is_control in plan:
        for j in range(settings.trials):
            rig.tare()
            trace = rig.dynamic_morph_trace(MorphShape.neutral(), shape, settings.hold_before,
                                            settings.transition, settings.hold_after)
            pre, post = split_dynamic_trace(trace, settings.hold_before, settings.transition)
            result = t_test_one_sided(pre, post, settings.alpha)
            bins = moving_average(trace, config.signal.bin_window, sliding=config.signal.sliding)
            trials.append(ValidationTrial(k, j, shape, trace, lowpass(trace, spec), bins, result, is_control))
    return trials


def write_validation(trials: list[ValidationTrial], run: RunDirectory) -> None:
    reports = []
    for trial in trials:
        stem = f"{'control' if trial.control else 'elite'}{trial.elite + 1}_trial{trial.trial + 1}"
        t = trial.trace.times - trial.trace.t0
        run.write_series(f"plot_data/{stem}_raw.csv", t, trial.trace.samples)
        run.write_series(f"plot_data/{stem}_filtered.csv", t, trial.filtered.samples)
        run.write_series(f"plot_data/{stem}_binned.csv", trial.bins[0] - trial.trace.t0, trial.bins[1])
        reports.append({"elite": trial.elite + 1, "trial": trial.trial + 1, "control": trial.control,
                        "shape": trial.shape.to_dict(), "ttest": trial.ttest.to_dict(),
                        "transition_window_s": [trial.trace.metadata["hold_before_s"],
                                                trial.trace.metadata["hold_before_s"]
                                                + trial.trace.metadata["transition_s"]]})
    run.write_json("validation.json", {"mode": "dynamic-validate", "trials": reports,
                                       "all_rejected": all(r["ttest"]["reject_null"] for r in reports
                                                           if not r["control"])})


# -- exhaustive enumeration oracle ------------------------------------------

@dataclass
class Enumeration:
    indices: np.ndarray
    theta: np.ndarray
    drag: np.ndarray
    reduction: np.ndarray

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def optimum(self) -> MorphShape:
        return decode_indices(self.indices[0])


def run_enumerate(config: CampaignConfig) -> Enumeration:
    """Score every admissible shape with the noiseless surrogate, ascending by drag.

    Ties keep lexicographic index order.
    """
    if config.rig.backend != "synthetic":
        raise ConfigurationError("enumeration is only possible on the synthetic rig")
    model = config.drag_model().noiseless()
    indices = DesignSpace(config.chain_spec()).admissible_indices()
    theta = angles_from_indices(indices)
    drag = np.asarray(model.mean_drag(theta, config.conditions.wind_speed))
    order = np.argsort(drag, kind="stable")
    return Enumeration(indices[order], theta[order], drag[order], np.asarray(model.reduction(theta[order])))


def oracle_optimum(config: CampaignConfig) -> MorphShape:
    return run_enumerate(config).optimum


def write_enumeration(result: Enumeration, run: RunDirectory, name: str = "enumeration.csv") -> Path:
    ranks = np.arange(1, len(result) + 1)
    lines = [",".join(ENUMERATION_HEADER)]
    for r, idx, th, d, red in zip(ranks, result.indices.tolist(), result.theta, result.drag, result.reduction):
        lines.append(f"{r},{idx[0]},{idx[1]},{idx[2]},{th[0]:.6f},{th[1]:.6f},{th[2]:.6f},{float(d)!r},{float(red)!r}")
    return run.write_text(name, "\n".join(lines) + "\n")
