import csv
import hashlib
import json

import numpy as np
import pytest

from morphopt.campaign import (RunDirectory, oracle_optimum, run_dynamic_validation, run_enumerate, run_exp1,
                               run_exp2, split_dynamic_trace, write_enumeration, write_exp1, write_validation)
from morphopt.config import validate_config
from morphopt.exceptions import ConfigurationError
from morphopt.geometry import decode_indices
from morphopt.rig.synthetic import BASE_MEAN, SyntheticDragModel

QUIET = {"rig": {"synthetic": {"noise_scale": 0.0, "drift_std": 0.0, "wind_off_noise_std": 0.0}}}


def ar1_mean_se(sigma, n, phi=0.95):
    return sigma / np.sqrt(n * (1 - phi) / (1 + phi))


def test_exp1_noiseless_equals_configured_baselines():
    config = validate_config(QUIET)
    result = run_exp1(config)
    model = SyntheticDragModel()
    assert len(result.trials) == 4 * 2 * 5
    for row, base in zip(result.rows, BASE_MEAN):
        assert row["base_mean_N"] == pytest.approx(base, rel=1e-12)
        assert row["neutral_mean_N"] == pytest.approx(model.mean_drag((0, 0, 0), row["U_m_s"]), rel=1e-12)


def test_exp1_noisy_means_and_counts():
    result = run_exp1(validate_config({"seed": 3}))
    for row, base in zip(result.rows, BASE_MEAN):
        trials = [t for t in result.trials if t["U_m_s"] == row["U_m_s"] and t["configuration"] == "base"]
        assert [t["trial"] for t in trials] == [0, 1, 2, 3, 4]
        se = ar1_mean_se(row["base_std_N"], 5 * 18_000)
        assert abs(row["base_mean_N"] - base) <= 3 * se + 0.01
        assert row["Re"] > 0 and 1.0 < row["Cd_base"] < 1.2
    assert result.decision_pattern() == [False, True, True, True]


def test_exp1_outputs(tmp_path):
    config = validate_config({**QUIET, "exp1": {"speeds": [7.33], "trials": 2, "trial_duration": 5.0}})
    run = RunDirectory(tmp_path, config)
    with run.session():
        write_exp1(run_exp1(config, keep_traces=True), run)
    header = (tmp_path / "drag_table.csv").read_text().splitlines()[0]
    assert header.startswith("U_m_s,base_mean_N")
    summary = json.loads((tmp_path / "baseline_summary.json").read_text())
    assert summary["seed"] == 0 and summary["config_hash"] == config.config_hash()
    assert (tmp_path / "traces" / "U7.33_base_trial0.csv").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    for name, digest in manifest["artifacts"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest


def test_exp2_noiseless_finds_oracle(tmp_path):
    config = validate_config({**QUIET, "seed": 1})
    run = RunDirectory(tmp_path, config)
    with run.session():
        result = run_exp2(config, run=run)
    best = result.campaign.best.shape
    assert best == oracle_optimum(config)
    assert result.summary["true_reduction"] == pytest.approx(SyntheticDragModel().reduction(best.theta))
    assert result.summary["true_reduction"] == pytest.approx(0.085, abs=1e-3)
    with (tmp_path / "generations.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 50 + 20 * (result.campaign.n_generations - 1)
    best_per_gen = {}
    for r in rows:
        g = int(r["generation"])
        best_per_gen[g] = min(best_per_gen.get(g, np.inf), float(r["fitness_N"]))
    history = [best_per_gen[g] for g in sorted(best_per_gen)]
    assert all(b <= a for a, b in zip(history, history[1:]))
    assert sum(int(r["is_elite"]) for r in rows) == 4 * result.campaign.n_generations


def test_exp2_stall_termination():
    result = run_exp2(validate_config({**QUIET, "seed": 4}))
    records = result.campaign.records
    assert result.summary["termination_reason"] == "converged"
    assert all(r.elite_set() == records[-1].elite_set() for r in records[-6:])
    assert records[-7].elite_set() != records[-1].elite_set()


def test_generations_persisted_before_failure(tmp_path):
    from morphopt.exceptions import EvaluatorError
    from morphopt.rig import SyntheticRig

    class Breaking(SyntheticRig):
        def begin_generation(self, index):
            if index == 3:
                raise EvaluatorError("fan tripped")
            super().begin_generation(index)

    config = validate_config(QUIET)
    run = RunDirectory(tmp_path, config)
    with pytest.raises(EvaluatorError):
        with run.session():
            run_exp2(config, rig=Breaking(config.drag_model()), run=run)
    gens = {line.split(",")[0] for line in (tmp_path / "generations.csv").read_text().splitlines()[1:]}
    assert gens == {"0", "1", "2"}
    assert (tmp_path / "manifest.json").exists()


def test_validation_trials_reject():
    config = validate_config({"seed": 2})
    trials = run_dynamic_validation(config, [decode_indices((10, 52, 60)), decode_indices((12, 50, 58))])
    assert len(trials) == 8
    assert all(t.ttest.reject_null for t in trials)
    assert all(t.filtered.filtered and not t.trace.filtered for t in trials)


def test_validation_control_on_white_noise():
    config = validate_config({"seed": 0, "rig": {"synthetic": {"ar_coefficient": 0.0, "drift_std": 0.0}}})
    trials = run_dynamic_validation(config, [decode_indices((10, 52, 60))], control=True)
    controls = [t for t in trials if t.control]
    assert len(controls) == 4
    assert not any(t.ttest.reject_null for t in controls)
    assert all(t.ttest.reject_null for t in trials if not t.control)


def test_control_false_positives_under_autocorrelation():
    # the naive test treats 600 Hz AR(1) samples as independent, so flat
    # traces reject far more often than alpha; documented, not corrected
    config = validate_config({"seed": 0, "validation": {"trials": 10}})
    trials = run_dynamic_validation(config, [decode_indices((10, 52, 60))] * 2, control=True)
    rejected = sum(t.ttest.reject_null for t in trials if t.control)
    assert rejected / 20 > 0.1


def test_validation_plot_data(tmp_path):
    config = validate_config({**QUIET, "validation": {"trials": 1}})
    trials = run_dynamic_validation(config, [decode_indices((10, 52, 60))])
    run = RunDirectory(tmp_path, config)
    with run.session():
        write_validation(trials, run)
    report = json.loads((tmp_path / "validation.json").read_text())
    assert report["trials"][0]["transition_window_s"] == [10.0, 12.0]
    raw = np.loadtxt(tmp_path / "plot_data" / "elite1_trial1_raw.csv", delimiter=",", skiprows=1)
    t, f = raw[:, 0], raw[:, 1]
    assert t[0] == 0.0
    assert np.ptp(f[t < 10.0]) < 1e-12 and np.ptp(f[t >= 12.0]) < 1e-12
    moving = np.flatnonzero(np.abs(np.diff(f)) > 1e-12)
    assert t[moving[0] + 1] == pytest.approx(10.0, abs=2 / 600)
    assert t[moving[-1]] == pytest.approx(12.0, abs=2 / 600)
    binned = np.loadtxt(tmp_path / "plot_data" / "elite1_trial1_binned.csv", delimiter=",", skiprows=1)
    assert len(binned) == 27


def test_split_dynamic_trace():
    from morphopt.traces import ForceTrace
    trace = ForceTrace(np.arange(27 * 600, dtype=float), t0=100.0)
    pre, post = split_dynamic_trace(trace, 10.0, 2.0)
    assert len(pre) == 6000 and len(post) == 9000


def test_validation_rejects_inadmissible_elite():
    with pytest.raises(ConfigurationError):
        run_dynamic_validation(validate_config({}), [decode_indices((64, 64, 64))])


def test_enumeration_oracle(tmp_path):
    config = validate_config({"geometry": {"chain": {"unconstrained": True}}})
    result = run_enumerate(config)
    assert len(result) == 274_625
    assert result.optimum.indices == (10, 52, 60)
    assert np.all(np.diff(result.drag) >= 0)
    run = RunDirectory(tmp_path, config)
    with run.session():
        write_enumeration(result, run)
    lines = (tmp_path / "enumeration.csv").read_text().splitlines()
    assert len(lines) == 274_626
    assert lines[1].startswith("1,10,52,60,")


def test_enumeration_needs_synthetic_rig(tmp_path):
    for backend in ("remote",):
        with pytest.raises(ConfigurationError):
            run_enumerate(validate_config({"rig": {"backend": backend}}))
    config = validate_config({"rig": {"backend": "replay", "replay": {"directory": str(tmp_path)}}})
    with pytest.raises(ConfigurationError):
        run_enumerate(config)


def test_run_directory_lock(tmp_path):
    config = validate_config({})
    with RunDirectory(tmp_path, config).session():
        with pytest.raises(ConfigurationError, match="lock"):
            with RunDirectory(tmp_path, config).session():
                pass
