"""Serve previously recorded force traces as fitness measurements."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Mapping

from ..dsp import window_mean
from ..exceptions import ConfigurationError, EvaluatorError
from ..geometry import MorphShape
from ..traces import ForceTrace, read_trace
from .base import FitnessEvaluator

_SHAPE_FILE = re.compile(r"^shape_(\d+)_(\d+)_(\d+)\.csv$")
NEUTRAL_FILE = "neutral.csv"


def shape_filename(shape: MorphShape) -> str:
    i1, i2, i3 = shape.indices
    return f"shape_{i1}_{i2}_{i3}.csv"


class ReplayRig(FitnessEvaluator):
    """Look up a recorded trace per grid shape.

    In delta mode, absolute-mode recordings are referenced to the window mean
    of the ``neutral`` recording; delta-mode recordings are used as they are.
    """

    supports_concurrent = True

    def __init__(self, traces: Mapping[tuple[int, int, int], ForceTrace], neutral: ForceTrace | None = None,
                 mode: str = "delta", averaging_window: float = 10.0):
        if mode not in ("absolute", "delta"):
            raise ConfigurationError("mode must be 'absolute' or 'delta'")
        self.traces = {tuple(int(i) for i in k): v for k, v in traces.items()}
        self.neutral = neutral
        self.mode = mode
        self.averaging_window = averaging_window
        self.n_evaluations = 0

    @classmethod
    def from_directory(cls, directory: str | Path, **kwargs) -> "ReplayRig":
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigurationError(f"replay directory {directory} does not exist")
        traces = {}
        for path in sorted(directory.glob("shape_*.csv")):
            match = _SHAPE_FILE.match(path.name)
            if match:
                traces[tuple(int(g) for g in match.groups())] = read_trace(path)
        neutral_path = directory / NEUTRAL_FILE
        neutral = read_trace(neutral_path) if neutral_path.exists() else None
        return cls(traces, neutral, **kwargs)

    def _reference(self, trace: ForceTrace) -> float:
        if self.mode != "delta" or trace.mode == "delta":
            return 0.0
        if self.neutral is None:
            raise EvaluatorError("delta-mode replay of absolute traces needs a neutral recording")
        return window_mean(self.neutral, self.averaging_window)

    def measure(self, shape: MorphShape) -> tuple[float, ForceTrace]:
        try:
            trace = self.traces[tuple(shape.indices)]
        except KeyError:
            raise EvaluatorError(f"no recorded trace for shape indices {shape.indices}") from None
        self.n_evaluations += 1
        return window_mean(trace, self.averaging_window) - self._reference(trace), trace

    def evaluate(self, shape: MorphShape) -> float:
        return self.measure(shape)[0]
