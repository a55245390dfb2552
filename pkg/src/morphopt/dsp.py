"""Measurement conditioning: tare subtraction, zero-phase smoothing, window statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfiltfilt
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigurationError
from .traces import DEFAULT_SAMPLE_RATE, ForceTrace, sample_count


@dataclass(frozen=True)
class FilterSpec:
    order: int = 4
    cutoff: float = 5.0
    kind: str = "butterworth"
    zero_phase: bool = True

    def validate(self, sample_rate: float) -> None:
        if self.kind != "butterworth" or not self.zero_phase:
            raise ConfigurationError("only zero-phase Butterworth low-pass filtering is supported")
        if self.order < 1:
            raise ConfigurationError("filter order must be >= 1")
        if not 0 < self.cutoff < sample_rate / 2:
            raise ConfigurationError(f"cutoff {self.cutoff} Hz must lie in (0, Nyquist={sample_rate / 2} Hz)")

    def pad_length(self) -> int:
        return 3 * (self.order + 1)


def calibrate_wind_off(trace: ForceTrace, reference_trace: ForceTrace) -> ForceTrace:
    """Subtract the mean of a wind-off reference recording."""
    if len(reference_trace) == 0:
        raise ValueError("reference trace is empty")
    if not np.isclose(trace.sample_rate, reference_trace.sample_rate):
        raise ValueError("trace and reference must share a sample rate")
    reference = reference_trace.mean()
    return trace.with_samples(trace.samples - reference, calibration_reference=reference)


class ZeroPhaseLowpass(TransformerMixin, BaseEstimator):
    """Forward-backward Butterworth low-pass filter.

    ``transform`` filters along axis 0 of a 1-D or 2-D array, or accepts a
    :class:`ForceTrace` and returns a new trace flagged ``filtered``.
    Edges use even (mirror) padding of three filter lengths.
    """

    def __init__(self, cutoff=5.0, order=4, sample_rate=DEFAULT_SAMPLE_RATE):
        self.cutoff = cutoff
        self.order = order
        self.sample_rate = sample_rate

    def _spec(self) -> FilterSpec:
        return FilterSpec(order=self.order, cutoff=self.cutoff)

    def fit(self, X=None, y=None):
        spec = self._spec()
        spec.validate(self.sample_rate)
        self.sos_ = butter(spec.order, spec.cutoff, btype="low", fs=self.sample_rate, output="sos")
        self.pad_length_ = spec.pad_length()
        return self

    def _filter(self, values: np.ndarray) -> np.ndarray:
        if values.shape[0] <= self.pad_length_:
            raise ValueError(f"need more than {self.pad_length_} samples to filter, got {values.shape[0]}")
        return sosfiltfilt(self.sos_, values, axis=0, padtype="even", padlen=self.pad_length_)

    def transform(self, X):
        check_is_fitted(self, "sos_")
        if isinstance(X, ForceTrace):
            if not np.isclose(X.sample_rate, self.sample_rate):
                raise ValueError("trace sample rate differs from the filter's")
            return X.with_samples(self._filter(X.samples), filtered=True)
        values = np.asarray(X, dtype=float)
        one_d = values.ndim == 1
        values = check_array(values.reshape(-1, 1) if one_d else values, ensure_min_samples=2)
        out = self._filter(values)
        return out.ravel() if one_d else out

    def magnitude_response(self, freqs) -> np.ndarray:
        """Analytic zero-phase gain, the squared digital Butterworth magnitude.

        The digital design goes through the bilinear transform, hence the
        frequency warping ``tan(pi f / fs)``.
        """
        freqs = np.asarray(freqs, dtype=float)
        ratio = np.tan(np.pi * freqs / self.sample_rate) / np.tan(np.pi * self.cutoff / self.sample_rate)
        return 1.0 / (1.0 + ratio ** (2 * self.order))


def lowpass(trace: ForceTrace, spec: FilterSpec | None = None) -> ForceTrace:
    spec = spec or FilterSpec()
    spec.validate(trace.sample_rate)
    return ZeroPhaseLowpass(spec.cutoff, spec.order, trace.sample_rate).fit().transform(trace)


def window_mean(trace: ForceTrace, window: float = 10.0) -> float:
    """Mean over the last ``window`` seconds."""
    n = sample_count(window, trace.sample_rate)
    if n < 1 or n > len(trace):
        raise ValueError(f"trace of {trace.duration:.3f} s is shorter than the {window} s window")
    return float(trace.samples[-n:].mean())


def moving_average(trace: ForceTrace, window: float = 1.0, sliding: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Window means and their centre times.

    Non-overlapping bins by default; ``sliding=True`` gives a centred running
    mean evaluated at every sample where the window fits.
    """
    n = sample_count(window, trace.sample_rate)
    if n < 1 or n > len(trace):
        raise ValueError("window must fit inside the trace")
    times = trace.times
    if sliding:
        kernel = np.ones(n) / n
        means = np.convolve(trace.samples, kernel, mode="valid")
        centres = np.convolve(times, kernel, mode="valid")
        return centres, means
    n_bins = len(trace) // n
    blocks = trace.samples[:n_bins * n].reshape(n_bins, n)
    centres = times[:n_bins * n].reshape(n_bins, n).mean(axis=1)
    return centres, blocks.mean(axis=1)
