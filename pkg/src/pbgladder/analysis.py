"""Observables extracted from population time series."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import AmplitudeState, TimeSeries

DEFAULT_TRANSIENT_END = 5.0
DEFAULT_TAIL = 0.25
MIN_CORRELATION_SAMPLES = 16
# absolute amplitude below which a trace counts as flat
OSCILLATION_FLOOR = 1e-9


class NoOscillationError(ValueError):
    """The trace has no spectral peak above the noise floor."""


class UndefinedCorrelationError(ValueError):
    """A trace has zero variance, so the correlation is undefined."""


def _mask(series: TimeSeries, window) -> np.ndarray:
    if window is None:
        return np.ones(len(series), dtype=bool)
    start, stop = window
    return (series.times >= start) & (series.times <= stop)


def trapping_fraction(series: TimeSeries, level: int, tail_window: float = DEFAULT_TAIL) -> float:
    """Mean population of ``level`` over the last ``tail_window`` fraction of samples."""
    if len(series) == 0:
        raise ValueError("empty series")
    if not 0 < tail_window < 1:
        raise ValueError(f"tail_window must be in (0, 1), got {tail_window}")
    count = max(1, int(math.ceil(tail_window * len(series))))
    return float(np.mean(series.level(level)[-count:]))


def surviving_population(series: TimeSeries, window=None) -> float:
    """Largest upper-level population reached inside ``window``.

    Radiated photons never return, so the population that keeps coming back
    to ``|1>`` after the transient measures what is still bound to the atom.
    """
    mask = _mask(series, window)
    if not mask.any():
        raise ValueError("window contains no samples")
    return float(np.max(series.p1[mask]))


def inphase_metric(series: TimeSeries, level_a: int, level_b: int, window=None) -> float:
    """Pearson correlation of two population traces inside ``window``."""
    mask = _mask(series, window)
    if mask.sum() < MIN_CORRELATION_SAMPLES:
        raise ValueError(f"need at least {MIN_CORRELATION_SAMPLES} samples in the window")
    return correlation(series.level(level_a)[mask], series.level(level_b)[mask])


def correlation(x, y) -> float:
    x = np.asarray(x, dtype=float) - np.mean(x)
    y = np.asarray(y, dtype=float) - np.mean(y)
    sx = math.sqrt(float(np.dot(x, x)))
    sy = math.sqrt(float(np.dot(y, y)))
    scale = max(1.0, float(np.max(np.abs(x)) if x.size else 0.0), float(np.max(np.abs(y)) if y.size else 0.0))
    if sx <= 1e-14 * scale * math.sqrt(x.size) or sy <= 1e-14 * scale * math.sqrt(y.size):
        raise UndefinedCorrelationError("zero-variance trace")
    return float(np.clip(np.dot(x, y) / (sx * sy), -1.0, 1.0))


def amplitude_spectrum(times, values) -> tuple[np.ndarray, np.ndarray]:
    """One-sided amplitude spectrum of a uniformly sampled trace.

    The trace is mean-removed and Hann-tapered; amplitudes are normalised so
    that ``A cos(w t)`` produces a peak of height about ``A``. Frequencies are
    angular.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 4:
        raise ValueError("need at least four samples")
    dt = float(times[1] - times[0])
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0):
        raise ValueError("samples must be uniformly spaced")
    taper = np.hanning(values.size)
    spectrum = np.fft.rfft((values - values.mean()) * taper)
    amplitude = 2.0 * np.abs(spectrum) / taper.sum()
    freqs = 2.0 * math.pi * np.fft.rfftfreq(values.size, d=dt)
    return freqs, amplitude


def _spectrum(series: TimeSeries, level: int, window):
    mask = _mask(series, window)
    if mask.sum() < 4:
        raise ValueError("window contains too few samples")
    return amplitude_spectrum(series.times[mask], series.level(level)[mask])


def dominant_frequency(series: TimeSeries, level: int, window=None, floor: float = OSCILLATION_FLOOR) -> float:
    """Angular frequency of the largest non-DC peak; resolution is one bin, ``2 pi / T``."""
    freqs, amplitude = _spectrum(series, level, window)
    k = 1 + int(np.argmax(amplitude[1:]))
    if amplitude[k] <= floor:
        raise NoOscillationError(f"no oscillation detected in level {level}")
    return float(freqs[k])


def peak_amplitude(series: TimeSeries, level: int, window=None) -> float:
    """Height of the largest non-DC peak of the amplitude spectrum."""
    _, amplitude = _spectrum(series, level, window)
    return float(np.max(amplitude[1:]))


def photon_spectrum(state: AmplitudeState) -> np.ndarray:
    """Expected photon number per mode.

    ``|b_j|^2 + sum_{m != j} |C_jm|^2 + 2 |C_jj|^2``; the total is ``P2 + 2 P3``.
    """
    n = state.n_modes
    c = state.c_matrix()
    weights = np.abs(c) ** 2
    occ = np.abs(state.b) ** 2 + weights.sum(axis=1)
    occ += np.abs(np.diagonal(c)) ** 2
    return occ if n else np.zeros(0)


@dataclass
class RegimeReport:
    transient_end: float
    trapped: dict[int, float]
    frequencies: dict[int, float | None]
    inphase_23: float | None
    flatness_p2: float
    surviving: float
    tail_window: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["trapped"] = {str(k): v for k, v in self.trapped.items()}
        out["frequencies"] = {str(k): v for k, v in self.frequencies.items()}
        return out


def regime_report(
    series: TimeSeries,
    transient_end: float = DEFAULT_TRANSIENT_END,
    tail_window: float = DEFAULT_TAIL,
) -> RegimeReport:
    """Summarise a run: trapping, oscillation frequencies, phase relation.

    The dynamic regime is taken as everything after ``transient_end``;
    ``flatness_p2`` is the standard deviation of P2 over the tail window.
    """
    window = (transient_end, float(series.times[-1]))
    frequencies: dict[int, float | None] = {}
    for level in (1, 2, 3):
        try:
            frequencies[level] = dominant_frequency(series, level, window)
        except (NoOscillationError, ValueError):
            frequencies[level] = None
    try:
        inphase = inphase_metric(series, 2, 3, window)
    except ValueError:
        inphase = None
    count = max(1, int(math.ceil(tail_window * len(series))))
    return RegimeReport(
        transient_end=transient_end,
        trapped={level: trapping_fraction(series, level, tail_window) for level in (1, 2, 3)},
        frequencies=frequencies,
        inphase_23=inphase,
        flatness_p2=float(np.std(series.p2[-count:])),
        surviving=surviving_population(series, window),
        tail_window=tail_window,
    )
