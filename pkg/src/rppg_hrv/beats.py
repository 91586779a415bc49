"""Peak detection and per-segment heart-rate-variability measures.

rPPG peaks come from prominence thresholding on the smoothed, unit-max
normalized enhanced signal. ECG R-peaks come from a filtered-derivative
envelope detector with a quartile-adaptive threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as _sig

from .errors import InsufficientPeaksError
from .methods import PulseSignal
from .signals import (
    IIRFilterSpec,
    TimeSeries,
    design_filter,
    filtfilt,
    hann_moving_average,
)

#: minimum spacing between rPPG peaks (no pulse above ~180 bpm)
MIN_PEAK_DISTANCE_S = 0.33

#: minimum prominence on the unit-max normalized smoothed signal
MIN_PROMINENCE = 0.05

#: smoothing window before rPPG peak localization (400 ms at 30 fps)
SMOOTH_WIDTH_SAMPLES = 12

ECG_BANDPASS = IIRFilterSpec(kind="butterworth-bandpass", order=4, band=(0.5, 20.0))
ECG_ENVELOPE_S = 0.25
ECG_REFINE_S = 0.05
ECG_REFRACTORY_S = 0.3


@dataclass(frozen=True)
class PeakTrain:
    """Ordered peak times with prominences."""

    times_s: np.ndarray
    prominences: np.ndarray
    source: str  # 'rppg' | 'ecg'

    def __post_init__(self):
        times = np.asarray(self.times_s, dtype=np.float64)
        prom = np.asarray(self.prominences, dtype=np.float64)
        if times.shape != prom.shape:
            raise ValueError("times and prominences must have equal length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("peak times must be strictly increasing")
        object.__setattr__(self, "times_s", times)
        object.__setattr__(self, "prominences", prom)

    def __len__(self) -> int:
        return self.times_s.size

    def intervals(self) -> np.ndarray:
        return np.diff(self.times_s)

    def shifted(self, dt: float) -> "PeakTrain":
        return PeakTrain(self.times_s + dt, self.prominences, self.source)


@dataclass(frozen=True)
class HrvTriple:
    pr_bpm: float
    sdnn_s: float
    rmssd_s: float
    n_ibis: int


def _greedy_distance_filter(
    idx: np.ndarray, prominences: np.ndarray, min_dist: float
) -> np.ndarray:
    """Keep peaks greedily by descending prominence subject to min spacing."""
    order = np.lexsort((idx, -prominences))
    kept: list[int] = []
    for j in order:
        if all(abs(int(idx[j]) - k) >= min_dist for k in kept):
            kept.append(int(idx[j]))
    return np.array(sorted(kept), dtype=int)


def detect_rppg_peaks(x: PulseSignal) -> PeakTrain:
    """Locate pulse peaks on the enhanced signal.

    The signal is normalized to unit maximum absolute amplitude, smoothed
    with a 12-sample Hann moving average, and peaks are kept with
    prominence >= 0.05 and pairwise spacing >= 0.33 s (spacing conflicts
    resolved greedily by descending prominence).
    """
    series = x.series
    peak_amp = np.max(np.abs(series.samples))
    if peak_amp == 0:
        raise InsufficientPeaksError("flat signal")
    normalized = series.with_samples(series.samples / peak_amp)
    smoothed = hann_moving_average(normalized, SMOOTH_WIDTH_SAMPLES)
    idx, props = _sig.find_peaks(smoothed.samples, prominence=MIN_PROMINENCE)
    if idx.size < 2:
        raise InsufficientPeaksError(f"found {idx.size} peaks")
    min_dist = MIN_PEAK_DISTANCE_S * series.fs
    kept = _greedy_distance_filter(idx, props["prominences"], min_dist)
    if kept.size < 2:
        raise InsufficientPeaksError(f"found {kept.size} peaks after spacing filter")
    prom_by_idx = dict(zip(idx.tolist(), props["prominences"].tolist()))
    prominences = np.array([prom_by_idx[i] for i in kept])
    times = series.t0 + kept / series.fs
    train = PeakTrain(times, prominences, source="rppg")
    # invariants the detector must guarantee
    assert np.all(train.intervals() >= MIN_PEAK_DISTANCE_S - 1e-9)
    assert np.all(train.prominences >= MIN_PROMINENCE)
    return train


def detect_ecg_rpeaks(ecg: TimeSeries) -> PeakTrain:
    """R-peak detection: bandpass, derivative, squaring, Hann envelope.

    Candidate envelope maxima are thresholded at half the third quartile of
    their amplitudes, refined to the nearest raw-signal local maximum within
    +-50 ms, and pruned with a 0.3 s refractory rule (greedy by amplitude).
    """
    fs = ecg.fs
    filtered = filtfilt(ecg, design_filter(ECG_BANDPASS, fs)).samples
    derivative = np.diff(filtered, prepend=filtered[0]) * fs
    squared = derivative**2
    env_width = int(round(ECG_ENVELOPE_S * fs))
    envelope = hann_moving_average(TimeSeries(squared, fs), env_width).samples
    candidates, _ = _sig.find_peaks(envelope)
    if candidates.size == 0:
        raise InsufficientPeaksError("no envelope candidates")
    threshold = 0.5 * np.percentile(envelope[candidates], 75)
    accepted = candidates[envelope[candidates] >= threshold]
    if accepted.size == 0:
        raise InsufficientPeaksError("no candidates above threshold")
    raw = ecg.samples
    raw_maxima, _ = _sig.find_peaks(raw)
    refine = int(round(ECG_REFINE_S * fs))
    refined: list[int] = []
    for i in accepted:
        near = raw_maxima[np.abs(raw_maxima - i) <= refine]
        if near.size:
            refined.append(int(near[np.argmin(np.abs(near - i))]))
        else:
            lo, hi = max(0, i - refine), min(raw.size, i + refine + 1)
            refined.append(int(lo + np.argmax(raw[lo:hi])))
    refined_idx = np.unique(refined)
    kept = _greedy_distance_filter(
        refined_idx, raw[refined_idx], ECG_REFRACTORY_S * fs
    )
    if kept.size == 0:
        raise InsufficientPeaksError("no peaks after refractory filter")
    times = ecg.t0 + kept / fs
    return PeakTrain(times, raw[kept], source="ecg")


def pulse_rate(peaks: PeakTrain) -> float:
    """Pulse rate in bpm: 60 / median inter-peak interval."""
    if len(peaks) < 2:
        raise InsufficientPeaksError("need >= 2 peaks for a rate")
    return 60.0 / float(np.median(peaks.intervals()))


def sdnn(peaks: PeakTrain) -> float:
    """Sample standard deviation (n-1 denominator) of inter-beat intervals."""
    if len(peaks) < 3:
        raise InsufficientPeaksError("need >= 3 peaks (>= 2 intervals)")
    return float(np.std(peaks.intervals(), ddof=1))


def rmssd(peaks: PeakTrain) -> float:
    """Root mean square of successive inter-beat-interval differences."""
    if len(peaks) < 3:
        raise InsufficientPeaksError("need >= 3 peaks (>= 2 intervals)")
    diffs = np.diff(peaks.intervals())
    return float(np.sqrt(np.mean(diffs**2)))


def hrv_triple(peaks: PeakTrain) -> HrvTriple:
    ibis = peaks.intervals()
    return HrvTriple(
        pr_bpm=pulse_rate(peaks),
        sdnn_s=sdnn(peaks),
        rmssd_s=rmssd(peaks),
        n_ibis=int(ibis.size),
    )
