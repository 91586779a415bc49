"""Spectral SNR metrics, the -17 dB segment gate, and optimal-region selection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoRegionError
from .methods import PULSE_BAND, PulseSignal
from .signals import TimeSeries, next_pow2, psd

#: artifact notch excluded from band SNR, Hz
NOTCH_BAND = (1.9, 2.1)

#: half-width of the narrow signal band around the reference frequency, Hz
NARROW_HALF_WIDTH = 0.1

#: segments below this band SNR are discarded
GATE_THRESHOLD_DB = -17.0

DEFAULT_NFFT = 4096


@dataclass(frozen=True)
class SnrTriple:
    """The three per-segment SNR metrics, in dB.

    snr_narrow_ecg_db uses the ECG-derived pulse frequency as band center,
    snr_narrow_rppg_db the signal's own dominant frequency; snr_band_db is
    the broadband physiological metric used for gating. None marks a metric
    that could not be computed (e.g. no ECG reference).
    """

    snr_narrow_ecg_db: float | None
    snr_band_db: float
    snr_narrow_rppg_db: float | None


def _spectrum(x: PulseSignal | TimeSeries) -> tuple[np.ndarray, np.ndarray]:
    series = x.series if isinstance(x, PulseSignal) else x
    nfft = max(DEFAULT_NFFT, next_pow2(len(series)))
    spec = psd(series, nfft)
    return spec.freqs, spec.power


def _ratio_db(signal_power: float, noise_power: float) -> float:
    if noise_power <= 0:
        return math.inf
    if signal_power <= 0:
        return -math.inf
    return 10.0 * math.log10(signal_power / noise_power)


def snr_narrow(x: PulseSignal | TimeSeries, f_center: float) -> float:
    """Narrow-band SNR: power in f_center +- 0.1 Hz (closed interval) against
    the remaining power inside the physiological band."""
    lo, hi = PULSE_BAND
    if not (lo <= f_center <= hi):
        raise ValueError(f"f_center={f_center} outside [{lo}, {hi}] Hz")
    freqs, power = _spectrum(x)
    band = (freqs >= lo) & (freqs <= hi)
    sig = band & (freqs >= f_center - NARROW_HALF_WIDTH) & (freqs <= f_center + NARROW_HALF_WIDTH)
    noise = band & ~sig
    return _ratio_db(float(power[sig].sum()), float(power[noise].sum()))


def snr_band(x: PulseSignal | TimeSeries) -> float:
    """Broadband SNR: physiological band minus the 2 Hz notch against all
    remaining power in (0, fs/2]."""
    freqs, power = _spectrum(x)
    lo, hi = PULSE_BAND
    nlo, nhi = NOTCH_BAND
    band = (freqs >= lo) & (freqs <= hi)
    notch = (freqs >= nlo) & (freqs <= nhi)
    sig = band & ~notch
    noise = (freqs > 0) & ~band & ~notch
    return _ratio_db(float(power[sig].sum()), float(power[noise].sum()))


def gate_segment(x: PulseSignal | TimeSeries) -> bool:
    """True (keep) unless the band SNR falls strictly below -17 dB."""
    return not (snr_band(x) < GATE_THRESHOLD_DB)


@dataclass(frozen=True)
class RegionScore:
    region_id: int
    mae_bpm: float
    mean_snr_db: float
    n_segments_used: int

    def __post_init__(self):
        if self.mae_bpm < 0:
            raise ValueError("mae_bpm must be >= 0")
        if self.n_segments_used < 1:
            raise ValueError("n_segments_used must be >= 1")


def select_region(scores: Sequence[RegionScore]) -> int:
    """Two-stage selection: lowest-MAE candidates, then highest mean SNR.

    The four lowest-MAE regions are retained (ties admitted by higher SNR,
    then lower id); among them the highest mean SNR wins, ties broken by
    lower region id.
    """
    if not scores:
        raise NoRegionError("no region scores")
    ranked = sorted(scores, key=lambda s: (s.mae_bpm, -s.mean_snr_db, s.region_id))
    candidates = ranked[: min(4, len(ranked))]
    winner = min(candidates, key=lambda s: (-s.mean_snr_db, s.region_id))
    return winner.region_id
