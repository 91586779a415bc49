"""Sampled-signal primitives: time series, IIR design, zero-phase filtering, PSD.

All operations are pure functions over immutable inputs and are safe to call
concurrently.
"""
from __future__ import annotations

import functools as _functools
from dataclasses import dataclass

import numpy as np
from scipy import signal as _sig

from .errors import (
    DesignFailureError,
    InsufficientSamplesError,
    InvalidBandError,
    InvalidNfftError,
)

FilterKind = str  # {"butterworth-notch", "chebyshev2-bandpass", "butterworth-bandpass"}

_KINDS = ("butterworth-notch", "chebyshev2-bandpass", "butterworth-bandpass")


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled real-valued signal.

    samples : 1-D array of finite values (stored read-only)
    fs : sampling rate in Hz, > 0
    t0 : start time in seconds
    """

    samples: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if not self.fs > 0:
            raise ValueError("fs must be positive")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.fs

    def with_samples(self, samples: np.ndarray) -> "TimeSeries":
        return TimeSeries(samples, self.fs, self.t0)


@dataclass(frozen=True)
class IIRFilterSpec:
    """Digital IIR filter specification.

    band edges are stopband edges for chebyshev2-bandpass (attenuation
    reached at the stated edges) and critical frequencies otherwise.
    """

    kind: FilterKind
    order: int
    band: tuple[float, float]
    stopband_attenuation_db: float = 40.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        lo, hi = self.band
        if not (0 < lo < hi):
            raise InvalidBandError(f"band must satisfy 0 < low < high, got {self.band}")


@dataclass(frozen=True)
class FilterCoefficients:
    """Transfer-function coefficients (b, a) plus the spec they came from."""

    b: np.ndarray
    a: np.ndarray
    spec: IIRFilterSpec
    fs: float

    @property
    def order(self) -> int:
        return max(self.b.size, self.a.size) - 1


@dataclass(frozen=True)
class PowerSpectrum:
    freqs: np.ndarray
    power: np.ndarray
    df: float

    def __post_init__(self):
        if self.freqs.shape != self.power.shape:
            raise ValueError("freqs and power must have equal length")

    def band_power(self, lo: float, hi: float) -> float:
        """Total power over the closed interval [lo, hi]."""
        m = (self.freqs >= lo) & (self.freqs <= hi)
        return float(self.power[m].sum())


def design_filter(spec: IIRFilterSpec, fs: float) -> FilterCoefficients:
    """Design the IIR filter described by `spec` at sampling rate `fs`.

    Raises InvalidBandError if the band does not sit inside (0, fs/2), and
    DesignFailureError if the resulting poles are not strictly inside the
    unit circle. Designs are deterministic and cached.
    """
    return _design_cached(spec, fs)


@_functools.lru_cache(maxsize=512)
def _design_cached(spec: IIRFilterSpec, fs: float) -> FilterCoefficients:
    lo, hi = spec.band
    if not (0.0 < lo < hi < fs / 2.0):
        raise InvalidBandError(
            f"band {spec.band} must lie strictly inside (0, {fs / 2.0}) Hz"
        )
    if spec.kind == "chebyshev2-bandpass":
        b, a = _sig.cheby2(
            spec.order, spec.stopband_attenuation_db, [lo, hi], btype="bandpass", fs=fs
        )
    elif spec.kind == "butterworth-bandpass":
        b, a = _sig.butter(spec.order, [lo, hi], btype="bandpass", fs=fs)
    else:  # butterworth-notch
        b, a = _sig.butter(spec.order, [lo, hi], btype="bandstop", fs=fs)
    poles = np.roots(a)
    if poles.size and np.max(np.abs(poles)) >= 1.0:
        raise DesignFailureError(f"unstable design for {spec}")
    b = b.copy()
    a = a.copy()
    b.flags.writeable = False
    a.flags.writeable = False
    return FilterCoefficients(b=b, a=a, spec=spec, fs=fs)


def filtfilt(x: TimeSeries, coeffs: FilterCoefficients) -> TimeSeries:
    """Zero-phase forward-backward filtering.

    Edges are handled by odd-symmetric reflection padding of length
    3 x filter order. The effective magnitude response is |H|^2 with zero
    net phase.
    """
    padlen = 3 * coeffs.order
    if len(x) <= padlen:
        raise InsufficientSamplesError(
            f"need more than {padlen} samples, got {len(x)}"
        )
    y = _sig.filtfilt(coeffs.b, coeffs.a, x.samples, padtype="odd", padlen=padlen)
    return x.with_samples(y)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p <<= 1
    return p


def psd(x: TimeSeries, nfft: int) -> PowerSpectrum:
    """One-sided power spectrum: |FFT(x - mean)|^2 on bins 0..nfft/2.

    The mean is removed before the transform; no taper is applied. df = fs/nfft.
    """
    n = len(x)
    if nfft < n:
        raise InvalidNfftError(f"nfft={nfft} < signal length {n}")
    if not _is_pow2(nfft):
        raise InvalidNfftError(f"nfft={nfft} is not a power of two")
    centered = x.samples - x.samples.mean()
    spec = np.fft.rfft(centered, nfft)
    power = np.abs(spec) ** 2
    freqs = np.fft.rfftfreq(nfft, 1.0 / x.fs)
    return PowerSpectrum(freqs=freqs, power=power, df=x.fs / nfft)


def hann_window(width: int) -> np.ndarray:
    """Symmetric Hann window of `width` samples normalized to unit sum."""
    if width < 2:
        raise ValueError("width must be >= 2")
    w = np.hanning(width)
    s = w.sum()
    if s <= 0:
        raise ValueError(f"Hann window of width {width} has zero sum")
    return w / s


def hann_moving_average(x: TimeSeries, width_samples: int) -> TimeSeries:
    """Centered moving average with a unit-sum Hann window.

    Length is preserved via reflection padding; a single centered pass is
    used (the symmetric window has no group delay).
    """
    if width_samples > len(x):
        raise InsufficientSamplesError(
            f"window {width_samples} exceeds signal length {len(x)}"
        )
    w = hann_window(width_samples)
    pad_left = (width_samples - 1) // 2
    pad_right = width_samples // 2
    padded = np.pad(x.samples, (pad_left, pad_right), mode="reflect")
    y = np.convolve(padded, w, mode="valid")
    return x.with_samples(y)
