"""Pulse extraction from per-region RGB traces: CHROM, POS, PCA-PC1 and 2SR.

Every method returns a zero-mean PulseSignal at the trace frame rate. All
methods are invariant to uniform scaling of the input and to eigenvector
sign ambiguity (canonicalized internally).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSubspaceError, DegenerateTraceError
from .signals import IIRFilterSpec, TimeSeries, design_filter, filtfilt

#: physiological pulse band in Hz, shared across the pipeline
PULSE_BAND = (0.7, 3.0)

#: internal CHROM chrominance prefilter (stopband edges at the pulse band)
CHROM_BANDPASS = IIRFilterSpec(
    kind="chebyshev2-bandpass", order=4, band=PULSE_BAND, stopband_attenuation_db=40.0
)

MIN_TRACE_LEN = 64


@dataclass(frozen=True)
class PulseSignal:
    """One extracted pulse waveform for a (segment, region, method) triple."""

    method: str
    series: TimeSeries
    region_id: int = 0
    segment_id: int = 0
    inverted: bool = False

    @property
    def samples(self) -> np.ndarray:
        return self.series.samples

    @property
    def fs(self) -> float:
        return self.series.fs


def _zero_mean(x: np.ndarray) -> np.ndarray:
    return x - x.mean()


def _check_traces(traces: np.ndarray) -> np.ndarray:
    tr = np.asarray(traces, dtype=np.float64)
    if tr.ndim != 2 or tr.shape[1] != 3:
        raise ValueError("traces must have shape (n_frames, 3)")
    if tr.shape[0] < MIN_TRACE_LEN:
        raise DegenerateTraceError(f"need >= {MIN_TRACE_LEN} frames, got {tr.shape[0]}")
    return tr


def chrom(traces: np.ndarray, fs: float, *, region_id: int = 0, segment_id: int = 0) -> PulseSignal:
    """Chrominance projection: X = 3Rn - 2Gn, Y = 1.5Rn + Gn - 1.5Bn.

    Channels are normalized by their segment means; X and Y are bandpassed
    over the pulse band before the alpha-tuned combination
    S = Xf - (std(Xf)/std(Yf)) * Yf. The output is not inverted.
    """
    tr = _check_traces(traces)
    means = tr.mean(axis=0)
    if np.any(means == 0):
        raise DegenerateTraceError("zero channel mean")
    if np.all(tr.std(axis=0) == 0):
        # constant input: degenerate, flagged as the all-zero signal
        return PulseSignal("CHROM", TimeSeries(np.zeros(tr.shape[0]), fs), region_id, segment_id)
    rn, gn, bn = (tr[:, c] / means[c] for c in range(3))
    x_chr = 3.0 * rn - 2.0 * gn
    y_chr = 1.5 * rn + gn - 1.5 * bn
    coeffs = design_filter(CHROM_BANDPASS, fs)
    xf = filtfilt(TimeSeries(x_chr, fs), coeffs).samples
    yf = filtfilt(TimeSeries(y_chr, fs), coeffs).samples
    sy = yf.std()
    s = xf - (xf.std() / sy) * yf if sy > 0 else xf
    return PulseSignal("CHROM", TimeSeries(_zero_mean(s), fs), region_id, segment_id)


def pos(traces: np.ndarray, fs: float, *, region_id: int = 0, segment_id: int = 0) -> PulseSignal:
    """Plane-orthogonal-to-skin projection with rows [0,1,-1] and [-2,1,1].

    h = S1 + (std(S1)/std(S2)) * S2 on mean-normalized channels; if S2 is
    identically zero, h = S1 (no division).
    """
    tr = _check_traces(traces)
    means = tr.mean(axis=0)
    if np.any(means == 0):
        raise DegenerateTraceError("zero channel mean")
    rn, gn, bn = (tr[:, c] / means[c] for c in range(3))
    s1 = gn - bn
    s2 = gn + bn - 2.0 * rn
    sd2 = s2.std()
    h = s1 + (s1.std() / sd2) * s2 if sd2 > 0 else s1
    return PulseSignal("POS", TimeSeries(_zero_mean(h), fs), region_id, segment_id)


def pca_pc1(
    traces: np.ndarray,
    fs: float,
    invert: bool = False,
    *,
    region_id: int = 0,
    segment_id: int = 0,
) -> PulseSignal:
    """Projection onto the first principal component of standardized channels.

    Sign is canonicalized so correlation with the G channel is positive;
    `invert=True` flips the result. Zero-variance channels are dropped; if
    all channels are constant the trace is degenerate.
    """
    tr = _check_traces(traces)
    stds = tr.std(axis=0)
    keep = np.flatnonzero(stds > 0)
    if keep.size == 0:
        raise DegenerateTraceError("all channels have zero variance")
    z = (tr[:, keep] - tr[:, keep].mean(axis=0)) / stds[keep]
    cov = z.T @ z / z.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    pc1 = eigvecs[:, -1]
    out = z @ pc1
    g = tr[:, 1]
    if g.std() > 0:
        if np.corrcoef(out, g)[0, 1] < 0:
            out = -out
    else:
        nz = np.flatnonzero(np.abs(pc1) > 1e-12)
        if nz.size and pc1[nz[0]] < 0:
            out = -out
    if invert:
        out = -out
    name = "PCA-inv" if invert else "PCA"
    return PulseSignal(name, TimeSeries(_zero_mean(out), fs), region_id, segment_id, inverted=invert)


def canonicalize_basis(basis: np.ndarray) -> np.ndarray:
    """Flip eigenvector columns so the first component with |v| > 1e-12 is positive.

    Accepts (3, 3) or (n_frames, 3, 3); columns are eigenvectors.
    """
    u = np.array(basis, dtype=np.float64, copy=True)
    single = u.ndim == 2
    if single:
        u = u[None]
    for k in range(u.shape[0]):
        for j in range(u.shape[2]):
            col = u[k, :, j]
            nz = np.flatnonzero(np.abs(col) > 1e-12)
            if nz.size and col[nz[0]] < 0:
                u[k, :, j] = -col
    return u[0] if single else u


def ssr_2sr(
    eigvals: np.ndarray,
    basis: np.ndarray,
    fs: float,
    *,
    region_id: int = 0,
    segment_id: int = 0,
) -> PulseSignal:
    """Spatial subspace rotation over a full segment.

    Rotation energies of the per-frame dominant axis against the first
    frame's minor eigenvectors,
        p1_t = sqrt(l1_t / l2_1) * (u1_t . u2_1)
        p2_t = sqrt(l1_t / l3_1) * (u1_t . u3_1),
    combined as p = p1 - (std(p1)/std(p2)) * p2 and mean-removed.
    Eigenvalues must be sorted descending per frame, basis columns matching.
    """
    lam = np.asarray(eigvals, dtype=np.float64)
    if lam.ndim != 2 or lam.shape[1] != 3:
        raise ValueError("eigvals must have shape (n_frames, 3)")
    if np.any(np.diff(lam, axis=1) > 1e-9):
        raise ValueError("eigenvalues must be sorted descending")
    u = canonicalize_basis(basis)
    if u.shape != (lam.shape[0], 3, 3):
        raise ValueError("basis must have shape (n_frames, 3, 3)")
    if lam[0, 1] <= 1e-12 or lam[0, 2] <= 1e-12:
        raise DegenerateSubspaceError(
            f"first-frame minor eigenvalues too small: {lam[0, 1:]}"
        )
    u2_1 = u[0, :, 1]
    u3_1 = u[0, :, 2]
    scale = np.sqrt(np.maximum(lam[:, 0], 0.0))
    p1 = (scale / np.sqrt(lam[0, 1])) * (u[:, :, 0] @ u2_1)
    p2 = (scale / np.sqrt(lam[0, 2])) * (u[:, :, 0] @ u3_1)
    sd2 = p2.std()
    pulse = p1 - (p1.std() / sd2) * p2 if sd2 > 0 else p1
    return PulseSignal("2SR", TimeSeries(_zero_mean(pulse), fs), region_id, segment_id)
