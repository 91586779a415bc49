"""Ground-truth generators: pulsatile RGB traces, pixel patches, synthetic ECG.

Every generator is a pure function of its spec and seed. Pulse peaks land
exactly at the model beat times, which are returned as the ground truth.

The skin model darkens all channels at systole (camera PPG polarity), with
channel strengths following the relative blood-volume absorption pattern
(G strongest, B medium, R weakest). Pixel patches get their color spread
from three fixed axes: brightness along the mean skin color and two minor
chroma axes oriented so the pulse-induced covariance rotation projects onto
both of the subspace-rotation channels with opposite signs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beats import PeakTrain
from .signals import TimeSeries

#: mean skin color, RGB
SKIN_DC = np.array([180.0, 120.0, 95.0])

#: per-channel pulsatile strength relative to G
CHANNEL_STRENGTH = np.array([0.43, 1.00, 0.69])

#: per-channel waveform phase offsets, degrees of one pulse period
CHANNEL_PHASE_DEG = np.array([+5.0, 0.0, -5.0])

#: raised-cosine rise/fall half-widths as fractions of the mean IBI
PULSE_RISE_FRAC = 0.15
PULSE_FALL_FRAC = 0.35

MIN_IBI_S = 0.33


@dataclass(frozen=True)
class IbiModel:
    """Beat-interval model: 'constant' or 'ar1'.

    ar1: IBI_k = mean + phi (IBI_{k-1} - mean) + eps, eps ~ N(0, sigma) with
    sigma = sdnn_target * sqrt(1 - phi^2), clipped at the 0.33 s floor.
    """

    kind: str = "constant"
    mean_s: float = 1.0
    sdnn_target_s: float = 0.05
    phi: float = 0.6

    def __post_init__(self):
        if self.kind not in ("constant", "ar1"):
            raise ValueError(f"unknown IBI model {self.kind!r}")
        if self.mean_s <= MIN_IBI_S:
            raise ValueError("mean IBI must exceed the 0.33 s floor")

    def beat_times(self, duration_s: float, rng: np.random.Generator) -> np.ndarray:
        times = []
        t = 0.5 * self.mean_s
        ibi = self.mean_s
        while t < duration_s - 0.2 * self.mean_s:
            times.append(t)
            if self.kind == "ar1":
                eps = rng.standard_normal() * self.sdnn_target_s * math.sqrt(
                    1.0 - self.phi**2
                )
                ibi = self.mean_s + self.phi * (ibi - self.mean_s) + eps
                ibi = max(ibi, MIN_IBI_S)
            t += ibi
        return np.asarray(times)


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic recording parameters."""

    hr_bpm: float = 60.0
    ibi_model: IbiModel | None = None
    pulse_amp_frac: float = 0.01
    noise_sigma: float = 0.0
    drift: tuple[float, float] = (0.0, 0.1)  # (amplitude, Hz)
    fps: float = 30.0
    duration_s: float = 20.0
    seed: int = 0
    waveform: str = "raised-cosine"  # or 'sinusoid'

    def __post_init__(self):
        if not (30.0 < self.hr_bpm < 180.0):
            raise ValueError("hr_bpm must be in (30, 180)")
        if not (0.0 < self.pulse_amp_frac < 0.1):
            raise ValueError("pulse_amp_frac must be in (0, 0.1)")
        if self.waveform not in ("raised-cosine", "sinusoid"):
            raise ValueError(f"unknown waveform {self.waveform!r}")
        if self.ibi_model is None:
            object.__setattr__(self, "ibi_model", IbiModel("constant", 60.0 / self.hr_bpm))


def pulse_waveform(
    beat_times: np.ndarray, t: np.ndarray, mean_ibi: float, kind: str = "raised-cosine"
) -> np.ndarray:
    """Unit-amplitude pulse train with peaks exactly at `beat_times`."""
    if kind == "sinusoid":
        # piecewise-linear phase, one cycle per beat interval
        if beat_times.size < 2:
            return np.cos(2.0 * np.pi * (t - (beat_times[0] if beat_times.size else 0.0)) / mean_ibi)
        phase = np.interp(
            t,
            beat_times,
            np.arange(beat_times.size, dtype=np.float64),
            left=(t[0] - beat_times[0]) / mean_ibi,
            right=beat_times.size - 1.0,
        )
        head = t < beat_times[0]
        tail = t > beat_times[-1]
        phase = np.where(head, (t - beat_times[0]) / mean_ibi, phase)
        phase = np.where(tail, beat_times.size - 1 + (t - beat_times[-1]) / mean_ibi, phase)
        return np.cos(2.0 * np.pi * phase)
    s = np.zeros_like(t)
    a_r = PULSE_RISE_FRAC * mean_ibi
    a_f = PULSE_FALL_FRAC * mean_ibi
    for bt in beat_times:
        u = t - bt
        m = (u >= -a_r) & (u <= 0)
        s[m] += 0.5 * (1.0 + np.cos(np.pi * u[m] / a_r))
        m = (u > 0) & (u <= a_f)
        s[m] += 0.5 * (1.0 + np.cos(np.pi * u[m] / a_f))
    return s


def _channel_gains(spec: SynthSpec, beat_times: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Per-frame multiplicative gain per channel: darkening pulse plus drift."""
    mean_ibi = spec.ibi_model.mean_s
    gains = np.empty((t.size, 3))
    for c in range(3):
        shift = CHANNEL_PHASE_DEG[c] / 360.0 * mean_ibi
        s = pulse_waveform(beat_times + shift, t, mean_ibi, spec.waveform)
        gains[:, c] = 1.0 - spec.pulse_amp_frac * CHANNEL_STRENGTH[c] * s
    amp, hz = spec.drift
    if amp:
        gains += (amp * np.sin(2.0 * np.pi * hz * t + 1.0))[:, None]
    return gains


def gen_rgb(spec: SynthSpec) -> tuple[np.ndarray, PeakTrain]:
    """Mean-RGB traces (n_frames, 3) for one region plus true peak times."""
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * spec.fps))
    t = np.arange(n) / spec.fps
    beats = spec.ibi_model.beat_times(spec.duration_s, rng)
    traces = SKIN_DC[None, :] * _channel_gains(spec, beats, t)
    if spec.noise_sigma > 0:
        traces = traces + spec.noise_sigma * rng.standard_normal(traces.shape)
    truth = PeakTrain(beats, np.ones_like(beats), source="rppg")
    return traces, truth


def _chroma_axes() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Brightness axis plus two minor chroma axes of the pixel color cloud.

    The minor axes are rotated 15 degrees off the pulse-tilt direction so the
    rotation signal lands on both with opposite signs after eigenvector
    canonicalization.
    """
    u1 = SKIN_DC / np.linalg.norm(SKIN_DC)
    d = SKIN_DC * CHANNEL_STRENGTH
    d = d - (d @ u1) * u1
    d = d / np.linalg.norm(d)
    q = np.cross(u1, d)
    th = math.radians(15.0)
    v2 = math.cos(th) * d + math.sin(th) * q
    v3 = -math.sin(th) * d + math.cos(th) * q
    return u1, v2, v3


#: minor-axis color spreads of the synthetic skin patch
CHROMA_SPREAD = (1.5, 0.75)
BRIGHTNESS_SPREAD = 0.06


@dataclass(frozen=True)
class PixelPatchSpec:
    """Pixel-level synthetic skin patch; drives superpixel and 2SR paths."""

    synth: SynthSpec = field(default_factory=SynthSpec)
    n_pixels: int = 1000
    pixel_noise_sigma: float = 0.3
    shared_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.n_pixels < 100:
            raise ValueError("n_pixels must be >= 100")


def gen_pixels(spec: PixelPatchSpec) -> tuple[np.ndarray, PeakTrain]:
    """Pixel color stack (n_frames, n_pixels, 3) plus true peak times.

    Per-pixel base colors spread along the brightness and chroma axes; the
    pulse multiplies each pixel's base color (per-channel darkening), so the
    region's mean-removed color covariance rotates with the pulse. Per-pixel
    iid noise and optional per-frame shared noise are added on top.
    """
    s = spec.synth
    rng = np.random.default_rng(s.seed)
    n = int(round(s.duration_s * s.fps))
    t = np.arange(n) / s.fps
    beats = s.ibi_model.beat_times(s.duration_s, rng)
    u1, v2, v3 = _chroma_axes()
    npix = spec.n_pixels
    base = (
        SKIN_DC[None, :] * (1.0 + BRIGHTNESS_SPREAD * rng.standard_normal((npix, 1)))
        + v2[None, :] * (CHROMA_SPREAD[0] * rng.standard_normal((npix, 1)))
        + v3[None, :] * (CHROMA_SPREAD[1] * rng.standard_normal((npix, 1)))
    )
    gains = _channel_gains(s, beats, t)
    frames = base[None, :, :] * gains[:, None, :]
    if spec.pixel_noise_sigma > 0:
        frames = frames + spec.pixel_noise_sigma * rng.standard_normal(frames.shape)
    if spec.shared_noise_sigma > 0:
        frames = frames + spec.shared_noise_sigma * rng.standard_normal((n, 1, 3))
    truth = PeakTrain(beats, np.ones_like(beats), source="rppg")
    return frames, truth


def gen_frame_images(
    spec: PixelPatchSpec, width: int, height: int
) -> tuple[np.ndarray, PeakTrain]:
    """Arrange a pixel patch on a (height, width) grid as float RGB frames."""
    patch = PixelPatchSpec(
        synth=spec.synth,
        n_pixels=width * height,
        pixel_noise_sigma=spec.pixel_noise_sigma,
        shared_noise_sigma=spec.shared_noise_sigma,
    )
    frames, truth = gen_pixels(patch)
    imgs = frames.reshape(frames.shape[0], height, width, 3)
    return imgs, truth


@dataclass(frozen=True)
class EcgSpec:
    """Synthetic ECG: Gaussian R spikes over baseline wander plus noise."""

    ibi_model: IbiModel = field(default_factory=lambda: IbiModel("constant", 0.75))
    fs: float = 1000.0
    duration_s: float = 20.0
    noise_sigma: float = 0.0
    wander_amp: float = 0.05
    r_width_s: float = 0.02
    seed: int = 0
    ectopic_index: int | None = None
    ectopic_scale: float = 3.0


def ecg_from_beats(
    beats: np.ndarray,
    fs: float,
    duration_s: float,
    noise_sigma: float = 0.0,
    wander_amp: float = 0.05,
    r_width_s: float = 0.02,
    rng: np.random.Generator | None = None,
    ectopic_index: int | None = None,
    ectopic_scale: float = 3.0,
) -> TimeSeries:
    """ECG trace with Gaussian R spikes at the given beat times."""
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    x = wander_amp * np.sin(2.0 * np.pi * 0.25 * t + 1.0)
    sigma = r_width_s / 2.0  # ~95% of the spike inside r_width_s
    for i, bt in enumerate(beats):
        amp = ectopic_scale if i == ectopic_index else 1.0
        x += amp * np.exp(-0.5 * ((t - bt) / sigma) ** 2)
    if noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        x = x + noise_sigma * rng.standard_normal(n)
    return TimeSeries(x, fs)


def gen_ecg(spec: EcgSpec) -> tuple[TimeSeries | None, PeakTrain]:
    """Synthetic ECG trace plus ground-truth R-peak times.

    A zero duration yields no samples: (None, empty PeakTrain).
    """
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * spec.fs))
    if n == 0:
        return None, PeakTrain(np.array([]), np.array([]), source="ecg")
    beats = spec.ibi_model.beat_times(spec.duration_s, rng)
    series = ecg_from_beats(
        beats,
        spec.fs,
        spec.duration_s,
        noise_sigma=spec.noise_sigma,
        wander_amp=spec.wander_amp,
        r_width_s=spec.r_width_s,
        rng=rng,
        ectopic_index=spec.ectopic_index,
        ectopic_scale=spec.ectopic_scale,
    )
    truth = PeakTrain(beats, np.ones_like(beats), source="ecg")
    return series, truth


@dataclass(frozen=True)
class RecordingSpec:
    """Whole-recording synthesis for end-to-end pipeline runs.

    Each segment draws its own beat times; all regions of a segment share the
    beat times, channel gains and per-frame shared (illumination-like) noise,
    while base colors and pixel noise are drawn independently per region.
    Regions for smaller superpixel counts are unions of neighboring regions
    of the largest count, mirroring coarser partitions of the same patch.
    """

    n_segments: int = 10
    hr_bpm: float = 60.0
    ibi_model: IbiModel | None = None
    conditions: tuple[str, ...] = ("BSL",)
    sp_counts: tuple[int, ...] = (10, 20)
    pixels_per_region: int = 600
    pixel_noise_sigma: float = 0.15
    shared_noise_sigma: float = 0.0
    pulse_amp_frac: float = 0.02
    ecg_fs: float = 1000.0
    ecg_noise_sigma: float = 0.02
    fps: float = 30.0
    segment_s: float = 20.0
    waveform: str = "raised-cosine"
    seed: int = 0

    def condition_of(self, segment: int) -> str:
        # contiguous halves when two conditions are given
        if len(self.conditions) == 1:
            return self.conditions[0]
        split = self.n_segments // 2
        return self.conditions[0] if segment < split else self.conditions[1]


@dataclass(frozen=True)
class SegmentTruth:
    beats: PeakTrain
    hr_bpm: float
    sdnn_s: float | None
    rmssd_s: float | None


def _truth_from_beats(beats: np.ndarray) -> SegmentTruth:
    train = PeakTrain(beats, np.ones_like(beats), source="rppg")
    ibis = np.diff(beats)
    hr = 60.0 / float(np.median(ibis)) if ibis.size else float("nan")
    sdnn_v = float(np.std(ibis, ddof=1)) if ibis.size >= 2 else None
    rmssd_v = float(np.sqrt(np.mean(np.diff(ibis) ** 2))) if ibis.size >= 2 else None
    return SegmentTruth(beats=train, hr_bpm=hr, sdnn_s=sdnn_v, rmssd_s=rmssd_v)


def synth_recording(spec: RecordingSpec):
    """Build an in-memory Recording plus per-segment ground truth.

    Returns (recording, truths) where truths[i] is the SegmentTruth of
    segment i. Deterministic in spec.seed.
    """
    from .pipeline import Recording, SegmentData
    from .regions import RegionTrace, RegionTraceSet, region_stats

    model = spec.ibi_model or IbiModel("constant", 60.0 / spec.hr_bpm)
    synth = SynthSpec(
        hr_bpm=spec.hr_bpm,
        ibi_model=model,
        pulse_amp_frac=spec.pulse_amp_frac,
        fps=spec.fps,
        duration_s=spec.segment_s,
        waveform=spec.waveform,
    )
    u1, v2, v3 = _chroma_axes()
    k_max = max(spec.sp_counts)
    n_frames = int(round(spec.segment_s * spec.fps))
    t = np.arange(n_frames) / spec.fps
    segments = []
    truths = []
    for seg_idx in range(spec.n_segments):
        rng = np.random.default_rng(spec.seed * 1_000_003 + seg_idx)
        beats = model.beat_times(spec.segment_s, rng)
        gains = _channel_gains(synth, beats, t).astype(np.float32)
        shared = (
            (spec.shared_noise_sigma * rng.standard_normal((n_frames, 3))).astype(np.float32)
            if spec.shared_noise_sigma > 0
            else None
        )
        npx = spec.pixels_per_region
        region_pixels = []
        for _ in range(k_max):
            base = (
                SKIN_DC[None, :] * (1.0 + BRIGHTNESS_SPREAD * rng.standard_normal((npx, 1)))
                + v2[None, :] * (CHROMA_SPREAD[0] * rng.standard_normal((npx, 1)))
                + v3[None, :] * (CHROMA_SPREAD[1] * rng.standard_normal((npx, 1)))
            ).astype(np.float32)
            frames = base[None, :, :] * gains[:, None, :]
            if spec.pixel_noise_sigma > 0:
                frames = frames + spec.pixel_noise_sigma * rng.standard_normal(
                    frames.shape, dtype=np.float32
                )
            if shared is not None:
                frames = frames + shared[:, None, :]
            region_pixels.append(frames)
        trace_sets: dict[int, RegionTraceSet] = {}
        for k in sorted(spec.sp_counts):
            group = max(1, k_max // k)
            regions: dict[int, RegionTrace] = {}
            for rid in range(k):
                parts = region_pixels[rid * group : (rid + 1) * group]
                if not parts:
                    break
                pixels = np.concatenate(parts, axis=1).astype(np.float64)
                means, cov, eigvals, basis = region_stats(pixels)
                regions[rid] = RegionTrace(
                    traces=means, cov=cov, eigvals=eigvals, basis=basis,
                    n_pixels=pixels.shape[1],
                )
            trace_sets[k] = RegionTraceSet(fps=spec.fps, regions=regions)
        ecg = ecg_from_beats(
            beats, spec.ecg_fs, spec.segment_s, noise_sigma=spec.ecg_noise_sigma, rng=rng
        )
        segments.append(
            SegmentData(
                index=seg_idx,
                condition=spec.condition_of(seg_idx),
                trace_sets=trace_sets,
                ecg=ecg,
            )
        )
        truths.append(_truth_from_beats(beats))
    return Recording(fps=spec.fps, segments=segments, recording_id=f"synth-{spec.seed}"), truths
