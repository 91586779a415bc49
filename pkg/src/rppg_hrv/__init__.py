"""Pulse rate and HRV extraction from facial RGB traces, with SNR gating and
ECG-referenced evaluation."""

from .beats import (
    HrvTriple,
    PeakTrain,
    detect_ecg_rpeaks,
    detect_rppg_peaks,
    pulse_rate,
    rmssd,
    sdnn,
)
from .enhance import (
    EnhanceConfig,
    adaptive_bandpass,
    dominant_frequency,
    glfod,
    lp_norm_enhance,
    sweep,
)
from .evaluate import (
    Agreement,
    MatchCounts,
    agreement,
    cliffs_delta,
    match_beats,
    mwu_cliffs,
    prf1,
    shapiro_wilk,
    ttest_cohend,
)
from .methods import PulseSignal, chrom, pca_pc1, pos, ssr_2sr
from .pipeline import Recording, RunConfig, SegmentData, run_pipeline
from .quality import RegionScore, SnrTriple, gate_segment, select_region, snr_band, snr_narrow
from .regions import FrameStack, SuperpixelMap, extract_traces, slic_segment
from .signals import (
    IIRFilterSpec,
    PowerSpectrum,
    TimeSeries,
    design_filter,
    filtfilt,
    hann_moving_average,
    psd,
)
from .synth import EcgSpec, IbiModel, PixelPatchSpec, RecordingSpec, SynthSpec, gen_ecg, gen_pixels, gen_rgb, synth_recording

__version__ = "0.1.0"

__all__ = [
    "Agreement",
    "EcgSpec",
    "EnhanceConfig",
    "FrameStack",
    "HrvTriple",
    "IIRFilterSpec",
    "IbiModel",
    "MatchCounts",
    "PeakTrain",
    "PixelPatchSpec",
    "PowerSpectrum",
    "PulseSignal",
    "Recording",
    "RecordingSpec",
    "RegionScore",
    "RunConfig",
    "SegmentData",
    "SnrTriple",
    "SuperpixelMap",
    "SynthSpec",
    "TimeSeries",
    "adaptive_bandpass",
    "agreement",
    "chrom",
    "cliffs_delta",
    "design_filter",
    "detect_ecg_rpeaks",
    "detect_rppg_peaks",
    "dominant_frequency",
    "extract_traces",
    "filtfilt",
    "gate_segment",
    "gen_ecg",
    "gen_pixels",
    "gen_rgb",
    "glfod",
    "hann_moving_average",
    "lp_norm_enhance",
    "match_beats",
    "mwu_cliffs",
    "pca_pc1",
    "pos",
    "prf1",
    "psd",
    "pulse_rate",
    "rmssd",
    "run_pipeline",
    "sdnn",
    "select_region",
    "shapiro_wilk",
    "slic_segment",
    "snr_band",
    "snr_narrow",
    "ssr_2sr",
    "sweep",
    "synth_recording",
    "ttest_cohend",
]
