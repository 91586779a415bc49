"""End-to-end orchestration: extraction grid, gating, selection, evaluation.

The per-segment chain is extract -> notch -> dominant frequency -> adaptive
bandpass -> enhancement -> smoothing + peak detection -> PR/SDNN/RMSSD,
followed by per-condition region selection and recording-level evaluation
against the ECG reference.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import beats as _beats
from . import enhance as _enh
from . import evaluate as _ev
from . import quality as _q
from .errors import (
    ConfigError,
    DegenerateSubspaceError,
    DegenerateTraceError,
    EmptyReportError,
    InsufficientPeaksError,
    NoDominantFrequencyError,
)
from .methods import PulseSignal, chrom, pca_pc1, pos, ssr_2sr
from .regions import RegionTraceSet
from .signals import TimeSeries

METHODS = ("CHROM", "POS", "PCA", "PCA-inv", "2SR")


@dataclass(frozen=True)
class RunConfig:
    methods: tuple[str, ...] = ("CHROM", "POS", "PCA", "2SR")
    enhancements: tuple[_enh.EnhanceConfig, ...] = (
        _enh.EnhanceConfig("glfod", alpha=1.0),
        _enh.EnhanceConfig("lpnorm", p=6),
    )
    sp_counts: tuple[int, ...] = (10, 20)
    segment_s: float = 20.0
    gate_db: float = _q.GATE_THRESHOLD_DB
    workers: int = 1
    recording_id: str = "recording"
    require_ecg: bool = True

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("at least one method required")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods: {unknown}")
        if self.segment_s <= 10:
            raise ConfigError("segment_s must exceed 10 s")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class SegmentData:
    """One 20 s segment: per-SP-count trace sets plus the aligned ECG slice."""

    index: int
    condition: str
    trace_sets: dict[int, RegionTraceSet]
    ecg: TimeSeries | None = None


@dataclass(frozen=True)
class Recording:
    fps: float
    segments: list[SegmentData]
    recording_id: str = "recording"


@dataclass
class SegmentEstimate:
    """Chain output for one (sp, segment, region, method, enhancement)."""

    sp_count: int
    segment: int
    condition: str
    region: int
    method: str
    enhancement: str
    gate_keep: bool
    snr: _q.SnrTriple
    dominant_hz: float | None = None
    low_confidence: bool = False
    pr_bpm: float | None = None
    sdnn_s: float | None = None
    rmssd_s: float | None = None
    n_peaks: int = 0
    peak_times: np.ndarray | None = None
    error: str | None = None


@dataclass
class SegmentReference:
    """ECG-derived truth for one segment."""

    index: int
    condition: str
    hr_bpm: float | None = None
    sdnn_s: float | None = None
    rmssd_s: float | None = None
    peaks: _beats.PeakTrain | None = None
    pulse_hz: float | None = None


@dataclass
class PipelineResult:
    config: RunConfig
    references: list[SegmentReference]
    estimates: list[SegmentEstimate]
    evaluation: list[dict]
    region_scores: list[dict]
    sd_hz_by_condition: dict[str, float]
    rejected_segments: dict[str, int]
    timings_s: list[dict] = field(default_factory=list)

    def evaluation_json(self) -> str:
        return json.dumps(self.evaluation, indent=2, sort_keys=True) + "\n"

    def segment_report_json(self) -> str:
        rows = [
            {
                "sp_count": e.sp_count,
                "segment": e.segment,
                "condition": e.condition,
                "region": e.region,
                "method": e.method,
                "enhancement": e.enhancement,
                "gate_keep": e.gate_keep,
                "snr_narrow_ecg_db": e.snr.snr_narrow_ecg_db,
                "snr_band_db": e.snr.snr_band_db,
                "snr_narrow_rppg_db": e.snr.snr_narrow_rppg_db,
                "dominant_hz": e.dominant_hz,
                "low_confidence": e.low_confidence,
                "pr_bpm": e.pr_bpm,
                "sdnn_s": e.sdnn_s,
                "rmssd_s": e.rmssd_s,
                "n_peaks": e.n_peaks,
                "error": e.error,
            }
            for e in self.estimates
        ]
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"


def _extract_pulse(trace_set: RegionTraceSet, region: int, method: str, fs: float,
                   segment: int) -> PulseSignal:
    data = trace_set.regions[region]
    if method == "CHROM":
        return chrom(data.traces, fs, region_id=region, segment_id=segment)
    if method == "POS":
        return pos(data.traces, fs, region_id=region, segment_id=segment)
    if method == "PCA":
        return pca_pc1(data.traces, fs, invert=False, region_id=region, segment_id=segment)
    if method == "PCA-inv":
        return pca_pc1(data.traces, fs, invert=True, region_id=region, segment_id=segment)
    if method == "2SR":
        return ssr_2sr(data.eigvals, data.basis, fs, region_id=region, segment_id=segment)
    raise ConfigError(f"unknown method {method}")


def ecg_references(recording: Recording) -> list[SegmentReference]:
    """Per-segment ECG truth: R peaks, HR (median-IBI rule), SDNN, RMSSD."""
    refs: list[SegmentReference] = []
    for seg in recording.segments:
        ref = SegmentReference(index=seg.index, condition=seg.condition)
        if seg.ecg is not None:
            try:
                peaks = _beats.detect_ecg_rpeaks(seg.ecg)
                ref.peaks = peaks
                ref.hr_bpm = _beats.pulse_rate(peaks)
                ref.pulse_hz = ref.hr_bpm / 60.0
                if len(peaks) >= 3:
                    ref.sdnn_s = _beats.sdnn(peaks)
                    ref.rmssd_s = _beats.rmssd(peaks)
            except InsufficientPeaksError:
                pass
        refs.append(ref)
    return refs


def sd_hz_by_condition(refs: Iterable[SegmentReference]) -> dict[str, float]:
    """Pulse-frequency SD per condition, floored at the default 0.05 Hz."""
    grouped: dict[str, list[float]] = {}
    for ref in refs:
        if ref.pulse_hz is not None:
            grouped.setdefault(ref.condition, []).append(ref.pulse_hz)
    out: dict[str, float] = {}
    for cond, vals in grouped.items():
        sd = float(np.std(vals, ddof=1)) if len(vals) >= 2 else 0.0
        out[cond] = max(sd, _enh.DEFAULT_SD_HZ)
    return out


def _process_cell(
    args: tuple[RunConfig, Recording, SegmentReference, int, int, int, str, float]
) -> list[SegmentEstimate]:
    """Full chain for one (sp, segment, region, method) across enhancements."""
    config, recording, ref, sp, seg_idx, region, method, sd_hz = args
    seg = recording.segments[seg_idx]
    fs = recording.fps
    base = dict(
        sp_count=sp,
        segment=seg.index,
        condition=seg.condition,
        region=region,
        method=method,
    )
    empty_snr = _q.SnrTriple(None, -np.inf, None)
    try:
        pulse = _extract_pulse(seg.trace_sets[sp], region, method, fs, seg.index)
    except (DegenerateTraceError, DegenerateSubspaceError) as exc:
        return [
            SegmentEstimate(
                **base, enhancement=enh.label(), gate_keep=False, snr=empty_snr,
                error=f"extraction: {exc}",
            )
            for enh in config.enhancements
        ]
    band_db = _q.snr_band(pulse)
    narrow_ecg = (
        _q.snr_narrow(pulse, min(max(ref.pulse_hz, 0.7), 3.0))
        if ref.pulse_hz is not None
        else None
    )
    dominant = None
    low_conf = False
    narrow_rppg = None
    chain_error = None
    try:
        dom = _enh.dominant_frequency(pulse)
        dominant, low_conf = dom.hz, dom.low_confidence
        narrow_rppg = _q.snr_narrow(pulse, dominant)
    except NoDominantFrequencyError as exc:
        chain_error = f"dominant-frequency: {exc}"
    snr = _q.SnrTriple(narrow_ecg, band_db, narrow_rppg)
    keep = not (band_db < config.gate_db)
    out: list[SegmentEstimate] = []
    banded = None
    if keep and dominant is not None:
        banded = _enh.adaptive_bandpass(pulse, dominant, sd_hz)
    for enh in config.enhancements:
        est = SegmentEstimate(
            **base, enhancement=enh.label(), gate_keep=keep, snr=snr,
            dominant_hz=dominant, low_confidence=low_conf, error=chain_error,
        )
        if banded is not None and keep:
            try:
                enhanced = _enh.apply_operator(banded, enh)
                peaks = _beats.detect_rppg_peaks(enhanced)
                est.n_peaks = len(peaks)
                est.peak_times = peaks.times_s
                est.pr_bpm = _beats.pulse_rate(peaks)
                if len(peaks) >= 3:
                    est.sdnn_s = _beats.sdnn(peaks)
                    est.rmssd_s = _beats.rmssd(peaks)
            except InsufficientPeaksError as exc:
                est.error = f"detection: {exc}"
        out.append(est)
    return out


def _region_scores_and_selection(
    config: RunConfig,
    recording: Recording,
    refs: list[SegmentReference],
    estimates: list[SegmentEstimate],
) -> tuple[list[dict], dict]:
    """Score regions (MAE then mean SNR) per (sp, method, enhancement, condition)."""
    ref_by_idx = {r.index: r for r in refs}
    by_cell: dict[tuple, list[SegmentEstimate]] = {}
    for est in estimates:
        key = (est.sp_count, est.method, est.enhancement, est.condition, est.region)
        by_cell.setdefault(key, []).append(est)
    score_rows: list[dict] = []
    selections: dict[tuple, int] = {}
    group_keys = sorted({k[:4] for k in by_cell})
    for sp, method, enh, cond in group_keys:
        scores: list[_q.RegionScore] = []
        regions = sorted({k[4] for k in by_cell if k[:4] == (sp, method, enh, cond)})
        for region in regions:
            cell = by_cell[(sp, method, enh, cond, region)]
            errs, snrs = [], []
            for est in cell:
                ref = ref_by_idx[est.segment]
                if not est.gate_keep or est.pr_bpm is None or ref.hr_bpm is None:
                    continue
                errs.append(abs(est.pr_bpm - ref.hr_bpm))
                snr_val = (
                    est.snr.snr_narrow_ecg_db
                    if est.snr.snr_narrow_ecg_db is not None
                    else est.snr.snr_narrow_rppg_db
                )
                snrs.append(snr_val if snr_val is not None and np.isfinite(snr_val) else -100.0)
            if not errs:
                continue
            scores.append(
                _q.RegionScore(
                    region_id=region,
                    mae_bpm=float(np.mean(errs)),
                    mean_snr_db=float(np.mean(snrs)),
                    n_segments_used=len(errs),
                )
            )
        for s in scores:
            score_rows.append(
                {
                    "sp_count": sp,
                    "method": method,
                    "enhancement": enh,
                    "condition": cond,
                    "region_id": s.region_id,
                    "mae_bpm": s.mae_bpm,
                    "mean_snr_db": s.mean_snr_db,
                    "n_segments": s.n_segments_used,
                }
            )
        if scores:
            selections[(sp, method, enh, cond)] = _q.select_region(scores)
    return score_rows, selections


def _evaluation_blocks(
    config: RunConfig,
    refs: list[SegmentReference],
    estimates: list[SegmentEstimate],
    selections: dict,
    recording_id: str,
) -> list[dict]:
    ref_by_idx = {r.index: r for r in refs}
    est_by_key: dict[tuple, SegmentEstimate] = {}
    for est in estimates:
        est_by_key[(est.sp_count, est.method, est.enhancement, est.region, est.segment)] = est
    blocks: list[dict] = []
    for (sp, method, enh, cond), region in sorted(selections.items()):
        seg_indices = sorted(
            r.index for r in refs if r.condition == cond and r.hr_bpm is not None
        )
        pairs = {"pr": ([], []), "sdnn": ([], []), "rmssd": ([], [])}
        counts = {c: _ev.MatchCounts(criterion=c) for c in _ev.CRITERIA}
        n_used = 0
        for idx in seg_indices:
            est = est_by_key.get((sp, method, enh, region, idx))
            ref = ref_by_idx[idx]
            if est is None or not est.gate_keep or est.pr_bpm is None:
                continue
            n_used += 1
            pairs["pr"][0].append(est.pr_bpm)
            pairs["pr"][1].append(ref.hr_bpm)
            if est.sdnn_s is not None and ref.sdnn_s is not None:
                pairs["sdnn"][0].append(est.sdnn_s)
                pairs["sdnn"][1].append(ref.sdnn_s)
            if est.rmssd_s is not None and ref.rmssd_s is not None:
                pairs["rmssd"][0].append(est.rmssd_s)
                pairs["rmssd"][1].append(ref.rmssd_s)
            if est.peak_times is not None and ref.peaks is not None and len(ref.peaks) >= 2:
                rppg_train = _beats.PeakTrain(
                    est.peak_times, np.ones_like(est.peak_times), source="rppg"
                )
                for crit in _ev.CRITERIA:
                    counts[crit] = counts[crit] + _ev.match_beats(rppg_train, ref.peaks, crit)
        block: dict = {
            "recording_id": recording_id,
            "condition": cond,
            "method": method,
            "enhancement": _parse_enh_label(enh),
            "sp_count": sp,
            "selected_region": region,
            "n_segments_used": n_used,
        }
        for name in ("pr", "sdnn", "rmssd"):
            est_vals, ref_vals = pairs[name]
            if len(est_vals) >= 2:
                agr = _ev.agreement(est_vals, ref_vals)
                block[name] = {
                    "mae": agr.mae,
                    "rmse": agr.rmse,
                    "bias": agr.bias,
                    "loa": [agr.loa_low, agr.loa_high],
                    "n": agr.n,
                }
            else:
                block[name] = None
        block["ibi"] = {
            crit: {
                "tp": counts[crit].tp,
                "fp": counts[crit].fp,
                "fn": counts[crit].fn,
                "precision": _ev.prf1(counts[crit]).precision,
                "recall": _ev.prf1(counts[crit]).recall,
                "f1": _ev.prf1(counts[crit]).f1,
            }
            for crit in _ev.CRITERIA
        }
        blocks.append(block)
    # BSL-vs-DS statistics per configuration plus the ECG reference row
    stats_groups: dict[str, tuple[list[float], list[float]]] = {}
    conditions = sorted({r.condition for r in refs})
    if len(conditions) == 2:
        lo_cond, hi_cond = conditions
        cfg_keys = sorted({(sp, m, e) for (sp, m, e, c) in selections})
        for sp, method, enh in cfg_keys:
            for pname in ("pr", "sdnn", "rmssd"):
                samples = {lo_cond: [], hi_cond: []}
                for cond in conditions:
                    region = selections.get((sp, method, enh, cond))
                    if region is None:
                        continue
                    for est in estimates:
                        if (
                            est.sp_count == sp
                            and est.method == method
                            and est.enhancement == enh
                            and est.condition == cond
                            and est.region == region
                            and est.gate_keep
                        ):
                            val = {"pr": est.pr_bpm, "sdnn": est.sdnn_s, "rmssd": est.rmssd_s}[pname]
                            if val is not None:
                                samples[cond].append(val)
                label = f"{pname}|{method}|{enh}|sp{sp}"
                stats_groups[label] = (samples[lo_cond], samples[hi_cond])
        for pname, getter in (
            ("pr", lambda r: r.hr_bpm),
            ("sdnn", lambda r: r.sdnn_s),
            ("rmssd", lambda r: r.rmssd_s),
        ):
            a = [getter(r) for r in refs if r.condition == lo_cond and getter(r) is not None]
            b = [getter(r) for r in refs if r.condition == hi_cond and getter(r) is not None]
            stats_groups[f"{pname}|reference-ecg"] = (a, b)
        cells = _ev.condition_comparison(stats_groups)
        stats_block = {
            "conditions": [lo_cond, hi_cond],
            "cells": [
                {
                    "label": c.label,
                    "skipped": c.skipped,
                    "note": c.note,
                    "test": c.result.test if c.result else None,
                    "statistic": c.result.statistic if c.result else None,
                    "p_value": c.result.p_value if c.result else None,
                    "effect_name": c.result.effect_name if c.result else None,
                    "effect": c.result.effect if c.result else None,
                }
                for c in cells
            ],
        }
        blocks.append({"recording_id": recording_id, "stats": stats_block})
    return blocks


def _parse_enh_label(label: str) -> dict:
    if label == "none":
        return {"op": "none", "param": None}
    op, param = label.split(":")
    return {"op": op, "param": float(param)}


def run_pipeline(recording: Recording, config: RunConfig) -> PipelineResult:
    """Run the full grid over one recording; deterministic for fixed inputs."""
    has_ecg = any(seg.ecg is not None for seg in recording.segments)
    if config.require_ecg and not has_ecg:
        raise ConfigError("ECG reference required but absent; set require_ecg=False")
    refs = ecg_references(recording)
    sd_map = sd_hz_by_condition(refs) if has_ecg else {}
    default_sd = _enh.DEFAULT_SD_HZ
    ref_by_idx = {r.index: r for r in refs}

    tasks = []
    for seg_pos, seg in enumerate(recording.segments):
        for sp in sorted(seg.trace_sets):
            if sp not in config.sp_counts:
                continue
            for region in sorted(seg.trace_sets[sp].regions):
                for method in config.methods:
                    tasks.append(
                        (
                            config,
                            recording,
                            ref_by_idx[seg.index],
                            sp,
                            seg_pos,
                            region,
                            method,
                            sd_map.get(seg.condition, default_sd),
                        )
                    )
    timings: list[dict] = []
    t_start = time.perf_counter()
    if config.workers == 1:
        results = [_process_cell(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_process_cell, tasks))
    elapsed = time.perf_counter() - t_start
    estimates = [est for group in results for est in group]
    if not estimates:
        raise EmptyReportError("no estimates produced")
    n_segments = max(1, len(recording.segments))
    timings.append(
        {
            "total_s": elapsed,
            "per_segment_s": elapsed / n_segments,
            "n_tasks": len(tasks),
            "workers": config.workers,
        }
    )

    rejected: dict[str, int] = {}
    seen = set()
    for est in estimates:
        key = (est.sp_count, est.method, est.segment, est.region)
        if key in seen:
            continue
        seen.add(key)
        if not est.gate_keep:
            label = f"{est.method}|sp{est.sp_count}"
            rejected[label] = rejected.get(label, 0) + 1

    if has_ecg:
        score_rows, selections = _region_scores_and_selection(
            config, recording, refs, estimates
        )
        evaluation = _evaluation_blocks(
            config, refs, estimates, selections, recording.recording_id
        )
    else:
        score_rows, selections, evaluation = [], {}, []
    return PipelineResult(
        config=config,
        references=refs,
        estimates=estimates,
        evaluation=evaluation,
        region_scores=score_rows,
        sd_hz_by_condition=dict(sorted(sd_map.items())),
        rejected_segments=dict(sorted(rejected.items())),
        timings_s=timings,
    )


def write_reports(result: PipelineResult, out_dir: str | Path) -> dict[str, Path]:
    """Write evaluation + segment reports (JSON), region scores (CSV), timings (CSV)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "evaluation": out / "evaluation.json",
        "segments": out / "segment_reports.json",
        "region_scores": out / "region_scores.csv",
        "timings": out / "timings.csv",
    }
    paths["evaluation"].write_text(result.evaluation_json())
    paths["segments"].write_text(result.segment_report_json())
    with open(paths["region_scores"], "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(
            ["sp_count", "method", "enhancement", "condition", "region_id", "mae_bpm", "mean_snr_db", "n_segments"]
        )
        for row in result.region_scores:
            writer.writerow(
                [
                    row["sp_count"],
                    row["method"],
                    row["enhancement"],
                    row["condition"],
                    row["region_id"],
                    f"{row['mae_bpm']:.6f}",
                    f"{row['mean_snr_db']:.6f}",
                    row["n_segments"],
                ]
            )
    with open(paths["timings"], "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["total_s", "per_segment_s", "n_tasks", "workers"])
        for row in result.timings_s:
            writer.writerow([row["total_s"], row["per_segment_s"], row["n_tasks"], row["workers"]])
    return paths
