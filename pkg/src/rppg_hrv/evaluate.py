"""Beat matching, agreement metrics, and BSL-vs-DS statistical comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as _stats

from .beats import PeakTrain
from .errors import (
    DegenerateSampleError,
    NoIntervalsError,
    PairingError,
    UnsupportedSampleSizeError,
)

CRITERIA = ("Strict", "Medium", "Relaxed")
MATCH_WINDOWS_S = {"Strict": 0.25, "Medium": 0.35}
SIGNIFICANCE_ALPHA = 0.05


@dataclass(frozen=True)
class MatchCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    criterion: str = "Strict"

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        if self.criterion != other.criterion:
            raise ValueError("cannot add counts across criteria")
        return MatchCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.criterion
        )


def match_beats(rppg: PeakTrain, ecg: PeakTrain, criterion: str) -> MatchCounts:
    """Classify rPPG peaks against consecutive R-R intervals.

    Strict/Medium: a peak inside (R_i, R_i + w] (w = 0.25 s / 0.35 s,
    clipped to the interval) makes the interval a TP; every other peak in
    the interval is an FP; an interval without a TP is an FN.
    Relaxed: exactly one peak in [R_i, R_{i+1}) is a TP, two or more count
    one FP (and the interval stays unmatched -> FN), zero is an FN.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    r = ecg.times_s
    if r.size < 2:
        raise NoIntervalsError("need >= 2 ECG peaks")
    p = rppg.times_s
    tp = fp = fn = 0
    for i in range(r.size - 1):
        left, right = r[i], r[i + 1]
        in_interval = p[(p >= left) & (p < right)]
        if criterion == "Relaxed":
            if in_interval.size == 1:
                tp += 1
            elif in_interval.size >= 2:
                fp += 1
                fn += 1
            else:
                fn += 1
            continue
        window = MATCH_WINDOWS_S[criterion]
        in_window = (in_interval > left) & (in_interval <= left + window)
        hit = bool(np.any(in_window))
        if hit:
            tp += 1
            fp += in_interval.size - 1
        else:
            fn += 1
            fp += in_interval.size
    return MatchCounts(tp=tp, fp=fp, fn=fn, criterion=criterion)


@dataclass(frozen=True)
class PrecisionRecallF1:
    precision: float
    recall: float
    f1: float
    precision_defined: bool = True
    recall_defined: bool = True


def prf1(counts: MatchCounts) -> PrecisionRecallF1:
    """Precision, recall and F1 from cumulative counts.

    Undefined denominators yield the value 0 with the matching flag unset.
    """
    p_def = counts.tp + counts.fp > 0
    r_def = counts.tp + counts.fn > 0
    precision = counts.tp / (counts.tp + counts.fp) if p_def else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if r_def else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    return PrecisionRecallF1(precision, recall, f1, p_def, r_def)


@dataclass(frozen=True)
class Agreement:
    mae: float
    rmse: float
    bias: float
    loa_low: float
    loa_high: float
    n: int


def agreement(est: Sequence[float], ref: Sequence[float]) -> Agreement:
    """MAE, RMSE, bias and 1.96-SD limits of agreement of d = est - ref."""
    e = np.asarray(est, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    if e.shape != r.shape:
        raise PairingError(f"length mismatch: {e.shape} vs {r.shape}")
    if e.size < 2:
        raise PairingError("need >= 2 pairs")
    d = e - r
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    return Agreement(
        mae=float(np.mean(np.abs(d))),
        rmse=float(np.sqrt(np.mean(d**2))),
        bias=bias,
        loa_low=bias - 1.96 * sd,
        loa_high=bias + 1.96 * sd,
        n=int(d.size),
    )


@dataclass(frozen=True)
class StatResult:
    test: str  # 'shapiro-wilk' | 't-test' | 'mann-whitney'
    statistic: float
    p_value: float
    effect_name: str | None = None
    effect: float | None = None


def shapiro_wilk(x: Sequence[float]) -> StatResult:
    """Shapiro-Wilk normality test (Royston's AS R94 approximation)."""
    arr = np.asarray(x, dtype=np.float64)
    if not (3 <= arr.size <= 5000):
        raise UnsupportedSampleSizeError(f"n={arr.size} outside [3, 5000]")
    if np.ptp(arr) == 0:
        raise DegenerateSampleError("all values identical")
    w, p = _stats.shapiro(arr)
    return StatResult(test="shapiro-wilk", statistic=float(w), p_value=float(p))


def cohens_d(a: np.ndarray, b: np.ndarray) -> float:
    n, m = a.size, b.size
    pooled_var = ((n - 1) * a.var(ddof=1) + (m - 1) * b.var(ddof=1)) / (n + m - 2)
    if pooled_var <= 0:
        raise DegenerateSampleError("zero pooled variance")
    return float((a.mean() - b.mean()) / math.sqrt(pooled_var))


def ttest_cohend(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Pooled-variance two-sample t-test with Cohen's d effect size."""
    aa = np.asarray(a, dtype=np.float64)
    bb = np.asarray(b, dtype=np.float64)
    if aa.size < 2 or bb.size < 2:
        raise UnsupportedSampleSizeError("need >= 2 per sample")
    d = cohens_d(aa, bb)
    t, p = _stats.ttest_ind(aa, bb, equal_var=True)
    return StatResult(
        test="t-test", statistic=float(t), p_value=float(p), effect_name="cohens_d", effect=d
    )


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> float:
    """(#{a_i > b_j} - #{a_i < b_j}) / (n * m)."""
    aa = np.asarray(a, dtype=np.float64)[:, None]
    bb = np.asarray(b, dtype=np.float64)[None, :]
    greater = int(np.sum(aa > bb))
    less = int(np.sum(aa < bb))
    return (greater - less) / (aa.size * bb.size)


def _u_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """U for sample a with midrank tie handling."""
    pooled = np.concatenate([a, b])
    ranks = _stats.rankdata(pooled)
    r_a = ranks[: a.size].sum()
    return float(r_a - a.size * (a.size + 1) / 2.0)


def _exact_mwu_p(a: np.ndarray, b: np.ndarray) -> float:
    """Exact two-sided permutation p-value for the rank sum.

    Counts size-n subsets of the pooled midranks by sum with a subset-sum
    dynamic program over doubled midranks (integers), then accumulates the
    probability of outcomes at least as far from the null mean as observed.
    """
    n, m = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = _stats.rankdata(pooled)
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    # counts[k][s] = number of k-subsets with doubled-rank sum s
    counts = np.zeros((n + 1, total + 1), dtype=np.float64)
    counts[0, 0] = 1.0
    for d in doubled:
        for k in range(n, 0, -1):
            counts[k, d:] += counts[k - 1, : total + 1 - d]
    observed = int(np.rint(2.0 * ranks[:n].sum()))
    center = n * (n + m + 1)  # doubled-scale null mean of the rank sum
    dev = abs(observed - center)
    sums = np.arange(total + 1)
    extreme = np.abs(sums - center) >= dev
    n_total = counts[n].sum()
    return float(counts[n, extreme].sum() / n_total)


def _normal_mwu_p(a: np.ndarray, b: np.ndarray, u: float) -> float:
    n, m = a.size, b.size
    big_n = n + m
    pooled = np.concatenate([a, b])
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (big_n * (big_n - 1))
    var = n * m / 12.0 * ((big_n + 1) - tie_term)
    if var <= 0:
        raise DegenerateSampleError("zero rank variance (all values tied)")
    mu = n * m / 2.0
    # continuity correction toward the mean
    z = (u - mu - 0.5 * np.sign(u - mu)) / math.sqrt(var) if u != mu else 0.0
    return float(min(1.0, 2.0 * _stats.norm.sf(abs(z))))


def mwu_cliffs(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Mann-Whitney U test with Cliff's delta effect size.

    Exact permutation enumeration when n*m <= 20, tie-corrected normal
    approximation otherwise.
    """
    aa = np.asarray(a, dtype=np.float64)
    bb = np.asarray(b, dtype=np.float64)
    if aa.size < 2 or bb.size < 2:
        raise UnsupportedSampleSizeError("need >= 2 per sample")
    u = _u_statistic(aa, bb)
    if aa.size * bb.size <= 20:
        p = _exact_mwu_p(aa, bb)
    else:
        p = _normal_mwu_p(aa, bb, u)
    return StatResult(
        test="mann-whitney",
        statistic=u,
        p_value=p,
        effect_name="cliffs_delta",
        effect=cliffs_delta(aa, bb),
    )


@dataclass(frozen=True)
class StatCell:
    label: str
    result: StatResult | None
    skipped: bool = False
    note: str = ""


def compare_conditions(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Route one BSL-vs-DS comparison through normality testing.

    Both samples must pass Shapiro-Wilk at alpha = 0.05 for the t-test;
    otherwise (including samples too small or too degenerate to test) the
    Mann-Whitney U test is used.
    """
    try:
        normal = (
            shapiro_wilk(a).p_value > SIGNIFICANCE_ALPHA
            and shapiro_wilk(b).p_value > SIGNIFICANCE_ALPHA
        )
    except (UnsupportedSampleSizeError, DegenerateSampleError):
        normal = False
    if normal:
        try:
            return ttest_cohend(a, b)
        except DegenerateSampleError:
            return mwu_cliffs(a, b)
    return mwu_cliffs(a, b)


def condition_comparison(
    groups: Mapping[str, tuple[Sequence[float], Sequence[float]]]
) -> list[StatCell]:
    """Run BSL-vs-DS comparisons for every labeled cell.

    `groups` maps a cell label to (bsl_values, ds_values). Cells with an
    empty or single-value condition are flagged as skipped.
    """
    cells: list[StatCell] = []
    for label in sorted(groups):
        bsl, ds = groups[label]
        if len(bsl) < 2 or len(ds) < 2:
            cells.append(
                StatCell(label, None, skipped=True, note="condition empty or too small")
            )
            continue
        try:
            cells.append(StatCell(label, compare_conditions(bsl, ds)))
        except DegenerateSampleError as exc:
            cells.append(StatCell(label, None, skipped=True, note=str(exc)))
    return cells
