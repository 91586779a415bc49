"""File formats: PPM frame directories, manifests, trace CSVs, eigen sidecars, ECG CSV."""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .regions import RegionTrace, RegionTraceSet
from .signals import TimeSeries

FRAME_NAME = "frame_{:06d}.ppm"

_UPPER_TRI = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    """Binary P6 PPM, 8-bit."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary P6 PPM with maxval 255; comments allowed in the header."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise ValueError(f"{path}: not a P6 PPM")
    # tokenize header: magic, width, height, maxval; '#' starts a comment
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return pixels.reshape(h, w, 3)


@dataclass(frozen=True)
class SegmentInfo:
    start_frame: int
    bbox: tuple[int, int, int, int]
    condition: str = "BSL"


@dataclass(frozen=True)
class Manifest:
    fps: float
    width: int
    height: int
    segments: list[SegmentInfo] = field(default_factory=list)
    segment_s: float = 20.0

    @property
    def frames_per_segment(self) -> int:
        return int(round(self.segment_s * self.fps))


def write_manifest(path: str | Path, manifest: Manifest) -> None:
    payload = {
        "fps": manifest.fps,
        "width": manifest.width,
        "height": manifest.height,
        "segment_s": manifest.segment_s,
        "segments": [
            {"start_frame": s.start_frame, "bbox": list(s.bbox), "condition": s.condition}
            for s in manifest.segments
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> Manifest:
    payload = json.loads(Path(path).read_text())
    segments = [
        SegmentInfo(
            start_frame=int(s["start_frame"]),
            bbox=tuple(int(v) for v in s["bbox"]),
            condition=str(s.get("condition", "BSL")),
        )
        for s in payload["segments"]
    ]
    return Manifest(
        fps=float(payload["fps"]),
        width=int(payload["width"]),
        height=int(payload["height"]),
        segments=segments,
        segment_s=float(payload.get("segment_s", 20.0)),
    )


def frame_paths(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    pattern = re.compile(r"frame_(\d{6})\.ppm$")
    found = [(int(m.group(1)), p) for p in directory.iterdir() if (m := pattern.match(p.name))]
    return [p for _, p in sorted(found)]


def write_frames(directory: str | Path, frames: np.ndarray, start_index: int = 0) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(frames):
        write_ppm(directory / FRAME_NAME.format(start_index + i), img)


def write_traces_csv(path: str | Path, traces: dict[int, RegionTraceSet]) -> None:
    """Trace CSV with header segment_id,region_id,frame_idx,t_s,r_mean,g_mean,b_mean."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_id", "region_id", "frame_idx", "t_s", "r_mean", "g_mean", "b_mean"])
        for seg_id in sorted(traces):
            trace_set = traces[seg_id]
            for region_id in sorted(trace_set.regions):
                region = trace_set.regions[region_id]
                for idx, (r, g, b) in enumerate(region.traces):
                    writer.writerow(
                        [
                            seg_id,
                            region_id,
                            idx,
                            f"{idx / trace_set.fps:.6f}",
                            f"{r:.9f}",
                            f"{g:.9f}",
                            f"{b:.9f}",
                        ]
                    )


def write_eigen_json(path: str | Path, traces: dict[int, RegionTraceSet]) -> None:
    """Sidecar with per-frame covariance (6 upper-triangular reals), eigenvalues
    (3 reals) and basis (9 reals, row-major) per segment and region."""
    payload: dict = {"segments": {}}
    for seg_id in sorted(traces):
        trace_set = traces[seg_id]
        seg_block: dict = {"fps": trace_set.fps, "regions": {}, "dropped": trace_set.dropped}
        for region_id in sorted(trace_set.regions):
            region = trace_set.regions[region_id]
            seg_block["regions"][str(region_id)] = {
                "n_pixels": region.n_pixels,
                "cov": [[float(frame_cov[i, j]) for i, j in _UPPER_TRI] for frame_cov in region.cov],
                "eigvals": region.eigvals.tolist(),
                "basis": [b.reshape(9).tolist() for b in region.basis],
            }
        payload["segments"][str(seg_id)] = seg_block
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def read_traces(
    traces_csv: str | Path, eigen_json: str | Path | None, fps: float
) -> dict[int, RegionTraceSet]:
    """Rebuild RegionTraceSets from the CSV plus optional eigen sidecar."""
    rows: dict[tuple[int, int], list[tuple[int, float, float, float]]] = {}
    with open(traces_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["segment_id"]), int(row["region_id"]))
            rows.setdefault(key, []).append(
                (int(row["frame_idx"]), float(row["r_mean"]), float(row["g_mean"]), float(row["b_mean"]))
            )
    eigen = None
    if eigen_json is not None:
        eigen = json.loads(Path(eigen_json).read_text())
    out: dict[int, RegionTraceSet] = {}
    seg_ids = sorted({k[0] for k in rows})
    for seg_id in seg_ids:
        regions: dict[int, RegionTrace] = {}
        dropped: list[int] = []
        if eigen is not None:
            dropped = list(eigen["segments"].get(str(seg_id), {}).get("dropped", []))
        for (sid, region_id), entries in rows.items():
            if sid != seg_id:
                continue
            entries.sort()
            tr = np.array([[r, g, b] for _, r, g, b in entries])
            n = tr.shape[0]
            cov = np.zeros((n, 3, 3))
            eigvals = np.zeros((n, 3))
            basis = np.tile(np.eye(3), (n, 1, 1))
            n_pixels = 1
            if eigen is not None:
                block = (
                    eigen["segments"].get(str(seg_id), {}).get("regions", {}).get(str(region_id))
                )
                if block is not None:
                    n_pixels = int(block.get("n_pixels", 1))
                    for t_idx, tri in enumerate(block["cov"]):
                        for (i, j), v in zip(_UPPER_TRI, tri):
                            cov[t_idx, i, j] = v
                            cov[t_idx, j, i] = v
                    eigvals = np.asarray(block["eigvals"], dtype=np.float64)
                    basis = np.asarray(block["basis"], dtype=np.float64).reshape(n, 3, 3)
            regions[region_id] = RegionTrace(
                traces=tr, cov=cov, eigvals=eigvals, basis=basis, n_pixels=n_pixels
            )
        out[seg_id] = RegionTraceSet(fps=fps, regions=regions, dropped=dropped)
    return out


def write_ecg_csv(path: str | Path, ecg: TimeSeries) -> None:
    """ECG CSV with header t_s,mv."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "mv"])
        for t, v in zip(ecg.times(), ecg.samples):
            writer.writerow([f"{t:.6f}", f"{v:.9f}"])


def read_ecg_csv(path: str | Path, fs: float | None = None) -> TimeSeries:
    """Read an ECG CSV (t_s,mv). fs is inferred from timestamps unless given."""
    ts, mv = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ts.append(float(row["t_s"]))
            mv.append(float(row["mv"]))
    t = np.asarray(ts)
    if fs is None:
        if t.size < 2:
            raise ValueError("cannot infer fs from fewer than 2 samples")
        fs = 1.0 / float(np.median(np.diff(t)))
    return TimeSeries(np.asarray(mv), fs, t0=float(t[0]) if t.size else 0.0)
