"""Superpixel decomposition of a face box and per-region trace extraction.

SLIC runs on the first frame of a segment; the resulting masks are held
fixed across the segment's frames. Per frame and region we keep the mean
RGB and the eigen-decomposition of the pixel-color covariance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as _ndi

from .errors import RegionTooSmallError
from .methods import canonicalize_basis

SLIC_ITERATIONS = 10
DEFAULT_COMPACTNESS = 10.0

# sRGB (D65) -> XYZ
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB values in [0, 255] to CIELAB under the D65 white point."""
    c = np.clip(np.asarray(rgb, dtype=np.float64) / 255.0, 0.0, 1.0)
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB2XYZ.T
    ratio = xyz / _WHITE_D65
    eps = (6.0 / 29.0) ** 3
    f = np.where(ratio > eps, np.cbrt(ratio), ratio / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


@dataclass(frozen=True)
class FrameStack:
    """One segment of frames plus its face bounding box.

    frames : (n_frames, height, width, 3) array, RGB
    fps    : frame rate in Hz
    bbox   : (x, y, w, h) rectangle inside the frame
    """

    frames: np.ndarray
    fps: float
    bbox: tuple[int, int, int, int]

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[3] != 3:
            raise ValueError("frames must have shape (n, h, w, 3)")
        x, y, w, h = self.bbox
        _, fh, fw, _ = self.frames.shape
        if not (0 <= x and 0 <= y and x + w <= fw and y + h <= fh and w > 0 and h > 0):
            raise ValueError(f"bbox {self.bbox} outside frame {fw}x{fh}")

    def crop(self, frame_idx: int) -> np.ndarray:
        x, y, w, h = self.bbox
        return self.frames[frame_idx, y : y + h, x : x + w, :]

    def crops(self) -> np.ndarray:
        x, y, w, h = self.bbox
        return self.frames[:, y : y + h, x : x + w, :]


@dataclass(frozen=True)
class SuperpixelMap:
    """Region labels over the bounding box, canonically ordered."""

    labels: np.ndarray  # (h, w) int region ids, 0..k_actual-1
    k_target: int
    k_actual: int
    centroids: list[tuple[float, float, tuple[float, float, float]]]
    bbox: tuple[int, int, int, int]


def _slic_assign(lab_xy: np.ndarray, centers: np.ndarray, step: float, compactness: float) -> np.ndarray:
    """One SLIC assignment pass limited to 2-step windows around centers."""
    h, w, _ = lab_xy.shape
    dist = np.full((h, w), np.inf)
    labels = np.zeros((h, w), dtype=np.int32)
    ratio = (compactness / step) ** 2
    for ci, c in enumerate(centers):
        cy, cx = int(round(c[4])), int(round(c[3]))
        y0, y1 = max(0, cy - int(2 * step)), min(h, cy + int(2 * step) + 1)
        x0, x1 = max(0, cx - int(2 * step)), min(w, cx + int(2 * step) + 1)
        if y0 >= y1 or x0 >= x1:
            continue
        patch = lab_xy[y0:y1, x0:x1]
        dc = ((patch[..., :3] - c[:3]) ** 2).sum(axis=-1)
        ds = (patch[..., 3] - c[3]) ** 2 + (patch[..., 4] - c[4]) ** 2
        d = dc + ratio * ds
        window = dist[y0:y1, x0:x1]
        better = d < window
        window[better] = d[better]
        labels[y0:y1, x0:x1][better] = ci
    return labels


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Keep the largest 4-connected component per label; merge orphans into
    the largest adjacent region."""
    h, w = labels.shape
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    out = labels.copy()
    for lab in np.unique(labels):
        mask = out == lab
        comps, n = _ndi.label(mask, structure=structure)
        if n <= 1:
            continue
        sizes = _ndi.sum_labels(mask, comps, index=np.arange(1, n + 1))
        keep = 1 + int(np.argmax(sizes))
        for comp in range(1, n + 1):
            if comp == keep:
                continue
            comp_mask = comps == comp
            grown = _ndi.binary_dilation(comp_mask, structure=structure)
            border = grown & ~comp_mask
            neighbor_labels = out[border]
            neighbor_labels = neighbor_labels[neighbor_labels != lab]
            if neighbor_labels.size == 0:
                continue
            ids, counts = np.unique(neighbor_labels, return_counts=True)
            out[comp_mask] = ids[np.argmax(counts)]
    return out


def _canonical_relabel(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Relabel regions 0..k-1 in raster order of their centroids."""
    ids = np.unique(labels)
    cys, cxs = [], []
    for lab in ids:
        ys, xs = np.nonzero(labels == lab)
        cys.append(ys.mean())
        cxs.append(xs.mean())
    order = np.lexsort((np.array(cxs), np.round(np.array(cys)).astype(int)))
    mapping = np.zeros(int(ids.max()) + 1, dtype=np.int32)
    for new, pos in enumerate(order):
        mapping[ids[pos]] = new
    return mapping[labels], ids.size


def slic_segment(
    frame: np.ndarray,
    bbox: tuple[int, int, int, int],
    k_target: int,
    compactness: float = DEFAULT_COMPACTNESS,
) -> SuperpixelMap:
    """SLIC superpixels inside `bbox` of one RGB frame.

    Grid-seeded k-means in CIELAB+xy, 10 iterations, followed by 4-connectivity
    enforcement. Deterministic; labels are raster-ordered by centroid.
    """
    x, y, w, h = bbox
    if w * h < 100 * k_target:
        raise RegionTooSmallError(f"bbox {w}x{h} too small for {k_target} superpixels")
    crop = np.asarray(frame[y : y + h, x : x + w, :], dtype=np.float64)
    lab = rgb_to_lab(crop)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    lab_xy = np.concatenate([lab, xs[..., None], ys[..., None]], axis=-1)
    step = float(np.sqrt(h * w / k_target))
    # grid seeds at cell centers
    ny = max(1, int(round(h / step)))
    nx = max(1, int(round(w / step)))
    centers = []
    for gy in range(ny):
        for gx in range(nx):
            cy = (gy + 0.5) * h / ny
            cx = (gx + 0.5) * w / nx
            iy, ix = min(h - 1, int(cy)), min(w - 1, int(cx))
            centers.append(lab_xy[iy, ix].copy())
    centers = np.asarray(centers)
    labels = _slic_assign(lab_xy, centers, step, compactness)
    for _ in range(SLIC_ITERATIONS - 1):
        flat = lab_xy.reshape(-1, 5)
        lf = labels.ravel()
        counts = np.bincount(lf, minlength=len(centers)).astype(np.float64)
        nonempty = counts > 0
        sums = np.zeros((len(centers), 5))
        for d in range(5):
            sums[:, d] = np.bincount(lf, weights=flat[:, d], minlength=len(centers))
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        labels = _slic_assign(lab_xy, centers[nonempty], step, compactness)
        centers = centers[nonempty]
    labels = _enforce_connectivity(labels)
    labels, k_actual = _canonical_relabel(labels)
    centroids = []
    for lab_id in range(k_actual):
        ys2, xs2 = np.nonzero(labels == lab_id)
        mean_rgb = tuple(float(v) for v in crop[ys2, xs2].mean(axis=0))
        centroids.append((float(xs2.mean()), float(ys2.mean()), mean_rgb))
    return SuperpixelMap(
        labels=labels, k_target=k_target, k_actual=k_actual, centroids=centroids, bbox=bbox
    )


@dataclass(frozen=True)
class RegionTrace:
    """Per-frame color statistics of one superpixel region."""

    traces: np.ndarray  # (n_frames, 3) mean RGB
    cov: np.ndarray  # (n_frames, 3, 3) population covariance
    eigvals: np.ndarray  # (n_frames, 3) descending
    basis: np.ndarray  # (n_frames, 3, 3) canonical eigenvector columns
    n_pixels: int


@dataclass(frozen=True)
class RegionTraceSet:
    fps: float
    regions: dict[int, RegionTrace]
    dropped: list[int] = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        first = next(iter(self.regions.values()))
        return first.traces.shape[0]


def region_stats(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Mean, covariance and eigen-pairs of an (n_frames, n_pixels, 3) stack."""
    means = pixels.mean(axis=1)
    centered = pixels - means[:, None, :]
    cov = np.einsum("tpc,tpd->tcd", centered, centered) / pixels.shape[1]
    eigvals, basis = np.linalg.eigh(cov)
    eigvals = eigvals[:, ::-1].copy()
    basis = basis[:, :, ::-1].copy()
    basis = canonicalize_basis(basis)
    return means, cov, eigvals, basis


def extract_traces(stack: FrameStack, spmap: SuperpixelMap) -> RegionTraceSet:
    """Mean-RGB traces and color-covariance eigen data per region.

    Masks come from the segment's first frame and stay fixed. Regions with
    an empty mask are dropped and recorded.
    """
    crops = np.asarray(stack.crops(), dtype=np.float64)
    regions: dict[int, RegionTrace] = {}
    dropped: list[int] = []
    for region_id in range(spmap.k_actual):
        mask = spmap.labels == region_id
        npix = int(mask.sum())
        if npix == 0:
            dropped.append(region_id)
            continue
        pixels = crops[:, mask, :]
        means, cov, eigvals, basis = region_stats(pixels)
        regions[region_id] = RegionTrace(
            traces=means, cov=cov, eigvals=eigvals, basis=basis, n_pixels=npix
        )
    return RegionTraceSet(fps=stack.fps, regions=regions, dropped=dropped)
