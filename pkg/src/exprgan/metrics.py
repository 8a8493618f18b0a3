"""Pixel-distance metrics on frames and jaw correlation on expression tracks.

Distances are measured in 8-bit units: float images in [0, 1] are scaled
by 255 before taking per-pixel RGB L2 norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objectives import pcc

MOUTH_CROP = 72
MASK_THRESHOLD = 0.5


@dataclass
class MetricReport:
    per_frame: dict = field(default_factory=dict)

    def add(self, name: str, value: float) -> None:
        self.per_frame.setdefault(name, []).append(float(value))

    @property
    def aggregate(self) -> dict:
        return {k: float(np.mean(v)) for k, v in self.per_frame.items()}

    def to_json(self) -> dict:
        return {"per_frame": self.per_frame, "aggregate": self.aggregate}


def _pixel_dist(gen, gt) -> np.ndarray:
    gen = np.asarray(gen, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if gen.shape != gt.shape:
        raise ValueError(f"image dims differ: {gen.shape} vs {gt.shape}")
    return np.linalg.norm(gen * 255.0 - gt * 255.0, axis=-1)


def fapd(gen, gt, mask) -> float:
    """Mean RGB L2 distance over pixels where ``mask >= 0.5``."""
    dist = _pixel_dist(gen, gt)
    mask = np.asarray(mask)
    if mask.shape != dist.shape:
        raise ValueError(f"mask dims {mask.shape} do not match image dims {dist.shape}")
    sel = mask >= MASK_THRESHOLD
    if not sel.any():
        raise ValueError("mask selects no pixels")
    return float(dist[sel].mean())


def apd(gen, gt) -> float:
    return float(_pixel_dist(gen, gt).mean())


def mouth_crop_bounds(shape, center, size: int = MOUTH_CROP) -> tuple:
    """``(row0, row1, col0, col1)`` of a size x size box around ``center = (x, y)``, kept inside."""
    H, W = shape[:2]
    h, w = min(size, H), min(size, W)
    c0 = int(np.clip(round(center[0]) - w // 2, 0, W - w))
    r0 = int(np.clip(round(center[1]) - h // 2, 0, H - h))
    return r0, r0 + h, c0, c0 + w


def mapd(gen, gt, mouth_center) -> float:
    """APD inside the 72x72 box around the mouth centre."""
    r0, r1, c0, c1 = mouth_crop_bounds(np.shape(gen), mouth_center)
    return apd(np.asarray(gen)[r0:r1, c0:c1], np.asarray(gt)[r0:r1, c0:c1])


def mouth_center(landmarks) -> tuple:
    """Centroid of the mouth landmarks (points 49-68 in 1-based numbering)."""
    pts = np.asarray(landmarks, dtype=np.float64)[48:68]
    x, y = pts.mean(axis=0)
    return float(x), float(y)


def track_jaw_pcc(input_track, output_track) -> float:
    a = np.asarray(input_track, dtype=np.float64)
    b = np.asarray(output_track, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"track lengths differ: {a.shape[0]} vs {b.shape[0]}")
    return float(pcc(a[:, 0], b[:, 0]))
