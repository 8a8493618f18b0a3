"""Face alignment, multi-band blending and NMFC vertex colours.

Images are float arrays in [0, 1] of dims ``(H, W, 3)``; masks are
``(H, W)``.  Pixel ``(row, col)`` sits at coordinates ``x = col, y = row``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

N_LANDMARKS = 68
BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


# ---------------------------------------------------------------- alignment


@dataclass(frozen=True)
class SimilarityTransform2D:
    """``x' = scale * R(theta) @ x + (tx, ty)``."""

    scale: float = 1.0
    theta: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("similarity scale must be positive")

    @property
    def linear(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return self.scale * np.array([[c, -s], [s, c]])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty])

    def matrix(self) -> np.ndarray:
        """Homogeneous 3x3 matrix."""
        m = np.eye(3)
        m[:2, :2] = self.linear
        m[:2, 2] = self.translation
        return m

    def apply(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.linear.T + self.translation

    def inverse(self) -> "SimilarityTransform2D":
        inv_lin = np.linalg.inv(self.linear)
        t = -inv_lin @ self.translation
        return SimilarityTransform2D(1.0 / self.scale, -self.theta, float(t[0]), float(t[1]))


def estimate_similarity(src, dst) -> SimilarityTransform2D:
    """Least-squares similarity (no reflection) taking ``src`` points onto ``dst``."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError(f"landmark sets must both be (K, 2), got {src.shape} and {dst.shape}")
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    a, b = src - mu_s, dst - mu_d
    var_s = (a * a).sum()
    if var_s < 1e-12 or (b * b).sum() < 1e-12:
        raise ValueError("landmarks have zero spread")
    cov = b.T @ a
    U, S, Vt = np.linalg.svd(cov)
    D = np.diag([1.0, np.sign(np.linalg.det(U @ Vt)) or 1.0])
    R = U @ D @ Vt
    scale = float(np.trace(np.diag(S) @ D) / var_s)
    t = mu_d - scale * R @ mu_s
    theta = math.atan2(R[1, 0], R[0, 0])
    return SimilarityTransform2D(scale, theta, float(t[0]), float(t[1]))


def smooth_landmarks(landmark_sets) -> np.ndarray:
    """Coordinate-wise mean of landmark sets already mapped to a common frame."""
    sets = np.asarray(landmark_sets, dtype=np.float64)
    if sets.ndim != 3 or sets.shape[0] == 0:
        raise ValueError("need a non-empty stack of (K, 2) landmark sets")
    return sets.mean(axis=0)


def validate_landmarks(pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    if pts.shape != (N_LANDMARKS, 2) or not np.all(np.isfinite(pts)):
        raise ValueError(f"expected {N_LANDMARKS} finite (x, y) landmarks, got dims {pts.shape}")
    return pts


def load_landmarks(path) -> np.ndarray:
    return validate_landmarks(json.loads(Path(path).read_text()))


def mean_face_template() -> np.ndarray:
    """The bundled 68-point mean face template (256x256 frame)."""
    text = resources.files("exprgan").joinpath("data/mean_face_68.json").read_text()
    return validate_landmarks(json.loads(text))


def bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``image`` at float coordinates; anything outside the image reads as black."""
    H, W = image.shape[:2]
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0)[..., None] if image.ndim == 3 else xs - x0
    fy = (ys - y0)[..., None] if image.ndim == 3 else ys - y0

    def tap(yy, xx):
        inside = (xx >= 0) & (xx < W) & (yy >= 0) & (yy < H)
        v = image[np.clip(yy, 0, H - 1), np.clip(xx, 0, W - 1)]
        return np.where(inside[..., None] if image.ndim == 3 else inside, v, 0.0)

    top = tap(y0, x0) * (1 - fx) + tap(y0, x0 + 1) * fx
    bot = tap(y0 + 1, x0) * (1 - fx) + tap(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bot * fy


def warp(image, transform: SimilarityTransform2D, out_shape=None) -> np.ndarray:
    """Warp ``image`` forward by ``transform`` (inverse-mapped bilinear sampling)."""
    image = np.asarray(image, dtype=np.float64)
    H, W = out_shape if out_shape is not None else image.shape[:2]
    ys, xs = np.mgrid[0:H, 0:W].astype(np.float64)
    src = transform.inverse().apply(np.stack([xs.ravel(), ys.ravel()], axis=1))
    out = bilinear_sample(image, src[:, 0].reshape(H, W), src[:, 1].reshape(H, W))
    return out


def align_face(image, landmarks, template=None, out_shape=None) -> tuple:
    """Warp a face so its landmarks land on the template; returns ``(image, transform)``."""
    template = mean_face_template() if template is None else validate_landmarks(template)
    tf = estimate_similarity(validate_landmarks(landmarks), template)
    return warp(image, tf, out_shape), tf


# ---------------------------------------------------------------- pyramids


def _blur(img: np.ndarray, mode: str = "nearest") -> np.ndarray:
    out = ndimage.correlate1d(img, BINOMIAL5, axis=0, mode=mode)
    return ndimage.correlate1d(out, BINOMIAL5, axis=1, mode=mode)


def pyr_down(img: np.ndarray) -> np.ndarray:
    return _blur(img)[::2, ::2]


def pyr_up(img: np.ndarray, shape: tuple) -> np.ndarray:
    """Zero-insertion upsampling to ``shape[:2]`` followed by the binomial blur.

    The result is divided by the blurred sample mask, which equals the usual
    gain of 4 in the interior and keeps constants constant at the borders.
    """
    up = np.zeros(tuple(shape[:2]) + img.shape[2:], dtype=np.float64)
    up[::2, ::2] = img
    hits = np.zeros(tuple(shape[:2]))
    hits[::2, ::2] = 1.0
    weight = _blur(hits, mode="constant")
    if img.ndim == 3:
        weight = weight[..., None]
    return _blur(up, mode="constant") / weight


def max_levels(shape) -> int:
    return int(math.floor(math.log2(min(shape[0], shape[1])))) + 1


def build_pyramids(image, levels: int) -> tuple:
    """Gaussian and Laplacian pyramids, finest level first."""
    image = np.asarray(image, dtype=np.float64)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if min(image.shape[:2]) < 2 ** (levels - 1):
        raise ValueError(f"{levels} levels need dims >= {2 ** (levels - 1)}, got {image.shape[:2]}")
    gauss = [image]
    for _ in range(levels - 1):
        gauss.append(pyr_down(gauss[-1]))
    lap = [g - pyr_up(gn, g.shape) for g, gn in zip(gauss[:-1], gauss[1:])]
    lap.append(gauss[-1])
    return gauss, lap


def collapse(laplacian: list) -> np.ndarray:
    img = laplacian[-1]
    for lap in reversed(laplacian[:-1]):
        img = lap + pyr_up(img, lap.shape)
    return img


def default_blend_levels(shape) -> int:
    levels = max(3, int(math.floor(math.log2(min(shape[0], shape[1])))) - 2)
    return min(levels, max_levels(shape))


def multiband_blend(fg, bg, mask, levels: int | None = None) -> np.ndarray:
    """Blend ``fg`` over ``bg`` level by level with the mask's Gaussian pyramid."""
    fg = np.asarray(fg, dtype=np.float64)
    bg = np.asarray(bg, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if fg.shape != bg.shape or mask.shape != fg.shape[:2]:
        raise ValueError(f"dims mismatch: fg {fg.shape}, bg {bg.shape}, mask {mask.shape}")
    levels = default_blend_levels(fg.shape) if levels is None else levels
    _, lf = build_pyramids(fg, levels)
    _, lb = build_pyramids(bg, levels)
    gm, _ = build_pyramids(mask, levels)
    if fg.ndim == 3:
        gm = [m[..., None] for m in gm]
    blended = [m * a + (1 - m) * b for m, a, b in zip(gm, lf, lb)]
    return np.clip(collapse(blended), 0.0, 1.0)


def disk(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return xx * xx + yy * yy <= r * r


def erode_soft(mask, radius: float = 8) -> np.ndarray:
    """Grey erosion by a disk, then a Gaussian blur with sigma = radius / 2."""
    mask = np.asarray(mask, dtype=np.float64)
    if radius < 0:
        raise ValueError("erosion radius must be >= 0")
    if radius == 0:
        return mask.copy()
    eroded = ndimage.grey_erosion(mask, footprint=disk(round(radius)), mode="nearest")
    return np.clip(ndimage.gaussian_filter(eroded, sigma=radius / 2, mode="nearest"), 0, 1)


# ---------------------------------------------------------------- NMFC


def nmfc_colorize(mean_vertices) -> np.ndarray:
    """RGB per vertex from its mean-face XYZ position normalized to the bounding box."""
    v = np.asarray(mean_vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 3 or len(v) == 0:
        raise ValueError(f"expected (V, 3) vertices, got dims {v.shape}")
    lo, hi = v.min(axis=0), v.max(axis=0)
    extent = hi - lo
    if np.any(extent <= 0):
        raise ValueError(f"degenerate mean-mesh bounding box, extents {extent.tolist()}")
    return (v - lo) / extent
