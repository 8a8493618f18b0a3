"""Whole-clip translation and reference style extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import checkpoint as ckpt_io
from . import networks as nets
from .autodiff import ParameterStore, Tape
from .dataio import ValidationError, sliding_windows
from .networks import Bound


@dataclass
class Manipulator:
    """Trained networks plus the normalization they were trained with.

    Methods take and return raw (unnormalized) expression values.
    """

    store: ParameterStore
    norm_mean: np.ndarray
    norm_std: np.ndarray
    n_window: int = 10

    @classmethod
    def load(cls, path) -> "Manipulator":
        ck = ckpt_io.load(path)
        return cls(ck.store, ck.norm_mean, ck.norm_std, int(ck.meta.get("n_window", 10)))

    def _normalize(self, seqs) -> np.ndarray:
        return ((np.asarray(seqs, dtype=np.float64) - self.norm_mean) / self.norm_std).astype(
            self.store.dtype)

    def _bound(self) -> Bound:
        return Bound(Tape(self.store.dtype), self.store)

    def deltas(self, seqs, style) -> np.ndarray:
        """Raw-space residual updates for a ``(B, N, 51)`` batch."""
        seqs = np.asarray(seqs)
        P = self._bound()
        style = np.broadcast_to(np.atleast_2d(style), (seqs.shape[0], nets.STYLE_DIM))
        out = nets.translator_deltas(P, self._normalize(seqs), P.tape.constant(style))
        d = np.stack([t.data for t in out], axis=1).astype(np.float64)
        nets.check_finite("translator output", d)
        return d * self.norm_std

    def translate(self, seq, style) -> np.ndarray:
        """Translate one ``(N, 51)`` window or a ``(B, N, 51)`` batch."""
        seq = np.asarray(seq, dtype=np.float64)
        single = seq.ndim == 2
        batch = seq[None] if single else seq
        out = batch + self.deltas(batch, style)
        return out[0] if single else out

    def encode_style(self, seqs) -> np.ndarray:
        seqs = np.asarray(seqs)
        single = seqs.ndim == 2
        batch = seqs[None] if single else seqs
        d = nets.encode_style(self._bound(), self._normalize(batch)).data.astype(np.float64)
        return d[0] if single else d

    def map_latent(self, z, label) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        labels = np.broadcast_to(np.atleast_1d(label), (z.shape[0],))
        labels = np.array([nets.label_index(y) for y in labels])
        d = nets.map_latent(self._bound(), z.astype(self.store.dtype), labels).data
        return d.astype(np.float64)[0] if z.shape[0] == 1 else d.astype(np.float64)

    def discriminate(self, seqs) -> np.ndarray:
        seqs = np.asarray(seqs)
        batch = seqs[None] if seqs.ndim == 2 else seqs
        return nets.discriminate(self._bound(), self._normalize(batch)).data.astype(np.float64)


def gaussian_kernel(n: int, sigma: float | None = None) -> np.ndarray:
    """Gaussian weights over window offsets, centred at ``(n - 1) / 2``; default sigma n/4."""
    sigma = n / 4 if sigma is None else sigma
    if sigma <= 0:
        raise ValueError("kernel sigma must be positive")
    x = np.arange(n) - (n - 1) / 2
    return np.exp(-0.5 * (x / sigma) ** 2)


def merge_windows(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Blend overlapping stride-1 windows ``(W, N, D)`` into a ``(W + N - 1, D)`` track.

    Frame ``t`` is the kernel-weighted mean of every window covering it, with
    the weights renormalized per frame.
    """
    W, N, _ = values.shape
    T = W + N - 1
    wsum = np.zeros(T)
    for k in range(N):
        wsum[k:k + W] += kernel[k]
    out = np.zeros((T,) + values.shape[2:])
    for k in range(N):
        out[k:k + W] += (kernel[k] / wsum[k:k + W])[:, None] * values[:, k]
    return out


def translate_track(model: Manipulator, track, style, kernel=None) -> np.ndarray:
    """Translate a whole clip with stride-1 windows and Gaussian-weighted overlap merging."""
    track = np.asarray(track, dtype=np.float64)
    n = model.n_window
    if track.shape[0] < n:
        raise ValidationError(f"track of {track.shape[0]} frames is shorter than window {n}")
    kernel = gaussian_kernel(n) if kernel is None else np.asarray(kernel, dtype=np.float64)
    if kernel.shape != (n,) or np.any(kernel <= 0):
        raise ValueError(f"kernel must hold {n} positive weights")
    windows = sliding_windows(track, n)
    # merging the residuals keeps a zero update exact
    return track + merge_windows(model.deltas(windows, style), kernel)


def weiszfeld(points, tol: float = 1e-8, max_iter: int = 1000, eps: float = 1e-12) -> tuple:
    """Geometric median by Weiszfeld iteration; returns ``(median, objective history)``.

    Starts from the coordinate-wise median.  When an iterate lands on a data
    point the Vardi-Zhang rule decides whether that point is optimal and,
    if not, how far to step away from it.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] == 0 or pts.size == 0:
        raise ValueError("geometric median of an empty point set")

    def objective(x):
        return float(np.linalg.norm(pts - x, axis=1).sum())

    x = np.median(pts, axis=0)
    history = [objective(x)]
    for _ in range(max_iter):
        dist = np.linalg.norm(pts - x, axis=1)
        near = dist < eps
        w = 1.0 / np.maximum(dist[~near], eps)
        if w.size == 0:
            break
        T = (w[:, None] * pts[~near]).sum(axis=0) / w.sum()
        if near.any():
            R = (w[:, None] * (pts[~near] - x)).sum(axis=0)
            r = np.linalg.norm(R)
            eta = near.sum()
            if r <= eta:
                break
            x_new = (1 - eta / r) * T + (eta / r) * x
        else:
            x_new = T
        step = np.linalg.norm(x_new - x)
        f_new = objective(x_new)
        if f_new > history[-1]:
            break  # rounding floor reached
        x = x_new
        history.append(f_new)
        if step < tol:
            break
    return x, history


def geometric_median(points) -> np.ndarray:
    return weiszfeld(points)[0]


def extract_style(model: Manipulator, reference_track) -> np.ndarray:
    """Geometric median of the styles of every stride-1 window of a reference clip."""
    ref = np.asarray(reference_track, dtype=np.float64)
    if ref.shape[0] < model.n_window:
        raise ValidationError(
            f"reference of {ref.shape[0]} frames is shorter than window {model.n_window}")
    styles = model.encode_style(sliding_windows(ref, model.n_window))
    return geometric_median(styles)
