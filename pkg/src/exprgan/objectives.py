"""Adversarial, style, cycle and speech-preserving losses.

Every loss takes :class:`~exprgan.autodiff.Tensor` inputs (arrays and
floats are lifted to constants) and returns a scalar tensor, so the same
code path serves training and plain evaluation.  Batch expectations are
means over rows.  L1 norms are sums over entries by default; with
``reduction="mean"`` they are divided by the entry count of one sample.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

PCC_EPS = 1e-8


@dataclass(frozen=True)
class LossWeights:
    sty: float = 1.0
    cyc: float = 1.0
    mouth: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss weight {f.name} must be non-negative")


@dataclass
class LossReport:
    adv_d: float
    adv_g: float
    sty: float
    cyc: float
    mouth: float
    total_gem: float

    def as_row(self, step: int) -> list:
        return [step, self.adv_d, self.adv_g, self.sty, self.cyc, self.mouth, self.total_gem]


LOG_HEADER = ["step", "adv_d", "adv_g", "sty", "cyc", "mouth", "total"]


def _t(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64).reshape(-1, 1))


def _rows(x) -> Tensor:
    """Lift series-like input to a ``(B, N)`` tensor."""
    if isinstance(x, Tensor):
        return x if x.data.ndim == 2 else Tensor(x.data.reshape(1, -1), None)
    a = np.asarray(x, dtype=np.float64)
    return Tensor(a.reshape(1, -1) if a.ndim == 1 else a)


def adv_loss_d(real_scores, fake_scores) -> Tensor:
    """Least-squares discriminator loss with real target 1 and fake target 0."""
    real, fake = _t(real_scores), _t(fake_scores)
    return 0.5 * ad.mean_all(ad.square(real - 1.0)) + 0.5 * ad.mean_all(ad.square(fake))


def adv_loss_g(fake_scores) -> Tensor:
    return 0.5 * ad.mean_all(ad.square(_t(fake_scores) - 1.0))


REDUCTIONS = ("sum", "mean")


def _l1_scale(reduction: str, n_rows: int, per_row: int) -> float:
    if reduction not in REDUCTIONS:
        raise ValueError(f"reduction must be one of {REDUCTIONS}, got {reduction!r}")
    return 1.0 / (n_rows * (per_row if reduction == "mean" else 1))


def style_recon_loss(d_target, d_recovered, reduction: str = "sum") -> Tensor:
    """Batch mean of ``||d_target - d_recovered||_1``."""
    diff = _rows(d_target) - _rows(d_recovered)
    n_rows, width = diff.dims
    return ad.sum_all(ad.abs_(diff)) * _l1_scale(reduction, n_rows, width)


def cycle_loss(seq, seq_cycled, reduction: str = "sum") -> Tensor:
    """Batch mean of the L1 norm over all entries of ``seq - seq_cycled``.

    Sequences are either lists of per-timestep ``(B, D)`` tensors or arrays of
    dims ``(B, N, D)`` / ``(N, D)``.
    """
    if isinstance(seq, (list, tuple)):
        n_rows, width = seq[0].dims
        total = None
        for a, b in zip(seq, seq_cycled, strict=True):
            term = ad.sum_all(ad.abs_(a - b))
            total = term if total is None else total + term
        return total * _l1_scale(reduction, n_rows, width * len(seq))
    a = np.asarray(seq, dtype=np.float64)
    b = np.asarray(seq_cycled, dtype=np.float64)
    if a.shape != b.shape:
        raise ad.ShapeError(f"cycle_loss: dims {a.shape} and {b.shape} differ")
    n_rows = a.shape[0] if a.ndim == 3 else 1
    scale = _l1_scale(reduction, n_rows, a.size // n_rows)
    return Tensor(np.asarray(np.abs(a - b).sum() * scale))


def pcc(x, y) -> Tensor:
    """Row-wise Pearson correlation of ``(B, N)`` series, dims ``(B, 1)``.

    Rows whose ``std_x * std_y`` falls below 1e-8 yield 0 with zero gradient.
    """
    x, y = _rows(x), _rows(y)
    if x.dims != y.dims:
        raise ad.ShapeError(f"pcc: series dims {x.dims} and {y.dims} differ")
    n = x.dims[1]
    if n < 2:
        raise ValueError("pcc needs series of length >= 2")
    dtype = x.data.dtype
    avg = Tensor(np.full((n, 1), 1.0 / n, dtype=dtype))
    ones = Tensor(np.ones((n, 1), dtype=dtype))
    cx = x - x @ avg
    cy = y - y @ avg
    cov = (cx * cy) @ ones
    vxy = ((cx * cx) @ ones) * ((cy * cy) @ ones)
    ok = (np.sqrt(vxy.data) / n >= PCC_EPS).astype(dtype)
    r = cov * Tensor(ok) / ad.sqrt(vxy + Tensor(1 - ok))
    # rounding can push |r| a hair past 1; the offset is exact (Sterbenz)
    return r + Tensor(np.clip(r.data, -1, 1) - r.data)


def speech_loss(jaw_in, jaw_translated, jaw_cycled) -> Tensor:
    """Negative batch mean of corr(in, translated) + corr(translated, cycled)."""
    a = pcc(jaw_in, jaw_translated)
    b = pcc(jaw_translated, jaw_cycled)
    return -ad.mean_all(a + b)


def total_gem_loss(adv_g, sty, cyc, mouth, weights: LossWeights = LossWeights()):
    """Generator-side objective shared by translator, encoder and mapping network."""
    return adv_g + weights.sty * sty + weights.cyc * cyc + weights.mouth * mouth


def write_log(path, rows, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh)
        if not append:
            w.writerow(LOG_HEADER)
        for row in rows:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def read_log(path) -> list:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != LOG_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [[int(row[0])] + [float(v) for v in row[1:]] for row in r]

