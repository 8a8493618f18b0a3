"""Translator, style encoder, mapping network and discriminator.

All four networks work in normalized expression space.  A sequence batch is
handled on the tape as a list of ``N`` tensors of dims ``(B, 51)``, one per
timestep.  Parameter names are prefixed by the owning network (``G.``,
``E.``, ``M.``, ``D.``) so updates can be restricted to one group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParameterStore, Tape, Tensor

EXPR_DIM = 51
STYLE_DIM = 16
LATENT_DIM = 4
EMOTIONS = ("neutral", "happy", "fear", "sad", "surprised", "angry", "disgusted")
N_LABELS = len(EMOTIONS)

GENERATOR_GROUPS = ("G.", "E.", "M.")
DISCRIMINATOR_GROUPS = ("D.",)


class DivergenceError(FloatingPointError):
    """Raised when a forward pass or loss produces non-finite values."""


@dataclass(frozen=True)
class NetConfig:
    hidden_g: int = 128
    hidden_e: int = 64
    hidden_d: int = 64
    mapping_hidden: int = 64
    expr_dim: int = EXPR_DIM
    style_dim: int = STYLE_DIM
    latent_dim: int = LATENT_DIM
    n_labels: int = N_LABELS


def label_index(label) -> int:
    """Accept an emotion name or an integer index."""
    if isinstance(label, str) and not label.strip().isdigit():
        try:
            return EMOTIONS.index(label.lower())
        except ValueError:
            raise ValueError(f"unknown emotion {label!r}; expected one of {EMOTIONS}") from None
    idx = int(label)
    if not 0 <= idx < N_LABELS:
        raise ValueError(f"emotion label index {idx} outside [0, {N_LABELS - 1}]")
    return idx


def _uniform(rng, fan_in, shape, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _add_affine(store, rng, name, n_in, n_out):
    store.add(f"{name}.W", _uniform(rng, n_in, (n_in, n_out), store.dtype))
    store.add(f"{name}.b", _uniform(rng, n_in, (n_out,), store.dtype))


def _add_lstm(store, rng, name, n_in, hidden):
    fan = n_in + hidden
    store.add(f"{name}.Wx", _uniform(rng, fan, (n_in, 4 * hidden), store.dtype))
    store.add(f"{name}.Wh", _uniform(rng, fan, (hidden, 4 * hidden), store.dtype))
    b = _uniform(rng, fan, (4 * hidden,), store.dtype)
    b[hidden:2 * hidden] = 1.0  # forget gate
    store.add(f"{name}.b", b)


def init_params(config: NetConfig = NetConfig(), seed: int = 0, dtype=ad.DTYPE) -> ParameterStore:
    rng = np.random.default_rng(seed)
    store = ParameterStore(dtype=dtype)
    c = config
    _add_affine(store, rng, "G.in", c.expr_dim + c.style_dim, c.hidden_g)
    _add_lstm(store, rng, "G.lstm", c.hidden_g, c.hidden_g)
    _add_affine(store, rng, "G.out", c.hidden_g, c.expr_dim)

    _add_lstm(store, rng, "E.lstm", c.expr_dim, c.hidden_e)
    _add_affine(store, rng, "E.head", c.hidden_e, c.style_dim)

    _add_affine(store, rng, "M.fc1", c.latent_dim, c.mapping_hidden)
    _add_affine(store, rng, "M.fc2", c.mapping_hidden, c.mapping_hidden)
    _add_affine(store, rng, "M.head", c.mapping_hidden, c.n_labels * c.style_dim)

    _add_lstm(store, rng, "D.lstm", c.expr_dim, c.hidden_d)
    _add_affine(store, rng, "D.head", c.hidden_d, c.n_labels)
    return store


def config_from_store(store: ParameterStore) -> NetConfig:
    return NetConfig(
        hidden_g=store.value("G.in.W").shape[1],
        hidden_e=store.value("E.head.W").shape[0],
        hidden_d=store.value("D.head.W").shape[0],
        mapping_hidden=store.value("M.fc1.W").shape[1],
        expr_dim=store.value("G.out.W").shape[1],
        style_dim=store.value("E.head.W").shape[1],
        latent_dim=store.value("M.fc1.W").shape[0],
        n_labels=store.value("D.head.W").shape[1],
    )


class Bound:
    """Parameters of a store bound to one tape.

    Names under ``trainable`` prefixes become gradient sinks; every other
    entry is a constant on this tape.
    """

    def __init__(self, tape: Tape, store: ParameterStore, trainable=()):
        self.tape = tape
        self.store = store
        self.trainable = tuple(trainable)
        self._cache: dict = {}

    def __getitem__(self, name: str) -> Tensor:
        t = self._cache.get(name)
        if t is None:
            if self.trainable and name.startswith(self.trainable):
                t = self.tape.param(self.store, name)
            else:
                t = self.tape.constant(self.store.value(name))
            self._cache[name] = t
        return t


def affine(P: Bound, name: str, x: Tensor) -> Tensor:
    return x @ P[f"{name}.W"] + P[f"{name}.b"]


def lstm(P: Bound, name: str, xs: list) -> list:
    """Run a single-layer LSTM over a list of ``(B, n_in)`` tensors; return hidden states."""
    Wx, Wh, b = P[f"{name}.Wx"], P[f"{name}.Wh"], P[f"{name}.b"]
    H = Wh.dims[0]
    hs = []
    h = c = None
    for x in xs:
        z = x @ Wx + b
        if h is not None:
            z = z + h @ Wh
        i = ad.sigmoid(ad.slice_last(z, 0, H))
        f = ad.sigmoid(ad.slice_last(z, H, 2 * H))
        g = ad.tanh(ad.slice_last(z, 2 * H, 3 * H))
        o = ad.sigmoid(ad.slice_last(z, 3 * H, 4 * H))
        c = i * g if c is None else f * c + i * g
        h = o * ad.tanh(c)
        hs.append(h)
    return hs


def as_steps(tape: Tape, seq) -> list:
    """Split a ``(B, N, D)`` array into per-timestep constants; lists pass through."""
    if isinstance(seq, (list, tuple)):
        return list(seq)
    seq = np.asarray(seq, dtype=tape.dtype)
    return [tape.constant(seq[:, t]) for t in range(seq.shape[1])]


def translator_deltas(P: Bound, seq, style: Tensor) -> list:
    """Per-timestep residual updates produced by the translator."""
    steps = as_steps(P.tape, seq)
    xs = [ad.tanh(affine(P, "G.in", ad.concat([x, style]))) for x in steps]
    return [affine(P, "G.out", h) for h in lstm(P, "G.lstm", xs)]


def translate(P: Bound, seq, style: Tensor) -> list:
    """Translate a normalized sequence batch toward ``style``: ``x_t + delta_t``."""
    steps = as_steps(P.tape, seq)
    return [x + dlt for x, dlt in zip(steps, translator_deltas(P, steps, style))]


def encode_style(P: Bound, seq) -> Tensor:
    hs = lstm(P, "E.lstm", as_steps(P.tape, seq))
    return affine(P, "E.head", hs[-1])


def discriminate(P: Bound, seq) -> Tensor:
    """Raw per-label scores, dims ``(B, n_labels)``."""
    hs = lstm(P, "D.lstm", as_steps(P.tape, seq))
    return affine(P, "D.head", hs[-1])


def _one_hot(labels, n, dtype) -> np.ndarray:
    labels = np.asarray(labels).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= n):
        raise ValueError(f"label indices must lie in [0, {n - 1}], got {labels.tolist()}")
    out = np.zeros((labels.size, n), dtype=dtype)
    out[np.arange(labels.size), labels] = 1
    return out


def map_latent(P: Bound, z, labels) -> Tensor:
    """Style vectors ``(B, 16)`` from latent codes ``(B, 4)`` via the head of each label."""
    z = z if isinstance(z, Tensor) else P.tape.constant(np.atleast_2d(z))
    h = ad.tanh(affine(P, "M.fc1", z))
    h = ad.tanh(affine(P, "M.fc2", h))
    heads = affine(P, "M.head", h)
    style_dim = P.store.value("E.head.b").shape[0]
    n_labels = heads.dims[1] // style_dim
    mask = np.repeat(_one_hot(labels, n_labels, P.tape.dtype), style_dim, axis=1)
    if mask.shape[0] != heads.dims[0]:
        raise ValueError(f"{mask.shape[0]} labels for a batch of {heads.dims[0]} latent codes")
    gather = np.tile(np.eye(style_dim, dtype=P.tape.dtype), (n_labels, 1))
    return (heads * P.tape.constant(mask)) @ P.tape.constant(gather)


def select_branch(P: Bound, scores: Tensor, labels) -> Tensor:
    """Pick one score column per row: dims ``(B, 1)``."""
    onehot = _one_hot(labels, scores.dims[1], P.tape.dtype)
    ones = np.ones((scores.dims[1], 1), dtype=P.tape.dtype)
    return (scores * P.tape.constant(onehot)) @ P.tape.constant(ones)


def jaw_series(steps: list) -> Tensor:
    """Jaw-opening channel over time as a ``(B, N)`` tensor."""
    return ad.concat([ad.slice_last(x, 0, 1) for x in steps])


def check_finite(name: str, *arrays) -> None:
    for a in arrays:
        data = a.data if isinstance(a, Tensor) else a
        if not np.all(np.isfinite(data)):
            raise DivergenceError(f"non-finite values in {name}")
