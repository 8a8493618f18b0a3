"""Two-path adversarial training of the expression manipulator.

Each iteration runs a latent-style step (style drawn from the mapping
network) followed by a reference-style step (style encoded from another
sequence).  Each step first updates the discriminator, then the translator,
style encoder and mapping network together.  All randomness of iteration
``k`` comes from a generator seeded with ``(seed, k)``, so a run resumed
from a checkpoint replays exactly.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from . import networks as nets
from . import objectives as obj
from .autodiff import ParameterStore, Tape, adam_step
from .dataio import Manifest, ValidationError, sliding_windows
from .networks import Bound, DivergenceError, NetConfig
from .objectives import LossReport, LossWeights

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Training hyperparameters; JSON configs mirror these fields.

    ``l1_reduction`` selects summed or entry-averaged style and cycle L1
    terms, ``warmup_iterations`` ramps their weights in, and
    ``mapping_lr_scale`` multiplies the mapping network's learning rate.
    """

    batch_size: int = 64
    lr: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.99
    eps: float = 1e-8
    iterations: int = 5000
    seed: int = 0
    n_window: int = 10
    hidden_g: int = 128
    hidden_e: int = 64
    hidden_d: int = 64
    weights: LossWeights = field(default_factory=LossWeights)
    checkpoint_every: int = 1000
    l1_reduction: str = "mean"
    warmup_iterations: int = 1000
    mapping_lr_scale: float = 0.1

    def __post_init__(self):
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if self.n_window < 2:
            raise ValidationError("n_window must be >= 2")
        if self.l1_reduction not in obj.REDUCTIONS:
            raise ValidationError(f"l1_reduction must be one of {obj.REDUCTIONS}")
        if self.mapping_lr_scale < 0:
            raise ValidationError("mapping_lr_scale must be >= 0")
        if self.warmup_iterations < 0:
            raise ValidationError("warmup_iterations must be >= 0")

    def weights_at(self, iteration: int) -> LossWeights:
        """Loss weights in effect at ``iteration``.

        The style and cycle weights ramp linearly from 0 to their configured
        values over the first ``warmup_iterations``; the speech weight is
        constant.
        """
        if iteration >= self.warmup_iterations:
            return self.weights
        f = iteration / self.warmup_iterations
        w = self.weights
        return LossWeights(sty=w.sty * f, cyc=w.cyc * f, mouth=w.mouth)

    @property
    def net_config(self) -> NetConfig:
        return NetConfig(hidden_g=self.hidden_g, hidden_e=self.hidden_e, hidden_d=self.hidden_d)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        doc = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> dict:
        return asdict(self)


class TrainingData:
    """Normalized stride-1 windows of every clip with their labels."""

    def __init__(self, tracks, labels, n_window: int, norm_mean, norm_std):
        self.n_window = n_window
        self.norm_mean = np.asarray(norm_mean, dtype=np.float32)
        self.norm_std = np.asarray(norm_std, dtype=np.float32)
        wins, labs = [], []
        for track, label in zip(tracks, labels):
            w = sliding_windows(track, n_window)
            wins.append(w)
            labs.append(np.full(len(w), label, dtype=np.int64))
        raw = np.concatenate(wins).astype(np.float64)
        self.windows = ((raw - norm_mean) / norm_std).astype(np.float32)
        self.labels = np.concatenate(labs)

    @classmethod
    def from_manifest(cls, manifest: Manifest) -> "TrainingData":
        return cls(manifest.load_tracks(), manifest.labels(), manifest.n_window,
                   manifest.norm_mean, manifest.norm_std)

    def __len__(self) -> int:
        return len(self.labels)

    def check_trainable(self, batch_size: int) -> None:
        counts = np.bincount(self.labels, minlength=nets.N_LABELS)
        present = np.flatnonzero(counts)
        if len(present) < 2:
            raise ValidationError("dataset must span at least two emotion domains")
        short = [nets.EMOTIONS[y] for y in present if counts[y] < batch_size]
        if short:
            raise ValidationError(
                f"domains with fewer windows than one batch ({batch_size}): {short}")

    def sample(self, rng: np.random.Generator, n: int) -> tuple:
        idx = rng.integers(len(self.labels), size=n)
        return self.windows[idx], self.labels[idx]


@dataclass
class TrainState:
    store: ParameterStore
    norm_mean: np.ndarray
    norm_std: np.ndarray
    n_window: int
    iteration: int = 0

    def to_checkpoint(self) -> ckpt_io.Checkpoint:
        meta = {"iteration": self.iteration, "n_window": self.n_window}
        return ckpt_io.Checkpoint(self.store, self.norm_mean, self.norm_std, meta)

    @classmethod
    def from_checkpoint(cls, ck: ckpt_io.Checkpoint) -> "TrainState":
        return cls(ck.store, ck.norm_mean.astype(np.float32), ck.norm_std.astype(np.float32),
                   int(ck.meta.get("n_window", 10)), int(ck.meta.get("iteration", 0)))


def new_state(config: TrainConfig, data: TrainingData) -> TrainState:
    store = nets.init_params(config.net_config, seed=config.seed)
    return TrainState(store, data.norm_mean.copy(), data.norm_std.copy(), config.n_window)


def _finite(name, value: float) -> float:
    if not np.isfinite(value):
        raise DivergenceError(f"{name} loss is not finite ({value})")
    return value


def _discriminator_update(state, config, seqs, labels, make_style, target_labels) -> float:
    tape = Tape()
    P = Bound(tape, state.store, trainable=nets.DISCRIMINATOR_GROUPS)
    style = make_style(P)
    fake = nets.translate(P, seqs, style)
    real_scores = nets.select_branch(P, nets.discriminate(P, seqs), labels)
    fake_scores = nets.select_branch(P, nets.discriminate(P, fake), target_labels)
    loss = obj.adv_loss_d(real_scores, fake_scores)
    value = _finite("discriminator", float(loss))
    tape.backward(loss)
    adam_step(state.store, config.lr, config.beta1, config.beta2, config.eps)
    return value


def _generator_update(state, config, seqs, make_style, target_labels) -> dict:
    red = config.l1_reduction
    tape = Tape()
    P = Bound(tape, state.store, trainable=nets.GENERATOR_GROUPS)
    steps = nets.as_steps(tape, seqs)
    style = make_style(P)
    fake = nets.translate(P, steps, style)
    adv_g = obj.adv_loss_g(nets.select_branch(P, nets.discriminate(P, fake), target_labels))
    sty = obj.style_recon_loss(style, nets.encode_style(P, fake), red)
    source_style = nets.encode_style(P, steps)
    cycled = nets.translate(P, fake, source_style)
    cyc = obj.cycle_loss(steps, cycled, red)
    mouth = obj.speech_loss(nets.jaw_series(steps), nets.jaw_series(fake), nets.jaw_series(cycled))
    total = obj.total_gem_loss(adv_g, sty, cyc, mouth, config.weights_at(state.iteration))
    parts = {"adv_g": float(adv_g), "sty": float(sty), "cyc": float(cyc),
             "mouth": float(mouth), "total_gem": _finite("generator", float(total))}
    tape.backward(total)
    adam_step(state.store, config.lr, config.beta1, config.beta2, config.eps,
              lr_scale={"M.": config.mapping_lr_scale})
    return parts


def train_step_latent(state: TrainState, config: TrainConfig, seqs, labels,
                      rng: np.random.Generator) -> LossReport:
    """Style from the mapping network for a random latent code and target label."""
    n = len(labels)
    z = rng.standard_normal((n, nets.LATENT_DIM)).astype(np.float32)
    target = rng.integers(nets.N_LABELS, size=n)

    def make_style(P):
        return nets.map_latent(P, z, target)

    adv_d = _discriminator_update(state, config, seqs, labels, make_style, target)
    parts = _generator_update(state, config, seqs, make_style, target)
    return LossReport(adv_d=adv_d, **parts)


def train_step_reference(state: TrainState, config: TrainConfig, seqs, labels,
                         ref_seqs, ref_labels) -> LossReport:
    """Style encoded from reference sequences; adversarial branch = reference label."""

    def make_style(P):
        return nets.encode_style(P, ref_seqs)

    adv_d = _discriminator_update(state, config, seqs, labels, make_style, ref_labels)
    parts = _generator_update(state, config, seqs, make_style, ref_labels)
    return LossReport(adv_d=adv_d, **parts)


def iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([seed, iteration, 0x7A])


def run_iteration(state: TrainState, config: TrainConfig, data: TrainingData) -> tuple:
    rng = iteration_rng(config.seed, state.iteration)
    seqs, labels = data.sample(rng, config.batch_size)
    latent = train_step_latent(state, config, seqs, labels, rng)
    seqs, labels = data.sample(rng, config.batch_size)
    ref_seqs, ref_labels = data.sample(rng, config.batch_size)
    reference = train_step_reference(state, config, seqs, labels, ref_seqs, ref_labels)
    state.iteration += 1
    return latent, reference


def train(config: TrainConfig, data: TrainingData, out_dir, init=None,
          finetune: bool = False) -> TrainState:
    """Train for ``config.iterations`` total iterations, writing checkpoints and a loss log.

    ``init`` resumes from a checkpoint (weights, optimizer state and
    iteration counter).  With ``finetune=True`` only the weights and
    normalization statistics are taken and counting restarts at zero.
    Log rows are numbered per step: latent steps are even, reference steps odd.
    """
    data.check_trainable(config.batch_size)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if init is None:
        state = new_state(config, data)
    else:
        ck = init if isinstance(init, ckpt_io.Checkpoint) else ckpt_io.load(init)
        state = TrainState.from_checkpoint(ck)
        if state.n_window != config.n_window:
            raise ValidationError(
                f"checkpoint window {state.n_window} != config window {config.n_window}")
        if finetune:
            state.iteration = 0
            for p in state.store.entries.values():
                p.m[...] = 0
                p.v[...] = 0
                p.step = 0
    log_path = out_dir / "train_log.csv"
    resuming = init is not None and not finetune and state.iteration > 0 and log_path.exists()
    if not resuming:
        obj.write_log(log_path, [])
    while state.iteration < config.iterations:
        k = state.iteration
        latent, reference = run_iteration(state, config, data)
        obj.write_log(log_path, [latent.as_row(2 * k), reference.as_row(2 * k + 1)], append=True)
        if (k + 1) % 100 == 0:
            log.info("iter %d  adv_d %.4f adv_g %.4f sty %.4f cyc %.3f mouth %.4f",
                     k + 1, latent.adv_d, latent.adv_g, latent.sty, latent.cyc, latent.mouth)
        if config.checkpoint_every and (k + 1) % config.checkpoint_every == 0:
            ckpt_io.save(out_dir / f"model_iter{k + 1:06d}.nedm", state.to_checkpoint())
    ckpt_io.save(out_dir / "model.nedm", state.to_checkpoint())
    return state
