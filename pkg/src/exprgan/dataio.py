"""Expression tracks on disk, dataset manifests and the synthetic domain generator.

The synthetic generator stands in for real emotion-labelled footage.  Every
clip shares one kind of content signal: each non-jaw channel is a sum of
2-4 sinusoids at channel-specific frequencies, and the jaw channel carries a
"speech" signal built the same way at syllabic rates.  Domain ``y`` maps the
content through ``eps_t = A_y c_t + b_y + noise``.  Because the frequencies
are known, :func:`oracle_classify` can recover the label of any clip by
asking which domain's inverse map yields the best-fitting content.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .networks import EMOTIONS, EXPR_DIM, N_LABELS

MANIFEST_VERSION = 1
TRACK_HEADER = ["jaw"] + [f"expr{i}" for i in range(1, EXPR_DIM)]


class ValidationError(ValueError):
    """Malformed input files or datasets unfit for training."""


# ---------------------------------------------------------------- tracks


def write_track(path, track: np.ndarray) -> None:
    track = np.asarray(track, dtype=np.float64)
    if track.ndim != 2 or track.shape[1] != EXPR_DIM:
        raise ValidationError(f"track must have dims (T, {EXPR_DIM}), got {track.shape}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACK_HEADER)
    for row in track:
        w.writerow([format(v, ".9g") for v in row])
    Path(path).write_text(buf.getvalue())


def read_track(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and row and not _is_number(row[0].strip()):
                continue  # header
            if len(row) != EXPR_DIM:
                raise ValidationError(
                    f"{path}: row {lineno} has {len(row)} columns, expected {EXPR_DIM}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValidationError(f"{path}: row {lineno} has a non-numeric value") from None
    if not rows:
        raise ValidationError(f"{path}: no frames")
    track = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(track)):
        raise ValidationError(f"{path}: non-finite values")
    return track


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def sliding_windows(track: np.ndarray, n: int) -> np.ndarray:
    """All stride-1 windows, dims ``(T - n + 1, n, D)``."""
    track = np.asarray(track)
    if track.shape[0] < n:
        raise ValidationError(f"track of {track.shape[0]} frames is shorter than window {n}")
    return np.lib.stride_tricks.sliding_window_view(track, n, axis=0).transpose(0, 2, 1)


# ---------------------------------------------------------------- synthetic domains


@dataclass
class DomainSpec:
    """Per-label affine maps over a shared sinusoidal content model."""

    maps: np.ndarray         # (L, D, D), diagonally dominant, invertible
    offsets: np.ndarray      # (L, D)
    freqs: list              # D arrays of cycles/frame
    noise: float = 0.05
    amp_range: tuple = (0.5, 1.0)

    @property
    def n_labels(self) -> int:
        return self.maps.shape[0]

    def validate(self) -> None:
        L, D, _ = self.maps.shape
        if self.offsets.shape != (L, D) or len(self.freqs) != D:
            raise ValidationError("domain spec arrays have inconsistent dims")
        if L < 2:
            raise ValidationError("need at least two domains")
        if np.any(self.maps[:, 0, 0] <= 0):
            raise ValidationError("jaw gain must be positive in every domain")
        for A in self.maps:
            if np.linalg.cond(A) > 1e6:
                raise ValidationError("domain map is not safely invertible")
        if self.noise < 0:
            raise ValidationError("noise scale must be non-negative")


def make_domain_spec(
    seed: int,
    n_labels: int = N_LABELS,
    dim: int = EXPR_DIM,
    offset_scale: float = 1.5,
    jaw_offset_scale: float = 3.0,
    gain_range: tuple = (0.7, 1.4),
    jaw_gain_range: tuple = (0.5, 2.0),
    mixing: float = 0.1,
    noise: float = 0.05,
) -> DomainSpec:
    rng = np.random.default_rng([seed, 0xD0])
    maps = np.empty((n_labels, dim, dim))
    offsets = np.empty((n_labels, dim))
    for y in range(n_labels):
        A = rng.normal(0, mixing / np.sqrt(dim), size=(dim, dim))
        A[0, :] = 0.0  # jaw row stays a pure positive gain on the speech signal
        gains = rng.uniform(*gain_range, size=dim)
        gains[0] = rng.uniform(*jaw_gain_range)
        A[np.diag_indices(dim)] = gains
        maps[y] = A
        offsets[y] = rng.normal(0, offset_scale, size=dim)
        offsets[y, 0] = rng.normal(0, jaw_offset_scale)
    freqs = [np.sort(rng.uniform(0.08, 0.25, size=rng.integers(3, 5)))]  # syllabic rates
    for _ in range(1, dim):
        freqs.append(np.sort(rng.uniform(0.01, 0.06, size=rng.integers(2, 5))))
    spec = DomainSpec(maps, offsets, freqs, noise)
    spec.validate()
    return spec


def content_signal(spec: DomainSpec, length: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(length)
    c = np.empty((length, len(spec.freqs)))
    for j, fj in enumerate(spec.freqs):
        amps = rng.uniform(*spec.amp_range, size=fj.size)
        phases = rng.uniform(0, 2 * np.pi, size=fj.size)
        c[:, j] = (amps * np.sin(2 * np.pi * np.outer(t, fj) + phases)).sum(axis=1)
    return c


def render_clip(spec: DomainSpec, content: np.ndarray, label: int,
                rng: np.random.Generator) -> np.ndarray:
    eps = content @ spec.maps[label].T + spec.offsets[label]
    if spec.noise:
        eps = eps + rng.normal(0, spec.noise, size=eps.shape)
    return eps


def clip_rng(seed: int, clip_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, clip_index])


def _residual_projectors(spec: DomainSpec, length: int) -> list:
    """Per channel, the projector onto the complement of its sinusoid span."""
    t = np.arange(length)
    out = []
    for fj in spec.freqs:
        arg = 2 * np.pi * np.outer(t, fj)
        basis = np.hstack([np.sin(arg), np.cos(arg)])
        out.append(np.eye(length) - basis @ np.linalg.pinv(basis))
    return out


def oracle_residuals(track: np.ndarray, spec: DomainSpec) -> np.ndarray:
    """Least-squares misfit of the content model after undoing each domain's map."""
    track = np.asarray(track, dtype=np.float64)
    projectors = _residual_projectors(spec, track.shape[0])
    res = np.empty(spec.n_labels)
    for y in range(spec.n_labels):
        c = np.linalg.solve(spec.maps[y], (track - spec.offsets[y]).T).T
        res[y] = sum(float(np.sum((P @ c[:, j]) ** 2)) for j, P in enumerate(projectors))
    return res


def oracle_classify(track: np.ndarray, spec: DomainSpec) -> int:
    """Label whose inverse map best explains the track; ties go to the lowest index."""
    return int(np.argmin(oracle_residuals(track, spec)))


# ---------------------------------------------------------------- manifests


@dataclass
class ClipEntry:
    path: str
    label: int
    length: int


@dataclass
class Manifest:
    n_window: int
    seed: int
    clips: list
    norm_mean: np.ndarray
    norm_std: np.ndarray
    root: Path = Path(".")
    version: int = MANIFEST_VERSION

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "n_window": self.n_window,
            "seed": self.seed,
            "clips": [{"path": c.path, "label": c.label, "length": c.length} for c in self.clips],
            "norm": {"mean": [float(v) for v in self.norm_mean],
                     "std": [float(v) for v in self.norm_std]},
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    def clip_path(self, clip: ClipEntry) -> Path:
        p = Path(clip.path)
        return p if p.is_absolute() else self.root / p

    def load_tracks(self) -> list:
        return [read_track(self.clip_path(c)) for c in self.clips]

    def labels(self) -> np.ndarray:
        return np.array([c.label for c in self.clips], dtype=np.int64)


def read_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        clips = [ClipEntry(str(c["path"]), int(c["label"]), int(c["length"]))
                 for c in doc["clips"]]
        m = Manifest(
            n_window=int(doc["n_window"]),
            seed=int(doc["seed"]),
            clips=clips,
            norm_mean=np.array(doc["norm"]["mean"], dtype=np.float64),
            norm_std=np.array(doc["norm"]["std"], dtype=np.float64),
            root=path.parent,
            version=int(doc.get("version", MANIFEST_VERSION)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed manifest ({exc})") from None
    validate_manifest(m)
    return m


def validate_manifest(m: Manifest) -> None:
    if m.norm_mean.shape != (EXPR_DIM,) or m.norm_std.shape != (EXPR_DIM,):
        raise ValidationError(f"normalization statistics must have {EXPR_DIM} entries")
    if np.any(m.norm_std <= 0):
        raise ValidationError("normalization std must be positive")
    for c in m.clips:
        if not 0 <= c.label < N_LABELS:
            raise ValidationError(f"{c.path}: label {c.label} outside [0, {N_LABELS - 1}]")
        if not m.clip_path(c).exists():
            raise ValidationError(f"{c.path}: file not found")
    if len({c.label for c in m.clips}) < 2:
        raise ValidationError("dataset must span at least two emotion domains")


def norm_stats(tracks) -> tuple:
    frames = np.concatenate(tracks, axis=0)
    mean = frames.mean(axis=0)
    std = np.maximum(frames.std(axis=0), 1e-6)
    return mean, std


def generate_dataset(out_dir, spec: DomainSpec, clips_per_domain: int = 40, length: int = 100,
                     seed: int = 0, n_window: int = 10) -> Manifest:
    """Write ``clips_per_domain`` clips per label plus ``manifest.json`` into ``out_dir``."""
    spec.validate()
    if length < n_window:
        raise ValidationError(f"clip length {length} is shorter than window {n_window}")
    if clips_per_domain < 1:
        raise ValidationError("clips_per_domain must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "tracks").mkdir(parents=True, exist_ok=True)
    tracks, entries = synthesize_clips(spec, clips_per_domain, length, seed)
    for k, (track, label) in enumerate(zip(tracks, entries)):
        rel = f"tracks/clip{k:04d}_{EMOTIONS[label]}.csv"
        write_track(out_dir / rel, track)
        entries[k] = ClipEntry(rel, label, length)
    # statistics of the values as stored on disk
    mean, std = norm_stats([read_track(out_dir / e.path) for e in entries])
    manifest = Manifest(n_window, seed, entries, mean, std, root=out_dir)
    manifest.write(out_dir / "manifest.json")
    return manifest


def synthesize_clips(spec: DomainSpec, clips_per_domain: int, length: int, seed: int,
                     first_clip: int = 0) -> tuple:
    """In-memory clips and labels; clip ``k`` draws from its own stream ``(seed, k)``."""
    tracks, labels = [], []
    k = first_clip
    for label in range(spec.n_labels):
        for _ in range(clips_per_domain):
            rng = clip_rng(seed, k)
            tracks.append(render_clip(spec, content_signal(spec, length, rng), label, rng))
            labels.append(label)
            k += 1
    return tracks, labels
