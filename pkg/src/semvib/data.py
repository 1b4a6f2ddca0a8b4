"""Multi-view datasets: synthetic generation, file loading, normalization."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

_FLOAT_FMT = "%.17g"  # round-trips float64 through text


@dataclass(frozen=True)
class MultiViewDataset:
    """M feature matrices over the same N samples, optionally labeled.

    Views are immutable after construction; share freely across threads.
    """

    views: list[np.ndarray]
    labels: np.ndarray | None = None

    def __post_init__(self):
        if len(self.views) < 2:
            raise DataError(f"need at least 2 views, got {len(self.views)}")
        views = [np.ascontiguousarray(v, dtype=np.float64) for v in self.views]
        n = views[0].shape[0]
        if n < 1:
            raise DataError("dataset must contain at least one sample")
        for m, v in enumerate(views):
            if v.ndim != 2:
                raise DataError(f"view {m + 1} is not a matrix")
            if v.shape[0] != n:
                raise DataError(
                    f"row count mismatch: view 1 has {n} rows, view {m + 1} has {v.shape[0]}"
                )
            if not np.isfinite(v).all():
                raise DataError(f"view {m + 1} contains non-finite values")
            v.setflags(write=False)
        object.__setattr__(self, "views", views)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (n,):
                raise DataError(f"labels must have length {n}, got {labels.shape}")
            k = labels.max() + 1 if labels.size else 0
            present = np.unique(labels)
            if labels.min() < 0 or not np.array_equal(present, np.arange(k)):
                raise DataError("labels must cover 0..K-1 with every class present")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list[int]:
        return [v.shape[1] for v in self.views]

    @property
    def n_clusters(self) -> int | None:
        return None if self.labels is None else int(self.labels.max()) + 1


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a desk-scale multi-view Gaussian mixture.

    Latent points come from K unit-variance isotropic Gaussians whose means
    are pairwise at least ``cluster_separation`` apart. Each view is a random
    linear projection of the latents, rescaled to unit RMS column spread, plus
    white noise, so ``noise_sigmas`` read as noise-to-signal ratios. With
    ``identity_projection`` a view whose width equals ``latent_dim`` is the
    raw latent matrix (no rescaling).
    """

    n_samples: int = 300
    n_clusters: int = 3
    latent_dim: int = 4
    view_dims: tuple[int, ...] = (12, 10)
    cluster_separation: float = 10.0
    noise_sigmas: tuple[float, ...] = (0.1, 0.5)
    seed: int = 0
    identity_projection: bool = False

    def __post_init__(self):
        if self.n_clusters < 1 or self.n_clusters > self.n_samples:
            raise DataError(
                f"need 1 <= K <= N, got K={self.n_clusters}, N={self.n_samples}"
            )
        if self.latent_dim < 1:
            raise DataError("latent_dim must be >= 1")
        if len(self.view_dims) != len(self.noise_sigmas):
            raise DataError("view_dims and noise_sigmas must have equal length")
        if any(d < 1 for d in self.view_dims):
            raise DataError("view dims must be >= 1")
        if any(s < 0 for s in self.noise_sigmas):
            raise DataError("noise sigmas must be >= 0")
        if self.cluster_separation <= 0:
            raise DataError("cluster_separation must be > 0")
        if self.identity_projection and any(d != self.latent_dim for d in self.view_dims):
            raise DataError("identity_projection requires view_dims == latent_dim")


def _cluster_means(k: int, dim: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    """K means, pairwise distance >= separation (exact for a simplex fit)."""
    if k == 1:
        return np.zeros((1, dim))
    if k <= dim + 1:
        # regular simplex with unit edge, centered, embedded in dim coords
        eye = np.eye(k)
        centered = eye - eye.mean(axis=0)
        basis = np.linalg.svd(centered, full_matrices=False)[2][: k - 1]
        verts = centered @ basis.T  # k x (k-1), edge length sqrt(2)
        verts /= np.sqrt(2.0)
        means = np.zeros((k, dim))
        means[:, : k - 1] = verts * separation
        return means
    # too many clusters for a simplex: random directions scaled to the
    # minimum pairwise distance
    means = rng.standard_normal((k, dim))
    dists = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=-1)
    min_dist = dists[np.triu_indices(k, 1)].min()
    return means * (separation / min_dist)


def generate_synthetic(spec: SyntheticSpec) -> MultiViewDataset:
    """Deterministic multi-view mixture per ``spec`` (pure function of it)."""
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_samples, spec.n_clusters
    means = _cluster_means(k, spec.latent_dim, spec.cluster_separation, rng)
    # balanced cluster sizes, shuffled sample order
    labels = np.repeat(np.arange(k), n // k)
    labels = np.concatenate([labels, np.arange(n - labels.size)])
    rng.shuffle(labels)
    latent = means[labels] + rng.standard_normal((n, spec.latent_dim))
    views = []
    for d, sigma in zip(spec.view_dims, spec.noise_sigmas):
        if spec.identity_projection:
            clean = latent.copy()
        else:
            proj = rng.standard_normal((spec.latent_dim, d)) / np.sqrt(spec.latent_dim)
            clean = latent @ proj
            spread = np.sqrt(clean.var(axis=0).mean())
            if spread > 0:
                clean /= spread
        noise = sigma * rng.standard_normal((n, d)) if sigma > 0 else 0.0
        views.append(clean + noise)
    return MultiViewDataset(views=views, labels=labels)


def _read_matrix(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(
                    f"{path}:{lineno}: expected {width} columns, found {len(cells)}"
                )
            try:
                row = [float(c) for c in cells]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric cell") from None
            if not all(np.isfinite(row)):
                raise DataError(f"{path}:{lineno}: non-numeric cell (non-finite value)")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: empty matrix file")
    return np.array(rows, dtype=np.float64)


def _read_labels(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    values = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(int(line))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer label") from None
    if not values:
        raise DataError(f"{path}: empty labels file")
    raw = np.array(values, dtype=np.int64)
    # remap arbitrary label alphabets to 0..K-1
    _, remapped = np.unique(raw, return_inverse=True)
    return remapped.astype(np.int64)


def parse_keyvalue(path) -> dict[str, str]:
    """Parse a plain-text ``key = value`` file ('#' starts a comment)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def load_dataset(manifest_path) -> MultiViewDataset:
    """Load views (and optional labels) listed in a manifest file.

    Manifest keys: ``view.1 = path``, ``view.2 = path``, ..., optionally
    ``labels = path``. Relative paths resolve against the manifest location.
    """
    manifest_path = Path(manifest_path)
    entries = parse_keyvalue(manifest_path)
    base = manifest_path.parent
    view_keys = sorted(
        (k for k in entries if re.fullmatch(r"view\.\d+", k)),
        key=lambda k: int(k.split(".")[1]),
    )
    if not view_keys:
        raise DataError(f"{manifest_path}: no view.N entries")
    expected = [f"view.{i + 1}" for i in range(len(view_keys))]
    if view_keys != expected:
        raise DataError(f"{manifest_path}: view indices must be 1..M, got {view_keys}")
    views = [_read_matrix(base / entries[k]) for k in view_keys]
    labels = _read_labels(base / entries["labels"]) if "labels" in entries else None
    return MultiViewDataset(views=views, labels=labels)


def save_dataset(ds: MultiViewDataset, out_dir, prefix: str = "view") -> Path:
    """Write per-view matrix files, optional labels, and a manifest.

    Returns the manifest path. Files round-trip through :func:`load_dataset`
    at full float64 precision.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for m, view in enumerate(ds.views, start=1):
        name = f"{prefix}_{m}.csv"
        np.savetxt(out_dir / name, view, fmt=_FLOAT_FMT, delimiter=",")
        lines.append(f"view.{m} = {name}")
    if ds.labels is not None:
        np.savetxt(out_dir / "labels.txt", ds.labels, fmt="%d")
        lines.append("labels = labels.txt")
    manifest = out_dir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def normalize_views(ds: MultiViewDataset, mode: str = "minmax") -> MultiViewDataset:
    """Per-column normalization of every view; labels pass through.

    ``minmax`` maps each column to [0, 1]; ``zscore`` to mean 0 / unit
    variance; ``none`` is the identity. Constant columns map to 0.
    """
    if mode == "none":
        return ds
    views = []
    for view in ds.views:
        if mode == "minmax":
            lo = view.min(axis=0)
            span = view.max(axis=0) - lo
            safe = np.where(span > 0, span, 1.0)
            out = np.where(span > 0, (view - lo) / safe, 0.0)
        elif mode == "zscore":
            mean = view.mean(axis=0)
            std = view.std(axis=0)
            safe = np.where(std > 0, std, 1.0)
            out = np.where(std > 0, (view - mean) / safe, 0.0)
        else:
            raise DataError(f"unknown normalization mode {mode!r}")
        views.append(out)
    return MultiViewDataset(views=views, labels=ds.labels)


def minibatch_indices(
    n: int, batch_size: int, seed: int, epoch: int = 0
) -> list[np.ndarray]:
    """Partition a seeded permutation of [0, n) into consecutive batches.

    The permutation is a pure function of (seed, epoch); the last batch may
    be smaller.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if batch_size > n:
        batch_size = n
    perm = np.random.default_rng((seed, epoch)).permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]
