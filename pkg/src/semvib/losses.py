"""Loss terms: reconstruction, information bottleneck, and the cluster-level
contrastive semantic-consistency family, composed into the training total."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericError
from .model import SemVibModel, ViewEncoding, decode_view, encode_view, fuse_predict, semantic_labels

COSINE_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Weights and temperatures of the total objective."""

    lambda1: float = 1.0
    lambda2: float = 1.0
    beta: float = 1e-3
    tau: float = 1.0
    gamma_scale: float = 0.1

    def __post_init__(self):
        values = (self.lambda1, self.lambda2, self.beta, self.tau, self.gamma_scale)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("loss hyperparameters must be finite")
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if min(self.lambda1, self.lambda2, self.beta, self.gamma_scale) < 0:
            raise ValueError("lambda1, lambda2, beta, gamma_scale must be >= 0")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term values of one step; sem already contains reg."""

    rec: float
    ib: float
    sem: float
    reg: float
    total: float


class Batch(NamedTuple):
    """A minibatch: per-view feature slices plus their global row indices."""

    views: list[np.ndarray]
    indices: np.ndarray


class StepNoise(NamedTuple):
    """Frozen per-view noise draws for one step (for replay and FD checks)."""

    eps: list[np.ndarray]
    gamma: list[np.ndarray | None]


def draw_step_noise(
    model: SemVibModel, batch_size: int, config: LossConfig, rng: np.random.Generator
) -> StepNoise:
    eps = [rng.standard_normal((batch_size, model.d)) for _ in range(model.n_views)]
    if config.gamma_scale != 0.0:
        gamma = [rng.standard_normal((batch_size, model.d)) for _ in range(model.n_views)]
    else:
        gamma = [None] * model.n_views
    return StepNoise(eps=eps, gamma=gamma)


def _zero_noise(model: SemVibModel, batch_size: int) -> StepNoise:
    zeros = [np.zeros((batch_size, model.d)) for _ in range(model.n_views)]
    return StepNoise(eps=zeros, gamma=[z for z in zeros])


def reconstruction_loss(x_views, xhat_views) -> Tensor:
    """Sum over views of the per-sample mean squared reconstruction norm."""
    if len(x_views) != len(xhat_views):
        raise ValueError("need one reconstruction per view")
    total = None
    for x, xhat in zip(x_views, xhat_views):
        x, xhat = ad.as_tensor(x), ad.as_tensor(xhat)
        if x.data.shape != xhat.data.shape:
            raise ValueError(f"shape mismatch {x.data.shape} vs {xhat.data.shape}")
        n = max(x.data.shape[0], 1)
        term = ad.mul(ad.tsum(ad.square(ad.sub(x, xhat))), 1.0 / n)
        total = term if total is None else ad.add(total, term)
    return total


def gaussian_kl(mu, sigma) -> Tensor:
    """Mean over rows of KL(N(mu, diag sigma^2) || N(0, I))."""
    mu, sigma = ad.as_tensor(mu), ad.as_tensor(sigma)
    if np.any(sigma.data <= 0):
        raise ValueError("sigma must be positive")
    n = max(mu.data.shape[0], 1)
    inner = ad.sub(
        ad.add(ad.square(mu), ad.square(sigma)),
        ad.add(1.0, ad.mul(ad.log(sigma), 2.0)),
    )
    return ad.mul(ad.tsum(inner), 0.5 / n)


def cosine_similarity(a, b) -> float:
    """Cosine of two vectors with norms floored at 1e-12."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < COSINE_NORM_FLOOR or nb < COSINE_NORM_FLOOR:
        warnings.warn("cosine_similarity: zero-norm vector floored", RuntimeWarning)
    return float(a @ b / (max(na, COSINE_NORM_FLOOR) * max(nb, COSINE_NORM_FLOOR)))


def _cosine_columns(qa: Tensor, qb: Tensor) -> Tensor:
    """Matrix of cosine similarities between columns of qa and qb."""
    na = ad.clamp_min(ad.sqrt(ad.tsum(ad.square(qa), axis=0, keepdims=True)), COSINE_NORM_FLOOR)
    nb = ad.clamp_min(ad.sqrt(ad.tsum(ad.square(qb), axis=0, keepdims=True)), COSINE_NORM_FLOOR)
    return ad.matmul(ad.transpose(ad.div(qa, na)), ad.div(qb, nb))


def _diag(square_t: Tensor) -> Tensor:
    k = square_t.data.shape[0]
    return ad.tsum(ad.mul(square_t, np.eye(k)), axis=1)


def _check_positive_denominator(denom: Tensor, term: str) -> None:
    if np.any(denom.data <= 0) or not np.isfinite(denom.data).all():
        raise NumericError(
            f"{term}: non-positive contrastive denominator "
            f"(min={denom.data.min():.3e}); assignment columns became "
            "near-orthogonal with too few clusters for the written formula",
            term=term,
        )


def pair_contrastive(q_m, q_n, tau: float) -> Tensor:
    """Cluster-column contrast between two views' assignment matrices.

    Anchored at each column of ``q_m``; the candidate set spans both views'
    columns and the anchor's self-similarity term is subtracted.
    """
    q_m, q_n = ad.as_tensor(q_m), ad.as_tensor(q_n)
    k = q_m.data.shape[1]
    if k < 2:
        raise ValueError(f"need K >= 2 clusters, got {k}")
    if q_m.data.shape != q_n.data.shape:
        raise ValueError("assignment matrices must share shape")
    e_mm = ad.exp(ad.mul(_cosine_columns(q_m, q_m), 1.0 / tau))
    e_mn = ad.exp(ad.mul(_cosine_columns(q_m, q_n), 1.0 / tau))
    numer = _diag(e_mn)
    denom = ad.sub(
        ad.add(ad.tsum(e_mm, axis=1), ad.tsum(e_mn, axis=1)),
        math.exp(1.0 / tau),
    )
    _check_positive_denominator(denom, "pair_contrastive")
    return ad.tmean(ad.sub(ad.log(denom), ad.log(numer)))


def consistent_contrastive(q_m, q_c, tau: float) -> Tensor:
    """Contrast between a view's assignment columns and the consistent ones.

    Implemented exactly as written: the denominator runs over the single
    view's columns anchored at the consistent column, minus e^(1/tau), and is
    not guaranteed to dominate the numerator (the value may be negative).
    """
    q_m, q_c = ad.as_tensor(q_m), ad.as_tensor(q_c)
    k = q_m.data.shape[1]
    if k < 2:
        raise ValueError(f"need K >= 2 clusters, got {k}")
    if q_m.data.shape != q_c.data.shape:
        raise ValueError("assignment matrices must share shape")
    e_cm = ad.exp(ad.mul(_cosine_columns(q_c, q_m), 1.0 / tau))
    numer = _diag(e_cm)  # d is symmetric, so diag(c,m) == diag(m,c)
    denom = ad.sub(ad.tsum(e_cm, axis=1), math.exp(1.0 / tau))
    _check_positive_denominator(denom, "consistent_contrastive")
    return ad.tmean(ad.sub(ad.log(denom), ad.log(numer)))


def entropy_regularizer(q_views) -> Tensor:
    """Negative entropy of per-view cluster marginals (0 log 0 := 0).

    Ranges over [-M log K, 0]; minimizing it spreads mass across clusters.
    """
    total = None
    for q in q_views:
        q = ad.as_tensor(q)
        marginal = ad.tmean(q, axis=0)
        term = ad.tsum(ad.xlogx(marginal))
        total = term if total is None else ad.add(total, term)
    return total


def semantic_loss(q_views, q_c, tau: float) -> Tensor:
    """Half-summed pairwise and consistent contrasts plus the regularizer."""
    contrast = None
    for m, q_m in enumerate(q_views):
        for n, q_n in enumerate(q_views):
            if n == m:
                continue
            term = pair_contrastive(q_m, q_n, tau)
            contrast = term if contrast is None else ad.add(contrast, term)
        term = consistent_contrastive(q_m, q_c, tau)
        contrast = term if contrast is None else ad.add(contrast, term)
    return ad.add(ad.mul(contrast, 0.5), entropy_regularizer(q_views))


def _encode_batch(model: SemVibModel, batch: Batch, noise: StepNoise) -> list[ViewEncoding]:
    return [
        encode_view(model, m, batch.views[m], eps=noise.eps[m])
        for m in range(model.n_views)
    ]


def ib_loss(
    model: SemVibModel,
    batch: Batch,
    config: LossConfig,
    rng: np.random.Generator | None = None,
    noise: StepNoise | None = None,
    encodings: list[ViewEncoding] | None = None,
) -> Tensor:
    """Fused-prediction error against the consistent rows plus beta-weighted KL.

    Per view: mean_i 1/2 ||Z_i - f_con(z_i + gamma)||^2 + beta * KL(mu, sigma).
    """
    if noise is None:
        noise = (
            draw_step_noise(model, len(batch.indices), config, rng)
            if rng is not None
            else _zero_noise(model, len(batch.indices))
        )
    if encodings is None:
        encodings = _encode_batch(model, batch, noise)
    z_rows = ad.gather_rows(model.Z, batch.indices)
    n = max(len(batch.indices), 1)
    total = None
    for m, enc in enumerate(encodings):
        zhat = fuse_predict(model, enc.z, config.gamma_scale, gamma=noise.gamma[m])
        fused = ad.mul(ad.tsum(ad.square(ad.sub(z_rows, zhat))), 0.5 / n)
        term = ad.add(fused, ad.mul(gaussian_kl(enc.mu, enc.sigma), config.beta))
        total = term if total is None else ad.add(total, term)
    return total


def build_total_loss(
    model: SemVibModel,
    batch: Batch,
    config: LossConfig,
    rng: np.random.Generator | None = None,
    noise: StepNoise | None = None,
) -> tuple[Tensor, LossBreakdown]:
    """One forward pass shared by all terms; returns the graph root and values.

    With neither ``rng`` nor ``noise`` the pass is deterministic (all noise
    zero). Raises :class:`NumericError` naming the first non-finite term.
    """
    if noise is None:
        noise = (
            draw_step_noise(model, len(batch.indices), config, rng)
            if rng is not None
            else _zero_noise(model, len(batch.indices))
        )
    encodings = _encode_batch(model, batch, noise)
    xhats = [decode_view(model, m, encodings[m].z) for m in range(model.n_views)]
    rec_t = reconstruction_loss(batch.views, xhats)
    ib_t = ib_loss(model, batch, config, noise=noise, encodings=encodings)
    q_views = [semantic_labels(model, enc.z, m) for m, enc in enumerate(encodings)]
    q_c = semantic_labels(model, ad.gather_rows(model.Z, batch.indices), "consistent")
    reg_t = entropy_regularizer(q_views)
    contrast = None
    for m, q_m in enumerate(q_views):
        for n, q_n in enumerate(q_views):
            if n == m:
                continue
            term = pair_contrastive(q_m, q_n, config.tau)
            contrast = term if contrast is None else ad.add(contrast, term)
        term = consistent_contrastive(q_m, q_c, config.tau)
        contrast = term if contrast is None else ad.add(contrast, term)
    sem_t = ad.add(ad.mul(contrast, 0.5), reg_t)
    total_t = ad.add(rec_t, ad.add(ad.mul(ib_t, config.lambda1), ad.mul(sem_t, config.lambda2)))
    for name, t in (("rec", rec_t), ("ib", ib_t), ("sem", sem_t), ("total", total_t)):
        if not np.isfinite(t.data):
            raise NumericError(f"non-finite loss term {name!r}", term=name)
    breakdown = LossBreakdown(
        rec=rec_t.item(),
        ib=ib_t.item(),
        sem=sem_t.item(),
        reg=reg_t.item(),
        total=total_t.item(),
    )
    return total_t, breakdown


def total_loss(
    model: SemVibModel,
    batch: Batch,
    config: LossConfig,
    rng: np.random.Generator | None = None,
    noise: StepNoise | None = None,
) -> LossBreakdown:
    """Per-term values of the full objective for one batch."""
    return build_total_loss(model, batch, config, rng=rng, noise=noise)[1]
