"""Per-view variational encoders, decoders, semantic heads, fusion network,
and the trainable consistent representation matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Mlp

LOGVAR_CLAMP = 10.0  # keeps sigma within [e^-5, e^5]


@dataclass
class ViewEncoder:
    """Mean and log-variance networks of one view's Gaussian encoder."""

    mu_net: Mlp
    logvar_net: Mlp


@dataclass
class ViewEncoding:
    """One encoding pass: z = mu + sigma * eps holds exactly for stored eps."""

    mu: Tensor
    sigma: Tensor
    z: Tensor
    eps: np.ndarray


class SemVibModel:
    """All trainable state: per-view nets, fusion net, consistent matrix."""

    def __init__(
        self,
        encoders: list[ViewEncoder],
        decoders: list[Mlp],
        semantic_heads: list[Mlp],
        consistent_head: Mlp,
        fusion: Mlp,
        Z: Tensor,
        arch: dict,
    ):
        self.encoders = encoders
        self.decoders = decoders
        self.semantic_heads = semantic_heads
        self.consistent_head = consistent_head
        self.fusion = fusion
        self.Z = Z
        self.arch = arch

    @property
    def n_views(self) -> int:
        return len(self.encoders)

    @property
    def n_samples(self) -> int:
        return self.Z.data.shape[0]

    @property
    def d(self) -> int:
        return self.arch["d"]

    @property
    def d_c(self) -> int:
        return self.arch["d_c"]

    @property
    def k(self) -> int:
        return self.arch["k"]

    def named_parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for m in range(self.n_views):
            params.update(self.encoders[m].mu_net.named_parameters(f"view{m}.mu."))
            params.update(self.encoders[m].logvar_net.named_parameters(f"view{m}.logvar."))
            params.update(self.decoders[m].named_parameters(f"view{m}.dec."))
            params.update(self.semantic_heads[m].named_parameters(f"view{m}.sem."))
        params.update(self.consistent_head.named_parameters("consistent."))
        params.update(self.fusion.named_parameters("fusion."))
        params["Z"] = self.Z
        return params

    def autoencoder_parameters(self) -> dict[str, Tensor]:
        """Encoder + decoder tensors only (the pretraining subset)."""
        params: dict[str, Tensor] = {}
        for m in range(self.n_views):
            params.update(self.encoders[m].mu_net.named_parameters(f"view{m}.mu."))
            params.update(self.encoders[m].logvar_net.named_parameters(f"view{m}.logvar."))
            params.update(self.decoders[m].named_parameters(f"view{m}.dec."))
        return params


def init_model(
    view_dims: list[int],
    n_samples: int,
    k: int,
    d: int = 64,
    d_c: int = 64,
    enc_hidden: tuple[int, ...] = (256, 256),
    dec_hidden: tuple[int, ...] = (256, 256),
    head_hidden: tuple[int, ...] = (64,),
    fusion_hidden: tuple[int, ...] = (64,),
    seed: int = 0,
) -> SemVibModel:
    """Build a model with seeded Glorot nets and Z ~ 0.01 * N(0, I)."""
    if min(d, d_c, k) < 1:
        raise ValueError("d, d_c, and k must be >= 1")
    rng = np.random.default_rng(seed)
    encoders, decoders, semantic_heads = [], [], []
    for dim in view_dims:
        encoders.append(
            ViewEncoder(
                mu_net=Mlp.build([dim, *enc_hidden, d], rng),
                logvar_net=Mlp.build([dim, *enc_hidden, d], rng),
            )
        )
        decoders.append(Mlp.build([d, *dec_hidden, dim], rng))
        semantic_heads.append(Mlp.build([d, *head_hidden, k], rng, final_activation="softmax"))
    consistent_head = Mlp.build([d_c, *head_hidden, k], rng, final_activation="softmax")
    fusion = Mlp.build([d, *fusion_hidden, d_c], rng)
    Z = Tensor(0.01 * rng.standard_normal((n_samples, d_c)), requires_grad=True)
    arch = {
        "view_dims": list(view_dims),
        "n_samples": n_samples,
        "k": k,
        "d": d,
        "d_c": d_c,
        "enc_hidden": list(enc_hidden),
        "dec_hidden": list(dec_hidden),
        "head_hidden": list(head_hidden),
        "fusion_hidden": list(fusion_hidden),
    }
    return SemVibModel(encoders, decoders, semantic_heads, consistent_head, fusion, Z, arch)


def model_from_arch(arch: dict) -> SemVibModel:
    """Rebuild an architecture-compatible model (weights arbitrary)."""
    return init_model(
        view_dims=arch["view_dims"],
        n_samples=arch["n_samples"],
        k=arch["k"],
        d=arch["d"],
        d_c=arch["d_c"],
        enc_hidden=tuple(arch["enc_hidden"]),
        dec_hidden=tuple(arch["dec_hidden"]),
        head_hidden=tuple(arch["head_hidden"]),
        fusion_hidden=tuple(arch["fusion_hidden"]),
        seed=0,
    )


def encode_view(
    model: SemVibModel,
    m: int,
    x_batch,
    rng: np.random.Generator | None = None,
    eps: np.ndarray | None = None,
) -> ViewEncoding:
    """Gaussian encoding of view ``m``: z = mu + sigma * eps.

    ``eps`` overrides the draw; otherwise it comes from ``rng``, and with
    neither the encoding is deterministic (eps = 0, so z = mu).
    """
    enc = model.encoders[m]
    mu = enc.mu_net(x_batch)
    logvar = ad.clip(enc.logvar_net(x_batch), -LOGVAR_CLAMP, LOGVAR_CLAMP)
    sigma = ad.exp(ad.mul(logvar, 0.5))
    if eps is None:
        if rng is not None:
            eps = rng.standard_normal(mu.data.shape)
        else:
            eps = np.zeros(mu.data.shape)
    z = ad.add(mu, ad.mul(sigma, eps))
    return ViewEncoding(mu=mu, sigma=sigma, z=z, eps=eps)


def decode_view(model: SemVibModel, m: int, z) -> Tensor:
    """Reconstruct view ``m`` features from its latent code."""
    return model.decoders[m](z)


def semantic_labels(model: SemVibModel, z, head: int | str) -> Tensor:
    """Row-stochastic soft cluster assignments.

    ``head`` is a view index for within-view codes or ``"consistent"`` for
    rows of the consistent matrix.
    """
    if head == "consistent":
        return model.consistent_head(z)
    return model.semantic_heads[head](z)


def fuse_predict(
    model: SemVibModel,
    z,
    gamma_scale: float = 0.0,
    rng: np.random.Generator | None = None,
    gamma: np.ndarray | None = None,
) -> Tensor:
    """Predict consistent-space rows from a view code.

    A single Gaussian perturbation enters before the fusion net:
    zhat = f_con(z + gamma_scale * gamma); gamma_scale = 0 is noiseless.
    """
    z = ad.as_tensor(z)
    if gamma_scale != 0.0:
        if gamma is None:
            if rng is None:
                raise ValueError("gamma_scale != 0 requires rng or a fixed gamma")
            gamma = rng.standard_normal(z.data.shape)
        z = ad.add(z, ad.mul(ad.as_tensor(gamma), gamma_scale))
    return model.fusion(z)


def view_embeddings(model: SemVibModel, ds_views: list[np.ndarray], m: int) -> np.ndarray:
    """Evaluation-time embedding of view ``m``: the posterior means."""
    return encode_view(model, m, ds_views[m]).mu.data
