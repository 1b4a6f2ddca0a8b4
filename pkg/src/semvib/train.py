"""Two-phase optimization: reconstruction pretraining, then joint training of
all networks and the consistent matrix."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from .data import MultiViewDataset, minibatch_indices
from .errors import CheckpointError, NumericError
from .evaluation import ClusterReport, evaluate_representation
from .losses import Batch, LossBreakdown, LossConfig, build_total_loss, decode_view, reconstruction_loss
from .model import SemVibModel, encode_view, model_from_arch
from .nn import Adam


@dataclass
class TrainConfig:
    pretrain_epochs: int = 200
    train_epochs: int = 300
    batch_size: int = 256
    pretrain_lr: float = 1e-3
    lr: float = 1e-3
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    eval_every: int = 0  # 0 disables in-training clustering reports
    eval_runs: int = 10
    convergence_window: int = 10
    convergence_tol: float = 1e-5
    verbose: bool = False
    log_path: str | None = None

    def __post_init__(self):
        if self.pretrain_epochs < 0 or self.train_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainHistory:
    """One loss breakdown per completed epoch, plus periodic cluster reports."""

    epochs: list[LossBreakdown] = field(default_factory=list)
    evals: list[tuple[int, ClusterReport]] = field(default_factory=list)


def _derived_seeds(seed: int) -> dict[str, int]:
    state = np.random.SeedSequence(seed).generate_state(4)
    return {
        "pretrain_perm": int(state[0]),
        "train_perm": int(state[1]),
        "noise": int(state[2]),
        "eval": int(state[3]),
    }


def _log_line(config: TrainConfig, log_file, text: str) -> None:
    if config.verbose:
        print(text, file=sys.stdout)
    if log_file is not None:
        log_file.write(text + "\n")


def pretrain(model: SemVibModel, ds: MultiViewDataset, config: TrainConfig) -> SemVibModel:
    """Minimize the reconstruction loss over encoders and decoders only.

    Encoding is deterministic here (posterior means); semantic heads, the
    fusion net, and the consistent matrix are untouched.
    """
    if config.pretrain_epochs == 0:
        return model
    seeds = _derived_seeds(config.seed)
    opt = Adam(model.autoencoder_parameters(), lr=config.pretrain_lr)
    log_file = open(config.log_path, "a") if config.log_path else None
    try:
        for epoch in range(config.pretrain_epochs):
            epoch_loss = 0.0
            for idx in minibatch_indices(
                ds.n_samples, config.batch_size, seeds["pretrain_perm"], epoch
            ):
                xs = [v[idx] for v in ds.views]
                zs = [encode_view(model, m, xs[m]).z for m in range(ds.n_views)]
                xhats = [decode_view(model, m, zs[m]) for m in range(ds.n_views)]
                loss = reconstruction_loss(xs, xhats)
                if not np.isfinite(loss.data):
                    raise NumericError(
                        f"non-finite reconstruction loss at pretrain epoch {epoch}",
                        term="rec",
                    )
                opt.zero_grad()
                loss.backward()
                opt.step()
                epoch_loss += loss.item() * len(idx)
            _log_line(config, log_file, f"pretrain,{epoch},{epoch_loss / ds.n_samples!r}")
    finally:
        if log_file is not None:
            log_file.close()
    return model


def train(
    model: SemVibModel,
    ds: MultiViewDataset,
    config: TrainConfig,
    resume: tuple[dict, dict, int] | None = None,
) -> tuple[SemVibModel, TrainHistory]:
    """Joint minibatch optimization of the full objective.

    Per batch: encode every view with fresh reparameterization noise, apply
    one Adam step to all networks and the touched rows of the consistent
    matrix. Stops at ``train_epochs`` or when the epoch-mean total loss
    changes by less than ``convergence_tol`` (relative) over the window.

    ``resume`` is (optimizer_state, rng_state, start_epoch) from a loaded
    checkpoint; with the same seeds the resumed run reproduces the unbroken
    one bit-exactly.
    """
    seeds = _derived_seeds(config.seed)
    opt = Adam(model.named_parameters(), lr=config.lr)
    rng = np.random.default_rng(seeds["noise"])
    start_epoch = 0
    if resume is not None:
        opt_state, rng_state, start_epoch = resume
        if opt_state is not None:
            opt.load_state_dict(opt_state)
        if rng_state is not None:
            rng.bit_generator.state = rng_state
    history = TrainHistory()
    log_file = open(config.log_path, "a") if config.log_path else None
    epoch_totals: list[float] = []
    try:
        for epoch in range(start_epoch, config.train_epochs):
            sums = {"rec": 0.0, "ib": 0.0, "sem": 0.0, "reg": 0.0, "total": 0.0}
            covered = 0
            for idx in minibatch_indices(
                ds.n_samples, config.batch_size, seeds["train_perm"], epoch
            ):
                batch = Batch(views=[v[idx] for v in ds.views], indices=idx)
                try:
                    total_t, breakdown = build_total_loss(model, batch, config.loss, rng=rng)
                except NumericError as e:
                    raise NumericError(
                        f"epoch {epoch}: {e} "
                        f"(last epoch breakdown: {history.epochs[-1] if history.epochs else None})",
                        term=e.term,
                    ) from e
                opt.zero_grad()
                total_t.backward()
                opt.step(row_masks={"Z": idx})
                w = len(idx)
                covered += w
                for key in sums:
                    sums[key] += getattr(breakdown, key) * w
            assert covered == ds.n_samples, "epoch batches must partition the dataset"
            epoch_bd = LossBreakdown(**{k: v / ds.n_samples for k, v in sums.items()})
            history.epochs.append(epoch_bd)
            epoch_totals.append(epoch_bd.total)
            line = (
                f"{epoch},{epoch_bd.rec!r},{epoch_bd.ib!r},{epoch_bd.sem!r},{epoch_bd.total!r}"
            )
            if (
                config.eval_every
                and ds.labels is not None
                and (epoch + 1) % config.eval_every == 0
            ):
                report = evaluate_representation(
                    model.Z.data,
                    ds.labels,
                    ds.n_clusters,
                    runs=config.eval_runs,
                    seed=seeds["eval"],
                )
                history.evals.append((epoch + 1, report))
                line += f",{report.acc!r},{report.nmi!r},{report.ari!r}"
            _log_line(config, log_file, line)
            w = config.convergence_window
            if w > 0 and len(epoch_totals) > w:
                ref = epoch_totals[-1 - w]
                if abs(epoch_totals[-1] - ref) / max(abs(ref), 1e-12) < config.convergence_tol:
                    break
        # final clustering report if the last epoch was not already evaluated
        final_epoch = start_epoch + len(history.epochs)
        if (
            config.eval_every
            and ds.labels is not None
            and history.epochs
            and (not history.evals or history.evals[-1][0] != final_epoch)
        ):
            report = evaluate_representation(
                model.Z.data,
                ds.labels,
                ds.n_clusters,
                runs=config.eval_runs,
                seed=seeds["eval"],
            )
            history.evals.append((final_epoch, report))
    finally:
        if log_file is not None:
            log_file.close()
    return model, history


def save_checkpoint(
    path,
    model: SemVibModel,
    optimizer: Adam | None = None,
    rng: np.random.Generator | None = None,
    epoch: int = 0,
) -> None:
    """Write model tensors (plus optional Adam moments and RNG state)."""
    tensors = {name: p.data for name, p in model.named_parameters().items()}
    meta = {"model": model.arch}
    step = 0
    if optimizer is not None:
        state = optimizer.state_dict()
        step = state["t"]
        meta["adam"] = {k: state[k] for k in ("lr", "beta1", "beta2", "eps")}
        for name, arr in state["m"].items():
            tensors[f"adam.m.{name}"] = arr
        for name, arr in state["v"].items():
            tensors[f"adam.v.{name}"] = arr
    rng_state = None
    if rng is not None:
        rng_state = rng.bit_generator.state
    ckpt.save_tensors(path, tensors, step=step, epoch=epoch, rng_state=rng_state, meta=meta)


def load_checkpoint(path) -> tuple[SemVibModel, dict | None, dict | None, int]:
    """Rebuild (model, optimizer_state, rng_state, epoch) from a checkpoint."""
    tensors, header = ckpt.load_tensors(path)
    meta = header.get("meta", {})
    if "model" not in meta:
        raise CheckpointError("checkpoint header lacks model architecture")
    model = model_from_arch(meta["model"])
    params = model.named_parameters()
    for name, p in params.items():
        if name not in tensors:
            raise CheckpointError(f"checkpoint missing tensor {name!r}")
        if tensors[name].shape != p.data.shape:
            raise CheckpointError(
                f"tensor {name!r} has shape {tensors[name].shape}, expected {p.data.shape}"
            )
        p.data = tensors[name]
    opt_state = None
    if "adam" in meta:
        opt_state = dict(meta["adam"])
        opt_state["t"] = header.get("step", 0)
        opt_state["m"] = {
            name: tensors[f"adam.m.{name}"] for name in params if f"adam.m.{name}" in tensors
        }
        opt_state["v"] = {
            name: tensors[f"adam.v.{name}"] for name in params if f"adam.v.{name}" in tensors
        }
    return model, opt_state, header.get("rng_state"), header.get("epoch", 0)
