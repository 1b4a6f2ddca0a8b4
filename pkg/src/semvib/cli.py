"""Experiment orchestration: config parsing, subcommands, output files.

Subcommands: ``generate``, ``train``, ``eval``, ``embed``. Configs are
plain-text ``key = value`` files with dotted sections; the resolved config
(defaults filled in) is echoed into the output directory so a run can be
reproduced from it. Exit codes: 0 success, 2 config error, 3 data error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    MultiViewDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    normalize_views,
    parse_keyvalue,
    save_dataset,
)
from .errors import CheckpointError, ConfigError, DataError, NumericError
from .evaluation import ablation_eval, evaluate_representation
from .losses import LossConfig
from .model import SemVibModel, init_model, view_embeddings
from .train import TrainConfig, load_checkpoint, pretrain, save_checkpoint, train

_FLOAT_FMT = "%.17g"

# key -> (type tag, default); None default means "required when its section is used"
_SCHEMA: dict[str, tuple[str, object]] = {
    "seed": ("int", 0),
    "dataset.manifest": ("str", None),
    "synthetic.n_samples": ("int", None),
    "synthetic.n_clusters": ("int", None),
    "synthetic.latent_dim": ("int", 4),
    "synthetic.view_dims": ("intlist", None),
    "synthetic.separation": ("float", 10.0),
    "synthetic.noise_sigmas": ("floatlist", None),
    "synthetic.seed": ("int", None),
    "synthetic.identity_projection": ("bool", False),
    "data.normalize": ("str", "minmax"),
    "model.d": ("int", 64),
    "model.d_c": ("int", 64),
    "model.k": ("int", None),
    "model.enc_hidden": ("intlist", [256, 256]),
    "model.dec_hidden": ("intlist", [256, 256]),
    "model.head_hidden": ("intlist", [64]),
    "model.fusion_hidden": ("intlist", [64]),
    "loss.lambda1": ("float", 1.0),
    "loss.lambda2": ("float", 1.0),
    "loss.beta": ("float", 1e-3),
    "loss.tau": ("float", 1.0),
    "loss.gamma_scale": ("float", 0.1),
    "train.pretrain_epochs": ("int", 200),
    "train.epochs": ("int", 300),
    "train.batch_size": ("int", 256),
    "train.pretrain_lr": ("float", 1e-3),
    "train.lr": ("float", 1e-3),
    "train.eval_every": ("int", 0),
    "train.convergence_window": ("int", 10),
    "train.convergence_tol": ("float", 1e-5),
    "eval.runs": ("int", 10),
    "eval.restarts": ("int", 10),
    "output.dir": ("str", "out"),
}

_SYNTH_REQUIRED = (
    "synthetic.n_samples",
    "synthetic.n_clusters",
    "synthetic.view_dims",
    "synthetic.noise_sigmas",
)


def _parse_value(key: str, raw: str):
    kind = _SCHEMA[key][0]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "intlist":
            return [int(x) for x in raw.split(",") if x.strip()]
        if kind == "floatlist":
            return [float(x) for x in raw.split(",") if x.strip()]
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind}") from None


@dataclass
class ExperimentConfig:
    """Resolved configuration of one run."""

    values: dict[str, object]
    source_path: str

    def __getitem__(self, key: str):
        return self.values[key]

    def text(self) -> str:
        """Canonical key-value rendering; parsing it reproduces the run.

        The output directory is omitted: it locates artifacts but does not
        affect any computed value, and runs into different directories must
        hash identically.
        """
        lines = []
        for key in sorted(self.values):
            v = self.values[key]
            if v is None or key == "output.dir":
                continue
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, list):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float):
                v = _FLOAT_FMT % v
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()


def load_config(path, seed_override: int | None = None, out_override: str | None = None) -> ExperimentConfig:
    try:
        raw = parse_keyvalue(path)
    except DataError as e:
        raise ConfigError(str(e)) from e
    values: dict[str, object] = {}
    for key, raw_value in raw.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, raw_value)
    for key, (_, default) in _SCHEMA.items():
        values.setdefault(key, default)
    if seed_override is not None:
        values["seed"] = int(seed_override)
    if out_override is not None:
        values["output.dir"] = out_override
    has_synth = any(raw_key.startswith("synthetic.") for raw_key in raw)
    if values["dataset.manifest"] is None and not has_synth:
        raise ConfigError("no dataset source: set dataset.manifest or a synthetic section")
    if values["dataset.manifest"] is None:
        for key in _SYNTH_REQUIRED:
            if values[key] is None:
                raise ConfigError(f"synthetic section incomplete: missing key {key!r}")
    for key in ("model.d", "model.d_c"):
        if values[key] < 1:
            raise ConfigError(f"{key} must be positive")
    return ExperimentConfig(values=values, source_path=str(path))


def _synthetic_spec(cfg: ExperimentConfig) -> SyntheticSpec:
    seed = cfg["synthetic.seed"]
    if seed is None:
        seed = cfg["seed"]
    try:
        return SyntheticSpec(
            n_samples=cfg["synthetic.n_samples"],
            n_clusters=cfg["synthetic.n_clusters"],
            latent_dim=cfg["synthetic.latent_dim"],
            view_dims=tuple(cfg["synthetic.view_dims"]),
            cluster_separation=cfg["synthetic.separation"],
            noise_sigmas=tuple(cfg["synthetic.noise_sigmas"]),
            seed=seed,
            identity_projection=cfg["synthetic.identity_projection"],
        )
    except DataError as e:
        raise ConfigError(f"invalid synthetic section: {e}") from e


def _load_raw_dataset(cfg: ExperimentConfig) -> MultiViewDataset:
    manifest = cfg["dataset.manifest"]
    if manifest is not None:
        path = Path(manifest)
        if not path.is_absolute():
            path = Path(cfg.source_path).parent / path
        return load_dataset(path)
    return generate_synthetic(_synthetic_spec(cfg))


def _resolve_k(cfg: ExperimentConfig, ds: MultiViewDataset) -> int:
    if cfg["model.k"] is not None:
        return cfg["model.k"]
    if ds.labels is not None:
        return ds.n_clusters
    raise ConfigError("model.k is required for unlabeled datasets")


def _build_model(cfg: ExperimentConfig, ds: MultiViewDataset, k: int) -> SemVibModel:
    return init_model(
        view_dims=ds.dims,
        n_samples=ds.n_samples,
        k=k,
        d=cfg["model.d"],
        d_c=cfg["model.d_c"],
        enc_hidden=tuple(cfg["model.enc_hidden"]),
        dec_hidden=tuple(cfg["model.dec_hidden"]),
        head_hidden=tuple(cfg["model.head_hidden"]),
        fusion_hidden=tuple(cfg["model.fusion_hidden"]),
        seed=cfg["seed"],
    )


def _train_config(cfg: ExperimentConfig, verbose: bool, log_path) -> TrainConfig:
    loss = LossConfig(
        lambda1=cfg["loss.lambda1"],
        lambda2=cfg["loss.lambda2"],
        beta=cfg["loss.beta"],
        tau=cfg["loss.tau"],
        gamma_scale=cfg["loss.gamma_scale"],
    )
    return TrainConfig(
        pretrain_epochs=cfg["train.pretrain_epochs"],
        train_epochs=cfg["train.epochs"],
        batch_size=cfg["train.batch_size"],
        pretrain_lr=cfg["train.pretrain_lr"],
        lr=cfg["train.lr"],
        seed=cfg["seed"],
        loss=loss,
        eval_every=cfg["train.eval_every"],
        eval_runs=cfg["eval.runs"],
        convergence_window=cfg["train.convergence_window"],
        convergence_tol=cfg["train.convergence_tol"],
        verbose=verbose,
        log_path=str(log_path) if log_path else None,
    )


def _report_record(report) -> dict:
    return {
        "acc": report.acc,
        "nmi": report.nmi,
        "ari": report.ari,
        "inertia": report.inertia,
        "runs": report.n_runs,
    }


def _write_metrics(path, cfg: ExperimentConfig, records: dict, epochs_run: int) -> None:
    mode = "autoencoder-only" if cfg["loss.lambda1"] == 0 and cfg["loss.lambda2"] == 0 else "full"
    payload = {
        "metadata": {
            "config_sha256": cfg.sha256(),
            "seed": cfg["seed"],
            "epochs_run": epochs_run,
            "mode": mode,
        },
        "representations": records,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _echo_config(cfg: ExperimentConfig, out_dir: Path) -> None:
    (out_dir / "config.resolved.txt").write_text(cfg.text(), encoding="utf-8")


def cmd_generate(cfg: ExperimentConfig) -> int:
    if cfg["dataset.manifest"] is not None:
        raise ConfigError("generate requires a synthetic section, not dataset.manifest")
    ds = generate_synthetic(_synthetic_spec(cfg))
    out_dir = Path(cfg["output.dir"])
    manifest = save_dataset(ds, out_dir)
    _echo_config(cfg, out_dir)
    print(f"wrote {ds.n_views} views, N={ds.n_samples} -> {manifest}")
    return 0


def cmd_train(cfg: ExperimentConfig, verbose: bool = True) -> int:
    out_dir = Path(cfg["output.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = _load_raw_dataset(cfg)
    ds = normalize_views(raw, cfg["data.normalize"])
    k = _resolve_k(cfg, ds)
    model = _build_model(cfg, ds, k)
    log_path = out_dir / "history.csv"
    log_path.write_text("", encoding="utf-8")  # truncate; train appends
    tc = _train_config(cfg, verbose, log_path)
    pretrain(model, ds, tc)
    model, history = train(model, ds, tc)
    save_checkpoint(out_dir / "checkpoint.bin", model, epoch=len(history.epochs))
    _echo_config(cfg, out_dir)
    if ds.labels is not None:
        report = evaluate_representation(
            model.Z.data,
            ds.labels,
            k,
            runs=cfg["eval.runs"],
            seed=int(np.random.SeedSequence(cfg["seed"]).generate_state(4)[3]),
            restarts=cfg["eval.restarts"],
        )
        _write_metrics(
            out_dir / "metrics.json", cfg, {"Z": _report_record(report)}, len(history.epochs)
        )
        print(
            f"trained {len(history.epochs)} epochs; "
            f"acc={report.acc:.4f} nmi={report.nmi:.4f} ari={report.ari:.4f}"
        )
    else:
        print(f"trained {len(history.epochs)} epochs (unlabeled dataset; no metrics)")
    return 0


def _load_compatible(cfg: ExperimentConfig, checkpoint_path) -> tuple[SemVibModel, MultiViewDataset]:
    model, _, _, _ = load_checkpoint(checkpoint_path)
    raw = _load_raw_dataset(cfg)
    ds = normalize_views(raw, cfg["data.normalize"])
    if ds.n_views != model.n_views:
        raise DataError(
            f"checkpoint has {model.n_views} views, dataset has {ds.n_views}"
        )
    for m, (have, want) in enumerate(zip(ds.dims, model.arch["view_dims"]), start=1):
        if have != want:
            raise DataError(f"view {m}: checkpoint expects dim {want}, dataset has {have}")
    if ds.n_samples != model.n_samples:
        raise DataError(
            f"checkpoint consistent matrix has {model.n_samples} rows, "
            f"dataset has {ds.n_samples}"
        )
    return model, ds


def cmd_eval(cfg: ExperimentConfig, checkpoint_path) -> int:
    model, ds = _load_compatible(cfg, checkpoint_path)
    if ds.labels is None:
        raise DataError("evaluation requires ground-truth labels")
    k = _resolve_k(cfg, ds)
    reports = ablation_eval(
        model,
        ds,
        k,
        runs=cfg["eval.runs"],
        seed=int(np.random.SeedSequence(cfg["seed"]).generate_state(4)[3]),
    )
    out_dir = Path(cfg["output.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    records = {name: _report_record(r) for name, r in reports.items()}
    _write_metrics(out_dir / "metrics.json", cfg, records, epochs_run=0)
    for name in sorted(records):
        r = records[name]
        print(f"{name}: acc={r['acc']:.4f} nmi={r['nmi']:.4f} ari={r['ari']:.4f}")
    return 0


def _embedding(model: SemVibModel, ds: MultiViewDataset, which: str) -> np.ndarray:
    if which == "Z":
        return model.Z.data
    match = re.fullmatch(r"Z\^?\((\d+)\)|Z(\d+)", which)
    if match:
        m = int(match.group(1) or match.group(2))
        if 1 <= m <= model.n_views:
            return view_embeddings(model, ds.views, m - 1)
    raise ConfigError(
        f"unknown representation {which!r}; expected Z or Z^(m) with 1 <= m <= {model.n_views}"
    )


def cmd_embed(cfg: ExperimentConfig, checkpoint_path, which: str) -> int:
    model, ds = _load_compatible(cfg, checkpoint_path)
    emb = _embedding(model, ds, which)
    out_dir = Path(cfg["output.dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    safe = which.replace("^", "").replace("(", "").replace(")", "")
    path = out_dir / f"embedding_{safe}.csv"
    np.savetxt(path, emb, fmt=_FLOAT_FMT, delimiter=",")
    print(f"wrote {emb.shape[0]}x{emb.shape[1]} embedding -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semvib", description="multi-view consistency-bottleneck clustering"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "train", "eval", "embed"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key-value config file")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--out", default=None, help="output directory")
        if name in ("eval", "embed"):
            p.add_argument("--checkpoint", required=True)
        if name == "embed":
            p.add_argument("--which", required=True, help="Z or Z^(m)")
        if name == "train":
            p.add_argument("--quiet", action="store_true", help="suppress per-epoch lines")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "train":
            return cmd_train(cfg, verbose=not args.quiet)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint)
        return cmd_embed(cfg, args.checkpoint, args.which)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, CheckpointError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric failure in term {e.term!r}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
