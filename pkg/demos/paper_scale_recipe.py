"""Optional large-scale recipe for user-supplied handwritten-digit features.

Desk-scale acceptance does not cover corpus-scale datasets; this script runs
the full pipeline on pre-extracted feature matrices if you provide them. It
targets mean-of-10-runs ACC >= 0.95 on a two-view digits corpus
(5000 samples, 10 classes); falling short here does not fail the test suite.

Expected inputs under data/digits2view/ (see README for the formats):

    view_1.csv   one sample per row, comma-separated floats
    view_2.csv   same rows, second descriptor
    labels.txt   one integer per line

Run time is hours, not minutes: the reference configuration uses wider nets
and the full epoch budget on N=5000.
"""

import sys
from pathlib import Path

from semvib import (
    LossConfig,
    TrainConfig,
    evaluate_representation,
    init_model,
    load_dataset,
    normalize_views,
    pretrain,
    train,
)

data_dir = Path("data/digits2view")
manifest = data_dir / "manifest.txt"
if not manifest.is_file():
    if not data_dir.is_dir() or not (data_dir / "view_1.csv").is_file():
        sys.exit(
            "no corpus found: place view_1.csv, view_2.csv, labels.txt under "
            f"{data_dir}/ (pre-extracted features; this package ships no downloader)"
        )
    manifest.write_text(
        "view.1 = view_1.csv\nview.2 = view_2.csv\nlabels = labels.txt\n",
        encoding="utf-8",
    )

ds = normalize_views(load_dataset(manifest), "minmax")
print(f"loaded N={ds.n_samples}, views={ds.dims}, K={ds.n_clusters}")

model = init_model(
    ds.dims,
    ds.n_samples,
    k=ds.n_clusters,
    d=128,
    d_c=128,
    enc_hidden=(512, 512),
    dec_hidden=(512, 512),
    head_hidden=(128,),
    fusion_hidden=(128,),
    seed=0,
)
config = TrainConfig(
    pretrain_epochs=200,
    train_epochs=300,
    batch_size=256,
    loss=LossConfig(lambda1=1.0, lambda2=1.0, beta=1e-3, tau=1.0),
    eval_every=25,
    verbose=True,
    seed=0,
)
pretrain(model, ds, config)
model, history = train(model, ds, config)

report = evaluate_representation(model.Z.data, ds.labels, ds.n_clusters, runs=10, seed=0)
print(f"final: ACC={report.acc:.4f} NMI={report.nmi:.4f} ARI={report.ari:.4f}")
print("target (optional): ACC >= 0.95")
