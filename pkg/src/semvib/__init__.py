"""Multi-view clustering through a semantic-consistency variational
information bottleneck: per-view Gaussian encoders, a fused consistent
representation trained jointly with cluster-level contrastive losses, and
k-means evaluation with ACC/NMI/ARI."""

from .data import (
    MultiViewDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    minibatch_indices,
    normalize_views,
    save_dataset,
)
from .errors import CheckpointError, ConfigError, DataError, NumericError, SemVibError
from .evaluation import (
    ClusterReport,
    ablation_eval,
    ari,
    clustering_accuracy,
    evaluate_representation,
    kmeans,
    nmi,
)
from .losses import (
    Batch,
    LossBreakdown,
    LossConfig,
    consistent_contrastive,
    cosine_similarity,
    entropy_regularizer,
    gaussian_kl,
    ib_loss,
    pair_contrastive,
    reconstruction_loss,
    semantic_loss,
    total_loss,
)
from .model import (
    SemVibModel,
    ViewEncoding,
    decode_view,
    encode_view,
    fuse_predict,
    init_model,
    semantic_labels,
)
from .nn import Adam, GradientReport, Mlp, check_gradients, mlp_forward
from .train import TrainConfig, TrainHistory, load_checkpoint, pretrain, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "Batch",
    "CheckpointError",
    "ClusterReport",
    "ConfigError",
    "DataError",
    "GradientReport",
    "LossBreakdown",
    "LossConfig",
    "Mlp",
    "MultiViewDataset",
    "NumericError",
    "SemVibError",
    "SemVibModel",
    "SyntheticSpec",
    "TrainConfig",
    "TrainHistory",
    "ViewEncoding",
    "ablation_eval",
    "ari",
    "check_gradients",
    "clustering_accuracy",
    "consistent_contrastive",
    "cosine_similarity",
    "decode_view",
    "encode_view",
    "entropy_regularizer",
    "evaluate_representation",
    "fuse_predict",
    "gaussian_kl",
    "generate_synthetic",
    "ib_loss",
    "init_model",
    "kmeans",
    "load_checkpoint",
    "load_dataset",
    "minibatch_indices",
    "mlp_forward",
    "nmi",
    "normalize_views",
    "pair_contrastive",
    "pretrain",
    "reconstruction_loss",
    "save_checkpoint",
    "save_dataset",
    "semantic_labels",
    "semantic_loss",
    "total_loss",
    "train",
]
