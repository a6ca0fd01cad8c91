"""ConOCC: one-class classification with a center-constrained convolutional autoencoder."""

__version__ = "0.1.0"

from .baselines import MethodSpec, train_cae, train_dsvdd_lite, train_method, train_sae
from .data import Sample, load_dataset, split_folds, synthesize_dataset
from .engine import GradTape, Tensor, adam_step, backward
from .losses import HypersphereCenter, constraining_loss, reconstruction_loss, total_loss
from .model import ArchConfig, AutoencoderModel, build_model, decode, encode, forward
from .scoring import EvalMetrics, auc, aupr, evaluate, score, score_distance
from .trainer import HyperParams, TrainLog, fit, update_center

__all__ = [
    "ArchConfig", "AutoencoderModel", "EvalMetrics", "GradTape", "HyperParams", "HypersphereCenter",
    "MethodSpec", "Sample", "Tensor", "TrainLog", "adam_step", "auc", "aupr", "backward", "build_model",
    "constraining_loss", "decode", "encode", "evaluate", "fit", "forward", "load_dataset",
    "reconstruction_loss", "score", "score_distance", "split_folds", "synthesize_dataset", "total_loss",
    "train_cae", "train_dsvdd_lite", "train_method", "train_sae", "update_center",
]
