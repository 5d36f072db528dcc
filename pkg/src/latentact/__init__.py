"""Autoencoder dot-product recommender with an audit harness for latent activations."""

from .linalg import OrthogonalBasis, dot, norm, random_orthogonal_basis, rank, standard_basis
from .nn import Activation, MLPModel, TrainConfig, build_autoencoder, load_model, save_model, train
from .properties import (
    CertificateKind,
    ViolationCertificate,
    certify_violation,
    hyperplane_check,
    lemma1_rank_check,
    nonzero_preservation_audit,
    order_preservation_audit,
    zero_image,
)
from .recsys import Dataset, evaluate_agreement, kendall_tau, load_csv, synth_dataset, top_k

__version__ = "0.1.0"

__all__ = [
    "Activation", "CertificateKind", "Dataset", "MLPModel", "OrthogonalBasis", "TrainConfig",
    "ViolationCertificate", "build_autoencoder", "certify_violation", "dot", "evaluate_agreement",
    "hyperplane_check", "kendall_tau", "lemma1_rank_check", "load_csv", "load_model",
    "nonzero_preservation_audit", "norm", "order_preservation_audit", "random_orthogonal_basis",
    "rank", "save_model", "standard_basis", "synth_dataset", "top_k", "train", "zero_image",
]
