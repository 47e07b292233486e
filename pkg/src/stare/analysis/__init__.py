"""Prediction matrices, misclassification blocks, projections, spectral clusters and reports."""

from .heatmap import heatmap_render, to_pixels
from .matrices import (
    KINDS,
    PredictionMatrix,
    average_predictions,
    grouped_pairs,
    location_matrix,
    misclassification_blocks,
)
from .pipeline import extract_embeddings, prediction_matrix
from .projection import pca_2d, project_2d
from .report import AccuracyRow, accuracy, read_report, write_report
from .spectral import ClusterAssignment, affinity, purity, spectral_cluster, spectral_embedding

__all__ = [
    "heatmap_render", "to_pixels", "KINDS", "PredictionMatrix", "average_predictions", "grouped_pairs",
    "location_matrix", "misclassification_blocks", "extract_embeddings", "prediction_matrix",
    "pca_2d", "project_2d", "AccuracyRow", "accuracy", "read_report", "write_report",
    "ClusterAssignment", "affinity", "purity", "spectral_cluster", "spectral_embedding",
]
