"""Benchmark harness: image ingestion, grid costs, baseline, experiment runner."""

from .data import ImageMeasure, IdxFormatError, grid_cost, load_idx, write_idx3
from .entropy import EntropyNumericalError, entropy_sinkhorn
from .experiment import ExperimentConfig, run_experiment

__all__ = [
    "ImageMeasure",
    "IdxFormatError",
    "grid_cost",
    "load_idx",
    "write_idx3",
    "EntropyNumericalError",
    "entropy_sinkhorn",
    "ExperimentConfig",
    "run_experiment",
]
