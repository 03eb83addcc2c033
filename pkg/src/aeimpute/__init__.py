"""Missing-data imputation by genetic search over autoencoder reconstruction error.

A bottleneck autoencoder is trained on complete records. For a record with
missing fields, a real-coded GA searches the missing values that the network
reconstructs best, optionally inside bounds bracketed by a small regression
forest.
"""
from .autoencoder import AutoencoderModel, NetworkConfig, TrainReport, init_model, train
from .evaluation import compare_modes, impact_assessment, score_estimates
from .forest import RegressionForest, TreeParams, WindowConfig, derive_bounds, train_forest
from .genetic import FitnessContext, GaConfig, GeneBounds, evolve, fitness
from .pipeline import ImputationJob, ImputationResult, impute_dataset, impute_record
from .schema import (
    SURVEY_SCHEMA,
    Dataset,
    NormalizationParams,
    VariableSchema,
    VariableSpec,
    denormalize,
    listwise_clean,
    load_csv,
    normalize,
    split_dataset,
    validate_record,
)
from .synth import SynthConfig, generate, inject_mar

__version__ = "0.1.0"

__all__ = [
    "AutoencoderModel",
    "NetworkConfig",
    "TrainReport",
    "init_model",
    "train",
    "compare_modes",
    "impact_assessment",
    "score_estimates",
    "RegressionForest",
    "TreeParams",
    "WindowConfig",
    "derive_bounds",
    "train_forest",
    "FitnessContext",
    "GaConfig",
    "GeneBounds",
    "evolve",
    "fitness",
    "ImputationJob",
    "ImputationResult",
    "impute_dataset",
    "impute_record",
    "SURVEY_SCHEMA",
    "Dataset",
    "NormalizationParams",
    "VariableSchema",
    "VariableSpec",
    "denormalize",
    "listwise_clean",
    "load_csv",
    "normalize",
    "split_dataset",
    "validate_record",
    "SynthConfig",
    "generate",
    "inject_mar",
]
