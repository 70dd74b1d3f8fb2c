"""flowrag: retrieval-augmented structured workflow generation at desk scale."""

__version__ = "0.1.0"

from .catalog import (
    Catalog,
    LabeledSample,
    MalformedDocument,
    StepCategory,
    StepDefinition,
    ValidationReport,
    WorkflowDocument,
    WorkflowStep,
    parse_workflow,
    serialize_workflow,
    validate_catalog,
)
from .encoder import EncoderModel, cosine_similarity, encode, encode_gradient
from .pipeline import GeneratorBinding, OracleGenerator, Prompt, Suggestions
from .trainer import TrainerConfig, TrainingPair, contrastive_loss, train

__all__ = [
    "Catalog",
    "LabeledSample",
    "MalformedDocument",
    "StepCategory",
    "StepDefinition",
    "ValidationReport",
    "WorkflowDocument",
    "WorkflowStep",
    "parse_workflow",
    "serialize_workflow",
    "validate_catalog",
    "EncoderModel",
    "cosine_similarity",
    "encode",
    "encode_gradient",
    "GeneratorBinding",
    "OracleGenerator",
    "Prompt",
    "Suggestions",
    "TrainerConfig",
    "TrainingPair",
    "contrastive_loss",
    "train",
]
