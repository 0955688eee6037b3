"""ragkit: config-driven pipelines for building RAG-augmented datasets,
running inference over them, and evaluating the outputs."""

from . import prompting, retrieval, steps  # noqa: F401  - registers the step targets
from .data import Dataset, DatasetRegistry, Record
from .pipeline import (
    FORMAT_VERSION,
    ExecutionContext,
    PipelineConfig,
    RunReport,
    StepConfig,
    apply_global_step,
    apply_local_step,
    fingerprint_step,
    load_pipeline_config,
    parse_pipeline_config,
    run_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DatasetRegistry",
    "ExecutionContext",
    "FORMAT_VERSION",
    "PipelineConfig",
    "Record",
    "RunReport",
    "StepConfig",
    "apply_global_step",
    "apply_local_step",
    "fingerprint_step",
    "load_pipeline_config",
    "parse_pipeline_config",
    "run_pipeline",
    "__version__",
]
