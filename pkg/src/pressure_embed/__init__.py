"""Nonlinear embeddings (EE, SNE, t-SNE, UMAP) with pressured-point analysis."""
from .affinity import AffinityConfig, build_affinities
from .augmented import (
    MuSchedule,
    augmented_gradient,
    augmented_objective,
    make_mu_schedule,
    update_pressured_set,
)
from .core import (
    AffinityGraph,
    AugmentedState,
    CalibrationError,
    ConfigurationError,
    Dataset,
    Embedding,
    EvaluationError,
    OptimRun,
    PressureReport,
    TraceRecord,
    ValidationError,
    pairwise_sqdist,
)
from .data_io import generate_clusters, generate_rings, generate_swissroll
from .estimator import NonlinearEmbedding
from .objectives import Method, gradient, objective
from .optimizer import (
    OptimConfig,
    graph_laplacian,
    minimize,
    pp_optimize,
    restart_benchmark,
    spectral_direction,
)
from .pressure import (
    NewtonConfig,
    compute_pressure,
    objective_slice,
    pressure_ee,
    pressure_sne,
    pressure_tsne,
    pressure_umap,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityConfig", "AffinityGraph", "AugmentedState", "CalibrationError",
    "ConfigurationError", "Dataset", "Embedding", "EvaluationError", "Method",
    "MuSchedule", "NewtonConfig", "NonlinearEmbedding", "OptimConfig", "OptimRun",
    "PressureReport", "TraceRecord", "ValidationError", "augmented_gradient",
    "augmented_objective", "build_affinities", "compute_pressure", "generate_clusters",
    "generate_rings", "generate_swissroll", "gradient", "graph_laplacian",
    "make_mu_schedule", "minimize", "objective", "objective_slice", "pairwise_sqdist",
    "pp_optimize", "pressure_ee", "pressure_sne", "pressure_tsne", "pressure_umap",
    "restart_benchmark", "spectral_direction", "update_pressured_set",
]
