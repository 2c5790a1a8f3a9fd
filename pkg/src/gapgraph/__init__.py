"""Eigen-gap constrained sparse graph learning for GCN spectral filter training."""

from ._kernels import BACKEND
from .eigen_projection import ProjectionConfig, SpectralDecomposition, project
from .errors import ConvergenceError, GapGraphError, NumericalError, ValidationError
from .gcn_lab import GcnModel, TrainConfig, oversmoothing_check, train
from .glasso import GlassoConfig, GlassoResult, glasso_learn
from .graph_model import build_operator, laplacian_to_graph, measure_eigengap
from .pipeline import SignalDataset, SweepConfig, empirical_stats, run_sweep, synth_gmrf
from .spectral_core import EigenPair, deflate, top_eigenpair

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvergenceError",
    "EigenPair",
    "GapGraphError",
    "GcnModel",
    "GlassoConfig",
    "GlassoResult",
    "NumericalError",
    "ProjectionConfig",
    "SignalDataset",
    "SpectralDecomposition",
    "SweepConfig",
    "TrainConfig",
    "ValidationError",
    "build_operator",
    "deflate",
    "empirical_stats",
    "glasso_learn",
    "laplacian_to_graph",
    "measure_eigengap",
    "oversmoothing_check",
    "project",
    "run_sweep",
    "synth_gmrf",
    "top_eigenpair",
    "train",
]
