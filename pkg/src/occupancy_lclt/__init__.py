"""Translated Poisson local limit machinery for occupancy statistics."""

from importlib.metadata import PackageNotFoundError, version

from .distlib import (Pmf, TpParams, TranslatedPoissonFit, binomial_pmf, loc_distance, poisson_pmf,
                      smoothness, tp_params, tp_pmf, tv_distance)
from .er_model import ErdosRenyiModel, ErSample, er_moments, sample_graph
from .errors import (DegenerateInput, InternalInvariantViolation, InvalidArgument, NumericTolerance,
                     PreconditionViolation, ReliabilityWarning, ResourceLimit)
from .gg_model import GermConfig, GermGrainModel, sample_config
from .rng import derive_stream
from .sizebias import build_increment_law, coupled_law

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "DegenerateInput", "ErSample", "ErdosRenyiModel", "GermConfig", "GermGrainModel",
    "InternalInvariantViolation", "InvalidArgument", "NumericTolerance", "Pmf",
    "PreconditionViolation", "ReliabilityWarning", "ResourceLimit", "TpParams",
    "TranslatedPoissonFit", "binomial_pmf", "build_increment_law", "coupled_law", "derive_stream",
    "er_moments", "loc_distance", "poisson_pmf", "sample_config", "sample_graph", "smoothness",
    "tp_params", "tp_pmf", "tv_distance",
]
