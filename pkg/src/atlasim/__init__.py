"""Learned atlas simulators for multiscale stochastic systems."""
from .analysis import (
    ComparisonReport,
    RegionSpec,
    classify,
    multiscale_compare,
    soft_bin,
    transition_times,
)
from .embedding import LandmarkMDS, estimate_dim, extend, mds
from .estimator import Atlas
from .exceptions import AtlasError, ConfigError, DegenerateLandmarksError, NumericalError
from .learn import AtlasModel, AtlasParams, learn_atlas
from .netspace import DeltaNet, StateSpace, build_delta_net, nearest_net_index
from .simulate import AtlasState, lift, run, sample_qhat, step, wall

__version__ = "0.1.0"

__all__ = [
    "Atlas",
    "AtlasError",
    "AtlasModel",
    "AtlasParams",
    "AtlasState",
    "ComparisonReport",
    "ConfigError",
    "DegenerateLandmarksError",
    "DeltaNet",
    "LandmarkMDS",
    "NumericalError",
    "RegionSpec",
    "StateSpace",
    "build_delta_net",
    "classify",
    "estimate_dim",
    "extend",
    "learn_atlas",
    "lift",
    "mds",
    "multiscale_compare",
    "nearest_net_index",
    "run",
    "sample_qhat",
    "soft_bin",
    "step",
    "transition_times",
    "wall",
]
