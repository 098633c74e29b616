"""Distributed variational-Bayes tracking of an extended object with unknown sensor noise."""
from .consensus import SensorNetwork, generate_network, run_consensus
from .dfilter import AlgorithmVariant, FilterOptions, NodeBelief, distributed_vb_update, local_predict, track
from .errors import ConfigError, DomainError, EOTrackError, NetworkError, ParameterError, UndefinedMomentError
from .kernels import BACKEND
from .metrics import EllipseEstimate, gwd, rgwe
from .model import ModelConfig, MotionParams
from .simkit import ScenarioConfig, gen_trajectory, scenario_defaults
from .vbcore import GIWState, NoiseBelief, VBOptions, predict, vb_measurement_update

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AlgorithmVariant",
    "ConfigError",
    "DomainError",
    "EOTrackError",
    "EllipseEstimate",
    "FilterOptions",
    "GIWState",
    "ModelConfig",
    "MotionParams",
    "NetworkError",
    "NodeBelief",
    "NoiseBelief",
    "ParameterError",
    "ScenarioConfig",
    "SensorNetwork",
    "UndefinedMomentError",
    "VBOptions",
    "distributed_vb_update",
    "gen_trajectory",
    "generate_network",
    "gwd",
    "local_predict",
    "predict",
    "rgwe",
    "run_consensus",
    "scenario_defaults",
    "track",
    "vb_measurement_update",
]
