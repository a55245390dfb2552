from .base import CallableEvaluator, FitnessEvaluator
from .remote import RemoteRig, RigServer
from .replay import ReplayRig, shape_filename
from .synthetic import (BaselineTable, DriftProcess, LocalMinimum, SyntheticDragModel, SyntheticRig,
                        ar1_noise, synthesize_trace)

__all__ = [
    "BaselineTable", "CallableEvaluator", "DriftProcess", "FitnessEvaluator", "LocalMinimum", "RemoteRig",
    "ReplayRig", "RigServer", "SyntheticDragModel", "SyntheticRig", "ar1_noise", "shape_filename",
    "synthesize_trace",
]
