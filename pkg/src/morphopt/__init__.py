"""Shape optimization of a hinged morphing roof structure against a (virtual) wind tunnel."""

__version__ = "0.1.0"

from .geometry import DesignSpace, MorphShape, PanelChainSpec, VehicleGeometry, decode_indices, is_admissible
from .optimizer import GaConfig, GeneticShapeOptimizer, run_campaign

__all__ = ["DesignSpace", "GaConfig", "GeneticShapeOptimizer", "MorphShape", "PanelChainSpec", "VehicleGeometry",
           "decode_indices", "is_admissible", "run_campaign"]
