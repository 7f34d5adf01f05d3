from .core import AdmissibleSet, CostSpec, PenaltyEngine, enumerate_faces
from .radial import RadialPenalty
from .concentric import ConcentricPenalty

__all__ = [
    "AdmissibleSet",
    "CostSpec",
    "PenaltyEngine",
    "enumerate_faces",
    "RadialPenalty",
    "ConcentricPenalty",
]
