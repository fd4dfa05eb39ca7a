"""rootlab: transfer-matrix root patterns of the open spin-1/2 chain.

Pipeline: ground state (exact or DMRG) -> transfer-matrix eigenvalue
samples -> polynomial reconstruction -> zero roots / Bethe roots ->
verification and pattern classification.
"""

from .errors import (
    AmbiguousPattern,
    DegenerateGuesses,
    DuplicateNodes,
    InvalidVariant,
    MultipleRoot,
    NeverDetected,
    NoConvergence,
    NodeAtPole,
    NonMonotoneQuantumNumbers,
    NotHermitian,
    Overflow,
    PoleAt,
    PoleInRatio,
    RootAtPole,
    RootlabError,
    ShapeMismatch,
    SingularSystem,
    SizeCap,
    UnpairableRoot,
    ZeroOnContour,
)
from .model import ModelParams

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "RootlabError",
    "AmbiguousPattern",
    "DegenerateGuesses",
    "DuplicateNodes",
    "InvalidVariant",
    "MultipleRoot",
    "NeverDetected",
    "NoConvergence",
    "NodeAtPole",
    "NonMonotoneQuantumNumbers",
    "NotHermitian",
    "Overflow",
    "PoleAt",
    "PoleInRatio",
    "RootAtPole",
    "ShapeMismatch",
    "SingularSystem",
    "SizeCap",
    "UnpairableRoot",
    "ZeroOnContour",
    "__version__",
]
