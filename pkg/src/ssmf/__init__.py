"""Self-similar sets, typical measures and finite-scale multifractal analysis."""

from ssmf.errors import (
    ConstructionError,
    EstimationError,
    InputError,
    ResourceError,
    ScheduleError,
    SsmfError,
)
from ssmf.ifs import (
    CutSet,
    IfsSystem,
    Similitude,
    Word,
    anchor_point,
    compose_word,
    cut_set,
    moran_dimension,
    sample_attractor,
    similitude_apply,
)

__version__ = "0.1.0"

__all__ = [
    "ConstructionError",
    "CutSet",
    "EstimationError",
    "IfsSystem",
    "InputError",
    "ResourceError",
    "ScheduleError",
    "Similitude",
    "SsmfError",
    "Word",
    "anchor_point",
    "compose_word",
    "cut_set",
    "moran_dimension",
    "sample_attractor",
    "similitude_apply",
]
