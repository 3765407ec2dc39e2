"""Finite cell models of stationary actions of free groups.

The package computes Furstenberg entropy, Radon-Nikodym tails, partition
statistics clouds and the weak-equivalence metric delta on finite weighted
cell models, and ships a command-line tool (``furstat``) for experiments.
"""

__version__ = "0.1.0"

from .action import (
    Cell,
    CellAction,
    TransportPiece,
    ValidationReport,
    WordTransport,
    entropy,
    entropy_breakdown,
    mass,
    require_valid,
    rn_pieces,
    rn_tail,
    rn_word_bound,
    validate,
    word_transport,
)
from .errors import (
    BudgetError,
    FurstatError,
    MalformedInputError,
    RangeError,
    ResolutionError,
    SolverError,
    UnsupportedWordError,
    ValidationError,
)
from .geometry import (
    DeltaReport,
    OrderedPartition,
    StatsCloud,
    StatsPoint,
    cloud,
    containment_defect,
    delta,
    directed_hausdorff,
    hausdorff,
    stats_point,
    tail_bound,
)
from .io import read_action, write_action
from .matching import match_partition, prop2_construct, two_sided_discrepancy
from .models import (
    BoundarySpec,
    SimplexDescription,
    boundary_action,
    convex_combine,
    finite_bijective,
    stabilize,
    stationary_simplex,
    trivial_action,
)
from .words import GroupWord, StepDistribution, enumerate_words, inverse, multiply, reduce

__all__ = [name for name in dir() if not name.startswith("_")]
