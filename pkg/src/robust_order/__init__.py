"""Robust sorting of tournaments with adversarial elements, and Ulam-metric median clustering."""

from .exceptions import (
    ConfigurationError,
    InvalidInputError,
    ParseError,
    ResourceLimitError,
    RobustOrderError,
)
from .permutation import (
    Permutation,
    as_permutation_array,
    lcs_length,
    misaligned_set,
    read_permutations,
    ulam_distance,
    ulam_distances,
    write_permutations,
)
from .robust_sort import (
    LossReport,
    OrderingResult,
    RobustSortConfig,
    RobustSorter,
    evaluate,
    robust_sort,
    triangle_removal_sort,
)
from .tournament import (
    Adversary,
    MatrixOracle,
    PlantedOrderInstance,
    QueryLedger,
    TournamentOracle,
    generate_instance,
    make_planted_oracle,
)
from .ulam import (
    ClusteringSolution,
    Ulam1Config,
    UlamKConfig,
    UlamKMedian,
    d_sample_distribution,
    majority_comparator,
    objective,
    sample_centers,
    ulam1,
    ulamk,
)

__version__ = "0.1.0"

__all__ = [
    "Adversary",
    "ClusteringSolution",
    "ConfigurationError",
    "InvalidInputError",
    "LossReport",
    "MatrixOracle",
    "OrderingResult",
    "ParseError",
    "Permutation",
    "PlantedOrderInstance",
    "QueryLedger",
    "ResourceLimitError",
    "RobustOrderError",
    "RobustSortConfig",
    "RobustSorter",
    "TournamentOracle",
    "Ulam1Config",
    "UlamKConfig",
    "UlamKMedian",
    "as_permutation_array",
    "d_sample_distribution",
    "evaluate",
    "generate_instance",
    "lcs_length",
    "majority_comparator",
    "make_planted_oracle",
    "misaligned_set",
    "objective",
    "read_permutations",
    "robust_sort",
    "sample_centers",
    "triangle_removal_sort",
    "ulam1",
    "ulam_distance",
    "ulam_distances",
    "ulamk",
    "write_permutations",
]
