"""Rate regions with common receiver reconstructions over finite alphabets."""

__version__ = "0.1.0"

from .errors import (
    DegenerateInputError,
    InfeasibleDistortionError,
    PmfParseError,
    PreconditionError,
    SrcrrError,
)
from .gacs_korner import GKPartition, gk_partition
from .kernels import BACKEND
from .probability import (
    Alphabet,
    Channel,
    DistortionMeasure,
    JointPmf,
    conditional_mutual_information,
    entropy,
    load_pmf,
)
from .region import (
    AuxCandidate,
    RateCorner,
    RegionFrontier,
    SourceSpec,
    binary_region,
    binary_source,
    classify_source,
    eval_star_candidate,
    eval_triple_candidate,
    time_share,
)
from .search import SearchConfig, optimize_star_region, qb_region
