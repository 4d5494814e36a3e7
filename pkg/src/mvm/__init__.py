"""Design, optimization and evaluation of mode-vector-modulation constellations."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Constellation,
    JonesVector,
    PairGeometry,
    coherence_matrix,
    load_constellation,
    random_constellation,
    save_constellation,
)
from .errprob import (  # noqa: E402
    SnrPoint,
    pairwise_error_exact,
    union_bound_bit,
    union_bound_symbol,
)
