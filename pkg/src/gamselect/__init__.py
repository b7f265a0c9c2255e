"""gamselect: three-category Bayesian additive-model selection.

Each candidate predictor's effect on the response is classified as zero,
linear, or non-linear.  Fitting is by a Gibbs sampler or a fast mean-field
variational alternative, both driven by sufficient-statistic matrices built
in a single preprocessing pass.
"""

from .errors import (
    CapacityError,
    DegenerateDataError,
    GamSelectError,
    InternalConsistencyError,
    InvalidIndexError,
    InvalidParameterError,
    NumericalError,
    OutOfRangeError,
)
from .hyper import Hyperparameters

__version__ = "0.1.0"

__all__ = [
    "Hyperparameters",
    "GamSelectError",
    "InvalidParameterError",
    "DegenerateDataError",
    "CapacityError",
    "OutOfRangeError",
    "InvalidIndexError",
    "NumericalError",
    "InternalConsistencyError",
]
