"""Feature co-adaptation in offline temporal-difference learning.

Subpackages: ``numerics`` (linear algebra, MLP, optimizers), ``envdata``
(gridworlds and offline datasets), ``agents`` (TD training loops and
regularizers), ``analysis`` (stability tests and diagnostics), ``stats``
(run aggregation) and ``cli``.
"""

from coadapt.exceptions import (
    CoadaptError,
    ConfigError,
    DomainError,
    NumericError,
    ShapeError,
    StabilityError,
)

__version__ = "0.1.0"

__all__ = [
    "CoadaptError",
    "ConfigError",
    "DomainError",
    "NumericError",
    "ShapeError",
    "StabilityError",
    "__version__",
]
