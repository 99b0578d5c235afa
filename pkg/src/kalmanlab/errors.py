"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so estimator code should
raise the most specific type that applies:

* ``DimensionError``  -- caller passed arrays whose shapes cannot work,
* ``DataError``       -- inputs parsed fine but the values are unusable
  (bad CSV rows, non-monotone timestamps, not enough samples),
* ``NumericError``    -- the computation itself broke down (singular or
  non-positive-definite covariances, diverging training loss).
"""


class KalmanLabError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(KalmanLabError, ValueError):
    """Array arguments have incompatible or unsupported shapes."""


class DataError(KalmanLabError, ValueError):
    """Input data is malformed or insufficient for the requested operation."""


class NumericError(KalmanLabError, ArithmeticError):
    """A numeric procedure failed (singularity, loss of positive definiteness,
    divergence)."""
