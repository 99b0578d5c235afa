"""Non-Kalman comparison filters: Savitzky-Golay smoothing and the
passive (identity) estimator."""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError


@dataclass
class SavgolSpec:
    """Window and polynomial degree of the smoothing filter."""

    window: int = 5
    degree: int = 2

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and positive, got {self.window}")
        if not 0 <= self.degree < self.window:
            raise ValueError(
                f"degree must satisfy 0 <= degree < window, got {self.degree}"
            )


def savgol_coefficients(spec):
    """Convolution kernel of the least-squares polynomial smoother.

    Fit a degree-k polynomial to the window positions -m..m and evaluate
    it at the center; the resulting linear map of the window values is
    the returned weight vector.
    """
    m = spec.window // 2
    pos = np.arange(-m, m + 1, dtype=float)
    design = np.vander(pos, spec.degree + 1, increasing=True)
    gram = design.T @ design
    e0 = np.zeros(spec.degree + 1)
    e0[0] = 1.0
    return design @ np.linalg.solve(gram, e0)


def savgol_filter(spec, series):
    """Smooth a series by local polynomial least squares.

    Edges are mirror-padded so the output has the input's length.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise DimensionError(f"series must be 1-D, got shape {series.shape}")
    if series.size < spec.window:
        raise DataError(
            f"series has {series.size} points, need at least {spec.window}"
        )
    if not np.all(np.isfinite(series)):
        raise ValueError("series contains non-finite entries")
    weights = savgol_coefficients(spec)
    m = spec.window // 2
    padded = np.pad(series, m, mode="reflect")
    return np.correlate(padded, weights, mode="valid")


def passive_step(z):
    """Identity estimator: the estimate is the raw measurement."""
    return np.array(z, dtype=float, copy=True)
