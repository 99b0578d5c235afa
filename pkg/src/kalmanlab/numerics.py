"""Deterministic linear-algebra and utility kernels used across the package.

Everything here is pure: same inputs, bit-identical outputs.  Random
number generation is centralized in :func:`make_rng` so that every
experiment derives its streams from a single documented generator
(PCG64 seeded through ``numpy.random.SeedSequence``).
"""

import numpy as np

from . import kernels
from .errors import DimensionError, NumericError

#: Maximum cyclic Jacobi sweeps before the eigensolver gives up.
MAX_JACOBI_SWEEPS = 100

#: Relative off-diagonal tolerance for Jacobi convergence.
JACOBI_REL_TOL = 1e-14

#: Tikhonov damping applied to least-squares normal equations.
LSQ_DAMPING = 1e-10


def as_vector(v, name="vector"):
    """Coerce to a finite 1-D float array; raise on bad shape or values."""
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_matrix(m, name="matrix"):
    """Coerce to a finite 2-D float array; raise on bad shape or values."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def symmetrize(m):
    """Return the symmetric part (m + m.T) / 2."""
    return (m + m.T) / 2.0


def eig_sym(m, *, sym_tol=1e-9):
    """Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Symmetric within ``sym_tol``; symmetrized internally before
        factoring.

    Returns
    -------
    (eigenvalues, eigenvectors)
        Eigenvalues sorted descending; eigenvectors as the matching
        orthonormal columns.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if a.size == 0:
        raise DimensionError("expected a non-empty matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > sym_tol:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    s = symmetrize(a)

    w, v, sweeps = kernels.jacobi_eigh(s, JACOBI_REL_TOL, MAX_JACOBI_SWEEPS)
    if sweeps >= MAX_JACOBI_SWEEPS:
        raise NumericError(
            f"Jacobi eigensolver did not converge in {MAX_JACOBI_SWEEPS} sweeps"
        )
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def least_squares(h_shape, x, z, *, damping=LSQ_DAMPING):
    """Solve z = h @ x for the matrix h of the given shape, least squares.

    ``x`` and ``z`` may be single vectors (one sample) or 2-D arrays with
    one sample per column.  The normal equations are damped by
    ``damping * I``, which makes the solution the (approximate)
    minimum-Frobenius-norm minimizer of ``||z - h x||^2`` when the design
    is rank deficient.
    """
    rows, cols = h_shape
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    xm = x.reshape(-1, 1) if x.ndim == 1 else x
    zm = z.reshape(-1, 1) if z.ndim == 1 else z
    if xm.shape[0] != cols:
        raise DimensionError(
            f"design has {xm.shape[0]} rows, expected {cols} for h shape {h_shape}"
        )
    if zm.shape[0] != rows:
        raise DimensionError(
            f"target has {zm.shape[0]} rows, expected {rows} for h shape {h_shape}"
        )
    if xm.shape[1] != zm.shape[1]:
        raise DimensionError(
            f"sample count mismatch: x has {xm.shape[1]}, z has {zm.shape[1]}"
        )
    if not (np.all(np.isfinite(xm)) and np.all(np.isfinite(zm))):
        raise ValueError("least_squares inputs contain non-finite entries")
    if float(np.linalg.norm(xm)) == 0.0:
        raise NumericError("least_squares design has zero norm (singular solve)")

    gram = xm @ xm.T + damping * np.eye(cols)
    # h = Z X^T G^{-1}  <=>  G h^T = X Z^T  (G symmetric)
    return np.linalg.solve(gram, xm @ zm.T).T


def jacobian_fd(g, x0, step=1e-5):
    """Central finite-difference Jacobian of ``g`` at ``x0``.

    The per-coordinate step is ``step * max(1, |x0_j|)``.  ``g`` may
    return a scalar or a vector; the result is always 2-D with one
    column per input coordinate.
    """
    x0 = as_vector(x0, "x0")
    n = x0.size
    cols = []
    for j in range(n):
        delta = step * max(1.0, abs(x0[j]))
        e = np.zeros(n)
        e[j] = delta
        gp = np.atleast_1d(np.asarray(g(x0 + e), dtype=float)).ravel()
        gm = np.atleast_1d(np.asarray(g(x0 - e), dtype=float)).ravel()
        if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
            raise ValueError(
                f"function returned non-finite values near coordinate {j}"
            )
        cols.append((gp - gm) / (2.0 * delta))
    return np.column_stack(cols)


def softmax(logits):
    """Numerically stable softmax: exp(v - max(v)) normalized to sum 1."""
    v = np.asarray(logits, dtype=float)
    if v.size == 0:
        raise DimensionError("softmax requires a non-empty input")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax input contains non-finite entries")
    shifted = v - np.max(v)
    e = np.exp(shifted)
    return e / np.sum(e)


def make_rng(seed, *path):
    """Seeded deterministic generator (PCG64 via SeedSequence).

    ``path`` selects an independent substream: ``make_rng(seed, 3)`` and
    ``make_rng(seed, 4)`` are statistically independent, and every call
    with the same ``(seed, path)`` yields a bit-identical stream on any
    platform.  All randomness in the package flows through this helper
    so one top-level seed reproduces a whole experiment.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))
