"""Hot numeric kernels, JIT-compiled when numba is available.

Two loops in this package are genuinely sequential and dominate profile
time on long runs: the delay-differential integrator behind the chaotic
benchmark signal, and the cyclic Jacobi sweep used by the symmetric
eigensolver.  Both are written in plain loop form so the exact same
function body runs either through ``numba.njit`` or as ordinary Python.

Set ``KALMANLAB_PURE_NUMPY=1`` in the environment to force the
interpreted fallback (useful on platforms without a working numba, and
for the benchmark in ``benchmarks/bench_kernels.py``).  The selected
mode is exposed as ``NUMBA_ENABLED``.
"""

import math
import os

import numpy as np

_FORCE_FALLBACK = os.environ.get("KALMANLAB_PURE_NUMPY", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

if not _FORCE_FALLBACK:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - exercised via env flag instead
        njit = None
else:
    njit = None

NUMBA_ENABLED = njit is not None


def _jacobi_eigh(a, rel_tol, max_sweeps):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(w, v, sweeps)`` with unsorted eigenvalues ``w``, eigenvector
    columns ``v`` and the number of sweeps used.  ``sweeps == max_sweeps``
    with a non-converged off-diagonal signals failure to the caller.
    """
    n = a.shape[0]
    m = a.copy()
    v = np.eye(n)
    if n == 1:
        return np.array([m[0, 0]]), v, 0

    norm = 0.0
    for i in range(n):
        for j in range(n):
            norm += m[i, j] * m[i, j]
    norm = math.sqrt(norm)
    stop = rel_tol * rel_tol * norm * norm

    sweeps = 0
    while sweeps < max_sweeps:
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += m[i, j] * m[i, j]
        if off <= stop or off == 0.0:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if apq == 0.0:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # m <- J^T m J with the rotation J acting in the (p, q) plane
                for k in range(n):
                    akp = m[k, p]
                    akq = m[k, q]
                    m[k, p] = c * akp - s * akq
                    m[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = m[p, k]
                    aqk = m[q, k]
                    m[p, k] = c * apk - s * aqk
                    m[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq

    w = np.empty(n)
    for i in range(n):
        w[i] = m[i, i]
    return w, v, sweeps


def _mackey_glass_euler(length, tau, beta, gamma, n_exp, dt, x0):
    """Forward-Euler integration of the delay equation

        dx/dt = beta * x(t - tau) / (1 + x(t - tau)^n) - gamma * x(t)

    with constant pre-history ``x0``.  ``tau`` is a delay in samples.
    Returns ``(x, ok)``; ``ok`` is 0 when the trajectory blew up.
    """
    x = np.empty(length)
    prev = x0
    ok = 1
    for k in range(length):
        di = k - 1 - tau
        delayed = x[di] if di >= 0 else x0
        dx = beta * delayed / (1.0 + delayed**n_exp) - gamma * prev
        prev = prev + dt * dx
        x[k] = prev
        if not math.isfinite(prev) or abs(prev) > 1e9:
            ok = 0
            break
    return x, ok


if NUMBA_ENABLED:
    jacobi_eigh = njit(cache=True)(_jacobi_eigh)
    mackey_glass_euler = njit(cache=True)(_mackey_glass_euler)
else:
    jacobi_eigh = _jacobi_eigh
    mackey_glass_euler = _mackey_glass_euler
