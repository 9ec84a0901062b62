"""Hot numeric kernels: batched and sliding sup-norm statistics.

Both kernels exist in two flavors: a numba ``@njit`` implementation and a
pure-numpy fallback. The active backend is chosen once at import time from
the ``GGMWATCH_NUMBA`` environment variable (set it to ``0`` to force the
numpy path). ``benchmarks/bench_kernels.py`` compares the two.

The kernels operate on plain float64 arrays; the standardized deviation of a
window ``X`` (rows are samples) with respect to a precision matrix ``omega``
and its entry-wise scale ``psi`` is

    E = (Y'Y - w * omega) / sqrt(w) * psi,    Y = X @ omega,

and each kernel returns ``max |E|`` per window.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "numba_available",
    "window_supnorms",
    "sliding_supnorms",
    "window_supnorms_numpy",
    "sliding_supnorms_numpy",
]


def window_supnorms_numpy(samples: np.ndarray, omega: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Sup-norm of the standardized deviation for a batch of windows.

    Parameters
    ----------
    samples : ndarray, shape (m, w, p)
        ``m`` independent windows of ``w`` samples each.
    omega, psi : ndarray, shape (p, p)
        Precision matrix and entry-wise scale used for standardization.

    Returns
    -------
    ndarray, shape (m,)
    """
    w = samples.shape[1]
    y = samples @ omega
    s = np.matmul(y.transpose(0, 2, 1), y)
    e = (s - w * omega) / np.sqrt(w) * psi
    return np.abs(e).max(axis=(1, 2))


def sliding_supnorms_numpy(x: np.ndarray, omega: np.ndarray, psi: np.ndarray, w: int) -> np.ndarray:
    """Sup-norm trajectory over all length-``w`` windows of a sample path.

    Uses a cumulative sum of outer products, the vectorized equivalent of the
    rank-1 add/subtract ring update.

    Parameters
    ----------
    x : ndarray, shape (T, p)
    omega, psi : ndarray, shape (p, p)
    w : int
        Window length; requires ``T >= w``.

    Returns
    -------
    ndarray, shape (T - w + 1,)
    """
    t_len, p = x.shape
    if t_len < w:
        raise ValueError(f"path of length {t_len} shorter than window {w}")
    y = x @ omega
    g = np.einsum("ti,tj->tij", y, y)
    c = np.empty((t_len + 1, p, p))
    c[0] = 0.0
    np.cumsum(g, axis=0, out=c[1:])
    s = c[w:] - c[:-w]
    e = (s - w * omega) / np.sqrt(w) * psi
    return np.abs(e).max(axis=(1, 2))


try:
    from numba import njit

    numba_available = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    numba_available = False


if numba_available:

    @njit(cache=True)
    def _window_supnorms_numba(samples, omega, psi):
        m, w, p = samples.shape
        out = np.empty(m)
        sw = np.sqrt(w)
        for r in range(m):
            y = np.dot(samples[r], omega)
            s = np.dot(np.ascontiguousarray(y.T), y)
            best = 0.0
            for u in range(p):
                for v in range(u, p):
                    e = abs((s[u, v] - w * omega[u, v]) / sw * psi[u, v])
                    if e > best:
                        best = e
            out[r] = best
        return out

    @njit(cache=True)
    def _sliding_supnorms_numba(x, omega, psi, w):
        t_len, p = x.shape
        y = np.dot(x, omega)
        nwin = t_len - w + 1
        out = np.empty(nwin)
        sw = np.sqrt(w)
        s = np.zeros((p, p))
        for l in range(w):
            for u in range(p):
                t = y[l, u]
                for v in range(u, p):
                    s[u, v] += t * y[l, v]
        for k in range(nwin):
            if k > 0:
                lo = k - 1
                hi = k + w - 1
                for u in range(p):
                    a = y[hi, u]
                    b = y[lo, u]
                    for v in range(u, p):
                        s[u, v] += a * y[hi, v] - b * y[lo, v]
            best = 0.0
            for u in range(p):
                for v in range(u, p):
                    e = abs((s[u, v] - w * omega[u, v]) / sw * psi[u, v])
                    if e > best:
                        best = e
            out[k] = best
        return out

    def _window_numba(samples, omega, psi):
        return _window_supnorms_numba(
            np.ascontiguousarray(samples, dtype=np.float64),
            np.ascontiguousarray(omega, dtype=np.float64),
            np.ascontiguousarray(psi, dtype=np.float64),
        )

    def _sliding_numba(x, omega, psi, w):
        if x.shape[0] < w:
            raise ValueError(f"path of length {x.shape[0]} shorter than window {w}")
        return _sliding_supnorms_numba(
            np.ascontiguousarray(x, dtype=np.float64),
            np.ascontiguousarray(omega, dtype=np.float64),
            np.ascontiguousarray(psi, dtype=np.float64),
            w,
        )


if numba_available and os.environ.get("GGMWATCH_NUMBA", "1") != "0":
    BACKEND = "numba"
    window_supnorms = _window_numba
    sliding_supnorms = _sliding_numba
else:
    BACKEND = "numpy"
    window_supnorms = window_supnorms_numpy
    sliding_supnorms = sliding_supnorms_numpy
