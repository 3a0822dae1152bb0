"""Small dense linear-algebra helpers shared across modules."""

from __future__ import annotations

import numpy as np

ANNIHILATED = 1e-12


def as_matrix(x) -> np.ndarray:
    """Complex 2-D view; 1-D input becomes a single column."""
    a = np.asarray(x, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a vector or matrix, got shape {a.shape}")
    return a


def canonical_phase(cols: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive.

    Among entries of (numerically) equal magnitude the lowest index wins.
    """
    out = np.array(cols, dtype=complex, copy=True)
    for j in range(out.shape[1]):
        mag = np.abs(out[:, j])
        peak = mag.max()
        if peak == 0:
            continue
        idx = int(np.flatnonzero(mag >= peak * (1 - 1e-9))[0])
        out[:, j] *= np.exp(-1j * np.angle(out[idx, j]))
    return out


def unit_columns(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=0)
    norms[norms == 0] = 1.0
    return m / norms


def numerical_rank(s: np.ndarray, shape) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    tol = max(shape) * np.finfo(float).eps * s[0]
    return int(np.sum(s > tol))


def energy_rank(s: np.ndarray, fraction: float) -> int:
    """Smallest k whose leading singular values hold `fraction` of the energy."""
    e = s ** 2
    total = e.sum()
    if total == 0:
        return 0
    cum = np.cumsum(e) / total
    return int(min(np.searchsorted(cum, fraction * (1 - 1e-12)) + 1, s.size))


def regularized_apply(h: np.ndarray, x: np.ndarray, mu: float) -> np.ndarray:
    """``(I + mu h^H h)^{-1} x`` through the SVD filter factors of `h`.

    Components along right singular vector i are scaled by
    ``1 / (1 + mu s_i^2)``; the orthogonal complement is left untouched.
    """
    if mu == 0:
        return np.array(x, dtype=complex, copy=True)
    _, s, vh = np.linalg.svd(h, full_matrices=False)
    coeff = vh @ x
    shrink = 1.0 / (1.0 + mu * s ** 2) - 1.0
    return x + vh.conj().T @ (shrink[:, None] * coeff)
