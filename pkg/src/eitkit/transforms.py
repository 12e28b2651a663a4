"""Sparsifying maps for element-conductivity vectors.

The Haar map is a full-depth orthonormal 1-D wavelet transform applied to
the element vector in mesh order, zero-padded to the next power of two.
Piecewise-constant fields with few interfaces compress to a handful of
large coefficients.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

_SQRT2 = np.sqrt(2.0)


def _next_pow2(n):
    p = 1
    while p < n:
        p *= 2
    return p


def haar_forward(x):
    """Full-depth orthonormal Haar coefficients of a power-of-two vector.

    Layout: approximation coefficient first, then detail blocks from
    coarsest to finest.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    out = np.empty(n)
    lo = x
    pos = n
    while lo.shape[0] > 1:
        half = lo.shape[0] // 2
        even, odd = lo[0::2], lo[1::2]
        out[pos - half:pos] = (even - odd) / _SQRT2
        lo = (even + odd) / _SQRT2
        pos -= half
    out[0] = lo[0]
    return out


def haar_inverse(c):
    """Invert :func:`haar_forward` (the adjoint, by orthonormality)."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    lo = c[:1].copy()
    width = 1
    while width < n:
        hi = c[width:2 * width]
        nxt = np.empty(2 * width)
        nxt[0::2] = (lo + hi) / _SQRT2
        nxt[1::2] = (lo - hi) / _SQRT2
        lo = nxt
        width *= 2
    return lo


class HaarBasis:
    """Orthonormal Haar map on length-``n`` vectors with zero padding.

    ``forward`` maps R^n into R^N (N the next power of two); ``adjoint``
    maps back and equals the inverse on the range of ``forward``.
    """

    def __init__(self, n):
        self.n = int(n)
        self.padded = _next_pow2(self.n)

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected length {self.n}, got {x.shape}")
        buf = np.zeros(self.padded)
        buf[:self.n] = x
        return haar_forward(buf)

    def adjoint(self, c):
        c = np.asarray(c, dtype=float)
        if c.shape != (self.padded,):
            raise ValueError(f"expected length {self.padded}, got {c.shape}")
        return haar_inverse(c)[:self.n]

    inverse = adjoint


class IdentityBasis:
    """Trivial transform; useful for collapsing the two GN update variants."""

    def __init__(self, n):
        self.n = int(n)
        self.padded = self.n

    def forward(self, x):
        return np.array(x, dtype=float)

    def adjoint(self, c):
        return np.array(c, dtype=float)

    inverse = adjoint


class HaarTransform(TransformerMixin, BaseEstimator):
    """Scikit-learn style wrapper around the orthonormal Haar map.

    Rows of ``X`` are transformed independently; 1-D input is treated as a
    single vector. ``inverse_transform(transform(X))`` recovers ``X``.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        self.n_features_in_ = X.shape[-1]
        self.basis_ = HaarBasis(self.n_features_in_)
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self.basis_.forward(X)
        return np.stack([self.basis_.forward(row) for row in X])

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self.basis_.adjoint(X)
        return np.stack([self.basis_.adjoint(row) for row in X])


def inhomogeneity(sigma, sigma0):
    """Deviation of a conductivity field from the background, elementwise."""
    sigma = np.asarray(sigma, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    if sigma.shape != sigma0.shape:
        raise ValueError("fields live on different meshes")
    return sigma - sigma0
