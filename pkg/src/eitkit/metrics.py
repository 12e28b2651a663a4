"""Reconstruction quality metrics."""

import numpy as np


def relative_error(sigma, sigma_true):
    """Squared-norm relative error ||sigma - sigma*||^2 / ||sigma*||^2."""
    sigma = np.asarray(sigma, dtype=float)
    sigma_true = np.asarray(sigma_true, dtype=float)
    if sigma.shape != sigma_true.shape:
        raise ValueError("fields live on different meshes")
    denom = float(np.dot(sigma_true, sigma_true))
    if denom == 0.0:
        raise ValueError("true conductivity is identically zero")
    diff = sigma - sigma_true
    return float(np.dot(diff, diff)) / denom
