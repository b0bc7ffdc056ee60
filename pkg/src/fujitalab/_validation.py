"""Small argument checks shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .geometry import VARIANTS, ManifoldModel


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or isinstance(value, bool) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (strict and value == 0):
        raise ValueError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value!r}")
    return float(value)


def check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant


def check_profiles(X, n_nodes):
    """2-D array of non-negative profiles, one row per sample, ``n_nodes`` columns."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != n_nodes:
        raise ValueError(f"X has {X.shape[1]} columns; expected {n_nodes} (one per grid node)")
    if np.any(X < 0):
        raise ValueError("profiles must be non-negative")
    return X


def check_amplitudes(X):
    """Column of non-negative amplitudes, accepting shape ``(n,)`` or ``(n, 1)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != 1:
        raise ValueError("amplitude input must have a single column")
    if np.any(X < 0):
        raise ValueError("amplitudes must be non-negative")
    return X[:, 0]


def make_manifold(n, variant, kappa=1.0, gamma=0.0, c_hat=1.0, r_max=40.0):
    return ManifoldModel(n=int(n), variant=check_variant(variant), kappa=kappa, gamma=gamma,
                         c_hat=c_hat, r_max=r_max)
