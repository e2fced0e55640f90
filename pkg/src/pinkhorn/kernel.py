"""Entropy mirror map, KL divergence, and stable elementary operations.

Everything here is a pure function of strictly positive double arrays, the
natural domain of the entropy map x -> sum_i x_i (log x_i - 1).  Inputs with
zeros or negative entries are rejected eagerly rather than patched with
0*log(0) conventions.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_positive_vector",
    "as_positive_matrix",
    "kl_terms",
    "kl_div",
    "mirror_map",
    "grad_mirror",
    "grad_conjugate",
    "bregman_div",
    "log_sum_exp",
]


def as_positive_vector(x) -> np.ndarray:
    """Return ``x`` as a 1-D float64 array after checking finiteness and positivity."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got array of shape {v.shape}")
    if v.size == 0:
        raise ValueError("expected a vector with at least one entry")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    if np.any(v <= 0.0):
        raise ValueError("vector entries must be strictly positive")
    return v


def as_positive_matrix(x) -> np.ndarray:
    """Return ``x`` as a 2-D float64 array after checking finiteness and positivity."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {m.shape}")
    if m.size == 0:
        raise ValueError("expected a matrix with at least one entry")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if np.any(m <= 0.0):
        raise ValueError("matrix entries must be strictly positive")
    return m


def _check_same_shape(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")


def kl_terms(x, y) -> np.ndarray:
    """Elementwise KL terms x log(x/y) - x + y, computed without cancellation.

    The naive three-term form loses all precision once x is within a few
    ulps of y (each term is O(y) while the difference is O((x-y)^2/y)), so
    this evaluates y * ((1+t) log1p(t) - t) with t = x/y - 1 instead.
    Callers feeding greedy selection and descent checks rely on tiny terms
    staying resolvable.  Inputs must be positive arrays of matching shape.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ratio = x / y
    t = ratio - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        h = ratio * np.log1p(t) - t
    # x/y can underflow to zero for extreme scale gaps; the limit value is y
    h = np.where(ratio == 0.0, -t, h)
    # each term is mathematically >= 0; shave off negative roundoff
    return y * np.maximum(h, 0.0)


def kl_div(x, y) -> float:
    """KL divergence sum_i (x_i log(x_i / y_i) - x_i + y_i) of positive vectors.

    Nonnegative, and zero exactly when ``x == y``.
    """
    x = as_positive_vector(x)
    y = as_positive_vector(y)
    _check_same_shape(x, y)
    return float(np.sum(kl_terms(x, y)))


def mirror_map(x) -> float:
    """Entropy mirror map sum_i x_i (log x_i - 1)."""
    x = as_positive_vector(x)
    return float(np.sum(x * (np.log(x) - 1.0)))


def grad_mirror(x) -> np.ndarray:
    """Gradient of the entropy map: elementwise log."""
    return np.log(as_positive_vector(x))


def grad_conjugate(g) -> np.ndarray:
    """Gradient of the convex conjugate of the entropy map: elementwise exp.

    Inverts :func:`grad_mirror`, so ``grad_conjugate(grad_mirror(x)) == x``.
    Raises ``OverflowError`` when some exp(g_i) is not representable.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim == 0:
        g = g.reshape(1)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("expected a nonempty vector")
    if not np.all(np.isfinite(g)):
        raise ValueError("vector entries must be finite")
    with np.errstate(over="ignore"):
        out = np.exp(g)
    if np.any(np.isinf(out)):
        i = int(np.argmax(np.isinf(out)))
        raise OverflowError(f"exp overflows at index {i} (input {g[i]!r})")
    return out


def bregman_div(x, y) -> float:
    """Bregman divergence of the entropy map, evaluated from its definition.

    Computed as mirror_map(x) - mirror_map(y) - <grad_mirror(y), x - y>,
    which for this map coincides with :func:`kl_div`.
    """
    x = as_positive_vector(x)
    y = as_positive_vector(y)
    _check_same_shape(x, y)
    return float(mirror_map(x) - mirror_map(y) - grad_mirror(y) @ (x - y))


def log_sum_exp(v, axis: int | None = None):
    """Overflow-free log(sum(exp(v))) via the usual max shift.

    With ``axis`` given, reduces a matrix along that axis and returns a
    vector; otherwise reduces everything to a float.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty array")
    if not np.all(np.isfinite(v)):
        raise ValueError("log_sum_exp requires finite entries")
    m = np.max(v, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True))
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)
