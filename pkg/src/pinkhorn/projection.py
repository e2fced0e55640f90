"""KL-geometry projections onto affine hyperplanes and the entropy prox.

The projection of a positive vector onto ``{z : <a, z> = b}`` in KL distance
has the form ``z = x * exp(alpha * a)`` (coordinate-wise).  For 0/1 rows the
multiplier is closed form, ``alpha = log(b / <a, x>)``, which is plain
proportional rescaling of the support.  For general nonnegative rows alpha
is the root of a monotone 1-D equation solved here by safeguarded Newton.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import as_positive_vector, log_sum_exp

__all__ = [
    "Hyperplane",
    "ConvergenceError",
    "project_binary",
    "project_general",
    "bregman_prox_entropy_linear",
]


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its iteration cap."""


@dataclass(frozen=True)
class Hyperplane:
    """Sparse nonnegative constraint row ``<a, x> = b`` with target ``b > 0``.

    Stored as sorted (index, value) pairs; explicit zeros are dropped.
    ``is_binary`` is true when every stored coefficient equals 1, the case
    with a closed-form KL projection.
    """

    indices: np.ndarray
    values: np.ndarray
    b: float
    is_binary: bool = field(init=False)

    def __post_init__(self):
        idx = np.atleast_1d(np.asarray(self.indices, dtype=np.intp))
        val = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        if idx.ndim != 1 or val.ndim != 1 or idx.size != val.size:
            raise ValueError("indices and values must be 1-D and equally long")
        if not np.all(np.isfinite(val)):
            raise ValueError("row values must be finite")
        if np.any(val < 0.0):
            raise ValueError("row values must be nonnegative")
        keep = val > 0.0
        idx, val = idx[keep], val[keep]
        if idx.size == 0:
            raise ValueError("row must have at least one positive entry")
        if np.any(idx < 0):
            raise ValueError("row indices must be nonnegative")
        order = np.argsort(idx)
        idx, val = idx[order], val[order]
        if idx.size > 1 and np.any(np.diff(idx) == 0):
            raise ValueError("row indices must be distinct")
        b = float(self.b)
        if not np.isfinite(b) or b <= 0.0:
            raise ValueError("target b must be finite and > 0")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "is_binary", bool(np.all(val == 1.0)))

    @classmethod
    def from_dense(cls, a, b: float) -> "Hyperplane":
        """Build a row from a dense coefficient vector, keeping its nonzeros."""
        a = np.atleast_1d(np.asarray(a, dtype=np.float64))
        if a.ndim != 1:
            raise ValueError("dense row must be 1-D")
        nz = np.nonzero(a)[0]
        return cls(indices=nz, values=a[nz], b=b)

    @property
    def support_size(self) -> int:
        return int(self.indices.size)

    def dot(self, x: np.ndarray) -> float:
        """Inner product ``<a, x>`` touching only the support."""
        return float(self.values @ x[self.indices])


def project_binary(x, h: Hyperplane) -> np.ndarray:
    """Closed-form KL projection onto a 0/1 row: rescale the support by b/<a,x>."""
    x = as_positive_vector(x)
    if not h.is_binary:
        raise ValueError("project_binary requires a 0/1 row")
    s = h.dot(x)
    if s <= 0.0:
        raise ValueError("inner product <a, x> must be positive")
    z = x.copy()
    z[h.indices] *= h.b / s
    return z


def project_general(x, h: Hyperplane, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """KL projection onto a general nonnegative row via a 1-D root solve.

    Finds the unique alpha with ``sum_j a_j x_j exp(alpha a_j) = b`` and
    returns ``x * exp(alpha * a)``.  The residual is driven below
    ``tol * b``; the solve works on log(sum exp) so huge exponents cannot
    overflow.  Safeguarded Newton: the root stays bracketed and any Newton
    step leaving the bracket falls back to bisection.
    """
    x = as_positive_vector(x)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    a = h.values
    xs = x[h.indices]
    s = float(a @ xs)
    if s <= 0.0:
        raise ValueError("inner product <a, x> must be positive")
    base = np.log(a) + np.log(xs)
    log_b = np.log(h.b)

    def residual(alpha: float) -> float:
        # log <a, x * exp(alpha a)> - log b
        return log_sum_exp(base + alpha * a) - log_b

    alpha = np.log(h.b / s) / float(a.max())
    r = residual(alpha)
    if abs(np.expm1(r)) <= tol:
        z = x.copy()
        z[h.indices] *= np.exp(alpha * a)
        return z

    # Expand an initial bracket [lo, hi] with residual(lo) < 0 < residual(hi).
    step = max(1.0, abs(alpha))
    if r > 0.0:
        hi, lo = alpha, alpha - step
        while residual(lo) > 0.0:
            lo -= step
            step *= 2.0
            if step > 1e308:
                raise ConvergenceError("failed to bracket the projection multiplier")
    else:
        lo, hi = alpha, alpha + step
        while residual(hi) < 0.0:
            hi += step
            step *= 2.0
            if step > 1e308:
                raise ConvergenceError("failed to bracket the projection multiplier")

    for _ in range(max_iter):
        r = residual(alpha)
        if abs(np.expm1(r)) <= tol:
            z = x.copy()
            z[h.indices] *= np.exp(alpha * a)
            return z
        if r > 0.0:
            hi = alpha
        else:
            lo = alpha
        # d/dalpha log sum exp = softmax-weighted mean of the coefficients
        w = np.exp(base + alpha * a - (r + log_b))
        slope = float(a @ w)
        nxt = alpha - r / slope if slope > 0.0 else np.inf
        alpha = nxt if lo < nxt < hi else 0.5 * (lo + hi)
    raise ConvergenceError(
        f"projection multiplier did not converge within {max_iter} iterations"
    )


def bregman_prox_entropy_linear(x, c, eta: float) -> np.ndarray:
    """Entropy-Bregman prox of ``f(z) = <z, log z> - <c, z>`` with weight eta.

    Minimizes ``eta * f(z) + KL(z, x)``.  Stationarity gives
    ``(1 + eta) log z = log x + eta (c - 1)``, i.e.

        z = x**(1/(1+eta)) * exp(eta * (c - 1) / (1 + eta))

    (note the power on x, which a plain rescaling formula would miss).
    """
    x = as_positive_vector(x)
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    if c.shape != x.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("linear coefficients must be finite")
    eta = float(eta)
    if not np.isfinite(eta) or eta < 0.0:
        raise ValueError("eta must be finite and >= 0")
    if eta == 0.0:
        return x.copy()
    log_z = (np.log(x) + eta * (c - 1.0)) / (1.0 + eta)
    with np.errstate(over="ignore"):
        z = np.exp(log_z)
    if np.any(np.isinf(z)):
        i = int(np.argmax(np.isinf(z)))
        raise OverflowError(f"prox overflows at index {i}")
    return z
