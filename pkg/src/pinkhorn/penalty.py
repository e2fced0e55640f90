"""The KL penalty objective f(x) = KL(Ax || b) for nonnegative systems Ax = b.

Each constraint row contributes f_i(x) = <a_i,x> log(<a_i,x>/b_i) - <a_i,x>
+ b_i, a nonnegative penalty that vanishes exactly on the constraint.  Rows
are grouped into blocks of pairwise support-disjoint constraints; a block is
what one mirror-descent step updates at once (simultaneous row or column
normalization being the motivating case).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import kl_terms
from .projection import Hyperplane

__all__ = [
    "ConstraintSystem",
    "Residual",
    "eval_fi",
    "grad_fi",
    "eval_f",
    "rel_smooth_constant",
]


@dataclass(frozen=True)
class Residual:
    """Per-constraint KL penalties plus the aggregate violation metrics."""

    per_constraint_kl: np.ndarray
    l1_violation: float
    objective: float


class ConstraintSystem:
    """Rows ``<a_i, x> = b_i`` over R^d with a block partition.

    Within a block, supports must be pairwise disjoint (validated here), so
    one multiplicative update can apply every row of the block at once.  By
    default every row is its own block.

    Rows are also kept in a concatenated index/value layout so that all the
    inner products ``<a_i, x>`` can be evaluated in one vectorized pass.
    """

    def __init__(self, rows, dimension: int, blocks=None):
        rows = list(rows)
        if not rows:
            raise ValueError("constraint system needs at least one row")
        for r in rows:
            if not isinstance(r, Hyperplane):
                raise TypeError("rows must be Hyperplane instances")
        dimension = int(dimension)
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        for i, r in enumerate(rows):
            if int(r.indices[-1]) >= dimension:
                raise ValueError(
                    f"row {i} references index {int(r.indices[-1])} >= dimension {dimension}"
                )

        if blocks is None:
            blocks = [[i] for i in range(len(rows))]
        blocks = [[int(i) for i in block] for block in blocks]
        flat = sorted(i for block in blocks for i in block)
        if flat != list(range(len(rows))):
            raise ValueError("blocks must partition the row indices exactly")
        for k, block in enumerate(blocks):
            if not block:
                raise ValueError(f"block {k} is empty")
            support = np.concatenate([rows[i].indices for i in block])
            if np.unique(support).size != support.size:
                raise ValueError(f"block {k} has rows with overlapping supports")

        self.rows: list[Hyperplane] = rows
        self.dimension = dimension
        self.blocks: list[list[int]] = blocks

        self.b = np.array([r.b for r in rows])
        self._cat_idx = np.concatenate([r.indices for r in rows])
        self._cat_val = np.concatenate([r.values for r in rows])
        counts = np.array([r.support_size for r in rows])
        self._offsets = np.concatenate(([0], np.cumsum(counts)))[:-1]
        # per-block concatenated layout used by the solvers' fast path
        self._block_idx = [np.concatenate([rows[i].indices for i in blk]) for blk in blocks]
        self._block_val = [np.concatenate([rows[i].values for i in blk]) for blk in blocks]
        self._block_row = [
            np.concatenate([np.full(rows[i].support_size, i, dtype=np.intp) for i in blk])
            for blk in blocks
        ]

    @property
    def n_constraints(self) -> int:
        return len(self.rows)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def dots(self, x: np.ndarray) -> np.ndarray:
        """All inner products ``<a_i, x>`` in one vectorized pass."""
        return np.add.reduceat(self._cat_val * x[self._cat_idx], self._offsets)

    def block_smooth_constant(self, k: int) -> float:
        """Relative-smoothness constant of one block's summed penalty.

        Supports inside a block are disjoint, so the block constant is the
        max of the per-row constants.
        """
        return max(rel_smooth_constant(self, i) for i in self.blocks[k])

    def smooth_constant(self) -> float:
        """Constant for the full objective: sum of the per-block constants."""
        return sum(self.block_smooth_constant(k) for k in range(self.n_blocks))

    @classmethod
    def from_dense(cls, A, b, blocks=None) -> "ConstraintSystem":
        """Build from a dense nonnegative matrix A and positive targets b."""
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        b = np.atleast_1d(np.asarray(b, dtype=np.float64))
        if A.shape[0] != b.size:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        rows = [Hyperplane.from_dense(A[i], b[i]) for i in range(A.shape[0])]
        return cls(rows, dimension=A.shape[1], blocks=blocks)

    @classmethod
    def from_triplets(cls, triplets, b, dimension=None, blocks=None) -> "ConstraintSystem":
        """Build from (row, col, value) triplets; n rows is set by len(b)."""
        b = np.atleast_1d(np.asarray(b, dtype=np.float64))
        n = b.size
        cols: list[list[int]] = [[] for _ in range(n)]
        vals: list[list[float]] = [[] for _ in range(n)]
        max_col = -1
        for r, c, v in triplets:
            r, c = int(r), int(c)
            if not 0 <= r < n:
                raise ValueError(f"triplet row {r} out of range for {n} targets")
            cols[r].append(c)
            vals[r].append(float(v))
            max_col = max(max_col, c)
        if dimension is None:
            dimension = max_col + 1
        rows = [Hyperplane(indices=cols[i], values=vals[i], b=b[i]) for i in range(n)]
        return cls(rows, dimension=dimension, blocks=blocks)


def eval_fi(system: ConstraintSystem, i: int, x) -> float:
    """One penalty term: s log(s/b_i) - s + b_i with s = <a_i, x>."""
    h = system.rows[i]
    s = h.dot(np.asarray(x, dtype=np.float64))
    if s <= 0.0:
        raise ValueError(f"inner product for constraint {i} is not positive")
    return float(kl_terms(s, h.b))


def grad_fi(system: ConstraintSystem, i: int, x) -> np.ndarray:
    """Gradient a_i log(<a_i,x>/b_i), dense but supported only on the row.

    Vanishes wherever the constraint holds, so a feasible point zeroes every
    component gradient simultaneously.
    """
    h = system.rows[i]
    x = np.asarray(x, dtype=np.float64)
    s = h.dot(x)
    if s <= 0.0:
        raise ValueError(f"inner product for constraint {i} is not positive")
    g = np.zeros(system.dimension)
    g[h.indices] = h.values * np.log(s / h.b)
    return g


def eval_f(system: ConstraintSystem, x) -> Residual:
    """Full objective sum_i f_i(x) together with the l1 constraint violation."""
    x = np.asarray(x, dtype=np.float64)
    s = system.dots(x)
    if np.any(s <= 0.0):
        i = int(np.argmax(s <= 0.0))
        raise ValueError(f"inner product for constraint {i} is not positive")
    b = system.b
    per = kl_terms(s, b)
    return Residual(
        per_constraint_kl=per,
        l1_violation=float(np.sum(np.abs(s - b))),
        objective=float(per.sum()),
    )


def rel_smooth_constant(system: ConstraintSystem, i: int) -> float:
    """Relative-smoothness constant of f_i with respect to the entropy map.

    1 for a 0/1 row; max_j a_ij in general.  The general bound follows from
    Cauchy-Schwarz: (sum_j a_j v_j)^2 / <a,x> <= max_j a_j * sum_j v_j^2/x_j.
    """
    h = system.rows[i]
    if h.is_binary:
        return 1.0
    return float(h.values.max())
