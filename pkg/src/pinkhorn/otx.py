"""Entropic optimal transport problem layer.

An instance holds a cost matrix, a regularization strength ``gamma`` and
positive marginals.  The unconstrained optimum of the regularized objective
is the Gibbs kernel exp(-C/gamma); solving the problem means KL-projecting
that kernel onto the row/column marginal constraints.  This module supplies
the kernel, plan reconstruction from dual potentials, objective and cost
evaluation, the equivalent constraint-system view, and post-hoc rounding of
nearly feasible plans.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import as_positive_matrix, as_positive_vector, kl_terms
from .penalty import ConstraintSystem
from .projection import Hyperplane

__all__ = [
    "OTProblem",
    "Potentials",
    "gibbs_kernel",
    "plan_from_potentials",
    "transport_cost",
    "ot_objective",
    "marginal_violation",
    "as_constraint_system",
    "round_to_feasible",
]

_MARGINAL_SUM_TOL = 1e-12
# exp overflows double just above this exponent
_EXP_OVERFLOW = 709.782712893384


@dataclass(frozen=True)
class OTProblem:
    """Cost matrix, regularization gamma > 0, and positive marginals p, q.

    Marginals must each sum to 1 (within 1e-12) and have no zero entries;
    points with zero mass should be stripped before construction.  The cost
    matrix may be rectangular.
    """

    cost: np.ndarray
    gamma: float
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        cost = np.atleast_2d(np.asarray(self.cost, dtype=np.float64))
        if cost.ndim != 2:
            raise ValueError("cost must be a matrix")
        if not np.all(np.isfinite(cost)):
            raise ValueError("cost entries must be finite")
        gamma = float(self.gamma)
        if not np.isfinite(gamma) or gamma <= 0.0:
            raise ValueError("gamma must be finite and > 0")
        p = as_positive_vector(self.p)
        q = as_positive_vector(self.q)
        if p.size != cost.shape[0] or q.size != cost.shape[1]:
            raise ValueError(
                f"marginal lengths {p.size}, {q.size} do not match cost shape {cost.shape}"
            )
        for name, m in (("p", p), ("q", q)):
            if abs(m.sum() - 1.0) > _MARGINAL_SUM_TOL:
                raise ValueError(f"marginal {name} must sum to 1 (got {m.sum()!r})")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape


@dataclass(frozen=True)
class Potentials:
    """Dual scaling vectors (u, v); the plan is exp(u_i - C_ij/gamma + v_j)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=np.float64))
        v = np.atleast_1d(np.asarray(self.v, dtype=np.float64))
        if u.ndim != 1 or v.ndim != 1:
            raise ValueError("potentials must be vectors")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("potentials must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)


def gibbs_kernel(problem: OTProblem) -> np.ndarray:
    """Log-domain Gibbs kernel -C/gamma (exp of it is the unconstrained optimum)."""
    return -problem.cost / problem.gamma


def plan_from_potentials(problem: OTProblem, pot: Potentials) -> np.ndarray:
    """Materialize the plan exp(u_i - C_ij/gamma + v_j) from dual potentials."""
    if pot.u.size != problem.shape[0] or pot.v.size != problem.shape[1]:
        raise ValueError("potential lengths do not match the problem shape")
    log_plan = pot.u[:, None] + gibbs_kernel(problem) + pot.v[None, :]
    if np.any(log_plan > _EXP_OVERFLOW):
        ij = np.argwhere(log_plan > _EXP_OVERFLOW)
        raise OverflowError(
            f"plan entries overflow at indices {[tuple(t) for t in ij[:5]]}"
        )
    return np.exp(log_plan)


def transport_cost(problem: OTProblem, plan) -> float:
    """Frobenius inner product <C, X> of the cost with a plan."""
    plan = np.atleast_2d(np.asarray(plan, dtype=np.float64))
    if plan.shape != problem.shape:
        raise ValueError(f"plan shape {plan.shape} does not match cost {problem.shape}")
    return float(np.sum(problem.cost * plan))


def _objective_from_marginals(r, c, p, q) -> float:
    """Objective from plan marginals r = X 1 and c = X^T 1.

    <r, log(r/p) - 1> + <1, p> + <c, log(c/q) - 1> + <1, q>, i.e. the sum of
    per-row and per-column KL penalties, evaluated via the cancellation-free
    elementwise form so near-feasible values stay resolvable.
    """
    return float(np.sum(kl_terms(r, p)) + np.sum(kl_terms(c, q)))


def ot_objective(problem: OTProblem, plan) -> float:
    """KL penalty objective of a positive plan: row part plus column part.

    Zero exactly at feasible plans, and identical to evaluating the penalty
    objective on the equivalent constraint system.
    """
    plan = as_positive_matrix(plan)
    if plan.shape != problem.shape:
        raise ValueError(f"plan shape {plan.shape} does not match cost {problem.shape}")
    return _objective_from_marginals(plan.sum(axis=1), plan.sum(axis=0), problem.p, problem.q)


def marginal_violation(problem: OTProblem, plan) -> float:
    """l1 marginal violation ||X 1 - p||_1 + ||X^T 1 - q||_1."""
    plan = np.atleast_2d(np.asarray(plan, dtype=np.float64))
    if plan.shape != problem.shape:
        raise ValueError(f"plan shape {plan.shape} does not match cost {problem.shape}")
    return float(
        np.abs(plan.sum(axis=1) - problem.p).sum()
        + np.abs(plan.sum(axis=0) - problem.q).sum()
    )


def as_constraint_system(problem: OTProblem) -> ConstraintSystem:
    """Marginal constraints as a 2-block system over vec(X), row-major.

    Block 0 holds the N row-sum constraints (targets p), block 1 the M
    column-sum constraints (targets q); supports within each block are
    disjoint by construction.
    """
    n, m = problem.shape
    rows = [
        Hyperplane(indices=np.arange(i * m, (i + 1) * m), values=np.ones(m), b=problem.p[i])
        for i in range(n)
    ]
    cols = [
        Hyperplane(indices=np.arange(j, n * m, m), values=np.ones(n), b=problem.q[j])
        for j in range(m)
    ]
    blocks = [list(range(n)), list(range(n, n + m))]
    return ConstraintSystem(rows + cols, dimension=n * m, blocks=blocks)


def round_to_feasible(problem: OTProblem, plan) -> np.ndarray:
    """Round a positive plan onto the marginal polytope.

    Rows are scaled down to at most p, columns to at most q, and the missing
    mass is restored by a rank-one correction, so the output has exact
    marginals and stays nonnegative.  The l1 size of the adjustment is on
    the order of the input's marginal violation.
    """
    plan = as_positive_matrix(plan)
    if plan.shape != problem.shape:
        raise ValueError(f"plan shape {plan.shape} does not match cost {problem.shape}")
    p, q = problem.p, problem.q
    x = plan * np.minimum(1.0, p / plan.sum(axis=1))[:, None]
    x = x * np.minimum(1.0, q / x.sum(axis=0))[None, :]
    err_p = np.maximum(p - x.sum(axis=1), 0.0)
    err_q = np.maximum(q - x.sum(axis=0), 0.0)
    total = err_p.sum()
    if total > 0.0:
        x = x + np.outer(err_p, err_q) / total
    return x
