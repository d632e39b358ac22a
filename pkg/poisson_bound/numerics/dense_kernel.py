"""
Description: Small dense matrix numerics. Matrix exponential by uniformization with a
             Poisson tail truncation, Perron-Frobenius eigenpair by power iteration.

Changelog:
- 2025-05-14: Initial creation.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import poisson

from poisson_bound.core.errors import (
    InvalidShape, PositiveDiagonal, NotConverged, NotNonnegative,
)
from poisson_bound.core.tolerances import Tolerances, default_tolerances


@dataclass(frozen=True)
class PerronPair:
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    iterations: int


def _square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidShape("matrix must be square and nonempty", {"shape": list(A.shape)})
    if not np.all(np.isfinite(A)):
        raise InvalidShape("matrix has non-finite entries")
    return A


def uniformization_terms(q: float, tol: float, max_terms: int) -> int:
    """Smallest N with Poisson(q) tail mass beyond N at most tol."""
    if q == 0.0:
        return 0
    n = int(poisson.isf(tol, q))
    while poisson.sf(n, q) > tol:
        n += 1
    if n > max_terms:
        raise NotConverged("uniformization needs too many terms",
                           {"zeta_t": q, "terms": n, "cap": max_terms})
    return n


def matrix_exponential(A, t: float, tol: Optional[float] = None,
                       tolerances: Optional[Tolerances] = None) -> np.ndarray:
    """exp(A t) for a (sub)generator A by uniformization."""
    tolerances = tolerances or default_tolerances()
    tol = tolerances.expm_tol if tol is None else tol
    A = _square(A)
    if t < 0:
        raise ValueError(f"t must be nonnegative: {t}")

    m = A.shape[0]
    off = A - np.diag(np.diag(A))
    if np.any(off < 0):
        raise NotNonnegative("off-diagonal entries must be nonnegative")
    if np.any(np.diag(A) > 0):
        raise PositiveDiagonal("diagonal entries must be nonpositive",
                               {"diag": np.diag(A).tolist()})

    eye = np.eye(m)
    if t == 0.0 or not np.any(A):
        return eye

    zeta = float(np.max(np.abs(np.diag(A))))
    if zeta == 0.0:
        # 对角全零但矩阵非零：改用行范数作为均匀化速率
        zeta = float(np.max(np.sum(np.abs(A), axis=1)))

    P = eye + A / zeta
    q = zeta * t
    n_terms = uniformization_terms(q, tol, tolerances.expm_max_terms)
    weights = poisson.pmf(np.arange(n_terms + 1), q)

    result = weights[0] * eye
    power = eye
    for w in weights[1:]:
        power = power @ P
        result += w * power
    return result


def perron_eigenpair(B, tol: Optional[float] = None, max_iter: Optional[int] = None,
                     tolerances: Optional[Tolerances] = None) -> PerronPair:
    """Perron root and right eigenvector (max entry 1) of a nonnegative irreducible B."""
    tolerances = tolerances or default_tolerances()
    tol = tolerances.perron_tol if tol is None else tol
    max_iter = tolerances.perron_max_iter if max_iter is None else max_iter
    B = _square(B)
    if np.any(B < 0):
        raise NotNonnegative("Perron iteration needs a nonnegative matrix")

    m = B.shape[0]
    shifted = B + np.eye(m)  # 消除周期性
    u = np.ones(m)
    residual = np.inf
    sigma = 0.0
    for it in range(1, max_iter + 1):
        v = shifted @ u
        u = v / v.max()
        j = int(np.argmax(u))
        u[j] = 1.0
        Bu = B @ u
        sigma = float(Bu[j])
        residual = float(np.max(np.abs(Bu - sigma * u)))
        if residual <= tol:
            break
    else:
        raise NotConverged("power iteration did not converge",
                           {"residual": residual, "max_iter": max_iter})

    if np.any(u <= 0):
        raise NotConverged("Perron vector is not strictly positive (reducible input?)",
                           {"eigenvector": u.tolist()})
    # 归一化后复核残差
    residual = float(np.max(np.abs(B @ u - sigma * u)))
    if residual > tol:
        raise NotConverged("residual grew after renormalisation", {"residual": residual})
    return PerronPair(eigenvalue=sigma, eigenvector=u, residual=residual, iterations=it)
