"""
Description: Markovian arrival processes (C, D): validation and stationary phase
             quantities. Phases are 0-based.

Changelog:
- 2025-05-14: Initial creation.
"""

import hashlib
from dataclasses import dataclass
from typing import Any, Dict, Optional

import networkx as nx
import numpy as np

from poisson_bound.core.errors import (
    InvalidShape, NegativeRate, NoArrivals, NonGeneratorRows, Reducible, SingularSystem,
)
from poisson_bound.core.tolerances import Tolerances, default_tolerances


@dataclass(frozen=True, eq=False)
class MarkovArrivalProcess:
    C: np.ndarray
    D: np.ndarray

    @property
    def M(self) -> int:
        return self.C.shape[0]

    @property
    def generator(self) -> np.ndarray:
        return self.C + self.D

    @property
    def model_key(self) -> str:
        digest = hashlib.sha1(self.C.tobytes() + b"|" + self.D.tobytes())
        return f"map:{self.M}:{digest.hexdigest()[:16]}"

    def to_dict(self) -> Dict[str, Any]:
        return {"C": self.C.tolist(), "D": self.D.tolist()}


@dataclass(frozen=True, eq=False)
class PhaseStationary:
    varpi: np.ndarray
    lam: float
    residual: float


def _phase_graph(Q: np.ndarray) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(Q.shape[0]))
    rows, cols = np.nonzero(Q > 0)
    graph.add_edges_from((int(i), int(j)) for i, j in zip(rows, cols) if i != j)
    return graph


def validate_map(C, D, tol: Optional[Tolerances] = None) -> MarkovArrivalProcess:
    """Validate (C, D); raises the error naming the first violated invariant."""
    tol = tol or default_tolerances()
    C = np.array(C, dtype=float)
    D = np.array(D, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] == 0 or C.shape != D.shape:
        raise InvalidShape("C and D must be square of equal dimension",
                           {"C": list(C.shape), "D": list(D.shape)})
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(D))):
        raise InvalidShape("C and D must have finite entries")

    off = C - np.diag(np.diag(C))
    if np.any(off < 0) or np.any(D < 0):
        where = np.argwhere((off < 0) | (D < 0))[0].tolist()
        raise NegativeRate("off-diagonal C and all of D must be nonnegative", {"at": where})
    if not np.any(D > 0):
        raise NoArrivals("D has no positive entry")

    row_sums = (C + D).sum(axis=1)
    worst = float(np.max(np.abs(row_sums)))
    if worst > tol.structural_tol:
        raise NonGeneratorRows("rows of C + D must sum to zero",
                               {"row_sums": row_sums.tolist(), "max_abs": worst})
    if np.any(np.diag(C) >= 0):
        raise NonGeneratorRows("diagonal entries of C must be negative",
                               {"diag": np.diag(C).tolist()})

    if not nx.is_strongly_connected(_phase_graph(C + D)):
        components = [sorted(c) for c in nx.strongly_connected_components(_phase_graph(C + D))]
        raise Reducible("C + D is not irreducible", {"components": components})

    C.setflags(write=False)
    D.setflags(write=False)
    return MarkovArrivalProcess(C=C, D=D)


def poisson_process(lam: float) -> MarkovArrivalProcess:
    """Poisson arrivals of rate lam as a 1-phase MAP."""
    return validate_map([[-lam]], [[lam]])


def stationary_phase(mp: MarkovArrivalProcess, tol: Optional[Tolerances] = None) -> PhaseStationary:
    """ϖ(C+D) = 0, ϖe = 1 by a direct solve with the normalisation row appended."""
    tol = tol or default_tolerances()
    Q = mp.generator
    m = mp.M
    A = np.vstack([Q.T, np.ones((1, m))])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    varpi, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < m or np.min(varpi) < -tol.residual_tol:
        raise SingularSystem("stationary phase system is singular", {"rank": int(rank)})

    varpi = np.clip(varpi, 0.0, None)
    varpi = varpi / varpi.sum()
    residual = float(np.max(np.abs(varpi @ Q)))
    if residual > tol.residual_tol:
        raise SingularSystem("stationary phase residual too large", {"residual": residual})
    lam = float(varpi @ mp.D @ np.ones(m))
    return PhaseStationary(varpi=varpi, lam=lam, residual=residual)
