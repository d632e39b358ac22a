"""
Description: Explicit bounds on the standard solution h^(g) and the return-probability
             witnesses (T, ξ_T) they need.

             bound(x) = (1 + |⟨π,g⟩| / f_inf) · (V_0(x) + b·T/ξ_T)

Changelog:
- 2025-06-05: Initial creation.
- 2025-06-10: Witness grid search runs on a thread pool with ordered reduction.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from config.config import CONFIG
from poisson_bound.core.errors import (
    AllDegenerate, ConditionViolated, DegenerateXi, InvalidParameter, MismatchedModel,
    SmallSetNotAtom, ZeroServiceMass,
)
from poisson_bound.core.tolerances import Tolerances, default_tolerances
from poisson_bound.models.map_model import MarkovArrivalProcess
from poisson_bound.models.service_law import ServiceLaw
from poisson_bound.numerics.dense_kernel import matrix_exponential
from poisson_bound.services.drift_builder import DriftCertificate
from utils.logger_manager import LoggerManager

logger = LoggerManager.get_logger(__file__)

MAP_GI1_FORMULA = "map_gi1_formula"
SPECIAL_CASE_LIMIT = "special_case_limit"
USER_SUPPLIED = "user_supplied"


@dataclass(frozen=True)
class ReturnWitness:
    """inf_{x∈ℂ} P^T(x, α) ≥ ξ_T; ratio = T/ξ_T (stored directly for the limit case)."""

    ratio: float
    provenance: str
    map_key: str
    law_key: Optional[str] = None
    T: Optional[float] = None
    xi_T: Optional[float] = None
    i0: int = 0
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "provenance": self.provenance,
            "T": self.T,
            "xi_T": self.xi_T,
            "ratio": self.ratio,
            "i0": self.i0,
            "params": dict(self.params),
        }

    @classmethod
    def user_supplied(cls, T: float, xi_T: float, mp: MarkovArrivalProcess, law: ServiceLaw,
                      i0: int = 0) -> "ReturnWitness":
        if not (T > 0 and 0 < xi_T <= 1):
            raise InvalidParameter("witness needs T > 0 and xi_T in (0, 1]", {"T": T, "xi_T": xi_T})
        return cls(ratio=T / xi_T, provenance=USER_SUPPLIED, map_key=mp.model_key,
                   law_key=repr(law), T=T, xi_T=xi_T, i0=i0)


@dataclass(frozen=True, eq=False)
class BoundReport:
    cert: DriftCertificate
    witness: Optional[ReturnWitness]
    prefactor: float
    additive: float
    pi_g_abs: float
    form: str

    def evaluate(self, x: float, phase: int = 0, c: float = 1.0) -> float:
        return evaluate_bound(self, (x, phase), c)

    def curve(self, grid: Iterable[float], phases: Optional[Sequence[int]] = None) -> List[Dict[str, Any]]:
        phases = list(range(self.cert.mp.M)) if phases is None else list(phases)
        rows = []
        for x in grid:
            for i in phases:
                rows.append({"x": float(x), "phase": i, "bound": self.evaluate(float(x), i)})
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            "form": self.form,
            "prefactor": self.prefactor,
            "additive": self.additive,
            "pi_g_abs": self.pi_g_abs,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }


def _check_same_model(cert: DriftCertificate, w: ReturnWitness):
    if w.map_key != cert.map_key or (w.law_key is not None and w.law_key != cert.law_key):
        raise MismatchedModel("witness and certificate belong to different models",
                              {"witness": [w.map_key, w.law_key], "certificate": [cert.map_key, cert.law_key]})
    if w.i0 != cert.i0:
        raise MismatchedModel("witness and certificate use different atom phases",
                              {"witness_i0": w.i0, "certificate_i0": cert.i0})


def general_bound(cert: DriftCertificate, w: ReturnWitness,
                  pi_g_abs: Optional[float] = None) -> BoundReport:
    _check_same_model(cert, w)
    if pi_g_abs is None:
        pi_g_abs = cert.b * cert.pi_small_set
    if pi_g_abs < 0:
        raise InvalidParameter("pi_g_abs must be nonnegative", {"pi_g_abs": pi_g_abs})
    return BoundReport(cert=cert, witness=w, prefactor=1.0 + pi_g_abs / cert.f_inf,
                       additive=cert.b * w.ratio, pi_g_abs=pi_g_abs, form="general")


def weaker_bound(cert: DriftCertificate, w: Optional[ReturnWitness] = None) -> BoundReport:
    """g-insensitive form with π(ℂ) replaced by 1."""
    if w is None:
        if not cert.small_set_is_atom:
            raise SmallSetNotAtom("a witness is needed when the small set is not the atom")
        additive = 0.0
    else:
        _check_same_model(cert, w)
        additive = cert.b * w.ratio
    return BoundReport(cert=cert, witness=w, prefactor=1.0 + cert.b / cert.f_inf,
                       additive=additive, pi_g_abs=cert.b, form="weaker")


def atom_bound(cert: DriftCertificate, pi_alpha: Optional[float] = None) -> BoundReport:
    if not cert.small_set_is_atom:
        raise SmallSetNotAtom("atom bound needs the small set to be the atom",
                              {"phases": cert.mp.M})
    if pi_alpha is None:
        pi_alpha = cert.pi_small_set
    if not 0.0 <= pi_alpha <= 1.0:
        raise InvalidParameter("pi_alpha must be a probability", {"pi_alpha": pi_alpha})
    pi_g_abs = cert.b * pi_alpha
    return BoundReport(cert=cert, witness=None, prefactor=1.0 + pi_g_abs / cert.f_inf,
                       additive=0.0, pi_g_abs=pi_g_abs, form="atom")


def evaluate_bound(report: BoundReport, state, c: float = 1.0) -> float:
    """Bound on |h^(g)(state)| for every |g| ≤ c·f."""
    if isinstance(state, tuple):
        x, phase = state
    else:
        x, phase = state, 0
    v0 = float(report.cert.V0(float(x), int(phase)))
    return c * max(0.0, report.prefactor * (v0 + report.additive))


# ---------------------------------------------------------------------------
# MAP/GI/1 见证
# ---------------------------------------------------------------------------

def _log_product_min_column(E0: np.ndarray, step: np.ndarray, M: int, i0: int) -> float:
    """log min_i [E0 · step^M]_{i,i0}, rescaling after every factor."""
    log_scale = 0.0
    prod = E0.copy()
    for _ in range(M):
        prod = prod @ step
        s = float(prod.max())
        if s <= 0.0:
            return -math.inf
        prod /= s
        log_scale += math.log(s)
    col_min = float(prod[:, i0].min())
    if col_min <= 0.0:
        return -math.inf
    return math.log(col_min) + log_scale


def map_gi1_witness(mp: MarkovArrivalProcess, law: ServiceLaw, i0: int, t0: float, x0: float,
                    tol: Optional[Tolerances] = None, _expm=None) -> ReturnWitness:
    """T = t0 + M·x0, ξ_T = H(x0)^M · min_i [e^{C t0} (D e^{C x0})^M]_{i,i0}."""
    tol = tol or default_tolerances()
    if not (t0 > 0 and x0 > 0):
        raise InvalidParameter("t0 and x0 must be positive", {"t0": t0, "x0": x0})
    h_x0 = float(law.cdf(x0))
    if h_x0 <= 0.0:
        raise ZeroServiceMass("H(x0) = 0", {"x0": x0})
    expm = _expm or (lambda t: matrix_exponential(mp.C, t, tolerances=tol))
    M = mp.M
    log_xi = M * math.log(h_x0) + _log_product_min_column(expm(t0), mp.D @ expm(x0), M, i0)
    if log_xi < math.log(tol.xi_floor):
        raise DegenerateXi("xi_T underflows for this (t0, x0)",
                           {"t0": t0, "x0": x0, "log_xi": log_xi})
    xi = min(1.0, math.exp(log_xi))
    T = t0 + M * x0
    return ReturnWitness(ratio=T / xi, provenance=MAP_GI1_FORMULA, map_key=mp.model_key,
                         law_key=repr(law), T=T, xi_T=xi, i0=i0, params={"t0": t0, "x0": x0})


def map_gi1_witness_special(mp: MarkovArrivalProcess, i0: int) -> ReturnWitness:
    """T ↓ 0 limit when C_{i,i0} > 0 for every i ≠ i0: T/ξ_T → 1/min_{i≠i0} C_{i,i0}."""
    if mp.M == 1:
        return ReturnWitness(ratio=0.0, provenance=SPECIAL_CASE_LIMIT, map_key=mp.model_key,
                             i0=i0, params={"min_rate": None})
    rates = np.delete(mp.C[:, i0], i0)
    min_rate = float(rates.min())
    if min_rate <= 0.0:
        raise ConditionViolated("C[i, i0] must be positive for all i != i0",
                                {"column": mp.C[:, i0].tolist(), "i0": i0})
    return ReturnWitness(ratio=1.0 / min_rate, provenance=SPECIAL_CASE_LIMIT,
                         map_key=mp.model_key, i0=i0, params={"min_rate": min_rate})


def witness_grid(law: ServiceLaw) -> List[tuple]:
    t0s = [float(t) for t in CONFIG.get("search.witness.t0_values", [0.05, 0.1, 0.25, 0.5, 1.0, 2.0])]
    mults = CONFIG.get("search.witness.x0_mean_multipliers", [0.5, 1.0, 2.0, 4.0])
    return [(t0, float(m) * law.mean) for t0 in t0s for m in mults]


def optimize_witness(mp: MarkovArrivalProcess, law: ServiceLaw, i0: int,
                     grid: Iterable[tuple], tol: Optional[Tolerances] = None) -> ReturnWitness:
    """Minimise T/ξ_T over (t0, x0); ties go to the lexicographically smallest pair."""
    tol = tol or default_tolerances()
    points = sorted(set((float(t0), float(x0)) for t0, x0 in grid))
    if not points:
        raise InvalidParameter("witness grid is empty")

    @lru_cache(maxsize=None)
    def expm(t):
        return matrix_exponential(mp.C, t, tolerances=tol)

    def evaluate(point):
        try:
            return map_gi1_witness(mp, law, i0, point[0], point[1], tol, _expm=expm)
        except (DegenerateXi, ZeroServiceMass) as e:
            logger.debug(f"见证候选 {point} 被跳过: {e.code}")
            return None

    max_workers = int(CONFIG.get("search.max_workers", 4))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(evaluate, points))

    best = None
    for w in results:
        if w is not None and (best is None or w.ratio < best.ratio):
            best = w
    if best is None:
        raise AllDegenerate("every witness candidate is degenerate", {"candidates": len(points)})
    logger.info(f"最优见证: t0={best.params['t0']:.4g} x0={best.params['x0']:.4g} "
                f"T/ξ_T={best.ratio:.6g}")
    return best
