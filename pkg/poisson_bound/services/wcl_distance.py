"""
Description: Distance between the stationary workload laws of the infinite M/GI/1 queue
             and its workload-capacity-limited (WCL) version.

             ‖π − π_L‖_ḡ ≤ λ·P·Σ_m (1−ρ)ρ^m ∫_0^L H_re^{*m}(dx) I(x),
             I(x) = ∫_{L−x}^∞ H(dy){V_0(x+y) + V_0(x)},   P = 1 + b(1−ρ)/f_inf.

             The series is cut at m_used with the remainder ρ^{m_used+1}·λP·I(L); the outer
             Stieltjes sums run on the equilibrium convolution tables and are refined until
             two successive grids agree.

Changelog:
- 2025-06-12: Initial creation.
- 2025-06-16: Inner integral evaluations capped and cached across grid refinements.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.config import CONFIG
from poisson_bound.core.errors import (
    DivergentInnerIntegral, InvalidParameter, MismatchedModel, ToleranceUnreachable, UnstableModel,
)
from poisson_bound.core.tolerances import Tolerances, default_tolerances
from poisson_bound.models.map_model import poisson_process
from poisson_bound.models.service_law import (
    EquilibriumGrid, Exponential, ParetoTail, ServiceLaw, WeibullTail, equilibrium_tables,
)
from poisson_bound.numerics.grids import GridSpec
from poisson_bound.numerics.quadrature import integrate
from poisson_bound.services.drift_builder import (
    DriftCertificate, Mg1LightCertificate, Mg1ModerateCertificate, Mg1PolynomialCertificate,
)
from utils.logger_manager import LoggerManager

logger = LoggerManager.get_logger(__file__)


@dataclass(frozen=True, eq=False)
class WclModel:
    """M/GI/1 with workload capacity L: an arrival is accepted iff w + s ≤ L."""

    lam: float
    law: ServiceLaw
    L: float = math.inf

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidParameter("lambda must be positive and finite", {"lambda": self.lam})
        if not self.L > 0:
            raise InvalidParameter("capacity L must be positive", {"L": self.L})
        if self.rho >= 1.0:
            raise UnstableModel("queue is unstable (rho >= 1)", {"rho": self.rho})

    @property
    def rho(self) -> float:
        return self.lam * self.law.mean

    def to_dict(self) -> Dict[str, Any]:
        return {"lambda": self.lam, "service": self.law.to_dict(),
                "L": "inf" if math.isinf(self.L) else self.L}


@dataclass(frozen=True)
class DistanceBound:
    value: float
    m_used: int
    truncation_error: float
    quadrature_error: float
    L: float = math.inf
    tol: float = 0.0
    prefactor: float = 1.0
    sup_term: float = 0.0
    grid_intervals: int = 0
    terms: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "provenance": "wcl_series_bound",
            "value": self.value,
            "m_used": self.m_used,
            "truncation_error": self.truncation_error,
            "quadrature_error": self.quadrature_error,
            "tol": self.tol,
            "prefactor": self.prefactor,
            "sup_term": self.sup_term,
            "grid_intervals": self.grid_intervals,
        }

    def term_rows(self):
        for t in self.terms:
            yield t["m"], t["weight"], t["integral"], t["contribution"]


# ---------------------------------------------------------------------------
# 内层尾积分
# ---------------------------------------------------------------------------

def _check_convergent(law: ServiceLaw, cert: DriftCertificate):
    """Reject certificate/law pairs whose inner integral diverges."""
    if isinstance(cert, Mg1LightCertificate):
        if law.is_heavy or cert.theta >= law.theta_bar:
            raise DivergentInnerIntegral("exponential V grows faster than the service tail",
                                         {"theta": cert.theta, "theta_bar": law.theta_bar})
    elif isinstance(cert, Mg1ModerateCertificate):
        if isinstance(law, ParetoTail):
            raise DivergentInnerIntegral("stretched-exponential V against a polynomial tail",
                                         {"family": law.family})
        if isinstance(law, WeibullTail) and (
                cert.beta > law.beta or (cert.beta == law.beta and cert.eps >= law.gamma)):
            raise DivergentInnerIntegral("V grows faster than the Weibull tail decays",
                                         {"eps": cert.eps, "beta": cert.beta,
                                          "gamma": law.gamma, "law_beta": law.beta})
    elif isinstance(cert, Mg1PolynomialCertificate):
        if isinstance(law, ParetoTail) and cert.kappa_tilde >= law.kappa:
            raise DivergentInnerIntegral("kappa_tilde reaches the tail index",
                                         {"kappa_tilde": cert.kappa_tilde, "kappa": law.kappa})


def inner_tail_integral(law: ServiceLaw, cert: DriftCertificate, x: float, L: float,
                        tol: Optional[Tolerances] = None) -> Tuple[float, float]:
    """∫_{L−x}^∞ H(dy){V_0(x+y) + V_0(x)}, returns (value, abs_error).

    Integration by parts turns the Stieltjes integral into
    H̄(a)[V_0(L) + V_0(x)] + ∫_a^∞ H̄(y) V'(x+y) dy with a = L − x.
    """
    if not 0.0 <= x <= L:
        raise InvalidParameter("x must lie in [0, L]", {"x": x, "L": L})
    _check_convergent(law, cert)
    a = L - x
    tail_a = float(law.tail(a))
    head = tail_a * (float(cert.V0(L)) + float(cert.V0(x)))

    if isinstance(cert, Mg1LightCertificate) and isinstance(law, Exponential):
        # ∫_a^∞ e^{-μy} cθ e^{θ(x+y)} dy
        theta, mu = cert.theta, law.mu
        rest = cert.scale * theta * math.exp(theta * x - (mu - theta) * a) / (mu - theta)
        return head + rest, 0.0

    rest, err = integrate(lambda y: law.weighted_tail(y, cert.log_dV(x + y)),
                          a, math.inf, points=law.breakpoints(), tol=tol)
    return head + rest, err


class _InnerTable:
    """Cache of I(x) on a fixed node set, reused across grid refinements."""

    def __init__(self, model: WclModel, cert: DriftCertificate, tol: Tolerances):
        self.model = model
        self.cert = cert
        self.tol = tol
        self.cache: Dict[float, Tuple[float, float]] = {}

    def __call__(self, x: float) -> Tuple[float, float]:
        if x not in self.cache:
            self.cache[x] = inner_tail_integral(self.model.law, self.cert, x, self.model.L, self.tol)
        return self.cache[x]

    def on(self, nodes: np.ndarray) -> Tuple[np.ndarray, float]:
        values = np.empty(nodes.size)
        max_err = 0.0
        for k, x in enumerate(nodes):
            values[k], err = self(float(x))
            max_err = max(max_err, err)
        # I is nondecreasing in x
        return np.maximum.accumulate(values), max_err


# ---------------------------------------------------------------------------
# 距离界
# ---------------------------------------------------------------------------

def _check_certificate(model: WclModel, cert: DriftCertificate):
    if cert.mp.M != 1:
        raise MismatchedModel("distance bound needs an M/GI/1 certificate", {"phases": cert.mp.M})
    if cert.map_key != poisson_process(model.lam).model_key or cert.law_key != repr(model.law):
        raise MismatchedModel("certificate belongs to a different model",
                              {"certificate": [cert.map_key, cert.law_key],
                               "model": model.to_dict()})


def _truncation_index(rho: float, scale: float, half_tol: float, max_terms: int) -> int:
    """Smallest m with ρ^{m+1}·scale ≤ half_tol."""
    if scale <= half_tol:
        return 0
    m = max(0, math.ceil(math.log(half_tol / scale) / math.log(rho)) - 1)
    while rho ** (m + 1) * scale > half_tol:
        m += 1
    if m > max_terms:
        raise ToleranceUnreachable("series would need too many terms",
                                   {"m": m, "max_terms": max_terms, "rho": rho})
    return m


def _series_integrals(eq_grid: EquilibriumGrid, inner: np.ndarray, K: int) -> np.ndarray:
    """∫_0^L I dH_re^{*m} for m = 1..n_max by trapezoidal Stieltjes sums over K cells."""
    tab = eq_grid.tables[1:, :K + 1]
    d_cdf = np.diff(tab, axis=1)
    mid = 0.5 * (inner[:-1] + inner[1:])
    return np.clip(d_cdf @ mid, 0.0, None)


def _node_values(table: _InnerTable, grid: np.ndarray, max_nodes: int) -> Tuple[np.ndarray, float]:
    """I on the table grid: exact at up to max_nodes + 1 nodes, interpolated between."""
    K = grid.size - 1
    stride = max(1, math.ceil(K / max_nodes))
    idx = np.arange(0, K + 1, stride)
    if idx[-1] != K:
        idx = np.append(idx, K)
    values, err = table.on(grid[idx])
    if stride == 1:
        return values, err
    return np.interp(grid, grid[idx], values), err


def wcl_distance_bound(model: WclModel, cert: DriftCertificate, tol: Optional[float] = None,
                       tolerances: Optional[Tolerances] = None) -> DistanceBound:
    tolerances = tolerances or default_tolerances()
    tol = float(tol if tol is not None else CONFIG.get("wcl.default_tol", 1e-3))
    if not tol > 0:
        raise InvalidParameter("tol must be positive", {"tol": tol})
    if math.isinf(model.L):
        return DistanceBound(value=0.0, m_used=0, truncation_error=0.0, quadrature_error=0.0,
                             L=model.L, tol=tol)
    _check_certificate(model, cert)

    rho, L = model.rho, model.L
    prefactor = 1.0 + cert.b * (1.0 - rho) / cert.f_inf
    w = model.lam * prefactor
    table = _InnerTable(model, cert, tolerances)

    sup_term, sup_err = table(L)
    m_used = _truncation_index(rho, w * sup_term, tol / 2.0,
                               int(CONFIG.get("wcl.max_series_terms", 100000)))
    truncation = rho ** (m_used + 1) * w * sup_term
    i0, err0 = table(0.0)
    logger.debug(f"WCL 截断: L={L:g} sup_term={sup_term:.6g} m_used={m_used} 余项={truncation:.3g}")

    weights = (1.0 - rho) * rho ** np.arange(m_used + 1)
    K = int(CONFIG.get("wcl.grid_points", 256))
    max_refinements = int(CONFIG.get("wcl.max_refinements", 8))
    max_nodes = int(CONFIG.get("wcl.max_inner_nodes", 4096))

    previous, quad_err = None, math.inf
    for refinement in range(max_refinements + 1):
        h = L / K
        spec = GridSpec(x_hi=(K + 1) * h, n_points=K + 2, mode="uniform")
        eq_grid = equilibrium_tables(model.law, m_used, spec, check_gap=False, tol=tolerances)
        grid = eq_grid.grid[:K + 1].copy()
        grid[-1] = L
        inner, inner_err = _node_values(table, grid, max_nodes)

        integrals = np.empty(m_used + 1)
        integrals[0] = i0
        if m_used > 0:
            integrals[1:] = _series_integrals(eq_grid, inner, K)

        if previous is not None:
            change = w * float(np.abs(weights @ (integrals - previous)))
            quad_err = change + w * max(inner_err, err0, sup_err)
            logger.debug(f"WCL 网格 K={K}: 变化={change:.3g} 求积误差={quad_err:.3g}")
            if quad_err <= tol / 2.0:
                break
        previous = integrals
        K *= 2
    else:
        raise ToleranceUnreachable("outer sums did not settle within the refinement budget",
                                   {"L": L, "tol": tol, "intervals": K // 2,
                                    "last_error": quad_err})

    contributions = w * weights * integrals
    terms = []
    for m in range(m_used + 1):
        dominated = integrals[m] <= sup_term * (1.0 + 1e-9)
        if not dominated:
            logger.warning(f"第 {m} 项超过 sup_term: {integrals[m]:.6g} > {sup_term:.6g}")
        terms.append({"m": m, "weight": float(weights[m]), "integral": float(integrals[m]),
                      "contribution": float(contributions[m])})

    value = math.fsum(contributions.tolist()) + truncation + quad_err
    logger.info(f"WCL 距离界 L={L:g}: {value:.6g} (m_used={m_used}, 截断={truncation:.3g}, "
                f"求积={quad_err:.3g})")
    return DistanceBound(value=max(0.0, value), m_used=m_used, truncation_error=truncation,
                         quadrature_error=quad_err, L=L, tol=tol, prefactor=prefactor,
                         sup_term=sup_term, grid_intervals=K, terms=terms)
