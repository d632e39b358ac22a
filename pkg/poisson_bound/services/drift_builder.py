"""
Description: Drift certificates (V, f, b, small set, atom) for MAP/GI/1 and M/GI/1 in
             the light, moderate and polynomial regimes, with the parameter searches
             that pick θ, (ε, x0, ρ̃) and (κ̃, x0, ρ̃).

Changelog:
- 2025-05-22: Initial creation.
- 2025-06-03: Coarse-to-fine auto search, scaled certificates.
"""

import itertools
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.config import CONFIG
from poisson_bound.core.errors import (
    EnvelopeViolated, InfeasibleParameters, InfeasibleTheta, InvalidParameter,
    NoFeasibleTheta, NotConverged, OutsideDomain, PoissonBoundError, TailTooHeavy,
    UnstableModel,
)
from poisson_bound.core.tolerances import Tolerances, default_tolerances
from poisson_bound.models.map_model import MarkovArrivalProcess, poisson_process, stationary_phase
from poisson_bound.models.service_law import (
    Moderate, Polynomial, ServiceLaw, TailEnvelope, verify_envelope,
)
from poisson_bound.numerics.dense_kernel import perron_eigenpair
from poisson_bound.numerics.quadrature import integrate
from poisson_bound.services.rewards import DerivativeReward, ExponentialReward, Reward
from utils.logger_manager import LoggerManager

logger = LoggerManager.get_logger(__file__)


# ---------------------------------------------------------------------------
# 证书
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False, kw_only=True)
class DriftCertificate(ABC):
    """𝒜V ≤ -f + b·1_ℂ with ℂ = {0} × phases and atom α = (0, i0)."""

    regime: ClassVar[str] = ""

    b: float
    f_inf: float
    rho: float
    mp: MarkovArrivalProcess = field(repr=False)
    law: ServiceLaw
    scale: float = 1.0

    @abstractmethod
    def V(self, x, phase: int = 0):
        ...

    @abstractmethod
    def dV(self, x, phase: int = 0):
        ...

    def log_dV(self, x: float, phase: int = 0) -> float:
        """log V'(x, phase); finite where V' itself would overflow."""
        with np.errstate(divide="ignore"):
            return float(np.log(self.dV(x, phase)))

    @abstractmethod
    def V0(self, x, phase: int = 0):
        ...

    @abstractmethod
    def f(self, x, phase: int = 0):
        ...

    @abstractmethod
    def reward(self, scale: float = 1.0) -> Reward:
        """Simulator reward for g = scale · f."""

    @abstractmethod
    def params(self) -> Dict[str, Any]:
        ...

    @property
    def i0(self) -> int:
        return 0

    @property
    def map_key(self) -> str:
        return self.mp.model_key

    @property
    def law_key(self) -> str:
        return repr(self.law)

    @property
    def small_set_is_atom(self) -> bool:
        return self.mp.M == 1

    @property
    def pi_small_set(self) -> float:
        """π(ℂ) = P(W = 0) = 1 - ρ."""
        return 1.0 - self.rho

    def in_small_set(self, x: float, phase: int = 0) -> bool:
        return x == 0.0

    def in_atom(self, x: float, phase: int = 0) -> bool:
        return x == 0.0 and phase == self.i0

    def scaled(self, c: float) -> "DriftCertificate":
        """Certificate for c·f: V, V0, f, b and f_inf all scale by c."""
        if not c > 0:
            raise InvalidParameter("scale must be positive", {"c": c})
        return replace(self, scale=self.scale * c, b=self.b * c, f_inf=self.f_inf * c)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "regime": self.regime,
            "params": self.params(),
            "b": self.b,
            "f_inf": self.f_inf,
            "rho": self.rho,
            "scale": self.scale,
            "small_set": "{0} x phases",
            "atom": {"workload": 0.0, "phase": self.i0},
        }


@dataclass(frozen=True, eq=False, kw_only=True)
class MapGi1ExpCertificate(DriftCertificate):
    """V(x, i) = u_i e^{θx}, f = (θ - σ)V, b = θ."""

    regime: ClassVar[str] = "map_gi1_exp"

    theta: float
    sigma: float
    u: np.ndarray
    atom_phase: int
    eigen_residual: float = 0.0

    @property
    def i0(self) -> int:
        return self.atom_phase

    def V(self, x, phase=0):
        return self.scale * self.u[phase] * np.exp(self.theta * np.asarray(x, dtype=float))

    def dV(self, x, phase=0):
        return self.theta * self.V(x, phase)

    def log_dV(self, x, phase=0):
        return math.log(self.scale * self.theta * self.u[phase]) + self.theta * float(x)

    def V0(self, x, phase=0):
        return self.scale * (self.u[phase] * np.exp(self.theta * np.asarray(x, dtype=float)) - 1.0)

    def f(self, x, phase=0):
        return (self.theta - self.sigma) * self.V(x, phase)

    def reward(self, scale=1.0):
        return ExponentialReward(scale * self.scale * (self.theta - self.sigma), self.theta, self.u)

    def params(self):
        return {
            "theta": self.theta,
            "sigma": self.sigma,
            "u": self.u.tolist(),
            "i0": self.atom_phase,
            "eigen_residual": self.eigen_residual,
        }


@dataclass(frozen=True, eq=False, kw_only=True)
class Mg1LightCertificate(MapGi1ExpCertificate):
    """Scalar case: V(x) = e^{θx}, σ(θ) = -λ + λĤ(θ)."""

    regime: ClassVar[str] = "mg1_light"

    @property
    def lam(self) -> float:
        return float(self.mp.D[0, 0])


@dataclass(frozen=True, eq=False, kw_only=True)
class Mg1ModerateCertificate(DriftCertificate):
    """V(x) = exp{ε(x + x0)^β}, f = (1 - ρ̃)V'."""

    regime: ClassVar[str] = "mg1_moderate"

    eps: float
    beta: float
    x0: float
    rho_tilde: float
    sufficient_integral: float
    envelope: Dict[str, Any]

    def V(self, x, phase=0):
        return self.scale * np.exp(self.eps * (np.asarray(x, dtype=float) + self.x0) ** self.beta)

    def dV(self, x, phase=0):
        a = np.asarray(x, dtype=float) + self.x0
        return self.eps * self.beta * a ** (self.beta - 1.0) * self.V(x)

    def d2V(self, x):
        a = np.asarray(x, dtype=float) + self.x0
        g = self.eps * self.beta * a ** (self.beta - 1.0)
        return self.V(x) * (g * g + self.eps * self.beta * (self.beta - 1.0) * a ** (self.beta - 2.0))

    def log_dV(self, x, phase=0):
        a = float(x) + self.x0
        return (math.log(self.scale * self.eps * self.beta) + (self.beta - 1.0) * math.log(a)
                + self.eps * a ** self.beta)

    def V0(self, x, phase=0):
        return self.V(x) - self.scale * math.exp(self.eps * self.x0 ** self.beta)

    def f(self, x, phase=0):
        return (1.0 - self.rho_tilde) * self.dV(x)

    def reward(self, scale=1.0):
        return DerivativeReward(scale * (1.0 - self.rho_tilde), self.V, self.dV)

    def params(self):
        return {
            "eps": self.eps,
            "beta": self.beta,
            "x0": self.x0,
            "rho_tilde": self.rho_tilde,
            "sufficient_integral": self.sufficient_integral,
            "envelope": self.envelope,
        }


@dataclass(frozen=True, eq=False, kw_only=True)
class Mg1PolynomialCertificate(DriftCertificate):
    """V(x) = (x + x0)^κ̃, f = (1 - ρ̃)V'."""

    regime: ClassVar[str] = "mg1_polynomial"

    kappa_tilde: float
    x0: float
    rho_tilde: float
    sufficient_integral: float
    envelope: Dict[str, Any]

    def V(self, x, phase=0):
        return self.scale * (np.asarray(x, dtype=float) + self.x0) ** self.kappa_tilde

    def dV(self, x, phase=0):
        return self.scale * self.kappa_tilde * (np.asarray(x, dtype=float) + self.x0) ** (self.kappa_tilde - 1.0)

    def log_dV(self, x, phase=0):
        return math.log(self.scale * self.kappa_tilde) + (self.kappa_tilde - 1.0) * math.log(float(x) + self.x0)

    def V0(self, x, phase=0):
        return self.V(x) - self.scale * self.x0 ** self.kappa_tilde

    def f(self, x, phase=0):
        return (1.0 - self.rho_tilde) * self.dV(x)

    def reward(self, scale=1.0):
        return DerivativeReward(scale * (1.0 - self.rho_tilde), self.V, self.dV)

    def params(self):
        return {
            "kappa_tilde": self.kappa_tilde,
            "x0": self.x0,
            "rho_tilde": self.rho_tilde,
            "sufficient_integral": self.sufficient_integral,
            "envelope": self.envelope,
        }


# ---------------------------------------------------------------------------
# MAP/GI/1 与轻尾 M/GI/1
# ---------------------------------------------------------------------------

def _load(mp: MarkovArrivalProcess, law: ServiceLaw, tol: Tolerances) -> Tuple[float, float]:
    lam = stationary_phase(mp, tol).lam
    rho = lam * law.mean
    if rho >= 1.0:
        raise UnstableModel("queue is unstable (rho >= 1)", {"rho": rho, "lambda": lam})
    return lam, rho


def phase_eigen(mp: MarkovArrivalProcess, law: ServiceLaw, theta: float,
                tol: Optional[Tolerances] = None) -> Tuple[float, np.ndarray, float]:
    """σ(θ) and u(θ) of C + Ĥ(θ)D via power iteration on the shifted matrix."""
    tol = tol or default_tolerances()
    h = law.mgf(theta)
    B = mp.C + h * mp.D
    K = float(np.max(np.abs(np.diag(B)))) + 1.0
    pair = perron_eigenpair(B + K * np.eye(mp.M), tolerances=tol)
    sigma = pair.eigenvalue - K
    residual = float(np.max(np.abs(B @ pair.eigenvector - sigma * pair.eigenvector)))
    return sigma, pair.eigenvector, residual


def build_map_gi1(mp: MarkovArrivalProcess, law: ServiceLaw, theta: float,
                  tol: Optional[Tolerances] = None) -> MapGi1ExpCertificate:
    tol = tol or default_tolerances()
    if not theta > 0:
        raise InfeasibleTheta("theta must be positive (sigma(0) = 0)", {"theta": theta})
    _, rho = _load(mp, law, tol)
    sigma, u, residual = phase_eigen(mp, law, theta, tol)
    if sigma >= theta:
        raise InfeasibleTheta("sigma(theta) >= theta", {"theta": theta, "sigma": sigma})
    f_inf = (theta - sigma) * float(np.min(u))
    if f_inf < tol.f_inf_floor:
        raise InfeasibleTheta("f_inf below floor", {"theta": theta, "f_inf": f_inf})
    # 并列时取最小相位
    i0 = int(np.flatnonzero(u >= u.max() - tol.residual_tol)[0])
    cls = Mg1LightCertificate if mp.M == 1 else MapGi1ExpCertificate
    cert = cls(b=theta, f_inf=f_inf, rho=rho, mp=mp, law=law,
               theta=theta, sigma=sigma, u=u, atom_phase=i0, eigen_residual=residual)
    logger.debug(f"证书 {cls.regime}: θ={theta:.6g} σ={sigma:.6g} f_inf={f_inf:.6g} i0={i0}")
    return cert


def build_mg1_light(lam: float, law: ServiceLaw, theta: float,
                    tol: Optional[Tolerances] = None) -> Mg1LightCertificate:
    tol = tol or default_tolerances()
    mp = poisson_process(lam)
    if not theta > 0:
        raise InfeasibleTheta("theta must be positive (sigma(0) = 0)", {"theta": theta})
    rho = lam * law.mean
    if rho >= 1.0:
        raise UnstableModel("queue is unstable (rho >= 1)", {"rho": rho})
    sigma = -lam + lam * law.mgf(theta)
    if sigma >= theta:
        raise InfeasibleTheta("sigma(theta) >= theta", {"theta": theta, "sigma": sigma})
    f_inf = theta - sigma
    if f_inf < tol.f_inf_floor:
        raise InfeasibleTheta("f_inf below floor", {"theta": theta, "f_inf": f_inf})
    return Mg1LightCertificate(b=theta, f_inf=f_inf, rho=rho, mp=mp, law=law,
                               theta=theta, sigma=sigma, u=np.ones(1), atom_phase=0)


def _theta_upper(mp: MarkovArrivalProcess, law: ServiceLaw, tol: Tolerances) -> float:
    if math.isfinite(law.theta_bar):
        return law.theta_bar
    t = 1.0
    for _ in range(60):
        sigma, _, _ = phase_eigen(mp, law, t, tol)
        if sigma >= t:
            return t
        t *= 2.0
    return t


def select_theta(mp: MarkovArrivalProcess, law: ServiceLaw, strategy: str = "max-margin",
                 x_ref: float = 0.0, n_grid: Optional[int] = None,
                 tol: Optional[Tolerances] = None) -> float:
    """Pick a feasible θ on a log grid below θ̄ (first best point wins ties)."""
    tol = tol or default_tolerances()
    if strategy not in ("max-margin", "min-prefactor"):
        raise InvalidParameter(f"unknown theta strategy: {strategy}")
    _, rho = _load(mp, law, tol)
    if law.is_heavy:
        raise NoFeasibleTheta("heavy-tailed service has no exponential moments",
                              {"family": law.family})
    n_grid = n_grid or int(CONFIG.get("search.theta_grid_size", 200))
    upper = _theta_upper(mp, law, tol)
    grid = np.geomspace(upper * 1e-4, upper, n_grid + 1)[:-1]

    best, best_obj = None, math.inf
    for theta in grid:
        try:
            sigma, u, _ = phase_eigen(mp, law, float(theta), tol)
        except (OutsideDomain, NotConverged):
            continue
        f_inf = (theta - sigma) * float(np.min(u))
        if sigma >= theta or f_inf < tol.f_inf_floor:
            continue
        if strategy == "max-margin":
            obj = -(theta - sigma)
        else:
            obj = (1.0 + theta * (1.0 - rho) / f_inf) * math.exp(theta * x_ref)
        if obj < best_obj:
            best, best_obj = float(theta), obj
    if best is None:
        raise NoFeasibleTheta("no theta on the grid satisfies sigma(theta) < theta",
                              {"upper": upper, "grid_size": n_grid})
    logger.info(f"选定 θ={best:.6g}（策略 {strategy}）")
    return best


# ---------------------------------------------------------------------------
# 参数网格搜索（中等尾 / 多项式尾共用）
# ---------------------------------------------------------------------------

def _refine_axis(values: Sequence[float], best: float, geometric: bool) -> List[float]:
    values = sorted(values)
    k = values.index(best)
    out = {best}
    for j in (k - 1, k + 1):
        if 0 <= j < len(values):
            other = values[j]
            out.add(other)
            out.add(math.sqrt(best * other) if geometric else 0.5 * (best + other))
    return sorted(out)


def grid_search(axes: List[List[float]], evaluate: Callable[..., Optional[Tuple[float, Any]]],
                refine_rounds: int = 0, geometric: Sequence[bool] = ()) -> Tuple[Tuple, Any]:
    """Minimise evaluate(*point) over the product grid, then refine around the best.

    evaluate returns (objective, payload) or None when infeasible. Results are reduced
    in grid order, so the choice does not depend on thread completion order.
    """
    max_workers = int(CONFIG.get("search.max_workers", 4))
    best_point, best_obj, best_payload = None, math.inf, None
    seen = set()
    for round_no in range(refine_rounds + 1):
        points = [p for p in itertools.product(*axes) if p not in seen]
        seen.update(points)
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(lambda p: evaluate(*p), points))
        for point, res in zip(points, results):
            if res is not None and res[0] < best_obj:
                best_point, best_obj, best_payload = point, res[0], res[1]
        logger.debug(f"搜索第 {round_no} 轮: {len(points)} 个候选, 当前最优 {best_point} -> {best_obj:.6g}")
        if best_point is None:
            break
        axes = [_refine_axis(sorted(set(ax) | {bp}), bp, geo)
                for ax, bp, geo in zip(axes, best_point, list(geometric) + [False] * len(axes))]
    return best_point, best_payload


def _prefactor(b: float, f_inf: float, rho: float) -> float:
    return 1.0 + b * (1.0 - rho) / f_inf


def _checked_envelope(law: ServiceLaw, env: Optional[TailEnvelope], kind) -> TailEnvelope:
    env = env or law.default_envelope()
    if not isinstance(env, kind):
        raise InvalidParameter(f"regime needs a {kind.__name__} envelope",
                               {"family": law.family, "envelope": None if env is None else env.to_dict()})
    verdict = verify_envelope(law, env)
    if not verdict.success:
        raise EnvelopeViolated(verdict.error, verdict.data)
    return env


def _rho_tilde_ok(rho: float, rho_tilde: float):
    if not rho < rho_tilde < 1.0:
        raise InfeasibleParameters("rho_tilde must lie in (rho, 1)", {"rho": rho, "rho_tilde": rho_tilde})


# ---------------------------------------------------------------------------
# 中等尾（Weibull 型）
# ---------------------------------------------------------------------------

def convexity_floor(eps: float, beta: float) -> float:
    """Smallest x0 with V'' >= 0 on [0, ∞)."""
    return ((1.0 - beta) / (eps * beta)) ** (1.0 / beta)


class _ModerateProblem:

    def __init__(self, lam: float, law: ServiceLaw, env: Moderate, tol: Tolerances):
        self.lam = lam
        self.law = law
        self.env = env
        self.tol = tol
        self.rho = lam * law.mean
        self.sufficient = lru_cache(maxsize=None)(self._sufficient)
        self.b_integral = lru_cache(maxsize=None)(self._b_integral)

    def _sufficient(self, eps: float) -> float:
        beta = self.env.beta
        value, _ = integrate(lambda y: self.law.weighted_tail(y, eps * y ** beta),
                             0.0, math.inf, points=self.law.breakpoints(), tol=self.tol)
        return self.lam * value

    def _b_integral(self, eps: float, x0: float) -> float:
        beta = self.env.beta

        def integrand(y):
            a = y + x0
            return self.law.weighted_tail(y, math.log(eps * beta) + (beta - 1.0) * math.log(a) + eps * a ** beta)

        value, _ = integrate(integrand, 0.0, math.inf, points=self.law.breakpoints(), tol=self.tol)
        return value

    def build(self, eps: float, x0: float, rho_tilde: float) -> Mg1ModerateCertificate:
        beta = self.env.beta
        if not 0.0 < eps < self.env.gamma:
            raise InfeasibleParameters("eps must lie in (0, gamma)", {"eps": eps, "gamma": self.env.gamma})
        _rho_tilde_ok(self.rho, rho_tilde)
        floor = convexity_floor(eps, beta)
        if x0 < floor * (1.0 - 1e-12):
            raise InfeasibleParameters("x0 below the convexity floor", {"x0": x0, "floor": floor})
        try:
            suff = self.sufficient(eps)
        except PoissonBoundError as e:
            raise InfeasibleParameters(f"sufficient integral failed: {e.message}", {"eps": eps})
        if suff > rho_tilde:
            raise InfeasibleParameters("sufficient integral exceeds rho_tilde",
                                       {"sufficient_integral": suff, "rho_tilde": rho_tilde})
        dv0 = eps * beta * x0 ** (beta - 1.0) * math.exp(eps * x0 ** beta)
        b = (1.0 - rho_tilde) * dv0 + self.lam * self.b_integral(eps, x0)
        f_inf = (1.0 - rho_tilde) * dv0
        return Mg1ModerateCertificate(
            b=b, f_inf=f_inf, rho=self.rho, mp=poisson_process(self.lam), law=self.law,
            eps=eps, beta=beta, x0=x0, rho_tilde=rho_tilde,
            sufficient_integral=suff, envelope=self.env.to_dict())

    def evaluate(self, eps_frac: float, rho_frac: float, x0_mult: float):
        eps = eps_frac * self.env.gamma
        rho_tilde = self.rho + rho_frac * (1.0 - self.rho)
        x0 = x0_mult * convexity_floor(eps, self.env.beta)
        try:
            cert = self.build(eps, x0, rho_tilde)
        except (InfeasibleParameters, OverflowError):
            return None
        return _prefactor(cert.b, cert.f_inf, self.rho), cert


def build_mg1_moderate(lam: float, law: ServiceLaw, env: Optional[Moderate] = None,
                       eps: Optional[float] = None, x0: Optional[float] = None,
                       rho_tilde: Optional[float] = None, auto: bool = False,
                       tol: Optional[Tolerances] = None) -> Mg1ModerateCertificate:
    tol = tol or default_tolerances()
    rho = lam * law.mean
    if rho >= 1.0:
        raise UnstableModel("queue is unstable (rho >= 1)", {"rho": rho})
    env = _checked_envelope(law, env, Moderate)
    problem = _ModerateProblem(lam, law, env, tol)

    if not auto and None not in (eps, x0, rho_tilde):
        return problem.build(eps, x0, rho_tilde)

    axes = [
        list(CONFIG.get("search.moderate.eps_fractions", [0.1, 0.3, 0.5, 0.7, 0.9])),
        list(CONFIG.get("search.moderate.rho_tilde_fractions", [0.2, 0.5, 0.8])),
        [float(m) for m in CONFIG.get("search.moderate.x0_multipliers", [1, 2, 4, 8])],
    ]
    point, cert = grid_search(axes, problem.evaluate,
                              refine_rounds=int(CONFIG.get("search.moderate.refine_rounds", 2)),
                              geometric=(False, False, True))
    if cert is None:
        raise InfeasibleParameters("no (eps, x0, rho_tilde) on the search grid is feasible",
                                   {"eps_max": axes[0][-1] * env.gamma, "rho": rho})
    logger.info(f"中等尾参数: ε={cert.eps:.6g} x0={cert.x0:.6g} ρ̃={cert.rho_tilde:.6g} "
                f"充分积分={cert.sufficient_integral:.6g}")
    return cert


# ---------------------------------------------------------------------------
# 多项式尾（Pareto 型）
# ---------------------------------------------------------------------------

class _PolynomialProblem:

    def __init__(self, lam: float, law: ServiceLaw, env: Polynomial, tol: Tolerances):
        self.lam = lam
        self.law = law
        self.env = env
        self.tol = tol
        self.rho = lam * law.mean
        self.sufficient = lru_cache(maxsize=None)(self._sufficient)
        self.b_integral = lru_cache(maxsize=None)(self._b_integral)

    def _sufficient(self, kappa_tilde: float, x0: float) -> float:
        value, _ = integrate(lambda y: self.law.weighted_tail(y, (kappa_tilde - 1.0) * math.log1p(y / x0)),
                             0.0, math.inf, points=self.law.breakpoints(), tol=self.tol)
        return self.lam * value

    def _b_integral(self, kappa_tilde: float, x0: float) -> float:
        value, _ = integrate(
            lambda y: self.law.weighted_tail(y, math.log(kappa_tilde) + (kappa_tilde - 1.0) * math.log(y + x0)),
            0.0, math.inf, points=self.law.breakpoints(), tol=self.tol)
        return value

    def build(self, kappa_tilde: float, x0: float, rho_tilde: float) -> Mg1PolynomialCertificate:
        kappa = self.env.kappa
        if kappa_tilde >= kappa:
            raise TailTooHeavy("kappa_tilde must stay below the tail index",
                               {"kappa_tilde": kappa_tilde, "kappa": kappa})
        if not kappa_tilde > 1.0:
            raise InfeasibleParameters("kappa_tilde must exceed 1", {"kappa_tilde": kappa_tilde})
        if not x0 >= 1.0:
            raise InfeasibleParameters("x0 must be >= 1", {"x0": x0})
        _rho_tilde_ok(self.rho, rho_tilde)
        try:
            suff = self.sufficient(kappa_tilde, x0)
        except PoissonBoundError as e:
            raise InfeasibleParameters(f"sufficient integral failed: {e.message}",
                                       {"kappa_tilde": kappa_tilde, "x0": x0})
        if suff > rho_tilde:
            raise InfeasibleParameters("sufficient integral exceeds rho_tilde",
                                       {"sufficient_integral": suff, "rho_tilde": rho_tilde})
        dv0 = kappa_tilde * x0 ** (kappa_tilde - 1.0)
        b = (1.0 - rho_tilde) * dv0 + self.lam * self.b_integral(kappa_tilde, x0)
        f_inf = (1.0 - rho_tilde) * dv0
        return Mg1PolynomialCertificate(
            b=b, f_inf=f_inf, rho=self.rho, mp=poisson_process(self.lam), law=self.law,
            kappa_tilde=kappa_tilde, x0=x0, rho_tilde=rho_tilde,
            sufficient_integral=suff, envelope=self.env.to_dict())

    def evaluate(self, kappa_frac: float, rho_frac: float, x0: float):
        kappa_tilde = 1.0 + kappa_frac * (self.env.kappa - 1.0)
        rho_tilde = self.rho + rho_frac * (1.0 - self.rho)
        try:
            cert = self.build(kappa_tilde, x0, rho_tilde)
        except (InfeasibleParameters, TailTooHeavy, OverflowError):
            return None
        return _prefactor(cert.b, cert.f_inf, self.rho), cert


def build_mg1_polynomial(lam: float, law: ServiceLaw, env: Optional[Polynomial] = None,
                         kappa_tilde: Optional[float] = None, x0: Optional[float] = None,
                         rho_tilde: Optional[float] = None, auto: bool = False,
                         tol: Optional[Tolerances] = None) -> Mg1PolynomialCertificate:
    tol = tol or default_tolerances()
    rho = lam * law.mean
    if rho >= 1.0:
        raise UnstableModel("queue is unstable (rho >= 1)", {"rho": rho})
    env = _checked_envelope(law, env, Polynomial)
    problem = _PolynomialProblem(lam, law, env, tol)

    if not auto and None not in (kappa_tilde, x0, rho_tilde):
        return problem.build(kappa_tilde, x0, rho_tilde)

    axes = [
        list(CONFIG.get("search.polynomial.kappa_fractions", [0.25, 0.5, 0.75])),
        list(CONFIG.get("search.polynomial.rho_tilde_fractions", [0.2, 0.5, 0.8])),
        [float(v) for v in CONFIG.get("search.polynomial.x0_values", [1, 2, 4, 8, 16])],
    ]
    point, cert = grid_search(axes, problem.evaluate,
                              refine_rounds=int(CONFIG.get("search.polynomial.refine_rounds", 2)),
                              geometric=(False, False, True))
    if cert is None:
        raise InfeasibleParameters("no (kappa_tilde, x0, rho_tilde) on the search grid is feasible",
                                   {"x0_max": axes[2][-1], "rho": rho})
    logger.info(f"多项式尾参数: κ̃={cert.kappa_tilde:.6g} x0={cert.x0:.6g} ρ̃={cert.rho_tilde:.6g} "
                f"充分积分={cert.sufficient_integral:.6g}")
    return cert
