"""
Description: Service-time laws H with moment generating function, tail, integrated
             tail, equilibrium (integrated-tail) convolution tables and samplers.
             Tail envelopes for the moderate and polynomial drift regimes.

Changelog:
- 2025-05-14: Initial creation.
- 2025-05-20: Lower/upper convolution tables, Pollaczek-Khinchine mixture.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Type

import numpy as np
from scipy import special, stats
from scipy.signal import fftconvolve

from poisson_bound.core.errors import (
    GridTooCoarse, InvalidParameter, ModelFileError, OutsideDomain,
)
from poisson_bound.core.result import Result
from poisson_bound.core.tolerances import Tolerances, default_tolerances
from poisson_bound.numerics.grids import GridSpec
from poisson_bound.numerics.quadrature import integrate


def _positive(name: str, value) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise InvalidParameter(f"{name} must be positive and finite", {name: value})
    return value


class ServiceLaw(ABC):
    """服务时间分布 H，H(0) = 0，均值有限"""

    family: str = ""

    @property
    @abstractmethod
    def mean(self) -> float:
        ...

    @property
    @abstractmethod
    def theta_bar(self) -> float:
        """Supremum of the MGF domain (0 for heavy tails, inf for bounded support)."""

    @property
    def is_heavy(self) -> bool:
        return self.theta_bar == 0.0

    @abstractmethod
    def params(self) -> Dict[str, Any]:
        ...

    @abstractmethod
    def tail(self, x):
        """H̄(x) = P(S > x), vectorised."""

    def log_tail(self, x):
        """log H̄(x), -inf where the tail vanishes."""
        with np.errstate(divide="ignore"):
            return np.log(self.tail(x))

    def weighted_tail(self, y: float, log_weight: float) -> float:
        """H̄(y)·e^{log_weight} computed in log space, 0 where the tail vanishes."""
        log_tail = float(self.log_tail(y))
        if log_tail == -math.inf:
            return 0.0
        with np.errstate(over="ignore"):
            return float(np.exp(log_tail + float(log_weight)))

    @abstractmethod
    def integrated_tail(self, x):
        """∫_0^x H̄(y) dy, vectorised."""

    @abstractmethod
    def sample_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        ...

    def _mgf_closed(self, theta: float) -> Optional[float]:
        return None

    def mgf(self, theta: float) -> float:
        theta = float(theta)
        if theta == 0.0:
            return 1.0
        if theta > 0 and (self.is_heavy or theta >= self.theta_bar):
            raise OutsideDomain("theta outside the MGF domain",
                                {"theta": theta, "theta_bar": self.theta_bar, "family": self.family})
        value = self._mgf_closed(theta)
        if value is not None:
            return value
        # Ĥ(θ) = 1 + θ ∫ e^{θx} H̄(x) dx
        integral, _ = integrate(lambda x: self.weighted_tail(x, theta * x), 0.0, math.inf,
                                points=self.breakpoints())
        return 1.0 + theta * integral

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def equilibrium_cdf(self, x):
        """H_re(x) = μ ∫_0^x H̄."""
        return self.integrated_tail(x) / self.mean

    def breakpoints(self) -> List[float]:
        """Discontinuities of the tail (quadrature breakpoints)."""
        return []

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.sample_block(rng, 1)[0])

    def default_envelope(self) -> Optional["TailEnvelope"]:
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, **self.params()}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.__class__.__name__}({args})"


class Exponential(ServiceLaw):
    family = "exponential"

    def __init__(self, mu: float):
        self.mu = _positive("mu", mu)

    @property
    def mean(self):
        return 1.0 / self.mu

    @property
    def theta_bar(self):
        return self.mu

    def params(self):
        return {"mu": self.mu}

    def _mgf_closed(self, theta):
        return self.mu / (self.mu - theta)

    def tail(self, x):
        return np.exp(-self.mu * np.asarray(x, dtype=float))

    def log_tail(self, x):
        return -self.mu * np.asarray(x, dtype=float)

    def integrated_tail(self, x):
        return -np.expm1(-self.mu * np.asarray(x, dtype=float)) / self.mu

    def sample_block(self, rng, n):
        return rng.exponential(1.0 / self.mu, size=n)


class Erlang(ServiceLaw):
    """k exponential phases of rate mu each."""

    family = "erlang"

    def __init__(self, k: int, mu: float):
        if int(k) != k or k < 1:
            raise InvalidParameter("k must be a positive integer", {"k": k})
        self.k = int(k)
        self.mu = _positive("mu", mu)

    @property
    def mean(self):
        return self.k / self.mu

    @property
    def theta_bar(self):
        return self.mu

    def params(self):
        return {"k": self.k, "mu": self.mu}

    def _mgf_closed(self, theta):
        return (self.mu / (self.mu - theta)) ** self.k

    def tail(self, x):
        return stats.gamma.sf(np.asarray(x, dtype=float), self.k, scale=1.0 / self.mu)

    def log_tail(self, x):
        return stats.gamma.logsf(np.asarray(x, dtype=float), self.k, scale=1.0 / self.mu)

    def integrated_tail(self, x):
        # E[min(S, x)]
        x = np.asarray(x, dtype=float)
        return x * self.tail(x) + self.mean * stats.gamma.cdf(x, self.k + 1, scale=1.0 / self.mu)

    def sample_block(self, rng, n):
        return rng.gamma(self.k, 1.0 / self.mu, size=n)


class HyperExponential(ServiceLaw):
    family = "hyperexponential"

    def __init__(self, probs, rates):
        probs = np.asarray(probs, dtype=float)
        rates = np.asarray(rates, dtype=float)
        if probs.shape != rates.shape or probs.ndim != 1 or probs.size == 0:
            raise InvalidParameter("probs and rates must be equal-length lists")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12 or np.any(rates <= 0):
            raise InvalidParameter("probs must be a distribution and rates positive",
                                   {"probs": probs.tolist(), "rates": rates.tolist()})
        self.probs = probs
        self.rates = rates

    @property
    def mean(self):
        return float(np.sum(self.probs / self.rates))

    @property
    def theta_bar(self):
        return float(np.min(self.rates[self.probs > 0]))

    def params(self):
        return {"probs": self.probs.tolist(), "rates": self.rates.tolist()}

    def _mgf_closed(self, theta):
        return float(np.sum(self.probs * self.rates / (self.rates - theta)))

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(self.probs * np.exp(-np.multiply.outer(x, self.rates)), axis=-1)

    def log_tail(self, x):
        x = np.asarray(x, dtype=float)
        return special.logsumexp(-np.multiply.outer(x, self.rates), b=self.probs, axis=-1)

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(self.probs * -np.expm1(-np.multiply.outer(x, self.rates)) / self.rates, axis=-1)

    def sample_block(self, rng, n):
        comps = rng.choice(self.probs.size, size=n, p=self.probs)
        return rng.exponential(1.0 / self.rates[comps])


class Deterministic(ServiceLaw):
    family = "deterministic"

    def __init__(self, d: float):
        self.d = _positive("d", d)

    @property
    def mean(self):
        return self.d

    @property
    def theta_bar(self):
        return math.inf

    def params(self):
        return {"d": self.d}

    def _mgf_closed(self, theta):
        return math.exp(theta * self.d)

    def tail(self, x):
        return (np.asarray(x, dtype=float) < self.d).astype(float)

    def integrated_tail(self, x):
        return np.minimum(np.asarray(x, dtype=float), self.d)

    def breakpoints(self):
        return [self.d]

    def sample_block(self, rng, n):
        return np.full(n, self.d)


class WeibullTail(ServiceLaw):
    """H̄(x) = exp(-γ x^β), β ∈ (0, 1)."""

    family = "weibull"

    def __init__(self, beta: float, gamma: float):
        self.beta = _positive("beta", beta)
        if self.beta >= 1:
            raise InvalidParameter("beta must lie in (0, 1)", {"beta": beta})
        self.gamma = _positive("gamma", gamma)

    @property
    def scale(self) -> float:
        return self.gamma ** (-1.0 / self.beta)

    @property
    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.beta)

    @property
    def theta_bar(self):
        return 0.0

    def params(self):
        return {"beta": self.beta, "gamma": self.gamma}

    def tail(self, x):
        return np.exp(-self.gamma * np.asarray(x, dtype=float) ** self.beta)

    def log_tail(self, x):
        return -self.gamma * np.asarray(x, dtype=float) ** self.beta

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        return self.mean * special.gammainc(1.0 / self.beta, self.gamma * x ** self.beta)

    def sample_block(self, rng, n):
        return self.scale * rng.weibull(self.beta, size=n)

    def default_envelope(self):
        return Moderate(C=1.0, gamma=self.gamma, beta=self.beta)


class ParetoTail(ServiceLaw):
    """H̄(x) = (1 + x/scale)^(-κ), κ > 1 (Lomax)."""

    family = "pareto"

    def __init__(self, kappa: float, scale: float = 1.0):
        self.kappa = _positive("kappa", kappa)
        if self.kappa <= 1:
            raise InvalidParameter("kappa must exceed 1 for a finite mean", {"kappa": kappa})
        self.scale = _positive("scale", scale)

    @property
    def mean(self):
        return self.scale / (self.kappa - 1.0)

    @property
    def theta_bar(self):
        return 0.0

    def params(self):
        return {"kappa": self.kappa, "scale": self.scale}

    def tail(self, x):
        return (1.0 + np.asarray(x, dtype=float) / self.scale) ** (-self.kappa)

    def log_tail(self, x):
        return -self.kappa * np.log1p(np.asarray(x, dtype=float) / self.scale)

    def integrated_tail(self, x):
        x = np.asarray(x, dtype=float)
        return self.mean * (1.0 - (1.0 + x / self.scale) ** (1.0 - self.kappa))

    def sample_block(self, rng, n):
        return self.scale * rng.pareto(self.kappa, size=n)

    def default_envelope(self):
        return Polynomial(C=max(1.0, self.scale) ** self.kappa, kappa=self.kappa)


SERVICE_FAMILIES: Dict[str, Type[ServiceLaw]] = {
    cls.family: cls
    for cls in (Exponential, Erlang, HyperExponential, Deterministic, WeibullTail, ParetoTail)
}

_FAMILY_KEYS = {
    "exponential": {"mu"},
    "erlang": {"k", "mu"},
    "hyperexponential": {"probs", "rates"},
    "deterministic": {"d"},
    "weibull": {"beta", "gamma"},
    "pareto": {"kappa", "scale"},
}


def service_law_from_dict(spec: Dict[str, Any]) -> ServiceLaw:
    if not isinstance(spec, dict) or "family" not in spec:
        raise ModelFileError("service law needs a 'family' key")
    family = spec["family"]
    if family not in SERVICE_FAMILIES:
        raise ModelFileError(f"unknown service family: {family}",
                             {"known": sorted(SERVICE_FAMILIES)})
    params = {k: v for k, v in spec.items() if k != "family"}
    unknown = set(params) - _FAMILY_KEYS[family]
    if unknown:
        raise ModelFileError(f"unknown keys for {family}: {sorted(unknown)}")
    try:
        return SERVICE_FAMILIES[family](**params)
    except TypeError as e:
        raise ModelFileError(f"bad parameters for {family}: {e}")


# ---------------------------------------------------------------------------
# 尾部包络
# ---------------------------------------------------------------------------

class TailEnvelope(ABC):
    kind: str = ""

    @abstractmethod
    def __call__(self, x):
        ...

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        ...


@dataclass(frozen=True)
class LightTail(TailEnvelope):
    """Chernoff-type envelope C·exp(-θ̄ x)."""

    theta_bar: float
    constant: float = 1.0
    kind = "light"

    def __call__(self, x):
        return self.constant * np.exp(-self.theta_bar * np.asarray(x, dtype=float))

    def to_dict(self):
        return {"kind": self.kind, "theta_bar": self.theta_bar, "C": self.constant}


@dataclass(frozen=True)
class Moderate(TailEnvelope):
    """C·exp(-γ x^β)."""

    C: float
    gamma: float
    beta: float
    kind = "moderate"

    def __post_init__(self):
        _positive("C", self.C)
        _positive("gamma", self.gamma)
        if not 0 < self.beta < 1:
            raise InvalidParameter("beta must lie in (0, 1)", {"beta": self.beta})

    def __call__(self, x):
        return self.C * np.exp(-self.gamma * np.asarray(x, dtype=float) ** self.beta)

    def to_dict(self):
        return {"kind": self.kind, "C": self.C, "gamma": self.gamma, "beta": self.beta}


@dataclass(frozen=True)
class Polynomial(TailEnvelope):
    """C·(x + 1)^(-κ)."""

    C: float
    kappa: float
    kind = "polynomial"

    def __post_init__(self):
        _positive("C", self.C)
        if not self.kappa > 1:
            raise InvalidParameter("kappa must exceed 1", {"kappa": self.kappa})

    def __call__(self, x):
        return self.C * (np.asarray(x, dtype=float) + 1.0) ** (-self.kappa)

    def to_dict(self):
        return {"kind": self.kind, "C": self.C, "kappa": self.kappa}


_ENVELOPE_KEYS = {
    "light": ({"theta_bar"}, {"C"}),
    "moderate": ({"C", "gamma", "beta"}, set()),
    "polynomial": ({"C", "kappa"}, set()),
}


def envelope_from_dict(spec: Dict[str, Any]) -> TailEnvelope:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _ENVELOPE_KEYS:
        raise ModelFileError(f"unknown envelope kind: {kind}")
    required, optional = _ENVELOPE_KEYS[kind]
    missing = required - set(spec)
    unknown = set(spec) - required - optional
    if missing or unknown:
        raise ModelFileError(f"bad keys for {kind} envelope",
                             {"missing": sorted(missing), "unknown": sorted(unknown)})
    if kind == "light":
        return LightTail(theta_bar=float(spec["theta_bar"]), constant=float(spec.get("C", 1.0)))
    if kind == "moderate":
        return Moderate(C=float(spec["C"]), gamma=float(spec["gamma"]), beta=float(spec["beta"]))
    return Polynomial(C=float(spec["C"]), kappa=float(spec["kappa"]))


def verify_envelope(law: ServiceLaw, env: TailEnvelope,
                    grid_spec: Optional[GridSpec] = None) -> Result:
    """Check H̄ ≤ env on the grid; reports the worst point either way."""
    if grid_spec is None:
        grid_spec = GridSpec.covering(law.mean, 50.0, n_points=4000, n_geometric=400)
    elif grid_spec.x_hi < 50.0 * law.mean:
        raise InvalidParameter("envelope grid must reach 50 x mean",
                               {"x_hi": grid_spec.x_hi, "mean": law.mean})
    x = grid_spec.points()
    tail = np.asarray(law.tail(x), dtype=float)
    bound = np.asarray(env(x), dtype=float)
    excess = tail - bound
    k = int(np.argmax(excess))
    data = {
        "worst_x": float(x[k]),
        "worst_excess": float(excess[k]),
        "tail": float(tail[k]),
        "envelope": float(bound[k]),
        "points": int(x.size),
    }
    if np.all(excess <= 1e-12 * np.maximum(bound, 1e-300)):
        return Result.success(data)
    return Result.error(data, error=f"tail exceeds envelope at x={x[k]:.6g}",
                        error_code="EnvelopeViolated")


# ---------------------------------------------------------------------------
# 平衡分布卷积表
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EquilibriumGrid:
    """H_re^{*n} on a uniform grid, bracketed between lower and upper tables."""

    grid: np.ndarray
    lower: np.ndarray  # shape (n_max + 1, K)
    upper: np.ndarray

    @property
    def n_max(self) -> int:
        return self.lower.shape[0] - 1

    @property
    def tables(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def gap(self) -> float:
        return float(np.max(self.upper - self.lower)) / 2.0

    def value(self, n: int, x: float) -> float:
        return float(np.interp(x, self.grid, self.tables[n]))

    def geometric_mixture(self, rho: float, which: str = "tables") -> np.ndarray:
        """Σ_n (1-ρ)ρ^n H_re^{*n} on the grid; the omitted mass is ρ^{n_max+1}."""
        tab = getattr(self, which)
        weights = (1.0 - rho) * rho ** np.arange(self.n_max + 1)
        return weights @ tab

    def csv_rows(self):
        for n, row in enumerate(self.tables):
            for x, v in zip(self.grid, row):
                yield float(x), n, float(v)


def _monotone_cdf(cdf: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))


def equilibrium_tables(law: ServiceLaw, n_max: int, grid_spec: GridSpec,
                       check_gap: bool = True,
                       tol: Optional[Tolerances] = None) -> EquilibriumGrid:
    """Convolution powers of H_re by discretised Stieltjes convolution.

    The lower table rounds every interval mass up to its right end, the upper one down
    to its left end (mass beyond the grid sits at the last point), so the true
    H_re^{*n}(x_k) lies between them.
    """
    tol = tol or default_tolerances()
    if n_max < 0:
        raise InvalidParameter("n_max must be >= 0", {"n_max": n_max})
    spec = grid_spec if grid_spec.mode == "uniform" else GridSpec(
        x_hi=grid_spec.x_hi, n_points=grid_spec.n_points, mode="uniform")
    x = spec.points()
    K = x.size

    h_re = np.asarray(law.equilibrium_cdf(x), dtype=float)
    h_re[0] = 0.0
    masses = np.diff(h_re)
    beyond = max(0.0, 1.0 - h_re[-1])

    pmf_low = np.zeros(K)
    pmf_low[1:] = masses
    pmf_up = np.zeros(K)
    pmf_up[:-1] = masses
    pmf_up[-1] += beyond

    lower = np.empty((n_max + 1, K))
    upper = np.empty((n_max + 1, K))
    lower[0] = upper[0] = 1.0
    conv_low = np.zeros(K)
    conv_low[0] = 1.0
    conv_up = conv_low.copy()
    for n in range(1, n_max + 1):
        conv_low = np.clip(fftconvolve(conv_low, pmf_low)[:K], 0.0, None)
        conv_up = np.clip(fftconvolve(conv_up, pmf_up)[:K], 0.0, None)
        lower[n] = np.minimum(_monotone_cdf(np.cumsum(conv_low)), lower[n - 1])
        upper[n] = np.minimum(_monotone_cdf(np.cumsum(conv_up)), upper[n - 1])
        # H_re is continuous, so every positive power vanishes at 0
        lower[n, 0] = upper[n, 0] = 0.0
    upper = np.maximum(upper, lower)

    grid = EquilibriumGrid(grid=x, lower=lower, upper=upper)
    if check_gap and grid.gap > tol.table_gap_tol:
        raise GridTooCoarse("convolution tables are too coarse for the tolerance",
                            {"gap": grid.gap, "tol": tol.table_gap_tol, "points": K})
    return grid


def pk_bin_masses(rho: float, eq_grid: EquilibriumGrid, edges: np.ndarray) -> np.ndarray:
    """Pollaczek-Khinchine stationary masses of [edges[j], edges[j+1]).

    The first bin absorbs the atom 1 - ρ at zero. The last edge may be inf.
    """
    cdf = eq_grid.geometric_mixture(rho)
    cdf_at = np.interp(np.minimum(edges, eq_grid.grid[-1]), eq_grid.grid, cdf)
    cdf_at = np.where(np.isinf(edges), 1.0, cdf_at)
    cdf_at[0] = 0.0 if edges[0] <= 0 else cdf_at[0]
    return np.diff(cdf_at)
