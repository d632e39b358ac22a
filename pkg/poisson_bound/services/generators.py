"""
Description: Numerical generators applied to a certificate's V. MAP/GI/1 chain, the
             infinite M/GI/1 chain in integrated-by-parts form and the finite-capacity
             (WCL) chain. check_generator_inequality walks a grid and reports the worst
             drift margin.

Changelog:
- 2025-06-03: Initial creation.
"""

import math
from typing import Optional

import numpy as np

from poisson_bound.core.result import Result
from poisson_bound.core.tolerances import Tolerances, default_tolerances
from poisson_bound.numerics.grids import GridSpec
from poisson_bound.numerics.quadrature import integrate
from poisson_bound.services.drift_builder import DriftCertificate, MapGi1ExpCertificate


def tail_weighted_derivative(cert: DriftCertificate, x: float, phase: int = 0,
                             upper: float = math.inf,
                             tol: Optional[Tolerances] = None) -> float:
    """∫_0^upper H̄(y) V'(x + y, phase) dy."""
    law = cert.law
    value, _ = integrate(lambda y: law.weighted_tail(y, cert.log_dV(x + y, phase)),
                         0.0, upper, points=law.breakpoints(), tol=tol)
    return value


def map_gi1_generator(cert: DriftCertificate, x: float, phase: int,
                      tol: Optional[Tolerances] = None) -> float:
    """(𝒜V)(x, i) = -V'·1{x>0} + Σ_j C_ij V(x, j) + Σ_j D_ij E[V(x + S, j)]."""
    mp = cert.mp
    drift = -float(cert.dV(x, phase)) if x > 0 else 0.0
    total = drift
    for j in range(mp.M):
        v = float(cert.V(x, j))
        total += mp.C[phase, j] * v
        if mp.D[phase, j] > 0:
            total += mp.D[phase, j] * (v + tail_weighted_derivative(cert, x, j, tol=tol))
    return total


def mg1_generator(cert: DriftCertificate, x: float, L: float = math.inf,
                  tol: Optional[Tolerances] = None) -> float:
    """Infinite chain for L = inf, otherwise the WCL chain that rejects w + s > L."""
    lam = float(cert.mp.D[0, 0])
    drift = -float(cert.dV(x)) if x > 0 else 0.0
    if math.isinf(L):
        return drift + lam * tail_weighted_derivative(cert, x, tol=tol)
    a = L - x
    jump = -float(cert.law.tail(a)) * (float(cert.V(x + a)) - float(cert.V(x)))
    jump += tail_weighted_derivative(cert, x, upper=a, tol=tol)
    return drift + lam * jump


def generator(cert: DriftCertificate, x: float, phase: int = 0, L: float = math.inf,
              tol: Optional[Tolerances] = None) -> float:
    if cert.mp.M > 1 or (isinstance(cert, MapGi1ExpCertificate) and math.isinf(L)):
        return map_gi1_generator(cert, x, phase, tol)
    return mg1_generator(cert, x, L, tol)


def check_generator_inequality(cert: DriftCertificate, grid: Optional[np.ndarray] = None,
                               L: float = math.inf,
                               tol: Optional[Tolerances] = None) -> Result:
    """𝒜V ≤ -f + b·1_ℂ + tol_gen·max(1, |𝒜V|, |f|) at every grid point and phase."""
    tol = tol or default_tolerances()
    if grid is None:
        x_hi = min(20.0 * cert.law.mean, L) if math.isfinite(L) else 20.0 * cert.law.mean
        grid = GridSpec(x_hi=x_hi, n_points=200, n_geometric=50).points()
    worst = None
    for x in np.asarray(grid, dtype=float):
        for phase in range(cert.mp.M):
            av = generator(cert, float(x), phase, L, tol)
            f = float(cert.f(x, phase))
            rhs = -f + (cert.b if cert.in_small_set(float(x), phase) else 0.0)
            slack = tol.generator_tol * max(1.0, abs(av), abs(f))
            margin = rhs - av
            if worst is None or margin + slack < worst["margin"] + worst["slack"]:
                worst = {"x": float(x), "phase": phase, "margin": margin, "slack": slack,
                         "generator": av, "rhs": rhs}
    data = {"points": int(len(grid)), "worst": worst}
    if worst["margin"] + worst["slack"] >= 0.0:
        return Result.success(data)
    return Result.error(data, error=f"drift inequality fails at x={worst['x']:.6g}, phase {worst['phase']}",
                        error_code="GeneratorCheckFailed")
