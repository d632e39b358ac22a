"""
Description: Adaptive composite quadrature on top of QUADPACK. Partitions whose error
             estimate exceeds the absolute/relative cap are halved (an infinite upper
             limit is split by doubling) until every piece is under the cap.

Changelog:
- 2025-05-14: Initial creation.
"""

import math
import warnings
from typing import Callable, Iterable, Optional, Tuple

from scipy.integrate import quad, IntegrationWarning

from poisson_bound.core.errors import DivergentInnerIntegral, QuadratureError
from poisson_bound.core.tolerances import Tolerances, default_tolerances


class IntegratePartition:
    __slots__ = ('a', 'b', 'result', 'error')

    def __init__(self, fn, a, b, epsabs, epsrel):
        self.a = a
        self.b = b
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            self.result, self.error = quad(fn, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)

    def __repr__(self):
        return f'{self.a}-{self.b}: {self.result}, {self.error}'

    def split(self, fn, epsabs, epsrel):
        if math.isinf(self.b):
            split_point = max(self.a * 2, self.a + 1.0)
        else:
            split_point = (self.a + self.b) / 2
        return (
            IntegratePartition(fn, self.a, split_point, epsabs, epsrel),
            IntegratePartition(fn, split_point, self.b, epsabs, epsrel),
        )


def integrate(fn: Callable[[float], float], a: float, b: float,
              points: Optional[Iterable[float]] = None,
              tol: Optional[Tolerances] = None) -> Tuple[float, float]:
    """∫_a^b fn, returns (value, abs_error).

    points are interior breakpoints (kinks, discontinuities) used as the initial
    partition. Raises DivergentInnerIntegral on non-finite pieces and QuadratureError
    when the split limit is reached.
    """
    tol = tol or default_tolerances()
    if not a < b:
        return 0.0, 0.0

    edges = [a]
    for p in sorted(set(points or ())):
        if a < p < b:
            edges.append(float(p))
    edges.append(b)

    epsabs, epsrel = tol.quad_abs_tol, tol.quad_rel_tol
    partitions = [IntegratePartition(fn, lo, hi, epsabs, epsrel)
                  for lo, hi in zip(edges[:-1], edges[1:])]

    while True:
        for part in partitions:
            if not (math.isfinite(part.result) and math.isfinite(part.error)):
                raise DivergentInnerIntegral(
                    "integral is not finite",
                    {"interval": [part.a, part.b], "value": part.result})

        total = math.fsum(part.result for part in partitions)
        cap = max(epsabs, epsrel * abs(total))
        refined = []
        for part in partitions:
            if part.error > cap:
                refined.extend(part.split(fn, epsabs, epsrel))
            else:
                refined.append(part)

        if len(refined) == len(partitions):
            return total, math.fsum(part.error for part in partitions)
        partitions = refined

        if len(partitions) > tol.quad_split_limit:
            raise QuadratureError(
                "adaptive partitioning reached its split limit",
                {"a": a, "b": b, "pieces": len(partitions), "value": total})
