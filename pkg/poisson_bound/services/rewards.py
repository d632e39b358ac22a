"""
Description: Reward functions g(w, phase) for the regenerative simulator. Each reward
             integrates itself exactly over a linear-decay segment where it can.

Changelog:
- 2025-05-22: Initial creation.
"""

import math
from abc import ABC, abstractmethod
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad


class Reward(ABC):

    @abstractmethod
    def value(self, w: float, phase: int = 0) -> float:
        ...

    @abstractmethod
    def decay_integral(self, w: float, d: float, phase: int = 0) -> float:
        """∫_0^d g(w - s, phase) ds for 0 <= d <= w."""

    def idle_integral(self, d: float, phase: int = 0) -> float:
        return self.value(0.0, phase) * d


class ExponentialReward(Reward):
    """g(w, i) = c · weights[i] · exp(θ w)."""

    def __init__(self, c: float, theta: float, weights: Sequence[float] = (1.0,)):
        self.c = float(c)
        self.theta = float(theta)
        self.weights = np.asarray(weights, dtype=float)

    def value(self, w, phase=0):
        return self.c * self.weights[phase] * math.exp(self.theta * w)

    def decay_integral(self, w, d, phase=0):
        cw = self.c * self.weights[phase]
        if self.theta == 0.0:
            return cw * d
        return cw * math.exp(self.theta * w) * -math.expm1(-self.theta * d) / self.theta


class DerivativeReward(Reward):
    """g = c · V' for a known antiderivative V."""

    def __init__(self, c: float, V: Callable[[float], float], dV: Callable[[float], float]):
        self.c = float(c)
        self.V = V
        self.dV = dV

    def value(self, w, phase=0):
        return self.c * float(self.dV(w))

    def decay_integral(self, w, d, phase=0):
        return self.c * (float(self.V(w)) - float(self.V(w - d)))


class ConstantReward(Reward):

    def __init__(self, c: float = 1.0):
        self.c = float(c)

    def value(self, w, phase=0):
        return self.c

    def decay_integral(self, w, d, phase=0):
        return self.c * d


class IndicatorAtZero(Reward):
    """g = 1 on {w = 0} (optionally restricted to one phase)."""

    def __init__(self, phase: int = None):
        self.phase = phase

    def value(self, w, phase=0):
        if w != 0.0:
            return 0.0
        return 1.0 if self.phase is None or phase == self.phase else 0.0

    def decay_integral(self, w, d, phase=0):
        return 0.0


class CallableReward(Reward):
    """Arbitrary g(w, phase); decay segments by adaptive quadrature."""

    def __init__(self, fn: Callable[[float, int], float]):
        self.fn = fn

    def value(self, w, phase=0):
        return float(self.fn(w, phase))

    def decay_integral(self, w, d, phase=0):
        if d <= 0.0:
            return 0.0
        value, _ = quad(lambda s: self.fn(s, phase), w - d, w)
        return value
