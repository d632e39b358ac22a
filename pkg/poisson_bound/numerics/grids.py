"""
Description: State grids. Hybrid grids are geometric near 0 and linear in the tail,
             uniform grids have equal steps (the convolution tables need those).

Changelog:
- 2025-05-14: Initial creation.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    x_hi: float
    n_points: int = 200
    mode: str = "hybrid"  # hybrid | uniform
    n_geometric: int = 60
    x_geo_min: float = 1e-4

    def __post_init__(self):
        if not (self.x_hi > 0 and np.isfinite(self.x_hi)):
            raise ValueError(f"x_hi must be positive and finite: {self.x_hi}")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")
        if self.mode not in ("hybrid", "uniform"):
            raise ValueError(f"unknown grid mode: {self.mode}")

    def points(self) -> np.ndarray:
        if self.mode == "uniform":
            return np.linspace(0.0, self.x_hi, self.n_points)
        n_geo = min(self.n_geometric, self.n_points - 2)
        x_min = min(self.x_geo_min, self.x_hi / 10)
        geo = np.geomspace(x_min, self.x_hi, n_geo) if n_geo > 0 else np.empty(0)
        lin = np.linspace(0.0, self.x_hi, self.n_points - n_geo)
        return np.unique(np.concatenate([geo, lin]))

    @property
    def step(self) -> float:
        """Step of a uniform grid."""
        return self.x_hi / (self.n_points - 1)

    @classmethod
    def covering(cls, mean: float, factor: float = 50.0, **kwargs) -> "GridSpec":
        return cls(x_hi=factor * mean, **kwargs)


def parse_grid(text: str) -> np.ndarray:
    """Parse "a:b:step" into the closed grid a, a+step, ..., b."""
    try:
        a, b, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise ValueError(f"grid must look like a:b:step, got {text!r}")
    if step <= 0 or b < a or a < 0:
        raise ValueError(f"grid needs 0 <= a <= b and step > 0, got {text!r}")
    n = int(round((b - a) / step)) + 1
    return a + step * np.arange(n)
