"""
Description: The single tolerance record shared by all numerical operations.

Changelog:
- 2025-05-12: Initial creation.
"""

from dataclasses import dataclass, fields, replace

from config.config import CONFIG


@dataclass(frozen=True)
class Tolerances:
    structural_tol: float = 1e-12
    residual_tol: float = 1e-10
    expm_tol: float = 1e-12
    expm_max_terms: int = 1_000_000
    perron_tol: float = 1e-10
    perron_max_iter: int = 100_000
    quad_abs_tol: float = 1e-12
    quad_rel_tol: float = 1e-9
    quad_split_limit: int = 2000
    generator_tol: float = 1e-6
    f_inf_floor: float = 1e-10
    xi_floor: float = 1e-300
    table_gap_tol: float = 1e-3

    @classmethod
    def from_config(cls, **overrides) -> "Tolerances":
        """从 numerics 配置段构建，缺失项使用默认值"""
        values = {}
        for f in fields(cls):
            raw = CONFIG.get(f"numerics.{f.name}")
            if raw is not None:
                values[f.name] = type(f.default)(raw)
        values.update(overrides)
        return cls(**values)

    def with_(self, **changes) -> "Tolerances":
        return replace(self, **changes)


_DEFAULT = None


def default_tolerances() -> Tolerances:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = Tolerances.from_config()
    return _DEFAULT
