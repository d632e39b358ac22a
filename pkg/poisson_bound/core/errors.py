"""
Description: Structured error hierarchy. Every error carries a stable code (its class
             name), a details dict and the process exit code the CLI maps it to.

Changelog:
- 2025-05-12: Initial creation.
"""

from typing import Any, Dict, Optional


class PoissonBoundError(Exception):
    """所有业务错误的基类"""

    exit_code = 1

    def __init__(self, message: str = "", details: Optional[Dict[str, Any]] = None):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details = details or {}

    @property
    def code(self) -> str:
        return self.__class__.__name__

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


# ---- exit 2: 输入错误 ----

class InputError(PoissonBoundError):
    exit_code = 2


class ModelFileError(InputError):
    pass


class InvalidShape(InputError):
    pass


class NonGeneratorRows(InputError):
    pass


class NegativeRate(InputError):
    pass


class Reducible(InputError):
    pass


class NoArrivals(InputError):
    pass


class PositiveDiagonal(InputError):
    pass


class NotNonnegative(InputError):
    pass


class MismatchedModel(InputError):
    pass


class SmallSetNotAtom(InputError):
    pass


class UnstableModel(InputError):
    pass


# ---- exit 3: 不可行 / 数值失败 ----

class InfeasibleError(PoissonBoundError):
    exit_code = 3


class OutsideDomain(InfeasibleError):
    pass


# 同一错误在漂移构造中的名字
OutsideMgfDomain = OutsideDomain


class InfeasibleTheta(InfeasibleError):
    pass


class NoFeasibleTheta(InfeasibleError):
    pass


class InfeasibleParameters(InfeasibleError):
    pass


class EnvelopeViolated(InfeasibleError):
    pass


class TailTooHeavy(InfeasibleError):
    pass


class ZeroServiceMass(InfeasibleError):
    pass


class DegenerateXi(InfeasibleError):
    pass


class ConditionViolated(InfeasibleError):
    pass


class AllDegenerate(InfeasibleError):
    pass


class DivergentInnerIntegral(InfeasibleError):
    pass


class SingularSystem(InfeasibleError):
    pass


class NotConverged(InfeasibleError):
    pass


class GridTooCoarse(InfeasibleError):
    pass


class ToleranceUnreachable(InfeasibleError):
    pass


class ExplodedCycle(InfeasibleError):
    pass


class QuadratureError(InfeasibleError):
    pass


# ---- exit 4: 验证失败 ----

class VerificationFailed(PoissonBoundError):
    exit_code = 4


class InvalidParameter(InputError):
    """参数取值超出允许范围（服务分布、包络、搜索选项等）"""
