"""
Description: Declarative model files (YAML). A file describes exactly one queue:
             map_gi1 (C, D, service) or mg1_wcl (lambda, service, capacity L), plus the
             drift regime request, manual parameters, tolerance overrides and the seed.

Changelog:
- 2025-06-18: Initial creation.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import yaml

from poisson_bound.core.errors import InputError, ModelFileError
from poisson_bound.core.tolerances import Tolerances
from poisson_bound.models.map_model import MarkovArrivalProcess, poisson_process, validate_map
from poisson_bound.models.service_law import (
    ServiceLaw, TailEnvelope, envelope_from_dict, service_law_from_dict,
)

MAP_GI1 = "map_gi1"
MG1_WCL = "mg1_wcl"
REGIMES = ("light", "moderate", "polynomial")

_COMMON_KEYS = {"kind", "service", "regime", "theta", "theta_strategy", "envelope",
                "tolerances", "seed"}
_KIND_KEYS = {
    MAP_GI1: {"C", "D", "t0", "witness_x0"},
    MG1_WCL: {"lambda", "L", "eps", "x0", "rho_tilde", "kappa_tilde"},
}
_PARAM_KEYS = ("theta", "theta_strategy", "eps", "x0", "rho_tilde", "kappa_tilde", "t0", "witness_x0")


@dataclass(frozen=True, eq=False)
class ModelFile:
    kind: str
    mp: MarkovArrivalProcess
    law: ServiceLaw
    L: float
    regime: str
    params: Dict[str, Any]
    envelope: Optional[TailEnvelope]
    tolerances: Tolerances
    seed: Optional[int]
    raw: Dict[str, Any] = field(repr=False)

    @property
    def lam(self) -> float:
        return float(self.mp.D[0, 0]) if self.kind == MG1_WCL else float("nan")


def _number(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelFileError(f"{name} must be a number", {name: value})
    value = float(value)
    if not math.isfinite(value):
        raise ModelFileError(f"{name} must be finite", {name: value})
    return value


def _capacity(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() == "inf":
            return math.inf
        raise ModelFileError("L must be a number or \"inf\"", {"L": value})
    return _number("L", value)


def _matrix(name: str, value):
    if not (isinstance(value, list) and value and all(isinstance(row, list) for row in value)):
        raise ModelFileError(f"{name} must be an array of arrays", {name: value})
    return [[_number(f"{name}[{i}][{j}]", v) for j, v in enumerate(row)] for i, row in enumerate(value)]


def _default_regime(law: ServiceLaw, envelope: Optional[TailEnvelope]) -> str:
    env = envelope or law.default_envelope()
    if not law.is_heavy or env is None:
        return "light"
    return env.kind if env.kind in ("moderate", "polynomial") else "light"


def parse_model(doc: Dict[str, Any]) -> ModelFile:
    """Build a ModelFile from an already loaded YAML document."""
    if not isinstance(doc, dict):
        raise ModelFileError("model file must hold a single top-level mapping")
    kind = doc.get("kind")
    if kind not in _KIND_KEYS:
        raise ModelFileError(f"kind must be one of {sorted(_KIND_KEYS)}", {"kind": kind})
    unknown = sorted(set(doc) - _COMMON_KEYS - _KIND_KEYS[kind])
    if unknown:
        raise ModelFileError(f"unknown keys for {kind}: {', '.join(unknown)}", {"keys": unknown})
    if "service" not in doc:
        raise ModelFileError("service is required")

    try:
        law = service_law_from_dict(doc["service"])
        envelope = envelope_from_dict(doc["envelope"]) if "envelope" in doc else None
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFileError(f"bad service or envelope entry: {e}")

    if kind == MAP_GI1:
        for key in ("C", "D"):
            if key not in doc:
                raise ModelFileError(f"{key} is required for map_gi1")
        mp = validate_map(_matrix("C", doc["C"]), _matrix("D", doc["D"]))
        L = math.inf
    else:
        if "lambda" not in doc:
            raise ModelFileError("lambda is required for mg1_wcl")
        lam = _number("lambda", doc["lambda"])
        if lam <= 0:
            raise ModelFileError("lambda must be positive", {"lambda": lam})
        mp = poisson_process(lam)
        L = _capacity(doc.get("L", "inf"))
        if not L > 0:
            raise ModelFileError("L must be positive", {"L": L})

    regime = doc.get("regime") or _default_regime(law, envelope)
    if regime not in REGIMES:
        raise ModelFileError(f"regime must be one of {', '.join(REGIMES)}", {"regime": regime})
    if kind == MAP_GI1 and regime != "light":
        raise ModelFileError("map_gi1 models only support the light regime", {"regime": regime})

    params = {}
    for key in _PARAM_KEYS:
        if key in doc:
            params[key] = doc[key] if key == "theta_strategy" else _number(key, doc[key])

    overrides = doc.get("tolerances") or {}
    if not isinstance(overrides, dict):
        raise ModelFileError("tolerances must be a mapping")
    try:
        tolerances = Tolerances.from_config(**overrides)
    except TypeError as e:
        raise ModelFileError(f"unknown tolerance: {e}", {"tolerances": overrides})

    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64):
        raise ModelFileError("seed must be an unsigned 64-bit integer", {"seed": seed})

    return ModelFile(kind=kind, mp=mp, law=law, L=L, regime=regime, params=params,
                     envelope=envelope, tolerances=tolerances, seed=seed, raw=doc)


def load_model_file(path: str) -> ModelFile:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = yaml.safe_load(f)
    except OSError as e:
        raise ModelFileError(f"cannot read model file: {e}", {"path": path})
    except yaml.YAMLError as e:
        raise ModelFileError(f"model file is not valid YAML: {e}", {"path": path})
    try:
        return parse_model(doc)
    except InputError as e:
        e.details.setdefault("path", path)
        raise
