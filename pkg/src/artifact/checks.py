"""The :class:`LemmaCheck` record returned by every verification routine."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


class PreconditionError(ValueError):
    """A lemma's hypotheses are not met by the supplied input."""


class RegistryError(KeyError):
    """Unknown lemma or theorem identifier."""


@dataclass
class LemmaCheck:
    """Outcome of checking one inequality ``lhs <= rhs``.

    Attributes
    ----------
    lemma_id : str
        Identifier of the inequality (see the registries in each module).
    lhs, rhs : float
        The two sides, oriented so that the claim reads ``lhs <= rhs``.
    margin : float
        ``rhs - lhs``.
    passed : bool
        ``lhs <= rhs * (1 + tol) + atol``.
    params : dict
        Free-form parameters, always including ``tol``.
    """

    lemma_id: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    params: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, lemma_id: str, lhs: float, rhs: float, tol: float = 1e-10,
                atol: float = 0.0, **params: Any) -> "LemmaCheck":
        """Build a record for the claim ``lhs <= rhs``."""
        lhs = float(lhs)
        rhs = float(rhs)
        ok = bool(lhs <= rhs * (1.0 + tol) + atol) if math.isfinite(lhs) else False
        params = dict(params)
        params.setdefault("tol", tol)
        if atol:
            params.setdefault("atol", atol)
        return cls(lemma_id, lhs, rhs, rhs - lhs, ok, params)

    @classmethod
    def equality(cls, lemma_id: str, value: float, target: float, tol: float,
                 relative: bool = False, **params: Any) -> "LemmaCheck":
        """Record ``|value - target| <= tol`` (scaled by ``|target|`` if relative)."""
        value = float(value)
        target = float(target)
        scale = abs(target) if relative and target != 0 else 1.0
        err = abs(value - target) / scale
        params = dict(params)
        params.setdefault("tol", tol)
        params.setdefault("mode", "relative" if relative else "absolute")
        params.setdefault("value", value)
        params.setdefault("target", target)
        return cls(lemma_id, err, tol, tol - err, bool(err <= tol), params)

    def to_dict(self) -> dict:
        """JSON-ready dictionary with the key ``pass`` for the flag."""
        return {
            "lemma_id": self.lemma_id,
            "lhs": _clean(self.lhs),
            "rhs": _clean(self.rhs),
            "margin": _clean(self.margin),
            "pass": self.passed,
            "params": {k: _clean(v) for k, v in sorted(self.params.items())},
        }


def _clean(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if hasattr(v, "item"):
        return _clean(v.item())
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    return v
