"""Figure of merit for an evaluated design.

A fuel-consumption reward with soft one-sided penalties on peak pressure,
pressure-rise rate, and the two emission outputs. Values at or below a limit
incur no penalty; each relative excess is charged linearly with its weight.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

TARGETS = ("isfc", "m_soot", "m_nox", "mprr", "pmax")


@dataclass(frozen=True)
class ObjectiveVector:
    """The five evaluator outputs for one design point.

    isfc:   indicated specific fuel consumption, g/kWh (> 0)
    m_soot: soot mass emission, g/kWh (>= 0)
    m_nox:  NOx mass emission, g/kWh (>= 0)
    mprr:   maximum pressure rise rate, bar/deg (>= 0)
    pmax:   peak cylinder pressure, bar (> 0)
    """

    isfc: float
    m_soot: float
    m_nox: float
    mprr: float
    pmax: float

    def __post_init__(self):
        vals = [self.isfc, self.m_soot, self.m_nox, self.mprr, self.pmax]
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"objective values must be finite, got {vals}")
        if self.isfc <= 0:
            raise ValueError(f"isfc must be > 0, got {self.isfc}")
        if self.pmax <= 0:
            raise ValueError(f"pmax must be > 0, got {self.pmax}")
        for name in ("m_soot", "m_nox", "mprr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.isfc, self.m_soot, self.m_nox, self.mprr, self.pmax)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MeritConstants:
    """Weights and limits of the merit formula. Defaults are the shipped ones."""

    scale: float = 100.0
    isfc_numerator: float = 160.0
    pmax_limit: float = 220.0
    pmax_weight: float = 100.0
    mprr_limit: float = 15.0
    mprr_weight: float = 10.0
    soot_limit: float = 0.0268
    soot_weight: float = 1.0
    nox_limit: float = 1.34
    nox_weight: float = 1.0

    def __post_init__(self):
        for name in ("pmax_limit", "mprr_limit", "soot_limit", "nox_limit"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MeritConstants":
        return cls(**data)


def hinge_penalty(value: float, limit: float) -> float:
    """Relative excess above ``limit``; exactly 0 at or below the limit."""
    if limit <= 0:
        raise ValueError(f"limit must be > 0, got {limit}")
    if value > limit:
        return value / limit - 1.0
    return 0.0


def merit(obj: ObjectiveVector, constants: MeritConstants | None = None) -> float:
    """Scalar merit of an objective vector (higher is better)."""
    c = constants or MeritConstants()
    if obj.isfc <= 0:
        raise ValueError(f"isfc must be > 0, got {obj.isfc}")
    return merit_formula(
        obj.isfc, obj.m_soot, obj.m_nox, obj.mprr, obj.pmax, c
    )


def merit_formula(isfc, m_soot, m_nox, mprr, pmax, c: MeritConstants):
    """Merit arithmetic on plain floats or arrays.

    Unlike :func:`merit` this does not validate its inputs; a non-positive
    isfc yields -inf so that optimizer callbacks stay total. Vectorized
    callers pass numpy arrays.
    """
    isfc = np.asarray(isfc, dtype=float)
    reward = np.where(isfc > 0, c.isfc_numerator / np.where(isfc > 0, isfc, 1.0), -np.inf)
    penalty = (
        c.pmax_weight * _hinge(pmax, c.pmax_limit)
        + c.mprr_weight * _hinge(mprr, c.mprr_limit)
        + c.soot_weight * _hinge(m_soot, c.soot_limit)
        + c.nox_weight * _hinge(m_nox, c.nox_limit)
    )
    out = c.scale * (reward - penalty)
    return float(out) if out.ndim == 0 else out


def _hinge(value, limit):
    value = np.asarray(value, dtype=float)
    return np.maximum(value / limit - 1.0, 0.0)
