"""Russell 2D valence-arousal space and its four-quadrant discretization.

Valence runs left (negative) to right (positive), arousal bottom (low)
to top (high), both normalized to [0, 1]. The 0.5 threshold splits each
axis; a value exactly at 0.5 counts as positive / high so the mapping
is total and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum


class CircumplexError(ValueError):
    """Valence or arousal outside the unit interval."""


class Quadrant(str, Enum):
    """Grid cells of the discretized circumplex, named by screen position."""

    TL = "TL"  # negative valence, high arousal
    TR = "TR"  # positive valence, high arousal
    BL = "BL"  # negative valence, low arousal
    BR = "BR"  # positive valence, low arousal


QUADRANT_ORDER = (Quadrant.TL, Quadrant.TR, Quadrant.BL, Quadrant.BR)


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise CircumplexError(f"{name} must be in [0, 1], got {value!r}")


def as_utc(at: datetime) -> datetime:
    """Normalize a timestamp to UTC; naive datetimes are taken as UTC."""
    if at.tzinfo is None:
        return at.replace(tzinfo=timezone.utc)
    return at.astimezone(timezone.utc)


@dataclass(frozen=True)
class EmotionSample:
    """One self-report: continuous valence/arousal with user and UTC time."""

    user_id: str
    at: datetime
    valence: float
    arousal: float

    def __post_init__(self) -> None:
        _check_unit("valence", self.valence)
        _check_unit("arousal", self.arousal)
        object.__setattr__(self, "at", as_utc(self.at))

    @property
    def quadrant(self) -> Quadrant:
        return quadrant_of(*discretize(self.valence, self.arousal))


def discretize(valence: float, arousal: float) -> tuple[bool, bool]:
    """Threshold continuous (v, a) at 0.5 into (positive?, high?) flags."""
    _check_unit("valence", valence)
    _check_unit("arousal", arousal)
    return valence >= 0.5, arousal >= 0.5


def quadrant_of(valence_positive: bool, arousal_high: bool) -> Quadrant:
    """Map per-axis signs onto the visual grid quadrant."""
    if arousal_high:
        return Quadrant.TR if valence_positive else Quadrant.TL
    return Quadrant.BR if valence_positive else Quadrant.BL
