"""Level-of-service grading of control delay and candidate-lane selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum

from .model import RoadNetwork, ValidationError
from .sim import SimulationResult

log = logging.getLogger(__name__)


class LosGrade(IntEnum):
    A = 1
    B = 2
    C = 3
    D = 4
    E = 5
    F = 6

    def __str__(self) -> str:
        return self.name


#: Upper delay bound (seconds) per grade; a value on a boundary takes the
#: better grade.  Anything above the E bound is F.
DEFAULT_LOS_THRESHOLDS: tuple[tuple[LosGrade, float], ...] = (
    (LosGrade.A, 10.0),
    (LosGrade.B, 20.0),
    (LosGrade.C, 35.0),
    (LosGrade.D, 55.0),
    (LosGrade.E, 80.0),
)


def classify_los(delay_s: float, thresholds=DEFAULT_LOS_THRESHOLDS) -> LosGrade:
    if delay_s < 0:
        raise ValidationError(f"control delay must be non-negative, got {delay_s}")
    for grade, bound in thresholds:
        if delay_s <= bound:
            return grade
    return LosGrade.F


def delay_bound(grade: LosGrade | str, thresholds=DEFAULT_LOS_THRESHOLDS) -> float:
    """Largest delay still classified as ``grade`` (inf for the worst grade)."""
    if isinstance(grade, str):
        grade = LosGrade[grade]
    for g, bound in thresholds:
        if g == grade:
            return bound
    return float("inf")


@dataclass(frozen=True)
class CandidateSet:
    """Lanes whose base-case delay classifies exactly at the target grade."""

    lanes: tuple[str, ...]  # sorted by lane id
    base_delay: dict[str, float]

    def __eq__(self, other):
        if not isinstance(other, CandidateSet):
            return NotImplemented
        return self.lanes == other.lanes and self.base_delay == other.base_delay


def select_candidates(base: SimulationResult | dict[str, float], net: RoadNetwork,
                      grade: LosGrade | str = LosGrade.C) -> CandidateSet:
    """Signal-approaching lanes whose base mean control delay grades as
    ``grade`` (exactly that grade, not better).

    ``base`` may be a simulation result or a plain lane-to-delay mapping.
    """
    if isinstance(grade, str):
        grade = LosGrade[grade]
    if isinstance(base, SimulationResult):
        delay_of = {lid: m.mean_control_delay for lid, m in base.lanes.items()}
    else:
        delay_of = dict(base)
    chosen: list[str] = []
    delays: dict[str, float] = {}
    for lane in net.approach_lanes():
        d = delay_of.get(lane.id)
        if d is None:
            continue
        if classify_los(d) == grade:
            chosen.append(lane.id)
            delays[lane.id] = d
    if not chosen:
        log.warning("no approach lane graded %s; candidate set is empty", grade)
    return CandidateSet(lanes=tuple(sorted(chosen)), base_delay=delays)
