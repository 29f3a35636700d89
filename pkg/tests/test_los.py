"""Level-of-service grading and candidate-lane selection."""

import logging

import pytest

from wcu_planner.los import (
    LosGrade,
    classify_los,
    delay_bound,
    select_candidates,
)
from wcu_planner.model import ValidationError, generate_grid_network

from conftest import toy_defaults


def test_grade_boundaries_take_the_better_grade():
    assert classify_los(0.0) is LosGrade.A
    assert classify_los(10.0) is LosGrade.A
    assert classify_los(10.000001) is LosGrade.B
    assert classify_los(20.0) is LosGrade.B
    assert classify_los(35.0) is LosGrade.C
    assert classify_los(35.1) is LosGrade.D
    assert classify_los(55.0) is LosGrade.D
    assert classify_los(80.0) is LosGrade.E
    assert classify_los(80.5) is LosGrade.F
    assert classify_los(1e6) is LosGrade.F


def test_grades_are_totally_ordered():
    assert LosGrade.A < LosGrade.B < LosGrade.C < LosGrade.D < LosGrade.E < LosGrade.F
    # grading is monotone in delay
    last = LosGrade.A
    for tenth in range(0, 1200):
        grade = classify_los(tenth / 10.0)
        assert grade >= last
        last = grade


def test_negative_delay_rejected():
    with pytest.raises(ValidationError):
        classify_los(-0.1)


def test_delay_bound():
    assert delay_bound(LosGrade.C) == 35.0
    assert delay_bound("A") == 10.0
    assert delay_bound("F") == float("inf")


def test_select_candidates_takes_exactly_the_target_grade():
    net = generate_grid_network(1, 1, toy_defaults())
    lanes = [ln.id for ln in net.approach_lanes()]
    assert len(lanes) == 4
    delays = {lanes[0]: 5.0,    # A: too good
              lanes[1]: 25.0,   # C
              lanes[2]: 35.0,   # C (boundary)
              lanes[3]: 40.0}   # D: too bad
    cand = select_candidates(delays, net, "C")
    assert cand.lanes == (min(lanes[1], lanes[2]), max(lanes[1], lanes[2]))
    assert cand.base_delay == {lanes[1]: 25.0, lanes[2]: 35.0}


def test_select_candidates_ignores_unsignalized_lanes():
    net = generate_grid_network(1, 1, toy_defaults())
    exit_lane = next(ln.id for lk in net.links.values() for ln in lk.lanes
                     if not net.nodes[lk.to_node].signalized)
    cand = select_candidates({exit_lane: 25.0}, net, "C")
    assert cand.lanes == ()


def test_empty_candidate_set_warns(caplog):
    net = generate_grid_network(1, 1, toy_defaults())
    with caplog.at_level(logging.WARNING, logger="wcu_planner.los"):
        cand = select_candidates({}, net, "C")
    assert cand.lanes == ()
    assert any("candidate" in rec.message for rec in caplog.records)
