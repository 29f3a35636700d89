"""Shared fixtures: hand-built single-approach net and the tuned toy grid."""

from __future__ import annotations

import dataclasses

import pytest

from wcu_planner.model import (
    Demand,
    GridDefaults,
    Lane,
    LaneGroup,
    Link,
    Node,
    RoadNetwork,
    Route,
    Scenario,
    SignalPlan,
    generate_grid_network,
    validate_network,
)


def build_single_approach(rate=360.0, greens=(28.5, 28.5), arrival="deterministic",
                          length=600.0, free_speed=13.9, ev_fraction=1.0,
                          cycle=60.0, lost=3.0) -> RoadNetwork:
    """One entry link into a signal, one exit link out: a, s, b in a line.

    The only conflicting movement is imaginary (phase 1 serves no lane),
    which isolates the queue at the stop bar for delay and energy checks.
    """
    nodes = {
        "a": Node("a", 0.0, 0.0),
        "s": Node("s", length, 0.0, signalized=True),
        "b": Node("b", length + 300.0, 0.0),
    }
    approach = Link("a>s", "a", "s", length, free_speed,
                    (Lane("a>s:0", "a>s", 0, length),))
    exit_link = Link("s>b", "s", "b", 300.0, free_speed,
                     (Lane("s>b:0", "s>b", 0, 300.0),))
    net = RoadNetwork(
        nodes=nodes,
        links={"a>s": approach, "s>b": exit_link},
        lane_groups=(LaneGroup("s", ("a>s:0",), 0),),
        signals={"s": SignalPlan("s", cycle, lost, greens)},
        demand=Demand(routes=(Route(("a>s", "s>b"), rate, ev_fraction),),
                      arrival_process=arrival),
    )
    validate_network(net)
    return net


def toy_defaults(**overrides) -> GridDefaults:
    """1-lane grid geometry tuned so NS boundary approaches grade C."""
    base = dict(lanes_per_approach=1, row_demand=250.0, col_demand=350.0,
                greens=(42.0, 15.0))
    base.update(overrides)
    return GridDefaults(**base)


def toy_scenario(**overrides) -> Scenario:
    base = Scenario(sim_duration=900.0, warmup=150.0, seed=7, grid=toy_defaults())
    return dataclasses.replace(base, **overrides) if overrides else base


@pytest.fixture
def single_approach_net() -> RoadNetwork:
    return build_single_approach()


@pytest.fixture
def toy_net() -> RoadNetwork:
    return generate_grid_network(1, 2, toy_defaults())


@pytest.fixture
def toy_sc() -> Scenario:
    return toy_scenario()
