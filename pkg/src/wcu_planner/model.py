"""Domain model for charging-lane planning studies.

Road networks are directed graphs of links between nodes; each link carries
an ordered list of lanes.  Lanes that terminate at a signalized node form
lane groups served by one of two signal phases on a fixed-cycle pre-timed
plan.  Demand is a set of routes (connected link sequences) with an arrival
rate and an EV share.  On top of that sit the planning inputs: a wireless
charging unit spec (coil length, rated power, efficiency, cost), a
deployment (unit counts per lane) and a scenario (budget, signal bounds,
simulation horizon, optimizer settings).

Everything here is plain data plus validation; the physics lives in
:mod:`wcu_planner.sim`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

SCHEMA_VERSION = 1

#: Minimum stopped spacing between vehicle mid-points, metres.  Links must be
#: at least this long for the car-following model to be meaningful.
JAM_SPACING_M = 7.5

#: Fraction of a lane's usable length that may be tiled with charging units.
COVERAGE_FRACTION = 0.25

#: Green times are snapped to this grid (seconds) when plans are built, so
#: that g1 + g2 + lost == cycle holds exactly in floating point.
GREEN_QUANTUM_S = 0.0625


class PlannerError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PlannerError):
    """Raised when an input file cannot be parsed or has the wrong schema."""


class ValidationError(PlannerError):
    """Raised when parsed input violates a structural invariant."""


class InfeasiblePlanError(ValidationError):
    """Raised when a signal plan cannot satisfy the green-time bounds."""


# ---------------------------------------------------------------------------
# Core network types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float
    signalized: bool = False


@dataclass(frozen=True)
class Lane:
    """A single lane of a link.

    ``usable_length`` is the stretch (measured upstream from the downstream
    end of the link) where charging units may be installed.
    """

    id: str
    link: str
    index: int
    usable_length: float


@dataclass(frozen=True)
class Link:
    id: str
    from_node: str
    to_node: str
    length: float
    free_speed: float
    lanes: tuple[Lane, ...]


@dataclass(frozen=True)
class LaneGroup:
    """Lanes sharing a stop bar at a signalized intersection."""

    intersection: str
    lanes: tuple[str, ...]
    phase: int


@dataclass(frozen=True)
class SignalPlan:
    """Two-phase pre-timed plan with a fixed cycle.

    Phase 0 is green on [0, g1) of the cycle (relative to ``offset``);
    phase 1 on [g1 + lost/2, g1 + lost/2 + g2).  The lost time is split
    half after each phase, and g1 + g2 + lost == cycle exactly.
    """

    intersection: str
    cycle: float
    lost: float
    greens: tuple[float, float]
    offset: float = 0.0


@dataclass(frozen=True)
class Route:
    links: tuple[str, ...]
    arrival_rate: float  # veh/h
    ev_fraction: float


@dataclass(frozen=True)
class Demand:
    routes: tuple[Route, ...]
    arrival_process: str = "poisson"  # "poisson" | "deterministic"


@dataclass(frozen=True)
class WcuSpec:
    """One inductive charging unit: a coil segment embedded in the pavement."""

    unit_length: float = 5.0  # m
    rated_power: float = 20000.0  # W
    efficiency: float = 0.85
    unit_cost: int = 2000  # whole currency units


@dataclass(frozen=True)
class Deployment:
    """Unit counts per lane; counts tile upstream from the stop bar."""

    units: dict[str, int]
    spec: WcuSpec

    def __eq__(self, other):  # dict field breaks the generated hash, not eq
        if not isinstance(other, Deployment):
            return NotImplemented
        return self.units == other.units and self.spec == other.spec


@dataclass(frozen=True)
class GaParams:
    population: int = 100
    generations: int = 200
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    stall_limit: int = 40
    delay_penalty_weight: float = 50.0  # Wh per second of delay excess
    seed: int | None = None


@dataclass(frozen=True)
class GridDefaults:
    """Knobs for the synthetic lattice generator; all overridable."""

    link_length: float = 300.0
    free_speed: float = 13.9
    lanes_per_approach: int = 2
    row_demand: float = 400.0  # veh/h per row corridor, each direction
    col_demand: float = 400.0
    ev_fraction: float = 1.0
    arrival_process: str = "poisson"
    cycle: float = 60.0
    lost: float = 3.0
    greens: tuple[float, float] = (28.5, 28.5)
    offset: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """Study-level configuration shared by every stage of a pipeline run."""

    budget: int = 10000
    min_green: float = 15.0
    sim_duration: float = 4200.0
    warmup: float = 600.0
    seed: int = 0
    los_limit: str = "C"
    ga: GaParams = field(default_factory=GaParams)
    wcu: WcuSpec = field(default_factory=WcuSpec)
    grid: GridDefaults = field(default_factory=GridDefaults)
    gridlock_limit: float = 1800.0


@dataclass
class RoadNetwork:
    nodes: dict[str, Node]
    links: dict[str, Link]
    lane_groups: tuple[LaneGroup, ...]
    signals: dict[str, SignalPlan]
    demand: Demand

    def __post_init__(self):
        self._lane_index: dict[str, Lane] = {}
        self._lane_phase: dict[str, tuple[str, int]] = {}
        for link in self.links.values():
            for lane in link.lanes:
                self._lane_index[lane.id] = lane
        for group in self.lane_groups:
            for lane_id in group.lanes:
                self._lane_phase[lane_id] = (group.intersection, group.phase)

    def __eq__(self, other):
        if not isinstance(other, RoadNetwork):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.links == other.links
            and self.lane_groups == other.lane_groups
            and self.signals == other.signals
            and self.demand == other.demand
        )

    def lane(self, lane_id: str) -> Lane:
        try:
            return self._lane_index[lane_id]
        except KeyError:
            raise ValidationError(f"unknown lane {lane_id!r}") from None

    def link_of_lane(self, lane_id: str) -> Link:
        return self.links[self.lane(lane_id).link]

    def lane_signal(self, lane_id: str) -> tuple[str, int] | None:
        """(intersection, phase) when the lane approaches a signal."""
        return self._lane_phase.get(lane_id)

    def approach_lanes(self) -> list[Lane]:
        """Lanes whose link terminates at a signalized node, sorted by id."""
        out = []
        for link in self.links.values():
            if self.nodes[link.to_node].signalized:
                out.extend(link.lanes)
        return sorted(out, key=lambda ln: ln.id)

    def signalized_nodes(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.signalized)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_signal_plan(plan: SignalPlan) -> None:
    g1, g2 = plan.greens
    if plan.cycle <= 0 or plan.lost < 0:
        raise ValidationError(f"signal {plan.intersection!r}: bad cycle/lost")
    if g1 <= 0 or g2 <= 0:
        raise ValidationError(
            f"signal {plan.intersection!r}: greens must be positive, got {plan.greens}"
        )
    # Exact identity, not a tolerance: plans are built on a 1/16 s grid.
    if g1 + g2 + plan.lost != plan.cycle:
        raise ValidationError(
            f"signal {plan.intersection!r}: g1 + g2 + lost != cycle "
            f"({g1} + {g2} + {plan.lost} != {plan.cycle})"
        )
    if not 0 <= plan.offset < plan.cycle:
        raise ValidationError(
            f"signal {plan.intersection!r}: offset {plan.offset} outside [0, cycle)"
        )


def validate_network(net: RoadNetwork) -> None:
    """Check every structural invariant; error messages name the entity."""
    for link in net.links.values():
        if link.from_node not in net.nodes:
            raise ValidationError(f"link {link.id!r}: unknown from-node {link.from_node!r}")
        if link.to_node not in net.nodes:
            raise ValidationError(f"link {link.id!r}: unknown to-node {link.to_node!r}")
        if link.from_node == link.to_node:
            raise ValidationError(f"link {link.id!r}: from == to")
        if link.length < JAM_SPACING_M:
            raise ValidationError(
                f"link {link.id!r}: length {link.length} m is below jam spacing"
            )
        if link.free_speed <= 0:
            raise ValidationError(f"link {link.id!r}: free_speed must be positive")
        if not link.lanes:
            raise ValidationError(f"link {link.id!r}: needs at least one lane")
        for pos, lane in enumerate(link.lanes):
            if lane.index != pos:
                raise ValidationError(
                    f"lane {lane.id!r}: index {lane.index} out of order on link {link.id!r}"
                )
            if lane.link != link.id:
                raise ValidationError(
                    f"lane {lane.id!r}: claims link {lane.link!r}, nested under {link.id!r}"
                )
            if not 0 < lane.usable_length <= link.length:
                raise ValidationError(
                    f"lane {lane.id!r}: usable_length {lane.usable_length} "
                    f"outside (0, {link.length}]"
                )
    lane_ids = [ln.id for lk in net.links.values() for ln in lk.lanes]
    if len(lane_ids) != len(set(lane_ids)):
        dup = sorted({x for x in lane_ids if lane_ids.count(x) > 1})[0]
        raise ValidationError(f"lane {dup!r}: duplicate lane id")

    grouped: dict[str, str] = {}
    for group in net.lane_groups:
        node = net.nodes.get(group.intersection)
        if node is None or not node.signalized:
            raise ValidationError(
                f"lane group at {group.intersection!r}: not a signalized node"
            )
        if group.phase not in (0, 1):
            raise ValidationError(
                f"lane group at {group.intersection!r}: phase must be 0 or 1"
            )
        for lane_id in group.lanes:
            lane = net.lane(lane_id)
            link = net.links[lane.link]
            if link.to_node != group.intersection:
                raise ValidationError(
                    f"lane {lane_id!r}: grouped at {group.intersection!r} "
                    f"but terminates at {link.to_node!r}"
                )
            if lane_id in grouped:
                raise ValidationError(f"lane {lane_id!r}: appears in two lane groups")
            grouped[lane_id] = group.intersection

    for link in net.links.values():
        if net.nodes[link.to_node].signalized:
            for lane in link.lanes:
                if lane.id not in grouped:
                    raise ValidationError(
                        f"lane {lane.id!r}: approaches signal {link.to_node!r} "
                        f"but belongs to no lane group"
                    )

    for node_id, plan in net.signals.items():
        if plan.intersection != node_id:
            raise ValidationError(f"signal {node_id!r}: plan names {plan.intersection!r}")
        node = net.nodes.get(node_id)
        if node is None or not node.signalized:
            raise ValidationError(f"signal {node_id!r}: not a signalized node")
        validate_signal_plan(plan)
    for node_id in (n.id for n in net.nodes.values() if n.signalized):
        if node_id not in net.signals:
            raise ValidationError(f"node {node_id!r}: signalized but has no plan")

    if net.demand.arrival_process not in ("poisson", "deterministic"):
        raise ValidationError(
            f"demand: unknown arrival_process {net.demand.arrival_process!r}"
        )
    for i, route in enumerate(net.demand.routes):
        if not route.links:
            raise ValidationError(f"route {i}: empty link sequence")
        for link_id in route.links:
            if link_id not in net.links:
                raise ValidationError(f"route {i}: unknown link {link_id!r}")
        for a, b in zip(route.links, route.links[1:]):
            if net.links[a].to_node != net.links[b].from_node:
                raise ValidationError(
                    f"route {i}: links {a!r} and {b!r} are not connected"
                )
        if route.arrival_rate < 0:
            raise ValidationError(f"route {i}: negative arrival rate")
        if not 0.0 <= route.ev_fraction <= 1.0:
            raise ValidationError(f"route {i}: ev_fraction outside [0, 1]")


def validate_deployment(dep: Deployment, net: RoadNetwork) -> None:
    for lane_id, count in dep.units.items():
        lane = net.lane(lane_id)  # raises on unknown lane
        if not isinstance(count, int) or count < 0:
            raise ValidationError(f"deployment on {lane_id!r}: bad count {count!r}")
        if count * dep.spec.unit_length > lane.usable_length + 1e-9:
            raise ValidationError(
                f"deployment on {lane_id!r}: {count} units of "
                f"{dep.spec.unit_length} m exceed usable {lane.usable_length} m"
            )


# ---------------------------------------------------------------------------
# Planning arithmetic
# ---------------------------------------------------------------------------


def deployment_cost(dep: Deployment) -> int:
    """Total cost in whole currency units (exact integer arithmetic)."""
    return sum(dep.units.values()) * dep.spec.unit_cost


def feasible_green_range(plan: SignalPlan, min_green: float) -> tuple[float, float]:
    """Bounds for g1 so both phases respect ``min_green`` at fixed cycle."""
    hi = plan.cycle - plan.lost - min_green
    if hi < min_green:
        raise InfeasiblePlanError(
            f"signal {plan.intersection!r}: cycle {plan.cycle} cannot fit two "
            f"greens of at least {min_green} s plus {plan.lost} s lost time"
        )
    return (min_green, hi)


def max_units_for_lane(lane: Lane, spec: WcuSpec, budget: int) -> int:
    """Per-lane cap: coverage limit and what the budget could ever buy."""
    by_length = math.floor(lane.usable_length * COVERAGE_FRACTION / spec.unit_length + 1e-9)
    by_budget = budget // spec.unit_cost
    return max(0, min(by_length, by_budget))


def quantize_green(g: float) -> float:
    return round(g / GREEN_QUANTUM_S) * GREEN_QUANTUM_S


def build_plan(base: SignalPlan, g1: float) -> SignalPlan:
    """New plan with phase-0 green g1; g2 absorbs the rest of the cycle.

    g1 is snapped to the 1/16 s grid so the cycle identity is exact.
    """
    g1q = quantize_green(g1)
    g2 = base.cycle - base.lost - g1q
    plan = replace(base, greens=(g1q, g2))
    validate_signal_plan(plan)
    return plan


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise ParseError(f"{where}: missing key {key!r}")
    return record[key]


def network_to_dict(net: RoadNetwork) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "nodes": [
            {"id": n.id, "x": n.x, "y": n.y, "signalized": n.signalized}
            for n in sorted(net.nodes.values(), key=lambda n: n.id)
        ],
        "links": [
            {
                "id": lk.id,
                "from": lk.from_node,
                "to": lk.to_node,
                "length": lk.length,
                "free_speed": lk.free_speed,
                "lanes": [
                    {
                        "id": ln.id,
                        "link": ln.link,
                        "index": ln.index,
                        "usable_length": ln.usable_length,
                    }
                    for ln in lk.lanes
                ],
            }
            for lk in sorted(net.links.values(), key=lambda l: l.id)
        ],
        "lane_groups": [
            {
                "intersection": g.intersection,
                "lanes": list(g.lanes),
                "phase": g.phase,
            }
            for g in net.lane_groups
        ],
        "signals": [
            {
                "intersection": p.intersection,
                "cycle": p.cycle,
                "lost": p.lost,
                "greens": list(p.greens),
                "offset": p.offset,
            }
            for p in sorted(net.signals.values(), key=lambda p: p.intersection)
        ],
        "demand": [
            {
                "arrival_process": net.demand.arrival_process,
                "routes": [
                    {
                        "links": list(r.links),
                        "arrival_rate": r.arrival_rate,
                        "ev_fraction": r.ev_fraction,
                    }
                    for r in net.demand.routes
                ],
            }
        ],
    }


def network_from_dict(data: dict, source: str = "<network>") -> RoadNetwork:
    if not isinstance(data, dict):
        raise ParseError(f"{source}: expected a JSON object at top level")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"{source}: unsupported schema_version {version!r}")
    for key in ("nodes", "links", "lane_groups", "signals", "demand"):
        if not isinstance(data.get(key), list):
            raise ParseError(f"{source}: missing or non-array key {key!r}")

    nodes: dict[str, Node] = {}
    for rec in data["nodes"]:
        node = Node(
            id=str(_require(rec, "id", "node record")),
            x=float(_require(rec, "x", "node record")),
            y=float(_require(rec, "y", "node record")),
            signalized=bool(rec.get("signalized", False)),
        )
        if node.id in nodes:
            raise ValidationError(f"node {node.id!r}: duplicate id")
        nodes[node.id] = node

    links: dict[str, Link] = {}
    for rec in data["links"]:
        link_id = str(_require(rec, "id", "link record"))
        lanes = []
        for lrec in _require(rec, "lanes", f"link {link_id!r}"):
            lanes.append(
                Lane(
                    id=str(_require(lrec, "id", f"lane of link {link_id!r}")),
                    link=str(lrec.get("link", link_id)),
                    index=int(_require(lrec, "index", f"lane of link {link_id!r}")),
                    usable_length=float(
                        _require(lrec, "usable_length", f"lane of link {link_id!r}")
                    ),
                )
            )
        link = Link(
            id=link_id,
            from_node=str(_require(rec, "from", f"link {link_id!r}")),
            to_node=str(_require(rec, "to", f"link {link_id!r}")),
            length=float(_require(rec, "length", f"link {link_id!r}")),
            free_speed=float(_require(rec, "free_speed", f"link {link_id!r}")),
            lanes=tuple(lanes),
        )
        if link.id in links:
            raise ValidationError(f"link {link.id!r}: duplicate id")
        links[link.id] = link

    groups = tuple(
        LaneGroup(
            intersection=str(_require(rec, "intersection", "lane_group record")),
            lanes=tuple(str(x) for x in _require(rec, "lanes", "lane_group record")),
            phase=int(_require(rec, "phase", "lane_group record")),
        )
        for rec in data["lane_groups"]
    )

    signals: dict[str, SignalPlan] = {}
    for rec in data["signals"]:
        greens = _require(rec, "greens", "signal record")
        if not (isinstance(greens, list) and len(greens) == 2):
            raise ParseError("signal record: greens must be a 2-element array")
        plan = SignalPlan(
            intersection=str(_require(rec, "intersection", "signal record")),
            cycle=float(_require(rec, "cycle", "signal record")),
            lost=float(_require(rec, "lost", "signal record")),
            greens=(float(greens[0]), float(greens[1])),
            offset=float(rec.get("offset", 0.0)),
        )
        if plan.intersection in signals:
            raise ValidationError(f"signal {plan.intersection!r}: duplicate plan")
        signals[plan.intersection] = plan

    demand_recs = data["demand"]
    if len(demand_recs) != 1:
        raise ParseError(f"{source}: demand must hold exactly one record")
    drec = demand_recs[0]
    demand = Demand(
        routes=tuple(
            Route(
                links=tuple(str(x) for x in _require(rrec, "links", "route record")),
                arrival_rate=float(_require(rrec, "arrival_rate", "route record")),
                ev_fraction=float(_require(rrec, "ev_fraction", "route record")),
            )
            for rrec in _require(drec, "routes", "demand record")
        ),
        arrival_process=str(drec.get("arrival_process", "poisson")),
    )

    net = RoadNetwork(
        nodes=nodes, links=links, lane_groups=groups, signals=signals, demand=demand
    )
    validate_network(net)
    return net


def load_network(path: str | Path) -> RoadNetwork:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"network file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from None
    return network_from_dict(data, source=str(path))


def save_network(net: RoadNetwork, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "budget": sc.budget,
        "min_green": sc.min_green,
        "sim_duration": sc.sim_duration,
        "warmup": sc.warmup,
        "seed": sc.seed,
        "los_limit": sc.los_limit,
        "gridlock_limit": sc.gridlock_limit,
        "ga": {
            "population": sc.ga.population,
            "generations": sc.ga.generations,
            "tournament_size": sc.ga.tournament_size,
            "crossover_rate": sc.ga.crossover_rate,
            "mutation_rate": sc.ga.mutation_rate,
            "stall_limit": sc.ga.stall_limit,
            "delay_penalty_weight": sc.ga.delay_penalty_weight,
            "seed": sc.ga.seed,
        },
        "wcu": {
            "unit_length": sc.wcu.unit_length,
            "rated_power": sc.wcu.rated_power,
            "efficiency": sc.wcu.efficiency,
            "unit_cost": sc.wcu.unit_cost,
        },
        "grid": {
            "link_length": sc.grid.link_length,
            "free_speed": sc.grid.free_speed,
            "lanes_per_approach": sc.grid.lanes_per_approach,
            "row_demand": sc.grid.row_demand,
            "col_demand": sc.grid.col_demand,
            "ev_fraction": sc.grid.ev_fraction,
            "arrival_process": sc.grid.arrival_process,
            "cycle": sc.grid.cycle,
            "lost": sc.grid.lost,
            "greens": list(sc.grid.greens),
            "offset": sc.grid.offset,
        },
    }


def scenario_from_dict(data: dict, source: str = "<scenario>") -> Scenario:
    if not isinstance(data, dict):
        raise ParseError(f"{source}: expected a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"{source}: unsupported schema_version {version!r}")
    defaults = Scenario()
    ga_rec = data.get("ga", {})
    wcu_rec = data.get("wcu", {})
    grid_rec = data.get("grid", {})
    ga = GaParams(
        population=int(ga_rec.get("population", defaults.ga.population)),
        generations=int(ga_rec.get("generations", defaults.ga.generations)),
        tournament_size=int(ga_rec.get("tournament_size", defaults.ga.tournament_size)),
        crossover_rate=float(ga_rec.get("crossover_rate", defaults.ga.crossover_rate)),
        mutation_rate=float(ga_rec.get("mutation_rate", defaults.ga.mutation_rate)),
        stall_limit=int(ga_rec.get("stall_limit", defaults.ga.stall_limit)),
        delay_penalty_weight=float(
            ga_rec.get("delay_penalty_weight", defaults.ga.delay_penalty_weight)
        ),
        seed=None if ga_rec.get("seed") is None else int(ga_rec["seed"]),
    )
    wcu = WcuSpec(
        unit_length=float(wcu_rec.get("unit_length", defaults.wcu.unit_length)),
        rated_power=float(wcu_rec.get("rated_power", defaults.wcu.rated_power)),
        efficiency=float(wcu_rec.get("efficiency", defaults.wcu.efficiency)),
        unit_cost=int(wcu_rec.get("unit_cost", defaults.wcu.unit_cost)),
    )
    grid_defaults = defaults.grid
    greens = grid_rec.get("greens", list(grid_defaults.greens))
    grid = GridDefaults(
        link_length=float(grid_rec.get("link_length", grid_defaults.link_length)),
        free_speed=float(grid_rec.get("free_speed", grid_defaults.free_speed)),
        lanes_per_approach=int(
            grid_rec.get("lanes_per_approach", grid_defaults.lanes_per_approach)
        ),
        row_demand=float(grid_rec.get("row_demand", grid_defaults.row_demand)),
        col_demand=float(grid_rec.get("col_demand", grid_defaults.col_demand)),
        ev_fraction=float(grid_rec.get("ev_fraction", grid_defaults.ev_fraction)),
        arrival_process=str(
            grid_rec.get("arrival_process", grid_defaults.arrival_process)
        ),
        cycle=float(grid_rec.get("cycle", grid_defaults.cycle)),
        lost=float(grid_rec.get("lost", grid_defaults.lost)),
        greens=(float(greens[0]), float(greens[1])),
        offset=float(grid_rec.get("offset", grid_defaults.offset)),
    )
    sc = Scenario(
        budget=int(data.get("budget", defaults.budget)),
        min_green=float(data.get("min_green", defaults.min_green)),
        sim_duration=float(data.get("sim_duration", defaults.sim_duration)),
        warmup=float(data.get("warmup", defaults.warmup)),
        seed=int(data.get("seed", defaults.seed)),
        los_limit=str(data.get("los_limit", defaults.los_limit)),
        ga=ga,
        wcu=wcu,
        grid=grid,
        gridlock_limit=float(data.get("gridlock_limit", defaults.gridlock_limit)),
    )
    validate_scenario(sc)
    return sc


def validate_scenario(sc: Scenario) -> None:
    if sc.budget < 0:
        raise ValidationError(f"scenario: negative budget {sc.budget}")
    if sc.min_green <= 0:
        raise ValidationError("scenario: min_green must be positive")
    if not 0 <= sc.warmup < sc.sim_duration:
        raise ValidationError(
            f"scenario: warmup {sc.warmup} must lie in [0, sim_duration)"
        )
    if not 0 <= sc.seed < 2**64:
        raise ValidationError("scenario: seed must be a 64-bit unsigned integer")
    if sc.los_limit not in "ABCDEF" or len(sc.los_limit) != 1:
        raise ValidationError(f"scenario: bad los_limit {sc.los_limit!r}")
    if sc.ga.population < 2 or sc.ga.generations < 1 or sc.ga.tournament_size < 1:
        raise ValidationError("scenario: degenerate GA parameters")
    for name, rate in (
        ("crossover_rate", sc.ga.crossover_rate),
        ("mutation_rate", sc.ga.mutation_rate),
    ):
        if not 0.0 <= rate <= 1.0:
            raise ValidationError(f"scenario: ga.{name} outside [0, 1]")
    if sc.wcu.unit_length <= 0 or sc.wcu.rated_power < 0 or sc.wcu.unit_cost <= 0:
        raise ValidationError("scenario: bad WCU spec")
    if not 0.0 < sc.wcu.efficiency <= 1.0:
        raise ValidationError("scenario: WCU efficiency outside (0, 1]")
    if sc.gridlock_limit <= 0:
        raise ValidationError("scenario: gridlock_limit must be positive")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from None
    return scenario_from_dict(data, source=str(path))


def save_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Synthetic lattice generator
# ---------------------------------------------------------------------------


def generate_grid_network(rows: int, cols: int, defaults: GridDefaults | None = None) -> RoadNetwork:
    """rows x cols signalized lattice with boundary sources/sinks.

    Every corridor (each row, each column) gets a through route in both
    directions.  Row movements are served by phase 0, column movements by
    phase 1.
    """
    if rows < 1 or cols < 1:
        raise ValidationError(f"grid must be at least 1x1, got {rows}x{cols}")
    d = defaults or GridDefaults()
    length = d.link_length

    nodes: dict[str, Node] = {}

    def add_node(node_id: str, x: float, y: float, signalized: bool) -> str:
        nodes[node_id] = Node(id=node_id, x=x, y=y, signalized=signalized)
        return node_id

    grid_ids = [
        [add_node(f"i{r}-{c}", c * length, r * length, True) for c in range(cols)]
        for r in range(rows)
    ]
    west = [add_node(f"bw-{r}", -length, r * length, False) for r in range(rows)]
    east = [add_node(f"be-{r}", cols * length, r * length, False) for r in range(rows)]
    south = [add_node(f"bs-{c}", c * length, -length, False) for c in range(cols)]
    north = [add_node(f"bn-{c}", c * length, rows * length, False) for c in range(cols)]

    links: dict[str, Link] = {}

    def add_link(a: str, b: str) -> str:
        link_id = f"{a}>{b}"
        lanes = tuple(
            Lane(id=f"{link_id}:{i}", link=link_id, index=i, usable_length=length)
            for i in range(d.lanes_per_approach)
        )
        links[link_id] = Link(
            id=link_id,
            from_node=a,
            to_node=b,
            length=length,
            free_speed=d.free_speed,
            lanes=lanes,
        )
        return link_id

    def add_pair(a: str, b: str) -> None:
        add_link(a, b)
        add_link(b, a)

    for r in range(rows):
        add_pair(west[r], grid_ids[r][0])
        for c in range(cols - 1):
            add_pair(grid_ids[r][c], grid_ids[r][c + 1])
        add_pair(grid_ids[r][cols - 1], east[r])
    for c in range(cols):
        add_pair(south[c], grid_ids[0][c])
        for r in range(rows - 1):
            add_pair(grid_ids[r][c], grid_ids[r + 1][c])
        add_pair(grid_ids[rows - 1][c], north[c])

    groups: list[LaneGroup] = []
    for link in sorted(links.values(), key=lambda l: l.id):
        to = nodes[link.to_node]
        if not to.signalized:
            continue
        frm = nodes[link.from_node]
        is_row_move = abs(to.x - frm.x) > abs(to.y - frm.y)
        groups.append(
            LaneGroup(
                intersection=to.id,
                lanes=tuple(ln.id for ln in link.lanes),
                phase=0 if is_row_move else 1,
            )
        )

    base = SignalPlan(
        intersection="", cycle=d.cycle, lost=d.lost, greens=d.greens, offset=d.offset
    )
    signals = {
        grid_ids[r][c]: replace(base, intersection=grid_ids[r][c])
        for r in range(rows)
        for c in range(cols)
    }

    def corridor(seq: list[str]) -> tuple[str, ...]:
        return tuple(f"{a}>{b}" for a, b in zip(seq, seq[1:]))

    routes: list[Route] = []
    for r in range(rows):
        row_nodes = [west[r]] + grid_ids[r] + [east[r]]
        routes.append(Route(corridor(row_nodes), d.row_demand, d.ev_fraction))
        routes.append(Route(corridor(row_nodes[::-1]), d.row_demand, d.ev_fraction))
    for c in range(cols):
        col_nodes = [south[c]] + [grid_ids[r][c] for r in range(rows)] + [north[c]]
        routes.append(Route(corridor(col_nodes), d.col_demand, d.ev_fraction))
        routes.append(Route(corridor(col_nodes[::-1]), d.col_demand, d.ev_fraction))

    net = RoadNetwork(
        nodes=nodes,
        links=links,
        lane_groups=tuple(groups),
        signals=signals,
        demand=Demand(routes=tuple(routes), arrival_process=d.arrival_process),
    )
    validate_network(net)
    return net
