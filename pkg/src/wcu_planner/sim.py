"""Deterministic microscopic traffic and charging simulator.

Vehicle motion follows Newell's simplified car-following rule on a fixed
timestep.  With x the mid-point position of a vehicle along its link,

    x(t + dt) = min( x(t) + v_f * dt,
                     x_leader(t + dt - tau) - d_jam,
                     stop position  if the signal is red ),

where v_f is the link free speed, tau = 1.2 s the follower reaction lag,
and d_jam = 7.5 m the stopped mid-point spacing.  The reaction lag is
applied by interpolating the leader's recorded positions, so the rule
reproduces a saturation headway of about tau + d_jam / v_f.  A vehicle
facing red halts with its mid-point at most d_jam / 2 upstream of the stop
bar; queued followers stack at d_jam spacing behind it.  There is no lane
changing: vehicles keep their lane index along the whole route, and cross
nodes instantaneously (links are measured centre to centre).

Charging is purely geometric.  A deployment tiles coil segments upstream
from the stop bar; an EV whose mid-point lies over a segment at the start
of a step receives rated_power * efficiency for that whole step,
independent of speed.  Energy is accounted in integer step counts times a
single per-step energy quantum, so lane totals and the run total add up
exactly.

Control delay per vehicle and approach link is

    (stop-bar crossing time - link entry time) - length / free_speed,

clamped at zero, with crossing times interpolated inside the step.  Only
vehicles entering the network at or after the warmup time contribute to
metrics.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (
    JAM_SPACING_M,
    Deployment,
    PlannerError,
    RoadNetwork,
    Scenario,
    SignalPlan,
    ValidationError,
    validate_deployment,
    validate_signal_plan,
)

log = logging.getLogger(__name__)

DT_S = 0.5
REACTION_S = 1.2
VEHICLE_LENGTH_M = 4.5

# Leader positions are interpolated between the records two steps and one
# step back, which resolves lags of 0.5..1.0 s beyond the current step.
_LAG_STEPS = REACTION_S / DT_S
if not 2.0 <= _LAG_STEPS <= 3.0:
    raise AssertionError("reaction lag must fall between two and three timesteps")
_HIST_FRAC = 3.0 - _LAG_STEPS


class GridlockError(PlannerError):
    """A vehicle exceeded the configured delay bound; the run is unusable."""


@dataclass(frozen=True)
class CoilSegment:
    """One installed unit, as [start, end) metres upstream of the stop bar."""

    lane: str
    start: float
    end: float


@dataclass(frozen=True)
class TraversalRecord:
    """One stop-bar crossing by one vehicle, used for control delay."""

    vehicle: int
    lane: str
    link_entry_time: float
    crossing_time: float


@dataclass(frozen=True)
class LaneMetrics:
    lane: str
    mean_control_delay: float
    vehicle_count: int
    energy_wh: float
    charge_steps: int


@dataclass(frozen=True)
class IntersectionMetrics:
    intersection: str
    mean_control_delay: float
    vehicle_count: int


@dataclass
class SimulationResult:
    lanes: dict[str, LaneMetrics]
    intersections: dict[str, IntersectionMetrics]
    total_utility_wh: float
    utility_rate_wh_per_h: float
    vehicles_entered: int
    vehicles_exited: int
    vehicles_active: int
    seed: int
    sim_duration: float
    warmup: float
    plans: dict[str, SignalPlan]

    def to_dict(self) -> dict:
        return {
            "lanes": {
                lane_id: {
                    "mean_control_delay": m.mean_control_delay,
                    "vehicle_count": m.vehicle_count,
                    "energy_wh": m.energy_wh,
                    "charge_steps": m.charge_steps,
                }
                for lane_id, m in sorted(self.lanes.items())
            },
            "intersections": {
                node: {
                    "mean_control_delay": m.mean_control_delay,
                    "vehicle_count": m.vehicle_count,
                }
                for node, m in sorted(self.intersections.items())
            },
            "total_utility_wh": self.total_utility_wh,
            "utility_rate_wh_per_h": self.utility_rate_wh_per_h,
            "vehicles_entered": self.vehicles_entered,
            "vehicles_exited": self.vehicles_exited,
            "vehicles_active": self.vehicles_active,
            "seed": self.seed,
            "sim_duration": self.sim_duration,
            "warmup": self.warmup,
            "plans": {
                node: {
                    "cycle": p.cycle,
                    "lost": p.lost,
                    "greens": list(p.greens),
                    "offset": p.offset,
                }
                for node, p in sorted(self.plans.items())
            },
        }


class Vehicle:
    """One vehicle; ``offset`` is the mid-point position along its link."""

    __slots__ = (
        "id", "route", "route_pos", "lane_index", "offset", "odometer",
        "prev1", "prev2", "speed", "length", "is_ev", "entry_time",
        "link_entry_time", "link_entry_odo", "counted", "charge_steps",
        "exited",
    )

    def __init__(self, vid: int, route: tuple[str, ...], lane_index: int,
                 is_ev: bool, entry_time: float, counted: bool):
        self.id = vid
        self.route = route
        self.route_pos = 0
        self.lane_index = lane_index
        self.offset = 0.0
        self.odometer = 0.0
        self.prev1 = 0.0  # odometer one step ago
        self.prev2 = 0.0  # odometer two steps ago
        self.speed = 0.0
        self.length = VEHICLE_LENGTH_M
        self.is_ev = is_ev
        self.entry_time = entry_time
        self.link_entry_time = entry_time
        self.link_entry_odo = 0.0
        self.counted = counted
        self.charge_steps = 0
        self.exited = False

    def lagged_odometer(self) -> float:
        """Odometer at (now + dt - tau), linearly interpolated."""
        return self.prev2 + _HIST_FRAC * (self.prev1 - self.prev2)


def signal_indication(plan: SignalPlan, phase: int, t: float) -> bool:
    """True when ``phase`` shows green at absolute time ``t``.

    Within each cycle, relative to the plan offset: phase 0 is green on
    [0, g1); phase 1 on [g1 + lost/2, g1 + lost/2 + g2).  The lost time is
    split half after each phase.
    """
    if phase not in (0, 1):
        raise ValidationError(f"signal {plan.intersection!r}: phase must be 0 or 1")
    c = (t - plan.offset) % plan.cycle
    g1, g2 = plan.greens
    if phase == 0:
        return 0.0 <= c < g1
    start = g1 + plan.lost / 2.0
    return start <= c < start + g2


def coil_segments(lane_id: str, count: int, unit_length: float) -> list[CoilSegment]:
    """Contiguous unit tiles upstream from the stop bar."""
    return [
        CoilSegment(lane=lane_id, start=i * unit_length, end=(i + 1) * unit_length)
        for i in range(count)
    ]


def charging_power(is_ev: bool, upstream_of_bar: float,
                   segments: list[CoilSegment], spec) -> float:
    """Power (W) for a vehicle whose mid-point sits ``upstream_of_bar``
    metres before the stop bar; zero for non-EVs and off-coil positions."""
    if not is_ev:
        return 0.0
    for seg in segments:
        if seg.start <= upstream_of_bar < seg.end:
            return spec.rated_power * spec.efficiency
    return 0.0


def control_delay(records: list[TraversalRecord], net: RoadNetwork) -> dict[str, tuple[float, int]]:
    """Per-lane (mean control delay, crossing count) from traversal records."""
    sums, counts = _delay_sums(records, net)
    return {lane: (sums[lane] / counts[lane], counts[lane]) for lane in sums}


def _delay_sums(records, net) -> tuple[dict[str, float], dict[str, int]]:
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for rec in records:
        link = net.link_of_lane(rec.lane)
        free = link.length / link.free_speed
        delay = (rec.crossing_time - rec.link_entry_time) - free
        if delay < 0.0:
            delay = 0.0
        sums[rec.lane] = sums.get(rec.lane, 0.0) + delay
        counts[rec.lane] = counts.get(rec.lane, 0) + 1
    return sums, counts


@dataclass
class _LaneState:
    lane_id: str
    link_id: str
    length: float
    step_len: float  # free_speed * dt
    free_time: float
    coverage: float  # metres upstream of the bar covered by coils
    signal: tuple[SignalPlan, int] | None
    vehicles: list = field(default_factory=list)  # front first
    ghost: tuple | None = None  # (departed vehicle, its entry odometer here)
    charge_steps: int = 0


class _RouteState:
    __slots__ = ("route", "rng", "next_time", "headway", "spawned", "ev_spawned",
                 "backlog")

    def __init__(self, route, rng, deterministic: bool):
        self.route = route
        self.rng = rng
        self.spawned = 0
        self.ev_spawned = 0
        self.backlog: list[Vehicle] = []
        if route.arrival_rate <= 0:
            self.headway = None
            self.next_time = float("inf")
        elif deterministic:
            self.headway = 3600.0 / route.arrival_rate
            self.next_time = self.headway
        else:
            self.headway = None
            self.next_time = rng.exponential(3600.0 / route.arrival_rate)

    def advance(self) -> None:
        if self.headway is not None:
            self.next_time += self.headway
        else:
            self.next_time += self.rng.exponential(3600.0 / self.route.arrival_rate)

    def draw_is_ev(self, deterministic: bool) -> bool:
        f = self.route.ev_fraction
        if f >= 1.0:
            return True
        if f <= 0.0:
            return False
        if deterministic:
            # integer accounting keeps the realized share exact
            return self.ev_spawned < int((self.spawned + 1) * f + 1e-9)
        return bool(self.rng.random() < f)


def run_simulation(
    net: RoadNetwork,
    plans: dict[str, SignalPlan],
    deployment: Deployment | None,
    scenario: Scenario,
    *,
    trace_path: str | Path | None = None,
) -> SimulationResult:
    """Simulate [0, sim_duration] and aggregate post-warmup metrics.

    ``plans`` must cover every signalized node; ``deployment`` may be None
    for a run without charging infrastructure.  The result is a pure
    function of the inputs and the scenario seed.
    """
    for node_id in net.signalized_nodes():
        if node_id not in plans:
            raise ValidationError(f"node {node_id!r}: signalized but has no plan in this run")
    for plan in plans.values():
        validate_signal_plan(plan)
    if deployment is not None:
        validate_deployment(deployment, net)

    units = deployment.units if deployment is not None else {}
    spec = deployment.spec if deployment is not None else scenario.wcu
    # Energy quantum: one EV over a coil for one step.
    step_energy_wh = spec.rated_power * spec.efficiency * DT_S / 3600.0
    power_w = spec.rated_power * spec.efficiency

    lanes: dict[str, _LaneState] = {}
    for link in net.links.values():
        for lane in link.lanes:
            sig = net.lane_signal(lane.id)
            lanes[lane.id] = _LaneState(
                lane_id=lane.id,
                link_id=link.id,
                length=link.length,
                step_len=link.free_speed * DT_S,
                free_time=link.length / link.free_speed,
                coverage=units.get(lane.id, 0) * spec.unit_length,
                signal=None if sig is None else (plans[sig[0]], sig[1]),
            )
    lane_order = [lanes[k] for k in sorted(lanes)]
    charged_lanes = [ls for ls in lane_order if ls.coverage > 0.0]

    deterministic = net.demand.arrival_process == "deterministic"
    routes = [
        _RouteState(route, np.random.default_rng([scenario.seed, i]), deterministic)
        for i, route in enumerate(net.demand.routes)
    ]

    trace_file = None
    trace = None
    if trace_path is not None:
        trace_file = open(trace_path, "w", newline="")
        trace = csv.writer(trace_file)
        trace.writerow(["t", "vehicle_id", "lane_id", "offset_m", "speed_mps", "charging_w"])

    n_steps = int(round(scenario.sim_duration / DT_S))
    jam = JAM_SPACING_M
    half_jam = jam / 2.0
    hfrac = _HIST_FRAC
    next_vid = 0
    entered = exited = 0
    records: list[TraversalRecord] = []

    try:
        for k in range(n_steps):
            t = k * DT_S

            # --- charging, against positions at the step start
            for ls in charged_lanes:
                cov = ls.coverage
                length = ls.length
                for veh in ls.vehicles:
                    if veh.is_ev and length - veh.offset < cov:
                        veh.charge_steps += 1
                        if veh.counted:
                            ls.charge_steps += 1
            if trace is not None:
                for ls in lane_order:
                    cov = ls.coverage
                    for veh in ls.vehicles:
                        on_coil = veh.is_ev and ls.length - veh.offset < cov
                        trace.writerow([
                            f"{t:.1f}", veh.id, ls.lane_id,
                            f"{veh.offset:.3f}", f"{veh.speed:.3f}",
                            f"{power_w if on_coil else 0.0:.1f}",
                        ])

            # --- movement targets, synchronous from step-start state
            moves: list[tuple[_LaneState, list[float]]] = []
            for ls in lane_order:
                if not ls.vehicles:
                    continue
                green = True
                if ls.signal is not None:
                    green = signal_indication(ls.signal[0], ls.signal[1], t)
                red_cap = ls.length - half_jam
                targets: list[float] = []
                leader: Vehicle | None = None
                for veh in ls.vehicles:
                    target = veh.offset + ls.step_len
                    if leader is not None:
                        lag = leader.prev2 + hfrac * (leader.prev1 - leader.prev2)
                        bound = (lag - leader.link_entry_odo) - jam
                        if bound < target:
                            target = bound
                    elif ls.ghost is not None:
                        gveh, gentry = ls.ghost
                        if gveh.exited:
                            ls.ghost = None
                        else:
                            ghist = (gveh.prev2 + hfrac * (gveh.prev1 - gveh.prev2)) - gentry
                            if ghist - jam >= ls.length:
                                ls.ghost = None
                            else:
                                bound = ghist - jam
                                if bound < target:
                                    target = bound
                    if not green and target > red_cap:
                        target = red_cap
                    if target < veh.offset:
                        target = veh.offset
                    targets.append(target)
                    leader = veh
                moves.append((ls, targets))

            # --- apply moves; crossings resolve sequentially in lane order
            landed: list[tuple[_LaneState, Vehicle]] = []
            landed_rear: dict[str, Vehicle] = {}
            for ls, targets in moves:
                keep: list[Vehicle] = []
                for veh, target in zip(ls.vehicles, targets):
                    veh.prev2 = veh.prev1
                    veh.prev1 = veh.odometer
                    if target <= ls.length:
                        delta = target - veh.offset
                        veh.offset = target
                        veh.odometer += delta
                        veh.speed = delta / DT_S
                        keep.append(veh)
                        continue
                    # Front vehicle crossing the stop bar (red already capped
                    # targets at the bar, so reaching here implies green).
                    frac = (ls.length - veh.offset) / (target - veh.offset)
                    t_cross = t + DT_S * frac
                    old_entry_time = veh.link_entry_time
                    old_entry_odo = veh.link_entry_odo
                    if veh.route_pos + 1 >= len(veh.route):
                        # Route ends beyond this link: leave the network.
                        delta = target - veh.offset
                        veh.odometer += delta
                        veh.speed = delta / DT_S
                        veh.exited = True
                        exited += 1
                        ls.ghost = None  # departed vehicles exert no constraint
                        if ls.signal is not None and veh.counted:
                            records.append(TraversalRecord(
                                veh.id, ls.lane_id, old_entry_time, t_cross))
                        continue
                    next_link = net.links[veh.route[veh.route_pos + 1]]
                    idx = min(veh.lane_index, len(next_link.lanes) - 1)
                    next_ls = lanes[next_link.lanes[idx].id]
                    entry = target - ls.length
                    same_step = landed_rear.get(next_ls.lane_id)
                    if same_step is not None:
                        entry = min(entry, same_step.offset - jam)
                    elif next_ls.vehicles:
                        rear = next_ls.vehicles[-1]
                        lag = rear.prev2 + hfrac * (rear.prev1 - rear.prev2)
                        entry = min(entry, (lag - rear.link_entry_odo) - jam)
                    elif next_ls.ghost is not None:
                        gveh, gentry = next_ls.ghost
                        if not gveh.exited:
                            ghist = (gveh.prev2 + hfrac * (gveh.prev1 - gveh.prev2)) - gentry
                            entry = min(entry, ghist - jam)
                    if entry >= 0.0:
                        delta = (ls.length - veh.offset) + entry
                        veh.odometer += delta
                        veh.speed = delta / DT_S
                        veh.route_pos += 1
                        veh.offset = entry
                        veh.link_entry_odo = veh.odometer - entry
                        veh.link_entry_time = t_cross
                        landed.append((next_ls, veh))
                        landed_rear[next_ls.lane_id] = veh
                        ls.ghost = (veh, old_entry_odo)
                        if ls.signal is not None and veh.counted:
                            records.append(TraversalRecord(
                                veh.id, ls.lane_id, old_entry_time, t_cross))
                    else:
                        # Spillback: hold at the bar.
                        capped = ls.length - half_jam
                        if capped < veh.offset:
                            capped = veh.offset
                        delta = capped - veh.offset
                        veh.offset = capped
                        veh.odometer += delta
                        veh.speed = delta / DT_S
                        keep.append(veh)
                ls.vehicles = keep
            for next_ls, veh in landed:
                next_ls.vehicles.append(veh)

            # --- arrivals: spawn into per-route backlogs, insert where room
            t_next = (k + 1) * DT_S
            for rs in routes:
                while rs.next_time <= t_next:
                    is_ev = rs.draw_is_ev(deterministic)
                    first_link = net.links[rs.route.links[0]]
                    veh = Vehicle(
                        vid=next_vid,
                        route=rs.route.links,
                        lane_index=rs.spawned % len(first_link.lanes),
                        is_ev=is_ev,
                        entry_time=t_next,
                        counted=True,
                    )
                    next_vid += 1
                    rs.spawned += 1
                    if is_ev:
                        rs.ev_spawned += 1
                    rs.backlog.append(veh)
                    rs.advance()
                while rs.backlog:
                    veh = rs.backlog[0]
                    first_link = net.links[rs.route.links[0]]
                    idx = min(veh.lane_index, len(first_link.lanes) - 1)
                    ls = lanes[first_link.lanes[idx].id]
                    if ls.vehicles and ls.vehicles[-1].offset < jam:
                        break
                    veh.entry_time = t_next
                    veh.link_entry_time = t_next
                    veh.counted = t_next >= scenario.warmup
                    ls.vehicles.append(veh)
                    entered += 1
                    rs.backlog.pop(0)

            # --- gridlock watchdog on lane fronts
            for ls in lane_order:
                if ls.vehicles:
                    front = ls.vehicles[0]
                    if (t_next - front.link_entry_time) - ls.free_time > scenario.gridlock_limit:
                        raise GridlockError(
                            f"vehicle {front.id} has been on lane {ls.lane_id!r} for "
                            f"{t_next - front.link_entry_time:.0f} s against a free-flow "
                            f"time of {ls.free_time:.0f} s "
                            f"(bound {scenario.gridlock_limit:.0f} s)"
                        )
    finally:
        if trace_file is not None:
            trace_file.close()

    # --- aggregate post-warmup metrics
    delay_sums, delay_counts = _delay_sums(records, net)
    lane_metrics: dict[str, LaneMetrics] = {}
    total_steps = 0
    for ls in lane_order:
        count = delay_counts.get(ls.lane_id, 0)
        mean = delay_sums[ls.lane_id] / count if count else 0.0
        total_steps += ls.charge_steps
        lane_metrics[ls.lane_id] = LaneMetrics(
            lane=ls.lane_id,
            mean_control_delay=mean,
            vehicle_count=count,
            energy_wh=ls.charge_steps * step_energy_wh,
            charge_steps=ls.charge_steps,
        )

    inter_metrics: dict[str, IntersectionMetrics] = {}
    per_node: dict[str, tuple[float, int]] = {}
    for group in net.lane_groups:
        s, c = per_node.get(group.intersection, (0.0, 0))
        for lane_id in group.lanes:
            s += delay_sums.get(lane_id, 0.0)
            c += delay_counts.get(lane_id, 0)
        per_node[group.intersection] = (s, c)
    for node_id in net.signalized_nodes():
        s, c = per_node.get(node_id, (0.0, 0))
        inter_metrics[node_id] = IntersectionMetrics(
            intersection=node_id,
            mean_control_delay=(s / c) if c else 0.0,
            vehicle_count=c,
        )

    active = sum(len(ls.vehicles) for ls in lane_order)
    hours = (scenario.sim_duration - scenario.warmup) / 3600.0
    total_utility = total_steps * step_energy_wh
    return SimulationResult(
        lanes=lane_metrics,
        intersections=inter_metrics,
        total_utility_wh=total_utility,
        utility_rate_wh_per_h=total_utility / hours if hours > 0 else 0.0,
        vehicles_entered=entered,
        vehicles_exited=exited,
        vehicles_active=active,
        seed=scenario.seed,
        sim_duration=scenario.sim_duration,
        warmup=scenario.warmup,
        plans=dict(plans),
    )
