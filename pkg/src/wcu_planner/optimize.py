"""Mixed-integer genetic optimizer over surrogate models.

A chromosome pairs one integer gene per candidate lane (installed unit
count, 0..n_max) with one real gene per affected intersection (phase-0
green within the feasible range).  Fitness is the summed surrogate
utility minus a linear penalty on surrogate delay above the level-of-
service bound; the budget is enforced by repair (greedily removing the
unit whose loss of surrogate utility is smallest, ties to the lowest
lane id) rather than by penalty.  Selection is tournament; crossover is
uniform on the integer part and blend (alpha = 0.5) on the real part;
mutation steps integers by +/-1 and jitters greens with a Gaussian of
one tenth of the feasible range.  One elite survives unchanged.  Given
the same inputs and seed, the search is fully deterministic.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np

from .model import (
    Deployment,
    GaParams,
    PlannerError,
    RoadNetwork,
    Scenario,
    SignalPlan,
    build_plan,
    deployment_cost,
    feasible_green_range,
)
from .los import classify_los, delay_bound
from .sim import run_simulation
from .surrogate import SurrogateSet

log = logging.getLogger(__name__)


class NoFeasibleSolutionError(PlannerError):
    """Every individual violated the delay constraint at every sampled green."""


@dataclass
class Chromosome:
    """Gene order follows sorted lane ids and sorted intersection ids."""

    units: np.ndarray   # int64, one per candidate lane
    greens: np.ndarray  # float64, one per affected intersection

    def copy(self) -> Chromosome:
        return Chromosome(self.units.copy(), self.greens.copy())


@dataclass
class _Space:
    """Search-space bookkeeping shared by all GA operators."""

    lanes: list[str]
    intersections: list[str]
    lane_inter: list[int]        # lane index -> intersection index
    n_max: np.ndarray            # per lane
    g_lo: np.ndarray             # per intersection
    g_hi: np.ndarray

    @classmethod
    def from_surrogates(cls, surrogates: SurrogateSet) -> _Space:
        lanes = surrogates.lane_ids()
        intersections = surrogates.intersections()
        inter_index = {node: i for i, node in enumerate(intersections)}
        lane_inter = [inter_index[surrogates.lanes[l].intersection] for l in lanes]
        n_max = np.array([surrogates.lanes[l].n_max for l in lanes], dtype=np.int64)
        g_lo = np.empty(len(intersections))
        g_hi = np.empty(len(intersections))
        for lane, ii in zip(lanes, lane_inter):
            lo, hi = surrogates.lanes[lane].green_bounds
            g_lo[ii], g_hi[ii] = lo, hi
        return cls(lanes, intersections, lane_inter, n_max, g_lo, g_hi)

    def lane_green(self, c: Chromosome, lane_idx: int) -> float:
        return float(c.greens[self.lane_inter[lane_idx]])


def _total_utility(c: Chromosome, s: SurrogateSet, space: _Space) -> float:
    total = 0.0
    for i, lane in enumerate(space.lanes):
        total += s.eval_utility(lane, int(c.units[i]), space.lane_green(c, i))
    return total


def _delay_excess(c: Chromosome, s: SurrogateSet, space: _Space, bound: float) -> float:
    excess = 0.0
    for i, lane in enumerate(space.lanes):
        d = s.eval_delay(lane, space.lane_green(c, i))
        if d > bound:
            excess += d - bound
    return excess


def fitness(c: Chromosome, s: SurrogateSet, scenario: Scenario) -> float:
    """Surrogate utility minus the weighted delay-violation penalty."""
    space = _Space.from_surrogates(s)
    bound = delay_bound(scenario.los_limit)
    return (_total_utility(c, s, space)
            - scenario.ga.delay_penalty_weight * _delay_excess(c, s, space, bound))


def repair_budget(c: Chromosome, s: SurrogateSet, scenario: Scenario) -> Chromosome:
    """Remove units, cheapest utility loss first, until the budget holds."""
    space = _Space.from_surrogates(s)
    return _repair(c, s, space, scenario)


def _repair(c: Chromosome, s: SurrogateSet, space: _Space, scenario: Scenario) -> Chromosome:
    unit_cost = scenario.wcu.unit_cost
    over = int(c.units.sum()) * unit_cost - scenario.budget
    if over <= 0:
        return c
    # Marginal loss of dropping one unit from lane i at its current count;
    # the heap is keyed (loss, lane index) so ties resolve to the lowest
    # lane id (space.lanes is sorted).
    def marginal(i: int, n: int) -> float:
        g = space.lane_green(c, i)
        lane = space.lanes[i]
        return s.eval_utility(lane, n, g) - s.eval_utility(lane, n - 1, g)

    heap: list[tuple[float, int, int]] = []
    for i in range(len(space.lanes)):
        n = int(c.units[i])
        if n > 0:
            heapq.heappush(heap, (marginal(i, n), i, n))
    while over > 0:
        if not heap:
            raise PlannerError("budget repair ran out of removable units")
        loss, i, n_at_push = heapq.heappop(heap)
        n = int(c.units[i])
        if n != n_at_push:  # stale entry after an earlier decrement
            if n > 0:
                heapq.heappush(heap, (marginal(i, n), i, n))
            continue
        c.units[i] = n - 1
        over -= unit_cost
        if n - 1 > 0:
            heapq.heappush(heap, (marginal(i, n - 1), i, n - 1))
    return c


@dataclass
class ValidationReport:
    utility_wh: float
    utility_rate_wh_per_h: float
    lane_delay: dict[str, float]
    intersection_los: dict[str, str]
    delay_violations: list[str]

    def to_dict(self) -> dict:
        return {
            "utility_wh": self.utility_wh,
            "utility_rate_wh_per_h": self.utility_rate_wh_per_h,
            "lane_delay": dict(sorted(self.lane_delay.items())),
            "intersection_los": dict(sorted(self.intersection_los.items())),
            "delay_violations": sorted(self.delay_violations),
        }


@dataclass
class Solution:
    deployment: Deployment
    plans: dict[str, SignalPlan]
    predicted_utility_wh: float
    feasible: bool
    generations_run: int
    validated: ValidationReport | None = None


def run_ga(surrogates: SurrogateSet, scenario: Scenario,
           base_plans: dict[str, SignalPlan],
           params: GaParams | None = None) -> Solution:
    """Search for the utility-maximizing feasible deployment and greens.

    Returns the best individual that satisfies the delay constraint (the
    budget always holds via repair, gene bounds via the operators), with
    plans for every intersection: optimized where the search touched them,
    base timings elsewhere.
    """
    params = params or scenario.ga
    space = _Space.from_surrogates(surrogates)
    if not space.lanes:
        raise NoFeasibleSolutionError("surrogate set is empty; nothing to optimize")
    seed = params.seed if params.seed is not None else scenario.seed
    rng = np.random.default_rng(seed)
    bound = delay_bound(scenario.los_limit)
    n_lanes = len(space.lanes)
    n_inters = len(space.intersections)
    g_span = space.g_hi - space.g_lo

    def evaluate(c: Chromosome) -> tuple[float, bool]:
        util = _total_utility(c, surrogates, space)
        excess = _delay_excess(c, surrogates, space, bound)
        return util - params.delay_penalty_weight * excess, excess == 0.0

    def random_individual() -> Chromosome:
        units = rng.integers(0, space.n_max + 1, size=n_lanes, dtype=np.int64)
        greens = space.g_lo + rng.random(n_inters) * g_span
        return _repair(Chromosome(units, greens), surrogates, space, scenario)

    population = [random_individual() for _ in range(params.population)]
    scored = [evaluate(c) for c in population]

    best_feasible: Chromosome | None = None
    best_feasible_fit = -np.inf
    best_fit = -np.inf
    stall = 0
    generations_run = 0

    def note_best(c: Chromosome, fit: float, feasible: bool) -> None:
        nonlocal best_feasible, best_feasible_fit
        if feasible and fit > best_feasible_fit:
            best_feasible = c.copy()
            best_feasible_fit = fit

    for c, (fit, feas) in zip(population, scored):
        note_best(c, fit, feas)

    def tournament() -> Chromosome:
        picks = rng.integers(0, params.population, size=params.tournament_size)
        best_i = int(picks[0])
        for p in picks[1:]:
            if scored[int(p)][0] > scored[best_i][0]:
                best_i = int(p)
        return population[best_i]

    for gen in range(params.generations):
        generations_run = gen + 1
        gen_best = max(range(params.population), key=lambda i: scored[i][0])
        if scored[gen_best][0] > best_fit + 1e-12:
            best_fit = scored[gen_best][0]
            stall = 0
        else:
            stall += 1
            if stall >= params.stall_limit:
                log.info("GA stalled after %d generations", generations_run)
                break

        next_pop = [population[gen_best].copy()]  # elitism
        while len(next_pop) < params.population:
            p1, p2 = tournament(), tournament()
            if rng.random() < params.crossover_rate:
                mask = rng.random(n_lanes) < 0.5
                units1 = np.where(mask, p1.units, p2.units)
                units2 = np.where(mask, p2.units, p1.units)
                lo = np.minimum(p1.greens, p2.greens)
                hi = np.maximum(p1.greens, p2.greens)
                d = hi - lo
                greens1 = rng.uniform(lo - 0.5 * d, hi + 0.5 * d)
                greens2 = rng.uniform(lo - 0.5 * d, hi + 0.5 * d)
                children = [Chromosome(units1.astype(np.int64), greens1),
                            Chromosome(units2.astype(np.int64), greens2)]
            else:
                children = [p1.copy(), p2.copy()]
            for child in children:
                if len(next_pop) >= params.population:
                    break
                flips = rng.random(n_lanes) < params.mutation_rate
                if flips.any():
                    steps = rng.integers(0, 2, size=n_lanes) * 2 - 1
                    child.units = child.units + np.where(flips, steps, 0)
                jitters = rng.random(n_inters) < params.mutation_rate
                if jitters.any():
                    noise = rng.normal(0.0, 0.1 * g_span)
                    child.greens = child.greens + np.where(jitters, noise, 0.0)
                child.units = np.clip(child.units, 0, space.n_max).astype(np.int64)
                child.greens = np.clip(child.greens, space.g_lo, space.g_hi)
                _repair(child, surrogates, space, scenario)
                next_pop.append(child)
        population = next_pop
        scored = [evaluate(c) for c in population]
        for c, (fit, feas) in zip(population, scored):
            note_best(c, fit, feas)

    if best_feasible is None:
        raise NoFeasibleSolutionError(
            "no individual satisfied the delay bound at any sampled green split"
        )

    units = {
        lane: int(n)
        for lane, n in zip(space.lanes, best_feasible.units)
        if int(n) > 0
    }
    plans = dict(base_plans)
    for node, g1 in zip(space.intersections, best_feasible.greens):
        plans[node] = build_plan(base_plans[node], float(g1))
    predicted = _total_utility(best_feasible, surrogates, space)
    return Solution(
        deployment=Deployment(units=units, spec=scenario.wcu),
        plans=plans,
        predicted_utility_wh=predicted,
        feasible=True,
        generations_run=generations_run,
    )


def validate_solution(sol: Solution, net: RoadNetwork, scenario: Scenario,
                      candidates=None) -> Solution:
    """Re-simulate the solution and attach measured utility and delays.

    Raises when the solution's plans violate the green bounds; flags (but
    does not raise on) lanes whose re-simulated delay exceeds the LOS
    bound.
    """
    bound = delay_bound(scenario.los_limit)
    for plan in sol.plans.values():
        lo, hi = feasible_green_range(plan, scenario.min_green)
        for g in plan.greens:
            if g < scenario.min_green:
                raise PlannerError(
                    f"solution plan at {plan.intersection!r} has green {g} s "
                    f"below the minimum {scenario.min_green} s"
                )
        if not lo <= plan.greens[0] <= hi + 1e-9:
            raise PlannerError(
                f"solution plan at {plan.intersection!r} has g1 outside [{lo}, {hi}]"
            )
    if deployment_cost(sol.deployment) > scenario.budget:
        raise PlannerError("solution exceeds the budget")

    result = run_simulation(net, sol.plans, sol.deployment, scenario)
    watch = list(candidates.lanes) if candidates is not None else sorted(sol.deployment.units)
    lane_delay = {}
    violations = []
    for lane_id in watch:
        d = result.lanes[lane_id].mean_control_delay
        lane_delay[lane_id] = d
        if d > bound:
            violations.append(lane_id)
    inter_los = {
        node: str(classify_los(m.mean_control_delay))
        for node, m in result.intersections.items()
    }
    sol.validated = ValidationReport(
        utility_wh=result.total_utility_wh,
        utility_rate_wh_per_h=result.utility_rate_wh_per_h,
        lane_delay=lane_delay,
        intersection_los=inter_los,
        delay_violations=violations,
    )
    if violations:
        log.warning("re-simulation put %d lane(s) above the %s bound: %s",
                    len(violations), scenario.los_limit, ", ".join(sorted(violations)))
    return sol
