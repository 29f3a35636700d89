"""Per-lane surrogate models fitted from a small simulation design.

For every candidate lane we simulate a 3 x 3 design over (unit count,
phase-0 green): counts {0, ceil(n_max/2), n_max} crossed with greens
{lo, mid, hi} from the feasible range of the lane's intersection.
Degenerate axes are deduplicated.  Each point perturbs exactly one lane
and one intersection relative to the base case, so points with n = 0
depend only on (intersection, g1) and their runs are shared by all
candidate lanes at that intersection.

Fitting yields, per lane, a bilinear interpolant of utility (Wh) over
(n, g1) and a piecewise-linear delay curve over g1 taken from the n = 0
row (installing coils does not alter vehicle dynamics, so delay does not
depend on n).  Evaluation clamps to the sampled box and reproduces the
sampled values exactly at the nodes.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    Deployment,
    PlannerError,
    RoadNetwork,
    Scenario,
    SignalPlan,
    build_plan,
    feasible_green_range,
    max_units_for_lane,
    quantize_green,
)
from .sim import run_simulation

log = logging.getLogger(__name__)


class MissingPointError(PlannerError):
    """The sample set does not cover the full grid for some lane."""


class UnknownLaneError(PlannerError):
    """A surrogate was queried for a lane it was never fitted on."""


@dataclass(frozen=True)
class SamplePoint:
    """One (lane, n, g1) design point, optionally with measured outputs."""

    lane: str
    intersection: str
    n: int
    g1: float
    utility_wh: float | None = None
    delay_s: float | None = None


@dataclass
class LaneSurrogate:
    lane: str
    intersection: str
    n_levels: np.ndarray  # ascending ints
    g_levels: np.ndarray  # ascending floats
    utility: np.ndarray   # shape (len(n_levels), len(g_levels))
    delay: np.ndarray     # shape (len(g_levels),), from the n = 0 row

    @property
    def n_max(self) -> int:
        return int(self.n_levels[-1])

    @property
    def green_bounds(self) -> tuple[float, float]:
        return float(self.g_levels[0]), float(self.g_levels[-1])


@dataclass
class SurrogateSet:
    lanes: dict[str, LaneSurrogate]
    master_seed: int
    network_hash: str

    def lane_ids(self) -> list[str]:
        return sorted(self.lanes)

    def intersections(self) -> list[str]:
        return sorted({s.intersection for s in self.lanes.values()})

    def _get(self, lane: str) -> LaneSurrogate:
        try:
            return self.lanes[lane]
        except KeyError:
            raise UnknownLaneError(f"no surrogate fitted for lane {lane!r}") from None

    def eval_utility(self, lane: str, n: float, g1: float) -> float:
        s = self._get(lane)
        return _bilinear(s.n_levels, s.g_levels, s.utility, float(n), float(g1))

    def eval_delay(self, lane: str, g1: float) -> float:
        s = self._get(lane)
        return _lerp1d(s.g_levels, s.delay, float(g1))

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "network_hash": self.network_hash,
            "lanes": {
                lane_id: {
                    "intersection": s.intersection,
                    "n_levels": [int(v) for v in s.n_levels],
                    "g_levels": [float(v) for v in s.g_levels],
                    "utility": [[float(v) for v in row] for row in s.utility],
                    "delay": [float(v) for v in s.delay],
                }
                for lane_id, s in sorted(self.lanes.items())
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> SurrogateSet:
        lanes = {
            lane_id: LaneSurrogate(
                lane=lane_id,
                intersection=rec["intersection"],
                n_levels=np.asarray(rec["n_levels"], dtype=np.int64),
                g_levels=np.asarray(rec["g_levels"], dtype=float),
                utility=np.asarray(rec["utility"], dtype=float),
                delay=np.asarray(rec["delay"], dtype=float),
            )
            for lane_id, rec in data["lanes"].items()
        }
        return cls(lanes=lanes, master_seed=int(data["master_seed"]),
                   network_hash=str(data["network_hash"]))


def _clamped_cell(levels: np.ndarray, x: float) -> tuple[int, float]:
    """Cell index and weight for clamped piecewise-linear interpolation.

    Returns (i, s) with x ~ levels[i] * (1 - s) + levels[i + 1] * s and
    s in [0, 1].  The weighted form (1 - s) * a + s * b is exact at the
    nodes (s == 0 or s == 1 reproduces the stored value bit for bit).
    """
    if len(levels) == 1:
        return 0, 0.0
    if x <= levels[0]:
        return 0, 0.0
    if x >= levels[-1]:
        return len(levels) - 2, 1.0
    i = int(np.searchsorted(levels, x, side="right")) - 1
    if i >= len(levels) - 1:
        i = len(levels) - 2
    lo, hi = float(levels[i]), float(levels[i + 1])
    return i, (x - lo) / (hi - lo)


def _lerp1d(levels: np.ndarray, values: np.ndarray, x: float) -> float:
    i, s = _clamped_cell(levels, x)
    if len(levels) == 1:
        return float(values[0])
    return (1.0 - s) * float(values[i]) + s * float(values[i + 1])


def _bilinear(n_levels: np.ndarray, g_levels: np.ndarray,
              values: np.ndarray, n: float, g: float) -> float:
    i, si = _clamped_cell(n_levels, n)
    j, sj = _clamped_cell(g_levels, g)
    if len(n_levels) == 1:
        row = values[0]
        if len(g_levels) == 1:
            return float(row[0])
        return (1.0 - sj) * float(row[j]) + sj * float(row[j + 1])
    if len(g_levels) == 1:
        return (1.0 - si) * float(values[i][0]) + si * float(values[i + 1][0])
    v00 = float(values[i][j])
    v01 = float(values[i][j + 1])
    v10 = float(values[i + 1][j])
    v11 = float(values[i + 1][j + 1])
    top = (1.0 - sj) * v00 + sj * v01
    bot = (1.0 - sj) * v10 + sj * v11
    return (1.0 - si) * top + si * bot


# ---------------------------------------------------------------------------
# Sampling design
# ---------------------------------------------------------------------------


def sample_grid(candidates, net: RoadNetwork, plans: dict[str, SignalPlan],
                scenario: Scenario) -> list[SamplePoint]:
    """Design points for every candidate lane, without outputs yet."""
    points: list[SamplePoint] = []
    for lane_id in candidates.lanes:
        lane = net.lane(lane_id)
        intersection = net.lane_signal(lane_id)[0]
        n_max = max_units_for_lane(lane, scenario.wcu, scenario.budget)
        lo, hi = feasible_green_range(plans[intersection], scenario.min_green)
        n_levels = sorted({0, math.ceil(n_max / 2), n_max})
        g_levels = sorted({quantize_green(lo), quantize_green((lo + hi) / 2.0),
                           quantize_green(hi)})
        for n in n_levels:
            for g1 in g_levels:
                points.append(SamplePoint(lane=lane_id, intersection=intersection,
                                          n=n, g1=g1))
    return points


def _run_key(point: SamplePoint) -> tuple:
    # n = 0 leaves the deployment empty, so the run depends only on the
    # intersection whose plan moves; all lanes there share it.
    if point.n == 0:
        return ("base-timing", point.intersection, round(point.g1 * 16))
    return ("lane", point.lane, point.n, round(point.g1 * 16))


def derive_seed(master_seed: int, key: tuple) -> int:
    digest = hashlib.sha256(
        ("|".join(str(part) for part in (master_seed,) + key)).encode()
    ).digest()
    return int.from_bytes(digest[:8], "big")


def _execute_run(args):
    net, plans, key, intersection, g1, lane, n, scenario = args
    run_plans = dict(plans)
    run_plans[intersection] = build_plan(plans[intersection], g1)
    deployment = None
    if n > 0:
        deployment = Deployment(units={lane: n}, spec=scenario.wcu)
    run_scenario = replace(scenario, seed=derive_seed(scenario.seed, key))
    result = run_simulation(net, run_plans, deployment, run_scenario)
    return key, result


def run_sample_batch(points: list[SamplePoint], net: RoadNetwork,
                     plans: dict[str, SignalPlan], scenario: Scenario,
                     *, jobs: int = 1) -> list[SamplePoint]:
    """Simulate every design point and return filled copies.

    The result is independent of ``jobs``: work is keyed, deduplicated and
    re-assembled in point order, and every run derives its seed from the
    scenario seed and its own key.
    """
    tasks: dict[tuple, tuple] = {}
    for point in points:
        key = _run_key(point)
        if key not in tasks:
            tasks[key] = (net, plans, key, point.intersection, point.g1,
                          point.lane, point.n, scenario)
    ordered = [tasks[k] for k in sorted(tasks)]
    log.info("sampling %d design points via %d simulator runs (jobs=%d)",
             len(points), len(ordered), jobs)

    results: dict[tuple, object] = {}
    if jobs > 1 and len(ordered) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, result in pool.map(_execute_run, ordered, chunksize=1):
                results[key] = result
    else:
        for task in ordered:
            key, result = _execute_run(task)
            results[key] = result

    filled: list[SamplePoint] = []
    for point in points:
        result = results[_run_key(point)]
        metrics = result.lanes[point.lane]
        filled.append(replace(point, utility_wh=metrics.energy_wh,
                              delay_s=metrics.mean_control_delay))
    return filled


def fit_surrogates(points: list[SamplePoint], master_seed: int,
                   network_hash: str) -> SurrogateSet:
    """Assemble per-lane interpolants from filled sample points."""
    by_lane: dict[str, list[SamplePoint]] = {}
    for point in points:
        if point.utility_wh is None or point.delay_s is None:
            raise MissingPointError(
                f"point (lane={point.lane!r}, n={point.n}, g1={point.g1}) "
                f"has no measured outputs"
            )
        by_lane.setdefault(point.lane, []).append(point)

    lanes: dict[str, LaneSurrogate] = {}
    for lane_id, pts in by_lane.items():
        n_levels = sorted({p.n for p in pts})
        g_levels = sorted({p.g1 for p in pts})
        table: dict[tuple[int, float], SamplePoint] = {}
        for p in pts:
            table[(p.n, p.g1)] = p
        utility = np.empty((len(n_levels), len(g_levels)), dtype=float)
        delay = np.empty(len(g_levels), dtype=float)
        for i, n in enumerate(n_levels):
            for j, g in enumerate(g_levels):
                p = table.get((n, g))
                if p is None:
                    raise MissingPointError(
                        f"lane {lane_id!r}: missing sample at (n={n}, g1={g})"
                    )
                utility[i, j] = p.utility_wh
        if 0 not in n_levels:
            raise MissingPointError(f"lane {lane_id!r}: no n=0 row to take delay from")
        for j, g in enumerate(g_levels):
            delay[j] = table[(0, g)].delay_s
        lanes[lane_id] = LaneSurrogate(
            lane=lane_id,
            intersection=pts[0].intersection,
            n_levels=np.asarray(n_levels, dtype=np.int64),
            g_levels=np.asarray(g_levels, dtype=float),
            utility=utility,
            delay=delay,
        )
    return SurrogateSet(lanes=lanes, master_seed=master_seed, network_hash=network_hash)
