"""Staged planning pipeline with content-addressed artifact caching.

Each stage writes one JSON artifact into the output directory:

    base       -> base_result.json   simulation under base timings, no units
    candidates -> candidates.json    lanes eligible for units
    surrogate  -> surrogate.json     fitted per-lane interpolants
    solution   -> solution.json      optimizer output plus re-simulation
    baseline   -> baseline.json      centrality-ranked allocation, simulated
    compare    -> compare.json       both arms, ratio, constraint audit

Artifacts carry an ``inputs_hash`` chaining the network, the effective
scenario, and every upstream artifact; a rerun reuses any artifact whose
hash still matches unless forced.  Nothing in an artifact depends on
wall-clock time or worker count, so reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .model import (
    COVERAGE_FRACTION,
    Deployment,
    PlannerError,
    RoadNetwork,
    Scenario,
    SignalPlan,
    ValidationError,
    deployment_cost,
    load_network,
    load_scenario,
    network_to_dict,
    scenario_to_dict,
    validate_network,
    validate_scenario,
)
from .los import CandidateSet, delay_bound, select_candidates
from .sim import run_simulation
from .surrogate import SurrogateSet, fit_surrogates, run_sample_batch, sample_grid
from .centrality import baseline_allocate, edge_betweenness
from .optimize import Solution, run_ga, validate_solution

log = logging.getLogger(__name__)

PIPELINE_VERSION = "wcu-planner-pipeline-1"

STAGES = ("base", "candidates", "surrogate", "solution", "baseline", "compare")

ARTIFACT_FILES = {
    "base": "base_result.json",
    "candidates": "candidates.json",
    "surrogate": "surrogate.json",
    "solution": "solution.json",
    "baseline": "baseline.json",
    "compare": "compare.json",
}


class MissingArtifactError(PlannerError):
    """A required pipeline artifact is absent or unreadable."""


@dataclass(frozen=True)
class Artifact:
    stage: str
    inputs_hash: str
    payload: dict


def write_artifact(path: Path, stage: str, inputs_hash: str, payload: dict) -> None:
    doc = {
        "schema_version": 1,
        "stage": stage,
        "inputs_hash": inputs_hash,
        "payload": payload,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def read_artifact(path: Path, expect_stage: str | None = None) -> Artifact:
    """Load an artifact, failing loudly with the file name on any problem."""
    if not path.is_file():
        raise MissingArtifactError(f"artifact {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MissingArtifactError(f"artifact {path} is unreadable: {exc}") from exc
    if not isinstance(doc, dict) or "payload" not in doc or "stage" not in doc:
        raise MissingArtifactError(f"artifact {path} is missing required fields")
    if expect_stage is not None and doc["stage"] != expect_stage:
        raise MissingArtifactError(
            f"artifact {path} holds stage {doc['stage']!r}, expected {expect_stage!r}"
        )
    return Artifact(doc["stage"], doc.get("inputs_hash", ""), doc["payload"])


def _try_read(path: Path, stage: str) -> Artifact | None:
    try:
        return read_artifact(path, expect_stage=stage)
    except MissingArtifactError:
        return None


def _digest(parts: list[str]) -> str:
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


def _canonical_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class PipelineResult:
    status: str                 # "ok" or "no_candidates"
    paths: dict[str, Path]
    payloads: dict[str, dict]


def _plan_to_dict(plan: SignalPlan) -> dict:
    return {
        "cycle": plan.cycle,
        "lost": plan.lost,
        "greens": list(plan.greens),
        "offset": plan.offset,
    }


def _plan_from_dict(node: str, doc: dict) -> SignalPlan:
    return SignalPlan(
        intersection=node,
        cycle=doc["cycle"],
        lost=doc["lost"],
        greens=(doc["greens"][0], doc["greens"][1]),
        offset=doc.get("offset", 0.0),
    )


def audit_constraints(net: RoadNetwork, scenario: Scenario,
                      units: dict[str, int], plans: dict[str, SignalPlan],
                      lane_delay: dict[str, float]) -> dict:
    """Zero-tolerance audit of every hard constraint on a finished plan."""
    spec = scenario.wcu
    cost = sum(units.values()) * spec.unit_cost
    failures: list[str] = []

    budget_ok = cost <= scenario.budget
    if not budget_ok:
        failures.append(f"cost {cost} exceeds budget {scenario.budget}")

    min_green_ok = True
    cycle_ok = True
    for node in sorted(plans):
        plan = plans[node]
        for g in plan.greens:
            if g < scenario.min_green:
                min_green_ok = False
                failures.append(f"green {g} s at {node} below minimum {scenario.min_green} s")
        if plan.greens[0] + plan.greens[1] + plan.lost != plan.cycle:
            cycle_ok = False
            failures.append(f"greens plus lost time do not equal the cycle at {node}")

    coverage_ok = True
    for lane_id in sorted(units):
        lane = net.lane(lane_id)
        covered = units[lane_id] * spec.unit_length
        if covered > lane.usable_length * COVERAGE_FRACTION + 1e-9:
            coverage_ok = False
            failures.append(
                f"lane {lane_id} covers {covered} m of {lane.usable_length} m usable"
            )

    bound = delay_bound(scenario.los_limit)
    delay_ok = True
    for lane_id in sorted(lane_delay):
        if lane_delay[lane_id] > bound:
            delay_ok = False
            failures.append(
                f"lane {lane_id} delay {lane_delay[lane_id]:.2f} s exceeds "
                f"the {scenario.los_limit} bound {bound} s"
            )

    checks = {
        "budget": budget_ok,
        "min_green": min_green_ok,
        "cycle_identity": cycle_ok,
        "lane_coverage": coverage_ok,
        "lane_delay": delay_ok,
    }
    return {"ok": all(checks.values()), "checks": checks, "failures": failures}


class _Runner:
    def __init__(self, net: RoadNetwork, scenario: Scenario, out_dir: Path,
                 *, jobs: int = 1, force: bool = False):
        self.net = net
        self.scenario = scenario
        self.out = Path(out_dir)
        self.jobs = jobs
        self.force = force
        self.base_plans = dict(net.signals)
        self.network_hash = _canonical_hash(network_to_dict(net))
        self.scenario_hash = _canonical_hash(scenario_to_dict(scenario))
        self.hashes: dict[str, str] = {}
        self.paths: dict[str, Path] = {}
        self.payloads: dict[str, dict] = {}

    def _stage(self, name: str, inputs: list[str], compute) -> dict:
        h = _digest([PIPELINE_VERSION, name, *inputs])
        path = self.out / ARTIFACT_FILES[name]
        self.paths[name] = path
        if not self.force:
            cached = _try_read(path, name)
            if cached is not None and cached.inputs_hash == h:
                log.info("stage %s: %s is current, skipping", name, path.name)
                self.hashes[name] = h
                self.payloads[name] = cached.payload
                return cached.payload
        log.info("stage %s: computing", name)
        try:
            payload = compute()
        except PlannerError as exc:
            raise type(exc)(f"stage {name}: {exc}") from exc
        write_artifact(path, name, h, payload)
        self.hashes[name] = h
        self.payloads[name] = payload
        return payload

    # -- individual stages -------------------------------------------------

    def run_base(self) -> dict:
        def compute() -> dict:
            empty = Deployment(units={}, spec=self.scenario.wcu)
            result = run_simulation(self.net, self.base_plans, empty, self.scenario)
            return result.to_dict()
        return self._stage("base", [self.network_hash, self.scenario_hash], compute)

    def run_candidates(self) -> dict:
        base_payload = self.payloads["base"]

        def compute() -> dict:
            lane_delay = {
                lane_id: rec["mean_control_delay"]
                for lane_id, rec in base_payload["lanes"].items()
            }
            cand = select_candidates(lane_delay, self.net, self.scenario.los_limit)
            return {
                "los_limit": self.scenario.los_limit,
                "lanes": list(cand.lanes),
                "base_delay": {l: cand.base_delay[l] for l in cand.lanes},
            }
        return self._stage("candidates", [self.hashes["base"]], compute)

    def _candidate_set(self) -> CandidateSet:
        doc = self.payloads["candidates"]
        return CandidateSet(
            lanes=tuple(doc["lanes"]),
            base_delay=dict(doc["base_delay"]),
        )

    def run_surrogate(self) -> dict:
        def compute() -> dict:
            cand = self._candidate_set()
            points = sample_grid(cand, self.net, self.base_plans, self.scenario)
            filled = run_sample_batch(points, self.net, self.base_plans,
                                      self.scenario, jobs=self.jobs)
            surr = fit_surrogates(filled, self.scenario.seed, self.network_hash)
            return surr.to_dict()
        return self._stage("surrogate", [self.hashes["candidates"]], compute)

    def run_solution(self) -> dict:
        def compute() -> dict:
            surr = SurrogateSet.from_dict(self.payloads["surrogate"])
            sol = run_ga(surr, self.scenario, self.base_plans)
            sol = validate_solution(sol, self.net, self.scenario,
                                    candidates=self._candidate_set())
            return self._solution_payload(sol)
        return self._stage("solution", [self.hashes["surrogate"]], compute)

    @staticmethod
    def _solution_payload(sol: Solution) -> dict:
        spec = sol.deployment.spec
        return {
            "deployment": {
                "units": dict(sorted(sol.deployment.units.items())),
                "spec": {
                    "unit_length": spec.unit_length,
                    "rated_power": spec.rated_power,
                    "efficiency": spec.efficiency,
                    "unit_cost": spec.unit_cost,
                },
            },
            "plans": {node: _plan_to_dict(p) for node, p in sorted(sol.plans.items())},
            "predicted_utility_wh": sol.predicted_utility_wh,
            "generations_run": sol.generations_run,
            "validated": sol.validated.to_dict() if sol.validated else None,
        }

    def run_baseline(self) -> dict:
        def compute() -> dict:
            scores = edge_betweenness(self.net, weighted=True)
            dep = baseline_allocate(self.net, scores, self.scenario)
            result = run_simulation(self.net, self.base_plans, dep, self.scenario)
            return {
                "weighted": scores.weighted,
                "scores": {k: scores.scores[k] for k in sorted(scores.scores)},
                "ranking": list(scores.ranking()),
                "deployment": {"units": dict(sorted(dep.units.items()))},
                "result": result.to_dict(),
            }
        return self._stage("baseline", [self.network_hash, self.scenario_hash], compute)

    def run_compare(self) -> dict:
        sol = self.payloads["solution"]
        base = self.payloads["baseline"]

        def compute() -> dict:
            validated = sol["validated"]
            opt_units = {k: int(v) for k, v in sol["deployment"]["units"].items()}
            plans = {node: _plan_from_dict(node, doc)
                     for node, doc in sol["plans"].items()}
            audit = audit_constraints(self.net, self.scenario, opt_units, plans,
                                      validated["lane_delay"])
            opt_rate = validated["utility_rate_wh_per_h"]
            base_rate = base["result"]["utility_rate_wh_per_h"]
            ratio = opt_rate / base_rate if base_rate > 0 else None
            unit_cost = self.scenario.wcu.unit_cost
            base_units = {k: int(v) for k, v in base["deployment"]["units"].items()}
            return {
                "status": "ok",
                "optimized": {
                    "utility_wh": validated["utility_wh"],
                    "utility_rate_wh_per_h": opt_rate,
                    "units": dict(sorted(opt_units.items())),
                    "total_units": sum(opt_units.values()),
                    "cost": sum(opt_units.values()) * unit_cost,
                    "greens": {n: sol["plans"][n]["greens"] for n in sorted(sol["plans"])},
                    "predicted_utility_wh": sol["predicted_utility_wh"],
                },
                "baseline": {
                    "utility_wh": base["result"]["total_utility_wh"],
                    "utility_rate_wh_per_h": base_rate,
                    "units": dict(sorted(base_units.items())),
                    "total_units": sum(base_units.values()),
                    "cost": sum(base_units.values()) * unit_cost,
                },
                "utility_ratio": ratio,
                "audit": audit,
                "candidates": list(self.payloads["candidates"]["lanes"]),
                "scenario": scenario_to_dict(self.scenario),
            }
        return self._stage(
            "compare", [self.hashes["solution"], self.hashes["baseline"]], compute
        )

    def run_compare_empty(self) -> dict:
        def compute() -> dict:
            return {
                "status": "no_candidates",
                "candidates": [],
                "utility_ratio": None,
                "scenario": scenario_to_dict(self.scenario),
            }
        return self._stage("compare", [self.hashes["candidates"], "no-candidates"], compute)


def run_pipeline(net: RoadNetwork, scenario: Scenario, out_dir: Path | str,
                 *, jobs: int = 1, force: bool = False,
                 upto: str = "compare") -> PipelineResult:
    """Run pipeline stages through ``upto`` and return artifact locations.

    When no lane qualifies for units, the later stages are skipped and the
    comparison artifact records ``no_candidates`` instead of failing.
    """
    if upto not in STAGES:
        raise ValidationError(f"unknown pipeline stage {upto!r}")
    validate_network(net)
    validate_scenario(scenario)
    runner = _Runner(net, scenario, Path(out_dir), jobs=jobs, force=force)
    last = STAGES.index(upto)

    runner.run_base()
    if last >= STAGES.index("candidates"):
        runner.run_candidates()
        if not runner.payloads["candidates"]["lanes"]:
            log.warning("no candidate lanes; skipping surrogate, solution and baseline")
            if last >= STAGES.index("compare"):
                runner.run_compare_empty()
            return PipelineResult("no_candidates", runner.paths, runner.payloads)
    if last >= STAGES.index("surrogate"):
        runner.run_surrogate()
    if last >= STAGES.index("solution"):
        runner.run_solution()
    if last >= STAGES.index("baseline"):
        runner.run_baseline()
    if last >= STAGES.index("compare"):
        runner.run_compare()
    return PipelineResult("ok", runner.paths, runner.payloads)


def load_inputs(network_path: Path | str, scenario_path: Path | str,
                seed: int | None = None) -> tuple[RoadNetwork, Scenario]:
    """Load and validate the two pipeline inputs, applying a seed override."""
    net = load_network(network_path)
    scenario = load_scenario(scenario_path)
    if seed is not None:
        scenario = dataclasses.replace(scenario, seed=seed)
    return net, scenario
