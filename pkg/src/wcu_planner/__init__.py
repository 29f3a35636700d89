"""Planning toolkit for in-road wireless charging at signalized corridors.

Finds where to install wireless charging units on congested approach
lanes — and how to retime the signals — so that electric vehicles pick
up the most energy without pushing any candidate lane past its
level-of-service bound, then compares the plan against a
network-centrality baseline.
"""

__version__ = "0.1.0"

from .model import (
    Deployment,
    GaParams,
    GridDefaults,
    InfeasiblePlanError,
    Lane,
    LaneGroup,
    Link,
    Node,
    ParseError,
    PlannerError,
    RoadNetwork,
    Route,
    Scenario,
    SignalPlan,
    ValidationError,
    WcuSpec,
    generate_grid_network,
    load_network,
    load_scenario,
    save_network,
    save_scenario,
)
from .sim import GridlockError, SimulationResult, run_simulation
from .los import CandidateSet, LosGrade, classify_los, select_candidates
from .surrogate import SurrogateSet, fit_surrogates, run_sample_batch, sample_grid
from .optimize import NoFeasibleSolutionError, Solution, run_ga, validate_solution
from .centrality import CentralityScores, baseline_allocate, edge_betweenness
from .pipeline import MissingArtifactError, PipelineResult, run_pipeline
from .report import write_report

__all__ = [
    "CandidateSet",
    "CentralityScores",
    "Deployment",
    "GaParams",
    "GridDefaults",
    "GridlockError",
    "InfeasiblePlanError",
    "Lane",
    "LaneGroup",
    "Link",
    "LosGrade",
    "MissingArtifactError",
    "NoFeasibleSolutionError",
    "Node",
    "ParseError",
    "PipelineResult",
    "PlannerError",
    "RoadNetwork",
    "Route",
    "Scenario",
    "SignalPlan",
    "SimulationResult",
    "Solution",
    "SurrogateSet",
    "ValidationError",
    "WcuSpec",
    "baseline_allocate",
    "classify_los",
    "edge_betweenness",
    "fit_surrogates",
    "generate_grid_network",
    "load_network",
    "load_scenario",
    "run_ga",
    "run_pipeline",
    "run_sample_batch",
    "run_simulation",
    "sample_grid",
    "save_network",
    "save_scenario",
    "select_candidates",
    "validate_solution",
    "write_report",
]
