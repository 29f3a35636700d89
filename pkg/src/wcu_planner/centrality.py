"""Edge betweenness centrality and the centrality-guided baseline.

Scores are computed with Brandes' accumulation over Dijkstra shortest-path
DAGs on the directed link graph, weighted by free-flow travel time
(length / free_speed) or by hop count.  All ordered node pairs contribute;
equal-cost paths split contributions equally; unreachable pairs contribute
nothing.  The baseline planner ranks links by score and fills lane 0 of
each ranked link up to the per-lane cap until the budget's unit allowance
is spent, leaving every signal plan at its base timing.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import logging
from dataclasses import dataclass
from pathlib import Path

from .model import Deployment, RoadNetwork, Scenario, max_units_for_lane

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CentralityScores:
    scores: dict[str, float]
    weighted: bool
    fingerprint: str  # hash of the scored graph, for artifact provenance

    def ranking(self) -> list[str]:
        return [link_id for link_id, _ in
                sorted(self.scores.items(), key=lambda kv: (-kv[1], kv[0]))]


def _graph_fingerprint(net: RoadNetwork, weighted: bool) -> str:
    h = hashlib.sha256()
    h.update(b"weighted" if weighted else b"hops")
    for link_id in sorted(net.links):
        link = net.links[link_id]
        weight = link.length / link.free_speed if weighted else 1.0
        h.update(f"{link_id}|{link.from_node}|{link.to_node}|{weight!r}\n".encode())
    return h.hexdigest()


def edge_betweenness(net: RoadNetwork, weighted: bool = True) -> CentralityScores:
    """Brandes edge betweenness over all ordered node pairs."""
    adjacency: dict[str, list[tuple[str, str, float]]] = {n: [] for n in net.nodes}
    for link in net.links.values():
        weight = link.length / link.free_speed if weighted else 1.0
        adjacency[link.from_node].append((link.to_node, link.id, weight))

    scores = {link_id: 0.0 for link_id in net.links}
    for source in net.nodes:
        dist: dict[str, float] = {source: 0.0}
        sigma: dict[str, float] = {source: 1.0}
        preds: dict[str, list[tuple[str, str]]] = {n: [] for n in net.nodes}
        settled: list[str] = []
        seen: set[str] = set()
        heap: list[tuple[float, str]] = [(0.0, source)]
        while heap:
            d, v = heapq.heappop(heap)
            if v in seen:
                continue
            seen.add(v)
            settled.append(v)
            for w, link_id, weight in adjacency[v]:
                alt = d + weight
                if w not in dist or alt < dist[w]:
                    dist[w] = alt
                    sigma[w] = sigma[v]
                    preds[w] = [(v, link_id)]
                    heapq.heappush(heap, (alt, w))
                elif alt == dist[w]:
                    sigma[w] += sigma[v]
                    preds[w].append((v, link_id))
        delta: dict[str, float] = {n: 0.0 for n in seen}
        for w in reversed(settled):
            for v, link_id in preds[w]:
                c = sigma[v] / sigma[w] * (1.0 + delta[w])
                scores[link_id] += c
                delta[v] += c
    return CentralityScores(scores=scores, weighted=weighted,
                            fingerprint=_graph_fingerprint(net, weighted))


def baseline_allocate(net: RoadNetwork, scores: CentralityScores,
                      scenario: Scenario) -> Deployment:
    """Fill lane 0 of the highest-scoring links until the budget is spent."""
    remaining = scenario.budget // scenario.wcu.unit_cost
    units: dict[str, int] = {}
    for link_id in scores.ranking():
        if remaining <= 0:
            break
        lane = net.links[link_id].lanes[0]
        cap = max_units_for_lane(lane, scenario.wcu, scenario.budget)
        take = min(remaining, cap)
        if take > 0:
            units[lane.id] = take
            remaining -= take
    if remaining > 0:
        log.warning("baseline could not place %d units within per-lane caps", remaining)
    return Deployment(units=units, spec=scenario.wcu)


def write_scores_csv(scores: CentralityScores, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["link_id", "score"])
        for link_id in sorted(scores.scores):
            writer.writerow([link_id, repr(scores.scores[link_id])])
