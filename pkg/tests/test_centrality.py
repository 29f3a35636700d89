"""Betweenness scores against independent oracles, plus the baseline filler."""

import itertools

import numpy as np
import pytest

from wcu_planner.centrality import (
    CentralityScores,
    baseline_allocate,
    edge_betweenness,
    write_scores_csv,
)
from wcu_planner.model import (
    Demand,
    Lane,
    Link,
    Node,
    RoadNetwork,
    Scenario,
    validate_network,
)


def graph_net(edges, usable=None) -> RoadNetwork:
    """Directed graph as a road network; weight = length at unit speed."""
    node_ids = sorted({a for a, _, _ in edges} | {b for _, b, _ in edges})
    nodes = {nid: Node(nid, float(i), 0.0) for i, nid in enumerate(node_ids)}
    links = {}
    for a, b, w in edges:
        lid = f"{a}>{b}"
        links[lid] = Link(lid, a, b, float(w), 1.0,
                          (Lane(f"{lid}:0", lid, 0, float(usable or w)),))
    net = RoadNetwork(nodes=nodes, links=links, lane_groups=(), signals={},
                      demand=Demand(routes=(), arrival_process="poisson"))
    validate_network(net)
    return net


def random_graph(rng, n_nodes, p=0.35):
    names = [f"n{i}" for i in range(n_nodes)]
    edges = []
    for a, b in itertools.permutations(names, 2):
        if rng.random() < p:
            edges.append((a, b, 8.0 + 0.25 * int(rng.integers(0, 33))))
    if not edges:
        edges.append((names[0], names[1], 8.0))
    return graph_net(edges)


def oracle_scores(net: RoadNetwork) -> dict[str, float]:
    """Floyd-Warshall distances plus path-count composition; no Brandes."""
    nodes = sorted(net.nodes)
    inf = float("inf")
    dist = {(a, b): (0.0 if a == b else inf) for a in nodes for b in nodes}
    for lk in net.links.values():
        w = lk.length / lk.free_speed
        key = (lk.from_node, lk.to_node)
        dist[key] = min(dist[key], w)
    for k in nodes:
        for i in nodes:
            dik = dist[(i, k)]
            if dik == inf:
                continue
            for j in nodes:
                alt = dik + dist[(k, j)]
                if alt < dist[(i, j)]:
                    dist[(i, j)] = alt

    def path_counts(source):
        sigma = {n: 0.0 for n in nodes}
        sigma[source] = 1.0
        order = sorted((n for n in nodes if dist[(source, n)] < inf),
                       key=lambda n: dist[(source, n)])
        for u in order:
            for lk in net.links.values():
                if lk.from_node != u:
                    continue
                w = lk.length / lk.free_speed
                if dist[(source, u)] + w == dist[(source, lk.to_node)]:
                    sigma[lk.to_node] += sigma[u]
        return sigma

    sigma_from = {s: path_counts(s) for s in nodes}
    # reversed graph gives paths-to-target counts
    rev_links = [(lk.to_node, lk.from_node, lk.length / lk.free_speed)
                 for lk in net.links.values()]

    def path_counts_to(target):
        sigma = {n: 0.0 for n in nodes}
        sigma[target] = 1.0
        order = sorted((n for n in nodes if dist[(n, target)] < inf),
                       key=lambda n: dist[(n, target)])
        for u in order:
            for a, b, w in rev_links:
                if a != u:
                    continue
                if dist[(u, target)] + w == dist[(b, target)]:
                    sigma[b] += sigma[u]
        return sigma

    sigma_to = {t: path_counts_to(t) for t in nodes}

    scores = {lid: 0.0 for lid in net.links}
    for s in nodes:
        for t in nodes:
            if s == t or dist[(s, t)] == inf or sigma_from[s][t] == 0.0:
                continue
            for lk in net.links.values():
                w = lk.length / lk.free_speed
                on_path = (dist[(s, lk.from_node)] + w + dist[(lk.to_node, t)]
                           == dist[(s, t)])
                if on_path:
                    scores[lk.id] += (sigma_from[s][lk.from_node]
                                      * sigma_to[t][lk.to_node]
                                      / sigma_from[s][t])
    return scores


def test_chain_scores():
    net = graph_net([("a", "b", 8.0), ("b", "c", 8.0), ("c", "d", 8.0)])
    scores = edge_betweenness(net).scores
    assert scores == {"a>b": 3.0, "b>c": 4.0, "c>d": 3.0}


def test_single_edge_scores_one():
    net = graph_net([("a", "b", 10.0)])
    assert edge_betweenness(net).scores == {"a>b": 1.0}


def test_parallel_routes_split_ties():
    net = graph_net([("a", "b", 8.0), ("b", "d", 8.0),
                     ("a", "c", 8.0), ("c", "d", 8.0)])
    scores = edge_betweenness(net).scores
    # pair (a,d) splits 0.5/0.5; each edge also serves its endpoints' pair
    assert scores == {"a>b": 1.5, "b>d": 1.5, "a>c": 1.5, "c>d": 1.5}


def test_longer_detour_gets_no_share():
    net = graph_net([("a", "b", 8.0), ("b", "d", 8.0),
                     ("a", "c", 8.0), ("c", "d", 8.25)])
    scores = edge_betweenness(net).scores
    assert scores["a>b"] == 2.0  # pairs (a,b) and (a,d)
    assert scores["c>d"] == 1.0  # only pair (c,d)


def test_brandes_matches_enumeration_oracle():
    rng = np.random.default_rng(29)
    for rep in range(30):
        net = random_graph(rng, int(rng.integers(3, 8)))
        got = edge_betweenness(net).scores
        want = oracle_scores(net)
        assert got.keys() == want.keys()
        for lid in want:
            assert abs(got[lid] - want[lid]) <= 1e-9, (rep, lid)


def test_hop_mode_total_equals_total_hop_distance():
    rng = np.random.default_rng(37)
    for rep in range(10):
        net = random_graph(rng, 8, p=0.3)
        scores = edge_betweenness(net, weighted=False).scores
        adjacency = {}
        for lk in net.links.values():
            adjacency.setdefault(lk.from_node, set()).add(lk.to_node)
        total_dist = 0
        for s in net.nodes:
            seen = {s: 0}
            frontier = [s]
            while frontier:
                nxt = []
                for u in frontier:
                    for v in adjacency.get(u, ()):
                        if v not in seen:
                            seen[v] = seen[u] + 1
                            nxt.append(v)
                frontier = nxt
            total_dist += sum(d for n, d in seen.items() if n != s)
        assert sum(scores.values()) == pytest.approx(total_dist, abs=1e-9)


def test_ranking_breaks_score_ties_by_link_id():
    scores = CentralityScores(scores={"z": 1.0, "a": 1.0, "m": 2.0},
                              weighted=True, fingerprint="f")
    assert scores.ranking() == ["m", "a", "z"]


def test_fingerprint_tracks_graph_and_mode():
    net = graph_net([("a", "b", 8.0), ("b", "c", 8.0)])
    same = graph_net([("a", "b", 8.0), ("b", "c", 8.0)])
    other = graph_net([("a", "b", 8.0), ("b", "c", 8.5)])
    assert edge_betweenness(net).fingerprint == edge_betweenness(same).fingerprint
    assert edge_betweenness(net).fingerprint != edge_betweenness(other).fingerprint
    assert edge_betweenness(net).fingerprint != \
        edge_betweenness(net, weighted=False).fingerprint


def test_baseline_fills_top_links_within_caps():
    # usable 70 m caps each lane at 3 units; chain scores rank b>c first,
    # then the a>b / c>d tie resolves toward the lower link id
    net = graph_net([("a", "b", 300.0), ("b", "c", 300.0), ("c", "d", 300.0)],
                    usable=70.0)
    sc = Scenario(budget=10000)
    dep = baseline_allocate(net, edge_betweenness(net), sc)
    assert dep.units == {"b>c:0": 3, "a>b:0": 2}


def test_baseline_respects_budget_allowance():
    net = graph_net([("a", "b", 300.0), ("b", "c", 300.0)])
    sc = Scenario(budget=4000)
    dep = baseline_allocate(net, edge_betweenness(net), sc)
    assert sum(dep.units.values()) == 2


def test_scores_csv_round_trips_floats(tmp_path):
    net = graph_net([("a", "b", 8.0), ("b", "c", 8.25), ("a", "c", 16.25)])
    scores = edge_betweenness(net)
    path = tmp_path / "scores.csv"
    write_scores_csv(scores, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "link_id,score"
    parsed = dict(line.split(",") for line in lines[1:])
    assert set(parsed) == set(scores.scores)
    for lid, text in parsed.items():
        assert float(text) == scores.scores[lid]
