"""
Graph view of a production chain.

The directed graph has one node per good and an edge (k, m) whenever
β_km > 0. Path lengths are counted in edges. The β value is stored on the
edge under "beta" so networkx never mistakes it for a path weight.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable, Union

import networkx as nx

from economy import Economy, OligarchSpec


class PathLength(Enum):
    """Sentinel for s(k1, k2) when no directed path exists."""

    UNREACHABLE = "unreachable"


Distance = Union[int, PathLength]


class MalformedEconomyError(ValueError):
    """Raised when a company cannot be reached from any raw resource."""


class InvalidOligarchError(ValueError):
    """Raised when a member set does not form an admissible oligarch."""

    def __init__(self, violations: list[str]):
        super().__init__("Invalid oligarch: " + "; ".join(violations))
        self.violations = violations


def production_graph(economy: Economy) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(1, economy.n_goods + 1))
    for k, m in economy.edges():
        graph.add_edge(k, m, beta=float(economy.beta[k - 1, m - 1]))
    return graph


def has_cycle(economy: Economy) -> bool:
    return not nx.is_directed_acyclic_graph(production_graph(economy))


def graph_depth(economy: Economy) -> int:
    """d(G): the longest path in the production DAG, in edges."""
    graph = production_graph(economy)
    if graph.number_of_edges() == 0:
        return 0
    return int(nx.dag_longest_path_length(graph, weight=None))


def shortest_path(economy: Economy, k1: int, k2: int) -> Distance:
    try:
        return int(nx.shortest_path_length(production_graph(economy), k1, k2))
    except nx.NetworkXNoPath:
        return PathLength.UNREACHABLE


def raw_distances(economy: Economy) -> dict[int, int]:
    """min over raw n of s(n, k) for every good reachable from some raw."""
    graph = production_graph(economy)
    distances: dict[int, int] = {}
    for n in economy.raws:
        for k, length in nx.single_source_shortest_path_length(graph, n).items():
            if k not in distances or length < distances[k]:
                distances[k] = length
    return distances


def oligarch_depth(economy: Economy, members: Iterable[int]) -> int:
    members = set(members)
    if not members:
        raise ValueError("Oligarch must own at least one company")
    distances = raw_distances(economy)
    reachable = [distances[m] for m in members if m in distances]
    if not reachable:
        raise MalformedEconomyError(
            f"No oligarch company in {sorted(members)} is reachable from a raw resource"
        )
    return min(reachable)


def consistency_graph(economy: Economy, members: Iterable[int]) -> nx.Graph:
    """
    Undirected graph on the members: linked when one supplies the other or when
    both buy the same raw resource.
    """
    members = sorted(set(members))
    graph = nx.Graph()
    graph.add_nodes_from(members)
    member_set = set(members)
    raw_customers: dict[int, list[int]] = {}
    for m in members:
        for k in economy.suppliers(m):
            if k in member_set:
                graph.add_edge(k, m)
            elif economy.is_raw(k):
                raw_customers.setdefault(k, []).append(m)
    for customers in raw_customers.values():
        for a, b in zip(customers, customers[1:]):
            graph.add_edge(a, b)
    return graph


def validate_oligarch(economy: Economy, members: Iterable[int]) -> list[str]:
    members = set(members)
    violations = []
    if not members:
        return ["empty member set"]
    outside = sorted(m for m in members if m not in economy.companies)
    if outside:
        violations.append(f"not companies: {outside}")
        return violations
    if not nx.is_connected(consistency_graph(economy, members)):
        violations.append("members are not a consistent part of the production chain")
    distances = raw_distances(economy)
    if not any(m in distances for m in members):
        violations.append("unreachable from every raw resource")
    return violations


def make_oligarch(economy: Economy, members: Iterable[int]) -> OligarchSpec:
    members = frozenset(int(m) for m in members)
    violations = validate_oligarch(economy, members)
    if violations:
        raise InvalidOligarchError(violations)
    return OligarchSpec(members, oligarch_depth(economy, members))


def largest_consistent_block(economy: Economy, depth: int, *, exact: bool = True) -> int:
    """
    Size of the biggest consistent group of companies all at raw-distance ≥ depth.

    With exact=True the group must also contain a company at exactly `depth`,
    so that the group taken as an oligarch has d(O) = depth.
    """
    distances = raw_distances(economy)
    candidates = [m for m in economy.companies if distances.get(m, -1) >= depth]
    if not candidates:
        return 0
    graph = consistency_graph(economy, candidates)
    best = 0
    for block in nx.connected_components(graph):
        if not exact or any(distances[m] == depth for m in block):
            best = max(best, len(block))
    return best


def oligarch_feasible(economy: Economy, size: int, depth: int, *, exact: bool = True) -> bool:
    return largest_consistent_block(economy, depth, exact=exact) >= size
