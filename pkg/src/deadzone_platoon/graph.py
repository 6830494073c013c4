"""Sensing graphs, Laplacians and realizability of desired offsets.

Agents are indexed 1..n everywhere in the public API (matching the way
platoon scenarios are written down); arrays are 0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

DEFAULT_REALIZABILITY_TOL = 1e-9


class GraphError(ValueError):
    """Invalid graph construction or query."""


class NotRealizableError(ValueError):
    """Desired offsets are not consistent around some cycle of the graph."""

    def __init__(self, edge: tuple[int, int], residual: float):
        self.edge = edge
        self.residual = residual
        super().__init__(
            f"offsets not realizable: edge {edge} has residual {residual:.3g}"
        )


@dataclass(frozen=True)
class SensingGraph:
    """Undirected weighted graph on agents 1..n.

    ``edges`` holds canonical ``(i, j)`` pairs with ``i < j``; ``weights`` is
    parallel to it.
    """

    n: int
    edges: tuple[tuple[int, int], ...] = ()
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"agent count must be positive, got {self.n}")
        canon = []
        for e in self.edges:
            i, j = (int(e[0]), int(e[1]))
            if i == j:
                raise GraphError(f"self-loop on agent {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise GraphError(f"edge {(i, j)} references an agent outside 1..{self.n}")
            canon.append((min(i, j), max(i, j)))
        if len(set(canon)) != len(canon):
            raise GraphError("duplicate edges")
        weights = tuple(float(w) for w in self.weights) if self.weights else (1.0,) * len(canon)
        if len(weights) != len(canon):
            raise GraphError("one weight per edge required")
        if any(not w > 0 for w in weights):
            raise GraphError("edge weights must be strictly positive")
        object.__setattr__(self, "edges", tuple(canon))
        object.__setattr__(self, "weights", weights)

    @property
    def is_unweighted(self) -> bool:
        return all(w == 1.0 for w in self.weights)

    def neighbors(self, i: int) -> list[int]:
        _check_index(self, i)
        out = [b for a, b in self.edges if a == i] + [a for a, b in self.edges if b == i]
        return sorted(out)

    def directed_edges(self) -> list[tuple[int, int]]:
        """All ordered pairs ``(j, i)`` such that agent ``i`` measures agent ``j``."""
        out = []
        for a, b in self.edges:
            out.append((b, a))
            out.append((a, b))
        return out

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in set(self.edges)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(1, self.n + 1))
        for (a, b), w in zip(self.edges, self.weights):
            g.add_edge(a, b, weight=w)
        return g


def _check_index(g: SensingGraph, i: int) -> None:
    if not 1 <= i <= g.n:
        raise GraphError(f"agent index {i} outside 1..{g.n}")


def chain_graph(n: int) -> SensingGraph:
    """Platoon chain 1-2-...-n with unit weights."""
    if n < 2:
        raise GraphError(f"a chain needs at least 2 agents, got {n}")
    return SensingGraph(n, tuple((i, i + 1) for i in range(1, n)))


def complete_graph(n: int) -> SensingGraph:
    return SensingGraph(n, tuple((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)))


def is_chain(g: SensingGraph) -> bool:
    return g.n >= 2 and set(g.edges) == {(i, i + 1) for i in range(1, g.n)}


def laplacian(g: SensingGraph) -> np.ndarray:
    L = np.zeros((g.n, g.n))
    for (a, b), w in zip(g.edges, g.weights):
        i, j = a - 1, b - 1
        L[i, j] -= w
        L[j, i] -= w
        L[i, i] += w
        L[j, j] += w
    return L


def degree(g: SensingGraph, i: int) -> int:
    """Number of edges incident to agent ``i`` (unweighted)."""
    _check_index(g, i)
    return sum(1 for a, b in g.edges if i in (a, b))


def degrees(g: SensingGraph) -> np.ndarray:
    d = np.zeros(g.n, dtype=int)
    for a, b in g.edges:
        d[a - 1] += 1
        d[b - 1] += 1
    return d


def is_connected(g: SensingGraph) -> bool:
    return nx.is_connected(g.to_networkx())


def connected_components(g: SensingGraph) -> int:
    return nx.number_connected_components(g.to_networkx())


class DesiredOffsets(Mapping):
    """Desired relative positions ``D[(j, i)] = D_ji`` on every edge, both orientations.

    Build from any set of entries that covers each edge at least once; the
    reverse orientation is filled by antisymmetry. Entries given in both
    orientations must agree (``D_ij == -D_ji``).
    """

    def __init__(self, graph: SensingGraph, entries: Mapping[tuple[int, int], float] | Iterable):
        if not isinstance(entries, Mapping):
            entries = {(int(j), int(i)): float(v) for j, i, v in entries}
        values: dict[tuple[int, int], float] = {}
        for (j, i), v in entries.items():
            j, i, v = int(j), int(i), float(v)
            if not graph.has_edge(i, j):
                raise GraphError(f"offset D_{j}{i} given for non-edge ({i}, {j})")
            for key, val in (((j, i), v), ((i, j), -v)):
                if key in values and abs(values[key] - val) > 1e-12 * max(1.0, abs(val)):
                    raise GraphError(f"offsets D_{j}{i} and D_{i}{j} are not antisymmetric")
                values[key] = val
        missing = [e for e in graph.edges if e not in values]
        if missing:
            raise GraphError(f"no desired offset for edges {missing}")
        self.graph = graph
        self._values = values

    def __getitem__(self, key):
        return self._values[tuple(key)]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __eq__(self, other):
        if not isinstance(other, DesiredOffsets):
            return NotImplemented
        return self.graph == other.graph and self._values == other._values

    def __repr__(self):
        return f"DesiredOffsets({self.canonical()})"

    def canonical(self) -> list[tuple[int, int, float]]:
        """One ``(j, i, D_ji)`` triple per edge, with ``j > i``."""
        return [(b, a, self._values[(b, a)]) for a, b in self.graph.edges]

    @classmethod
    def from_positions(cls, graph: SensingGraph, p) -> "DesiredOffsets":
        p = np.asarray(p, dtype=float)
        return cls(graph, {(b, a): float(p[b - 1] - p[a - 1]) for a, b in graph.edges})

    @classmethod
    def uniform_spacing(cls, graph: SensingGraph, spacing: float = 1.0) -> "DesiredOffsets":
        """``D_{(l+1)l} = spacing`` on a chain."""
        if not is_chain(graph):
            raise GraphError("uniform spacing is only defined for chain graphs")
        return cls(graph, {(i + 1, i): spacing for i in range(1, graph.n)})


def solve_reference_positions(
    g: SensingGraph, D: DesiredOffsets, tol: float = DEFAULT_REALIZABILITY_TOL
) -> np.ndarray:
    """Positions ``p`` with ``p_1 = 0`` and ``p_j - p_i = D_ji`` on every edge.

    Propagates along a BFS spanning tree rooted at agent 1 and then checks
    the remaining edges; raises :class:`NotRealizableError` carrying the
    worst offending edge otherwise.
    """
    if not is_connected(g):
        raise GraphError("reference positions need a connected graph")
    p = np.zeros(g.n)
    tree = set()
    for i, j in nx.bfs_edges(g.to_networkx(), 1):
        p[j - 1] = p[i - 1] + D[(j, i)]
        tree.add((min(i, j), max(i, j)))
    worst_edge, worst = None, 0.0
    for a, b in g.edges:
        if (a, b) in tree:
            continue
        r = abs(p[b - 1] - p[a - 1] - D[(b, a)])
        if r > worst:
            worst_edge, worst = (a, b), r
    if worst_edge is not None and worst > tol:
        raise NotRealizableError(worst_edge, worst)
    return p
