"""Undirected graphs, Laplacians, and the i.i.d. link-failure network model.

Graphs are small (tens to a few hundred nodes), so everything is dense:
Laplacians are plain ``numpy`` arrays and spectral quantities come from
``numpy.linalg.eigvalsh``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Tolerance below which a computed eigenvalue is treated as exactly zero.
SPECTRAL_EPS = 1e-9
# Threshold on lambda_2 for declaring a generated graph connected.
CONNECTIVITY_EPS = 1e-8


class GraphGenerationError(RuntimeError):
    """Raised when random generation cannot satisfy its constraints."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0 .. num_nodes - 1``.

    Edges are canonicalized to ``(i, j)`` pairs with ``i < j``; self-loops
    and out-of-range endpoints are rejected.
    """

    num_nodes: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError(f"num_nodes must be >= 1, got {self.num_nodes}")
        canonical = set()
        for edge in self.edges:
            i, j = int(edge[0]), int(edge[1])
            if i == j:
                raise ValueError(f"self-loop {edge} is not allowed")
            if not (0 <= i < self.num_nodes and 0 <= j < self.num_nodes):
                raise ValueError(f"edge {edge} references a node >= {self.num_nodes}")
            canonical.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(canonical))
        arr = np.array(sorted(canonical), dtype=np.int64).reshape(-1, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "_edge_array", arr)

    @property
    def edge_array(self) -> np.ndarray:
        """Edges as a read-only ``(E, 2)`` int array in sorted canonical order."""
        return self._edge_array

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for i, j in self.edge_array:
            deg[i] += 1
            deg[j] += 1
        return deg

    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.num_nodes else 0

    def neighbors(self, node: int) -> list[int]:
        out = [j if i == node else i for i, j in self.edge_array if node in (i, j)]
        return sorted(out)


@dataclass(frozen=True)
class RandomNetworkModel:
    """Base topology whose links fail independently each iteration.

    Each base edge is absent with probability ``p_fail``, independently
    across edges and iterations, giving an i.i.d. sequence of subgraphs.
    """

    base_graph: Graph
    p_fail: float

    def __post_init__(self):
        if not 0.0 <= self.p_fail <= 1.0:
            raise ValueError(f"p_fail must lie in [0, 1], got {self.p_fail}")


@dataclass(frozen=True)
class GeometricGraphSpec:
    """Parameters for rejection-sampling a connected random geometric graph."""

    num_nodes: int
    connection_radius: float
    retry_limit: int = 100

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError(f"num_nodes must be >= 1, got {self.num_nodes}")
        if not 0.0 < self.connection_radius <= math.sqrt(2.0):
            raise ValueError(
                f"connection_radius must lie in (0, sqrt(2)], got {self.connection_radius}"
            )
        if self.retry_limit < 1:
            raise ValueError(f"retry_limit must be >= 1, got {self.retry_limit}")


def laplacian_of(graph: Graph) -> np.ndarray:
    """Graph Laplacian ``D - A``: -1 off-diagonal per edge, degrees on the diagonal."""
    lap = np.zeros((graph.num_nodes, graph.num_nodes))
    arr = graph.edge_array
    if len(arr):
        lap[arr[:, 0], arr[:, 1]] = -1.0
        lap[arr[:, 1], arr[:, 0]] = -1.0
        np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def algebraic_connectivity(lap: np.ndarray) -> float:
    """Second-smallest eigenvalue of a Laplacian; positive iff connected.

    Values within ``SPECTRAL_EPS`` of zero are clamped to exactly zero.
    Raises ``ValueError`` on non-symmetric input or a spectrum that is
    negative beyond tolerance (not a Laplacian).
    """
    lap = np.asarray(lap, dtype=float)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {lap.shape}")
    if lap.shape[0] < 2:
        raise ValueError("algebraic connectivity needs at least 2 nodes")
    if not np.array_equal(lap, lap.T):
        raise ValueError("Laplacian must be symmetric")
    eigenvalues = np.linalg.eigvalsh(lap)
    lam2 = float(eigenvalues[1])
    if lam2 < -SPECTRAL_EPS:
        raise ValueError(f"matrix is not positive semidefinite (lambda_2 = {lam2})")
    return 0.0 if abs(lam2) <= SPECTRAL_EPS else lam2


def is_connected(graph: Graph) -> bool:
    """Connectivity via the spectral criterion; a single node counts as connected."""
    if graph.num_nodes == 1:
        return True
    return algebraic_connectivity(laplacian_of(graph)) > CONNECTIVITY_EPS


def sample_network(model: RandomNetworkModel, rng: np.random.Generator) -> Graph:
    """Draw one realization of the link-failure model.

    Base edges are visited in sorted canonical order with one uniform draw
    each, so a fixed generator state yields a reproducible graph sequence.
    """
    arr = model.base_graph.edge_array
    draws = rng.random(len(arr))
    kept = arr[draws >= model.p_fail]
    return Graph(
        model.base_graph.num_nodes,
        frozenset((int(i), int(j)) for i, j in kept),
    )


def expected_laplacian(model: RandomNetworkModel) -> np.ndarray:
    """Mean Laplacian of the sampled sequence: ``(1 - p_fail) * L(base)``."""
    return (1.0 - model.p_fail) * laplacian_of(model.base_graph)


def _graph_from_points(points: np.ndarray, radius: float) -> Graph:
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    i_idx, j_idx = np.where(np.triu(dist <= radius, k=1))
    return Graph(len(points), frozenset(zip(i_idx.tolist(), j_idx.tolist())))


def generate_geometric_graph(spec: GeometricGraphSpec, rng: np.random.Generator) -> Graph:
    """Random geometric graph on the unit square, resampled until connected.

    Node positions are uniform; an edge joins every pair at Euclidean
    distance <= ``connection_radius``. Placements are redrawn wholesale on a
    connectivity failure; exhausting ``retry_limit`` raises
    ``GraphGenerationError``.
    """
    for _ in range(spec.retry_limit):
        points = rng.random((spec.num_nodes, 2))
        graph = _graph_from_points(points, spec.connection_radius)
        if is_connected(graph):
            return graph
    raise GraphGenerationError(
        f"no connected graph within {spec.retry_limit} attempts for {spec}"
    )


def smallest_connecting_radius(points: np.ndarray) -> float:
    """Smallest connection radius for which the geometric graph is connected.

    Binary search over the sorted pairwise distances; the answer is always
    one of them.
    """
    n = len(points)
    if n < 2:
        return 0.0
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    candidates = np.unique(dist[np.triu_indices(n, k=1)])
    lo, hi = 0, len(candidates) - 1
    if not is_connected(_graph_from_points(points, float(candidates[hi]))):
        raise GraphGenerationError("points cannot be connected at any radius")
    while lo < hi:
        mid = (lo + hi) // 2
        if is_connected(_graph_from_points(points, float(candidates[mid]))):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def generate_auto_radius_graph(
    num_nodes: int,
    rng: np.random.Generator,
    margin: float = 1.1,
    max_degree: int | None = None,
    retry_limit: int = 1000,
) -> Graph:
    """Connected geometric graph with the radius chosen from the points.

    The radius is the smallest connecting radius scaled by ``margin`` (capped
    at sqrt(2)). If ``max_degree`` is given, placements are redrawn until the
    cap is met.
    """
    if num_nodes == 1:
        return Graph(1, frozenset())
    for _ in range(retry_limit):
        points = rng.random((num_nodes, 2))
        radius = min(smallest_connecting_radius(points) * margin, math.sqrt(2.0))
        graph = _graph_from_points(points, radius)
        if not is_connected(graph):
            continue
        if max_degree is None or graph.max_degree() <= max_degree:
            return graph
    raise GraphGenerationError(
        f"no connected graph with max degree <= {max_degree} "
        f"within {retry_limit} attempts (num_nodes={num_nodes})"
    )


def write_edge_list(graph: Graph, path: str | Path) -> None:
    """Plain-text edge list: first line ``N <num_nodes>``, then sorted ``i j`` pairs."""
    lines = [f"N {graph.num_nodes}"]
    lines.extend(f"{i} {j}" for i, j in graph.edge_array)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edge_list(path: str | Path) -> Graph:
    text = Path(path).read_text(encoding="utf-8").strip()
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("N "):
        raise ValueError(f"{path}: first line must be 'N <num_nodes>'")
    num_nodes = int(lines[0].split()[1])
    edges = set()
    for line in lines[1:]:
        i, j = line.split()
        edges.add((int(i), int(j)))
    return Graph(num_nodes, frozenset(edges))
