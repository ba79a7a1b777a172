"""
Bounded-degree site graphs: graph distance, balls, diameters, greedy sphere
packing and disjoint-layer partitioning.

Distances are breadth-first and cached per source row; the graph itself is
never mutated after construction.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from typing import Iterable, Mapping

import numpy as np

from .errors import DisconnectedSupport, SiteOutOfGraph, Unreachable

UNREACHABLE = -1


class SiteGraph:
    """Undirected simple graph on sites ``0 .. n_sites-1``.

    Parameters
    ----------
    n_sites : int
        Number of vertices.
    edges : iterable of (int, int)
        Undirected edges.  Duplicates are merged; self-loops are rejected.
    """

    def __init__(self, n_sites: int, edges: Iterable[tuple[int, int]] = ()):
        if n_sites < 0:
            raise ValueError("n_sites must be non-negative")
        nbrs: list[set[int]] = [set() for _ in range(n_sites)]
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < n_sites and 0 <= j < n_sites):
                raise SiteOutOfGraph(f"edge ({i}, {j}) outside 0..{n_sites - 1}")
            if i == j:
                raise ValueError(f"self-loop at site {i}")
            nbrs[i].add(j)
            nbrs[j].add(i)
        self._n = n_sites
        self._adj = tuple(tuple(sorted(s)) for s in nbrs)
        self._max_degree = max((len(a) for a in self._adj), default=0)
        self._rows: dict[int, np.ndarray] = {}

    @property
    def n_sites(self) -> int:
        return self._n

    @property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        return self._adj

    @property
    def max_degree(self) -> int:
        return self._max_degree

    def neighbors(self, i: int) -> tuple[int, ...]:
        self._check(i)
        return self._adj[i]

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, a in enumerate(self._adj) for j in a if i < j]

    def _check(self, i: int) -> None:
        if not 0 <= i < self._n:
            raise SiteOutOfGraph(f"site {i} not in graph of {self._n} sites")

    def distances_from(self, i: int) -> np.ndarray:
        """BFS distances from ``i``; unreachable sites hold ``-1``."""
        self._check(i)
        row = self._rows.get(i)
        if row is None:
            row = np.full(self._n, UNREACHABLE, dtype=np.int64)
            row[i] = 0
            queue = deque([i])
            while queue:
                u = queue.popleft()
                du = row[u] + 1
                for v in self._adj[u]:
                    if row[v] < 0:
                        row[v] = du
                        queue.append(v)
            row.setflags(write=False)
            self._rows[i] = row
        return row

    def distance_matrix(self) -> np.ndarray:
        return np.stack([self.distances_from(i) for i in range(self._n)]) if self._n else np.zeros((0, 0), int)

    def distance(self, i: int, j: int) -> int:
        self._check(j)
        d = int(self.distances_from(i)[j])
        if d < 0:
            raise Unreachable(f"no path between {i} and {j}")
        return d

    def ball(self, center: int, r: int) -> frozenset[int]:
        row = self.distances_from(center)
        return frozenset(int(j) for j in np.nonzero((row >= 0) & (row <= r))[0])

    def diameter_of(self, x: Iterable[int]) -> int:
        x = sorted(set(int(s) for s in x))
        if not x:
            return 0
        worst = 0
        for a_idx, a in enumerate(x):
            row = self.distances_from(a)
            for b in x[a_idx + 1:]:
                self._check(b)
                d = int(row[b])
                if d < 0:
                    raise DisconnectedSupport(f"sites {a} and {b} are disconnected")
                worst = max(worst, d)
        return worst + 1

    def is_connected(self) -> bool:
        return self._n == 0 or bool(np.all(self.distances_from(0) >= 0))

    def bfs_tree(self, root: int = 0) -> tuple[list[int], dict[int, int]]:
        """BFS visiting order and parent map from ``root`` (own component only)."""
        self._check(root)
        order = [root]
        parent = {root: -1}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if v not in parent:
                    parent[v] = u
                    order.append(v)
                    queue.append(v)
        return order, parent

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {"n_sites": self._n, "edges": [list(e) for e in self.edges()]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SiteGraph":
        return cls(int(data["n_sites"]), [tuple(e) for e in data["edges"]])

    def __eq__(self, other):
        return isinstance(other, SiteGraph) and self._n == other._n and self._adj == other._adj

    __hash__ = None

    def __repr__(self) -> str:
        return f"SiteGraph(n_sites={self._n}, edges={len(self.edges())}, max_degree={self._max_degree})"


# -- constructors -----------------------------------------------------------

def chain(n: int, periodic: bool = False) -> SiteGraph:
    edges = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        edges.append((n - 1, 0))
    return SiteGraph(n, edges)


def square_grid(lx: int, ly: int, periodic: bool = False) -> SiteGraph:
    """Site ``(x, y)`` has index ``x + lx * y``."""
    edges = []
    for y in range(ly):
        for x in range(lx):
            i = x + lx * y
            if x + 1 < lx:
                edges.append((i, i + 1))
            elif periodic and lx > 2:
                edges.append((i, lx * y))
            if y + 1 < ly:
                edges.append((i, i + lx))
            elif periodic and ly > 2:
                edges.append((i, x))
    return SiteGraph(lx * ly, edges)


def from_edge_list(n: int, edges) -> SiteGraph:
    return SiteGraph(n, edges)


def random_bounded_degree(n: int, max_degree: int, rng: np.random.Generator, density: float = 0.9) -> SiteGraph:
    """Random graph with every degree at most ``max_degree``.

    Starts from a random spanning path (so the result is connected when
    ``max_degree >= 2``) and then adds random edges respecting the cap.
    """
    order = rng.permutation(n)
    deg = np.zeros(n, dtype=int)
    edges = set()
    if max_degree >= 2:
        for a, b in zip(order[:-1], order[1:]):
            edges.add((min(a, b), max(a, b)))
            deg[a] += 1
            deg[b] += 1
    attempts = int(density * n * max_degree)
    for _ in range(attempts):
        a, b = (int(v) for v in rng.integers(0, n, size=2))
        if a == b or deg[a] >= max_degree or deg[b] >= max_degree:
            continue
        e = (min(a, b), max(a, b))
        if e in edges:
            continue
        edges.add(e)
        deg[a] += 1
        deg[b] += 1
    return SiteGraph(n, sorted((int(a), int(b)) for a, b in edges))


# -- packing / layering -----------------------------------------------------

def greedy_separated(g: SiteGraph, min_distance: int, candidates: Iterable[int] | None = None) -> list[int]:
    """Smallest-index greedy set of sites with pairwise distance ``>= min_distance``.

    Each pick deletes every remaining site closer than ``min_distance``;
    sites in other components are never deleted.
    """
    alive = np.zeros(g.n_sites, dtype=bool)
    alive[list(range(g.n_sites)) if candidates is None else list(candidates)] = True
    picked = []
    for v in range(g.n_sites):
        if not alive[v]:
            continue
        picked.append(v)
        row = g.distances_from(v)
        alive[(row >= 0) & (row < min_distance)] = False
    return picked


def pack_spheres(g: SiteGraph, r: int) -> list[int]:
    """Centers of pairwise-disjoint radius-``r`` balls.

    Repeatedly takes the smallest remaining vertex and deletes the ball of
    radius ``2r`` around it.  The result has at least
    ``ceil(N / (max_degree**(2r) + 1))`` centers.
    """
    if r < 0:
        raise ValueError("radius must be non-negative")
    return greedy_separated(g, 2 * r + 1)


def packing_lower_bound(g: SiteGraph, r: int) -> int:
    return math.ceil(g.n_sites / (g.max_degree ** (2 * r) + 1))


def disjoint_layers(g: SiteGraph, r: int) -> list[list[int]]:
    """Partition sites so that radius-``r`` balls within a layer are disjoint.

    Greedy proper coloring (vertices in index order, smallest free color) of
    the conflict graph joining sites at distance ``<= 2r``.
    """
    if r < 0:
        raise ValueError("radius must be non-negative")
    color = np.full(g.n_sites, -1, dtype=int)
    for v in range(g.n_sites):
        row = g.distances_from(v)
        near = np.nonzero((row > 0) & (row <= 2 * r))[0]
        used = set(color[near][color[near] >= 0].tolist())
        c = 0
        while c in used:
            c += 1
        color[v] = c
    n_layers = int(color.max()) + 1 if g.n_sites else 0
    return [[int(v) for v in np.nonzero(color == c)[0]] for c in range(n_layers)]


def layering_bound(g: SiteGraph, r: int) -> int:
    return g.max_degree ** (2 * r) + 1


def check_packing(g: SiteGraph, centers: Iterable[int], r: int) -> bool:
    """True if every pair of centers is more than ``2r`` apart."""
    centers = list(centers)
    for a, b in itertools.combinations(centers, 2):
        d = int(g.distances_from(a)[b])
        if 0 <= d <= 2 * r:
            return False
    return True


def check_layers(g: SiteGraph, layers, r: int) -> bool:
    seen = sorted(v for layer in layers for v in layer)
    if seen != list(range(g.n_sites)):
        return False
    return all(check_packing(g, layer, r) for layer in layers)


def induced_graph_from_hamiltonian(h, n_sites: int) -> SiteGraph:
    """Join every pair of sites that share a monomial of ``h``."""
    edges = set()
    for mono in h:
        for a, b in itertools.combinations(mono.sites, 2):
            edges.add((a, b))
    return SiteGraph(n_sites, sorted(edges))
