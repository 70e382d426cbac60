"""Interference graphs, clusterings, dependence structure, and growth diagnostics.

Units are indexed 0..n_units-1. Closed neighborhoods always contain the unit
itself. All objects are immutable after construction and safe to share across
parallel workers.
"""

from __future__ import annotations

import json

import numpy as np


class InterferenceGraph:
    """Undirected graph whose edges delimit which units interfere.

    Attributes:
        n_units: number of units N.
        edges: canonical sorted tuple of (i, j) pairs with i < j.
        neighborhoods: per-unit sorted integer arrays of the closed
            neighborhood (always includes the unit itself).
        closed_adjacency: (N, N) 0/1 matrix with unit diagonal.
    """

    def __init__(self, n_units: int, edges) -> None:
        if n_units < 1:
            raise ValueError("n_units must be >= 1")
        canon = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop edge ({i},{j}) is not allowed")
            if not (0 <= i < n_units and 0 <= j < n_units):
                raise ValueError(f"edge ({i},{j}) out of range for n={n_units}")
            canon.add((min(i, j), max(i, j)))
        self.n_units = int(n_units)
        self.edges = tuple(sorted(canon))
        adj = np.eye(n_units, dtype=np.int8)
        for i, j in self.edges:
            adj[i, j] = 1
            adj[j, i] = 1
        self.closed_adjacency = adj
        self.neighborhoods = tuple(
            np.flatnonzero(adj[i]).astype(np.int64) for i in range(n_units)
        )

    def neighborhood(self, i: int) -> np.ndarray:
        """Closed neighborhood of unit i as a sorted index array."""
        return self.neighborhoods[i]

    def to_json(self) -> str:
        return json.dumps({"n": self.n_units, "edges": [list(e) for e in self.edges]})

    @classmethod
    def from_json(cls, text: str) -> "InterferenceGraph":
        doc = json.loads(text)
        return cls(doc["n"], [tuple(e) for e in doc["edges"]])


def build_graph(n_units: int, edges) -> InterferenceGraph:
    """Validate and build an interference graph from an edge list."""
    return InterferenceGraph(n_units, edges)


def line_graph(n_units: int, h: int) -> InterferenceGraph:
    """Units on a line; edge (i, j) iff 0 < |i - j| <= h."""
    if h < 0:
        raise ValueError("hop radius must be >= 0")
    edges = [
        (i, j)
        for i in range(n_units)
        for j in range(i + 1, min(n_units, i + h + 1))
    ]
    return InterferenceGraph(n_units, edges)


def lattice_graph(side: int, h: int) -> InterferenceGraph:
    """side x side lattice; edge iff Manhattan (4-neighbor hop) distance <= h.

    Unit index is row * side + col.
    """
    if h < 0:
        raise ValueError("hop radius must be >= 0")
    n = side * side
    edges = []
    for r in range(side):
        for c in range(side):
            i = r * side + c
            for r2 in range(r, min(side, r + h + 1)):
                cmin = c + 1 if r2 == r else c - (h - (r2 - r))
                for c2 in range(max(0, cmin), min(side, c + h - (r2 - r) + 1)):
                    j = r2 * side + c2
                    if j > i:
                        edges.append((i, j))
    return InterferenceGraph(n, edges)


class Clustering:
    """A partition of the unit set into disjoint nonempty clusters.

    Attributes:
        n_units: number of units covered.
        assignment: (N,) integer array mapping unit -> cluster id.
        clusters: tuple of sorted unit-index arrays, indexed by cluster id.
    """

    def __init__(self, n_units: int, clusters) -> None:
        assignment = np.full(n_units, -1, dtype=np.int64)
        sets = []
        for cid, members in enumerate(clusters):
            members = np.asarray(sorted(int(u) for u in members), dtype=np.int64)
            if members.size == 0:
                raise ValueError("empty cluster")
            if members[0] < 0 or members[-1] >= n_units:
                raise ValueError("cluster member out of range")
            if np.any(assignment[members] != -1):
                raise ValueError("clusters are not disjoint")
            assignment[members] = cid
            sets.append(members)
        if np.any(assignment == -1):
            raise ValueError("clusters do not cover all units")
        self.n_units = int(n_units)
        self.assignment = assignment
        self.clusters = tuple(sets)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @classmethod
    def from_assignment(cls, labels) -> "Clustering":
        labels = np.asarray(labels)
        ids = np.unique(labels)
        return cls(labels.size, [np.flatnonzero(labels == k) for k in ids])

    def to_json(self) -> str:
        return json.dumps({"clusters": [c.tolist() for c in self.clusters]})

    @classmethod
    def from_json(cls, text: str, n_units: int | None = None) -> "Clustering":
        doc = json.loads(text)
        clusters = doc["clusters"]
        if n_units is None:
            n_units = sum(len(c) for c in clusters)
        return cls(n_units, clusters)


def singleton_clustering(n: int) -> Clustering:
    """Each unit in its own cluster."""
    return Clustering(n, [[i] for i in range(n)])


def whole_clustering(n: int) -> Clustering:
    """All units in one cluster."""
    return Clustering(n, [list(range(n))])


def lattice_uniform_clustering(side: int, s: int) -> Clustering:
    """Axis-aligned s x s tiles over a side x side lattice; boundary tiles clipped."""
    if s < 1:
        raise ValueError("block side must be >= 1")
    tiles_per_row = -(-side // s)
    labels = np.empty(side * side, dtype=np.int64)
    for r in range(side):
        for c in range(side):
            labels[r * side + c] = (r // s) * tiles_per_row + (c // s)
    return Clustering.from_assignment(labels)


def segments_clustering(n: int, w: int) -> Clustering:
    """Contiguous segments of w units each along the line; last segment clipped."""
    if w < 1:
        raise ValueError("segment width must be >= 1")
    return Clustering.from_assignment(np.arange(n) // w)


def one_hop_max_from_values(g: InterferenceGraph, values) -> Clustering:
    """1-hop-max clustering for a given score vector.

    Each unit joins the cluster of the unit holding the maximum score in its
    closed 1-hop neighborhood. Ties break toward the lower unit index.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (g.n_units,):
        raise ValueError("needs one score per unit")
    centers = np.empty(g.n_units, dtype=np.int64)
    for i in range(g.n_units):
        nb = g.neighborhoods[i]
        # argmax with lowest-index tie-break: scan in index order, strict >
        best = nb[0]
        for j in nb[1:]:
            if values[j] > values[best]:
                best = j
        centers[i] = best
    return Clustering.from_assignment(centers)


def one_hop_max_clustering(g: InterferenceGraph, rng: np.random.Generator) -> Clustering:
    """1-hop-max random clustering: i.i.d. uniform scores, local maxima as centers."""
    return one_hop_max_from_values(g, rng.random(g.n_units))


def cluster_degree(g: InterferenceGraph, pi: Clustering, i: int) -> int:
    """Number of clusters intersecting the closed neighborhood of unit i."""
    return len(np.unique(pi.assignment[g.neighborhoods[i]]))


class DependenceEdges:
    """Unordered unit pairs whose closed neighborhoods touch a common cluster.

    Self-pairs (i, i) are always present. The pair (i, j) is stored with
    i <= j.
    """

    def __init__(self, n_units: int, pairs) -> None:
        self.n_units = int(n_units)
        self.pairs = frozenset((min(i, j), max(i, j)) for i, j in pairs)

    def __contains__(self, pair) -> bool:
        i, j = pair
        return (min(i, j), max(i, j)) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def ordered_pair_weights(self):
        """Yield (i, j, mult) with mult = 1 for self-pairs, 2 otherwise.

        Summing f(i, j) * mult over the yielded triples equals the sum of
        f over ordered dependent pairs (both orientations counted).
        """
        for i, j in self.pairs:
            yield i, j, (1 if i == j else 2)


def dependence_edges(g: InterferenceGraph, pi: Clustering) -> DependenceEdges:
    """All pairs (i, i') such that some cluster intersects both N(i) and N(i')."""
    touchers = {}
    for i in range(g.n_units):
        for cid in np.unique(pi.assignment[g.neighborhoods[i]]):
            touchers.setdefault(int(cid), []).append(i)
    pairs = set()
    for units in touchers.values():
        for a in range(len(units)):
            for b in range(a, len(units)):
                pairs.add((units[a], units[b]))
    return DependenceEdges(g.n_units, pairs)


def hop_ball_sizes(g: InterferenceGraph, i: int) -> list[int]:
    """|N_r(i)| for r = 0, 1, 2, ... until the ball saturates (BFS layers)."""
    seen = np.zeros(g.n_units, dtype=bool)
    seen[i] = True
    frontier = [i]
    sizes = [1]
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.neighborhoods[u]:
                if not seen[v]:
                    seen[v] = True
                    nxt.append(int(v))
        if not nxt:
            break
        sizes.append(sizes[-1] + len(nxt))
        frontier = nxt
    return sizes


def restricted_growth_coefficient(g: InterferenceGraph) -> float:
    """Smallest kappa >= 1 with |N_{r+1}(i)| <= kappa * |N_r(i)| for all r >= 1, i.

    Computed as the maximum finite growth ratio over all units and radii;
    the supremum is attained because hop balls saturate.
    """
    kappa = 1.0
    for i in range(g.n_units):
        sizes = hop_ball_sizes(g, i)
        for r in range(1, len(sizes) - 1):
            kappa = max(kappa, sizes[r + 1] / sizes[r])
    return kappa
