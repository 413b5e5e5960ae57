"""Communication graphs for multi-agent consensus runs.

Agents are labelled 0..L-1.  Edges are unordered pairs; every edge also
induces the two directed arcs used to build incidence matrices, so a graph
with E edges carries 2E arcs.  All generators return connected graphs and
are deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

Edge = tuple[int, int]

SPECIAL_KINDS = ("line", "cycle", "star", "complete")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Topology:
    """Undirected connected graph on L agents."""

    L: int
    edges: tuple[Edge, ...]
    label: str = "random"

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"agent count must be positive, got {self.L}")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at agent {i}")
            if not (0 <= i < self.L and 0 <= j < self.L):
                raise ValueError(f"edge ({i}, {j}) out of range for L={self.L}")
            if i > j:
                raise ValueError(f"edge ({i}, {j}) not in canonical (low, high) order")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        if self.L > 1 and len(self.edges) < self.L - 1:
            raise ValueError(f"{len(self.edges)} edges cannot connect {self.L} agents")
        if not self._is_connected():
            raise ValueError("graph is not connected")

    @property
    def E(self) -> int:
        return len(self.edges)

    @property
    def arcs(self) -> tuple[Edge, ...]:
        """Both directions of every edge, sorted lexicographically.

        This order fixes the column order of the incidence matrices.
        """
        return tuple(sorted([(i, j) for i, j in self.edges] + [(j, i) for i, j in self.edges]))

    def neighbors(self) -> list[list[int]]:
        neigh: list[list[int]] = [[] for _ in range(self.L)]
        for i, j in self.edges:
            neigh[i].append(j)
            neigh[j].append(i)
        return [sorted(n) for n in neigh]

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.L, dtype=np.int64)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.L, self.L))
        for i, j in self.edges:
            A[i, j] = 1.0
            A[j, i] = 1.0
        return A

    def _is_connected(self) -> bool:
        if self.L == 1:
            return True
        neigh = self.neighbors()
        seen = np.zeros(self.L, dtype=bool)
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            u = stack.pop()
            for v in neigh[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == self.L

    # -- edge-list serialization: header "L E kind", then one "i j" per line --

    def to_edgelist(self) -> str:
        lines = [f"{self.L} {self.E} {self.label}"]
        lines += [f"{i} {j}" for i, j in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> "Topology":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty edge-list text")
        head = lines[0].split()
        if len(head) != 3:
            raise ValueError(f"malformed header {lines[0]!r}, expected 'L E kind'")
        L, E, label = int(head[0]), int(head[1]), head[2]
        edges = []
        for ln in lines[1:]:
            i, j = (int(tok) for tok in ln.split())
            edges.append((min(i, j), max(i, j)))
        if len(edges) != E:
            raise ValueError(f"header says {E} edges, found {len(edges)}")
        return cls(L, tuple(sorted(edges)), label)


@dataclass(frozen=True)
class NetworkMetrics:
    """Connectivity measures of a topology.

    L_d is the group-size imbalance of a bipartite graph and is None for
    any other label.
    """

    p: float
    D: int
    d_min: int
    d_max: int
    d_s: float
    L_d: int | None = None


def _wilson_tree(L: int, rng: np.random.Generator) -> set[Edge]:
    """Uniform random spanning tree of the complete graph (loop-erased walk)."""
    in_tree = np.zeros(L, dtype=bool)
    nxt = np.full(L, -1, dtype=np.int64)
    root = int(rng.integers(L))
    in_tree[root] = True
    for start in range(L):
        u = start
        while not in_tree[u]:
            v = int(rng.integers(L - 1))
            if v >= u:
                v += 1
            nxt[u] = v
            u = v
        u = start
        while not in_tree[u]:
            in_tree[u] = True
            u = nxt[u]
    edges = set()
    for u in range(L):
        if u != root:
            v = int(nxt[u])
            edges.add((min(u, v), max(u, v)))
    return edges


def random_connected(L: int, p: float, seed) -> Topology:
    """Random connected graph with round(p * L(L-1)/2) edges.

    A uniform random spanning tree guarantees connectivity; the remaining
    edges are sampled uniformly without replacement from the non-tree
    pairs.  The induced distribution over connected graphs is therefore
    only approximately uniform.
    """
    if L < 2:
        raise ValueError(f"need at least 2 agents, got {L}")
    if not (0.0 < p <= 1.0):
        raise ValueError(f"connectivity ratio must lie in (0, 1], got {p}")
    E = _round_half_up(p * L * (L - 1) / 2)
    if E < L - 1:
        raise ValueError(
            f"p={p} yields {E} edges, below the {L - 1} needed for a spanning tree"
        )
    rng = np.random.default_rng(seed)
    edges = _wilson_tree(L, rng)
    extra = E - (L - 1)
    if extra > 0:
        non_tree = [
            (i, j) for i in range(L) for j in range(i + 1, L) if (i, j) not in edges
        ]
        picks = rng.choice(len(non_tree), size=extra, replace=False)
        for k in picks:
            edges.add(non_tree[int(k)])
    return Topology(L, tuple(sorted(edges)), "random")


def special(kind: str, L: int) -> Topology:
    """Line, cycle, star, or complete graph on L agents."""
    if kind not in SPECIAL_KINDS:
        raise ValueError(f"unknown kind {kind!r}, expected one of {SPECIAL_KINDS}")
    min_L = 3 if kind == "cycle" else 2
    if L < min_L:
        raise ValueError(f"{kind} graph needs at least {min_L} agents, got {L}")
    if kind == "line":
        edges = [(i, i + 1) for i in range(L - 1)]
    elif kind == "cycle":
        edges = [(i, i + 1) for i in range(L - 1)] + [(0, L - 1)]
    elif kind == "star":
        edges = [(0, i) for i in range(1, L)]
    else:
        edges = [(i, j) for i in range(L) for j in range(i + 1, L)]
    return Topology(L, tuple(sorted(edges)), kind)


def grid3d(nx: int, ny: int, nz: int) -> Topology:
    """3D lattice; agents at integer points, edges at Manhattan distance 1."""
    if nx < 1 or ny < 1 or nz < 1:
        raise ValueError("grid extents must be positive")
    L = nx * ny * nz
    if L < 2:
        raise ValueError("grid needs at least 2 agents")

    def idx(x, y, z):
        return (x * ny + y) * nz + z

    edges = []
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                a = idx(x, y, z)
                if x + 1 < nx:
                    edges.append((a, idx(x + 1, y, z)))
                if y + 1 < ny:
                    edges.append((a, idx(x, y + 1, z)))
                if z + 1 < nz:
                    edges.append((a, idx(x, y, z + 1)))
    edges = [(min(a, b), max(a, b)) for a, b in edges]
    return Topology(L, tuple(sorted(edges)), "grid3d")


def bipartite(L: int, L_d: int, p: float, seed) -> Topology:
    """Connected bipartite graph with group sizes (L+L_d)/2 and (L-L_d)/2.

    Edges run only across the two groups; the edge count is
    round(p * L(L-1)/2) and must fit between a spanning tree and the
    complete bipartite graph.
    """
    if L < 2:
        raise ValueError(f"need at least 2 agents, got {L}")
    if (L + L_d) % 2 != 0:
        raise ValueError(f"L + L_d must be even, got L={L}, L_d={L_d}")
    if not (0 <= L_d <= L - 2):
        raise ValueError(f"imbalance must lie in [0, L-2], got {L_d}")
    nA = (L + L_d) // 2
    nB = L - nA
    E = _round_half_up(p * L * (L - 1) / 2)
    if E < L - 1 or E > nA * nB:
        raise ValueError(
            f"infeasible (L_d, p): {E} edges requested, feasible range "
            f"[{L - 1}, {nA * nB}]"
        )
    rng = np.random.default_rng(seed)
    group_a = list(range(nA))
    group_b = list(range(nA, L))
    # cross-only spanning tree: attach each vertex, in random order, to a
    # random tree member of the opposite group
    a0 = int(rng.choice(group_a))
    b0 = int(rng.choice(group_b))
    in_tree_a, in_tree_b = [a0], [b0]
    edges = {(min(a0, b0), max(a0, b0))}
    pending = [u for u in group_a if u != a0] + [u for u in group_b if u != b0]
    order = rng.permutation(len(pending))
    for k in order:
        u = pending[int(k)]
        if u < nA:
            v = in_tree_b[int(rng.integers(len(in_tree_b)))]
            in_tree_a.append(u)
        else:
            v = in_tree_a[int(rng.integers(len(in_tree_a)))]
            in_tree_b.append(u)
        edges.add((min(u, v), max(u, v)))
    extra = E - (L - 1)
    if extra > 0:
        non_tree = [
            (a, b) for a in group_a for b in group_b if (a, b) not in edges
        ]
        picks = rng.choice(len(non_tree), size=extra, replace=False)
        for k in picks:
            edges.add(non_tree[int(k)])
    return Topology(L, tuple(sorted(edges)), "bipartite")


def _two_coloring(t: Topology) -> tuple[int, int]:
    """Group sizes of the (unique) bipartition; raises if not bipartite."""
    color = np.full(t.L, -1, dtype=np.int64)
    neigh = t.neighbors()
    color[0] = 0
    stack = [0]
    while stack:
        u = stack.pop()
        for v in neigh[u]:
            if color[v] == -1:
                color[v] = 1 - color[u]
                stack.append(v)
            elif color[v] == color[u]:
                raise ValueError("graph labelled bipartite has an odd cycle")
    n0 = int(np.sum(color == 0))
    return n0, t.L - n0


def metrics(t: Topology) -> NetworkMetrics:
    """Diameter, degree statistics, connectivity ratio, and imbalance."""
    if t.L < 2:
        raise ValueError("metrics need at least 2 agents")
    adj = csr_matrix(t.adjacency())
    dist = shortest_path(adj, method="D", unweighted=True)
    if not np.isfinite(dist).all():
        raise ValueError("graph is not connected")
    D = int(dist.max())
    d = t.degrees()
    d_min, d_max = int(d.min()), int(d.max())
    L_d = None
    if t.label == "bipartite":
        n0, n1 = _two_coloring(t)
        L_d = abs(n0 - n1)
    return NetworkMetrics(
        p=t.E / (t.L * (t.L - 1) / 2),
        D=D,
        d_min=d_min,
        d_max=d_max,
        d_s=math.sqrt(d_min * d_max),
        L_d=L_d,
    )
