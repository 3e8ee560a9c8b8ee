"""Random regular contact networks.

Networks are stored in compressed sparse row form: ``neighbors[offsets[i]:offsets[i + 1]]``
holds the sorted neighbor indices of node ``i``.  Irregular graphs are allowed so the
moment routines can be exercised on small hand-built examples; the generator always
returns a connected ``degree``-regular graph.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_RESTARTS = 1000


class GenerationError(RuntimeError):
    """Raised when the pairing generator exhausts its restart budget."""


@dataclass(frozen=True, eq=False)
class Network:
    offsets: np.ndarray
    neighbors: np.ndarray
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        self.offsets.setflags(write=False)
        self.neighbors.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.offsets) - 1

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def degree(self) -> int | None:
        """Common degree of a regular network, ``None`` otherwise."""
        deg = self.degrees
        if len(deg) and np.all(deg == deg[0]):
            return int(deg[0])
        return None

    @property
    def l_pairs(self) -> int:
        """Number of ordered adjacent pairs (each edge counted twice)."""
        return int(self.offsets[-1])

    @property
    def n_edges(self) -> int:
        return self.l_pairs // 2

    def neighbors_of(self, i: int) -> np.ndarray:
        return self.neighbors[self.offsets[i]:self.offsets[i + 1]]

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as ``(i, j)`` with ``i < j``, in lexicographic order."""
        out = []
        for i in range(self.n_nodes):
            for j in self.neighbors_of(i):
                if i < j:
                    out.append((i, int(j)))
        return out

    @property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edges())

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.edges())
        return g

    @classmethod
    def from_edges(cls, n_nodes: int, edges, seed: int | None = None) -> "Network":
        """Build a network from undirected edges; rejects self-loops and duplicates."""
        adj: list[set[int]] = [set() for _ in range(n_nodes)]
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if not (0 <= a < n_nodes and 0 <= b < n_nodes):
                raise ValueError(f"edge ({a}, {b}) out of range for {n_nodes} nodes")
            if b in adj[a]:
                raise ValueError(f"duplicate edge ({a}, {b})")
            adj[a].add(b)
            adj[b].add(a)
        return cls._from_adjacency(adj, seed)

    @classmethod
    def _from_adjacency(cls, adj, seed=None) -> "Network":
        deg = np.fromiter((len(a) for a in adj), dtype=np.int64, count=len(adj))
        offsets = np.zeros(len(adj) + 1, dtype=np.int64)
        np.cumsum(deg, out=offsets[1:])
        neighbors = np.empty(offsets[-1], dtype=np.int64)
        for i, a in enumerate(adj):
            neighbors[offsets[i]:offsets[i + 1]] = sorted(a)
        return cls(offsets, neighbors, seed)


def is_connected(net: Network) -> bool:
    """Breadth-first search from node 0."""
    n = net.n_nodes
    if n == 0:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    count = 1
    offsets, nbrs = net.offsets, net.neighbors
    while queue:
        i = queue.popleft()
        for j in nbrs[offsets[i]:offsets[i + 1]]:
            if not seen[j]:
                seen[j] = True
                count += 1
                queue.append(j)
    return count == n


def _pair_stubs(n_nodes, degree, rng):
    """One attempt of the stub-pairing procedure.

    Returns the adjacency sets, or ``None`` if the residual pool deadlocks.
    """
    pool = np.repeat(np.arange(n_nodes), degree).tolist()
    adj: list[set[int]] = [set() for _ in range(n_nodes)]
    misses = 0
    while pool:
        m = len(pool)
        a, b = rng.integers(m, size=2).tolist()
        if a == b:
            continue
        u, v = pool[a], pool[b]
        if u == v or v in adj[u]:
            misses += 1
            if misses > 50 and not _has_legal_pair(pool, adj):
                return None
            continue
        misses = 0
        adj[u].add(v)
        adj[v].add(u)
        # remove the higher index first so the lower swap target stays valid
        for k in sorted((a, b), reverse=True):
            pool[k] = pool[-1]
            pool.pop()
    return adj


def _has_legal_pair(pool, adj) -> bool:
    nodes = sorted(set(pool))
    for x, u in enumerate(nodes):
        for v in nodes[x + 1:]:
            if v not in adj[u]:
                return True
    return False


def generate_rrn(n_nodes: int, degree: int, seed: int) -> Network:
    """Generate a connected random ``degree``-regular graph by stub pairing.

    Illegal draws (self-loops, duplicate edges) are redrawn; a deadlocked pool or a
    disconnected result restarts the whole pairing, at most ``MAX_RESTARTS`` times.
    """
    if n_nodes < 1 or degree < 1:
        raise ValueError("n_nodes and degree must be positive")
    if degree >= n_nodes:
        raise ValueError(f"degree {degree} must be smaller than n_nodes {n_nodes}")
    if (n_nodes * degree) % 2:
        raise ValueError(f"n_nodes * degree = {n_nodes * degree} must be even")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RESTARTS):
        adj = _pair_stubs(n_nodes, degree, rng)
        if adj is None:
            continue
        net = Network._from_adjacency(adj, seed)
        if is_connected(net):
            return net
    raise GenerationError(
        f"no connected {degree}-regular graph on {n_nodes} nodes after {MAX_RESTARTS} restarts"
    )


def save_network(net: Network, path) -> None:
    """Write the edge list, header ``rrn N d seed``, one ``i j`` line per edge."""
    deg = net.degree if net.degree is not None else -1
    seed = net.seed if net.seed is not None else -1
    lines = [f"rrn {net.n_nodes} {deg} {seed}"]
    lines += [f"{i} {j}" for i, j in net.edges()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_network(path) -> Network:
    text = Path(path).read_text(encoding="utf-8").split("\n")
    head = text[0].split()
    if len(head) != 4 or head[0] != "rrn":
        raise ValueError(f"{path}: bad header {text[0]!r}")
    n, deg, seed = (int(v) for v in head[1:])
    edges = [tuple(map(int, ln.split())) for ln in text[1:] if ln.strip()]
    net = Network.from_edges(n, edges, seed=None if seed < 0 else seed)
    if deg >= 0 and net.degree != deg:
        raise ValueError(f"{path}: header degree {deg} does not match edges")
    return net
