"""Overlay graph generation, analysis, and edge-list serialization.

Graphs are simple undirected graphs over integer node ids ``0..n-1``.
Generators are deterministic functions of their parameters and seed; a
built :class:`Graph` is immutable by convention and safe to share across
concurrent readers.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.sparse import csr_array
from scipy.sparse.csgraph import shortest_path

from .seeds import TOPOLOGY_ATTEMPT_STREAM, subseed

__all__ = [
    "Graph",
    "TopologyKind",
    "TopologySpec",
    "GraphGenerationError",
    "ConstraintError",
    "EdgeListError",
    "build_graph",
    "generate_random",
    "generate_small_world",
    "generate_k_regular",
    "generate_scale_free",
    "generate_with_constraints",
    "diameter",
    "is_connected",
    "save_edge_list",
    "load_edge_list",
]

log = logging.getLogger(__name__)

DEFAULT_REWIRE_PROBABILITY = 0.1
DEFAULT_RETRY_BUDGET = 100


class GraphGenerationError(RuntimeError):
    """Raised when a randomized construction exhausts its retry budget."""


class ConstraintError(GraphGenerationError):
    """Raised when a structural constraint cannot be satisfied."""

    def __init__(self, constraint: str, attempts: int):
        self.constraint = constraint
        self.attempts = attempts
        super().__init__(
            f"could not satisfy constraint '{constraint}' after {attempts} attempts"
        )


class EdgeListError(ValueError):
    """Malformed edge-list input; carries the 1-based offending line."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass
class Graph:
    """Simple undirected graph.

    Attributes
    ----------
    node_count : int
        Number of nodes; ids are ``0..node_count-1``.
    edges : list[tuple[int, int]]
        Canonical edge list: each pair has ``u < v`` and the list is
        sorted.  No self-loops, no duplicates.
    adjacency : list[list[int]]
        Per-node sorted neighbor ids; symmetric with ``edges``.
    """

    node_count: int
    edges: list[tuple[int, int]]
    adjacency: list[list[int]]

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def mean_degree(self) -> float:
        return 2.0 * len(self.edges) / self.node_count


class TopologyKind(Enum):
    RANDOM = "random"
    SMALL_WORLD = "small_world"
    K_REGULAR = "k_regular"
    SCALE_FREE = "scale_free"


@dataclass(frozen=True)
class TopologySpec:
    """Parameters for one overlay graph.

    ``edge_count`` is the canonical size parameter; a mean degree ``d``
    translates to ``n*d/2`` edges.  For small-world and k-regular graphs
    the per-node degree is recovered as ``2*edge_count/node_count`` and
    must be integral (and even for small-world).
    """

    kind: TopologyKind
    node_count: int
    edge_count: int
    rewire_probability: float | None = None
    max_diameter: int | None = None
    seed: int = 0
    retry_budget: int = DEFAULT_RETRY_BUDGET

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError(f"node_count must be >= 1, got {self.node_count}")
        if self.edge_count < 0:
            raise ValueError(f"edge_count must be >= 0, got {self.edge_count}")
        if self.rewire_probability is not None:
            if self.kind is not TopologyKind.SMALL_WORLD:
                raise ValueError("rewire_probability applies to small_world graphs only")
            if not 0.0 <= self.rewire_probability <= 1.0:
                raise ValueError(
                    f"rewire_probability must lie in [0, 1], got {self.rewire_probability}"
                )
        if self.max_diameter is not None and self.max_diameter < 1:
            raise ValueError(f"max_diameter must be >= 1, got {self.max_diameter}")
        if self.retry_budget < 1:
            raise ValueError(f"retry_budget must be >= 1, got {self.retry_budget}")

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.edge_count / self.node_count

    def degree_parameter(self) -> int:
        """Per-node degree implied by the edge count; must be integral."""
        k = 2 * self.edge_count / self.node_count
        if k != int(k):
            raise ValueError(
                f"{self.kind.value} needs an integral degree; "
                f"2*{self.edge_count}/{self.node_count} = {k}"
            )
        return int(k)

    def describe(self) -> str:
        """Stable one-token descriptor used in CSV output and file names."""
        n = self.node_count
        if self.kind is TopologyKind.RANDOM:
            return f"random-n{n}-m{self.edge_count}"
        if self.kind is TopologyKind.SMALL_WORLD:
            p = self.rewire_probability
            p = DEFAULT_REWIRE_PROBABILITY if p is None else p
            return f"small_world-n{n}-k{self.degree_parameter()}-p{p!r}"
        if self.kind is TopologyKind.K_REGULAR:
            return f"k_regular-n{n}-k{self.degree_parameter()}"
        return f"scale_free-n{n}-m{self.edge_count}"


def build_graph(node_count: int, edges) -> Graph:
    """Build a :class:`Graph` from an iterable of edges, validating shape.

    Raises ``ValueError`` on self-loops, duplicate edges, or ids outside
    ``0..node_count-1``.
    """
    if node_count < 1:
        raise ValueError(f"node_count must be >= 1, got {node_count}")
    canonical = set()
    for u, v in edges:
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise ValueError(f"edge ({u}, {v}) out of range for n={node_count}")
        e = (u, v) if u < v else (v, u)
        if e in canonical:
            raise ValueError(f"duplicate edge ({e[0]}, {e[1]})")
        canonical.add(e)
    edge_list = sorted(canonical)
    adjacency: list[list[int]] = [[] for _ in range(node_count)]
    for u, v in edge_list:
        adjacency[u].append(v)
        adjacency[v].append(u)
    for nbrs in adjacency:
        nbrs.sort()
    return Graph(node_count=node_count, edges=edge_list, adjacency=adjacency)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def generate_random(n: int, m: int, seed: int) -> Graph:
    """Uniform G(n, m) random simple graph with exactly ``m`` edges.

    Edges are drawn by rejection sampling of uniform pairs, which yields a
    uniform random m-subset of the possible edges.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    max_edges = n * (n - 1) // 2
    if not 0 <= m <= max_edges:
        raise ValueError(f"m must lie in [0, {max_edges}] for n={n}, got {m}")
    rng = np.random.default_rng(seed)
    edges: set[tuple[int, int]] = set()
    while len(edges) < m:
        batch = max(256, 2 * (m - len(edges)))
        us = rng.integers(0, n, size=batch).tolist()
        vs = rng.integers(0, n, size=batch).tolist()
        for u, v in zip(us, vs):
            if u == v:
                continue
            e = (u, v) if u < v else (v, u)
            if e in edges:
                continue
            edges.add(e)
            if len(edges) == m:
                break
    return build_graph(n, edges)


def generate_small_world(n: int, k: int, p_rewire: float, seed: int) -> Graph:
    """Watts-Strogatz small-world graph with exactly ``n*k/2`` edges.

    Ring lattice where every node connects to its ``k`` nearest neighbors,
    then each lattice edge is independently rewired with probability
    ``p_rewire`` to a uniform target, avoiding self-loops and duplicates.
    Rewiring preserves the edge count.
    """
    if k % 2 != 0:
        raise ValueError(f"k must be even, got {k}")
    if not 2 <= k < n:
        raise ValueError(f"need n > k >= 2, got n={n}, k={k}")
    if not 0.0 <= p_rewire <= 1.0:
        raise ValueError(f"p_rewire must lie in [0, 1], got {p_rewire}")
    rng = np.random.default_rng(seed)

    edges: set[tuple[int, int]] = set()
    degree = [k] * n
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            edges.add((u, v) if u < v else (v, u))

    for j in range(1, k // 2 + 1):
        for u in range(n):
            if rng.random() >= p_rewire:
                continue
            if degree[u] >= n - 1:
                continue  # no free target remains
            v = (u + j) % n
            old = (u, v) if u < v else (v, u)
            if old not in edges:
                continue
            while True:
                w = int(rng.integers(n))
                if w == u:
                    continue
                new = (u, w) if u < w else (w, u)
                if new not in edges:
                    break
            edges.remove(old)
            edges.add(new)
            degree[v] -= 1
            degree[w] += 1
    return build_graph(n, edges)


def generate_k_regular(n: int, k: int, seed: int, max_attempts: int = DEFAULT_RETRY_BUDGET) -> Graph:
    """Random simple k-regular graph via the pairing model.

    Stubs (k per node) are repeatedly shuffled and paired; pairs forming
    self-loops or duplicates are thrown back.  A stuck attempt restarts
    from scratch, up to ``max_attempts``.
    """
    if not 0 <= k < n:
        raise ValueError(f"need 0 <= k < n, got n={n}, k={k}")
    if (n * k) % 2 != 0:
        raise ValueError(f"n*k must be even, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        edges = _try_pairing(n, k, rng)
        if edges is not None:
            return build_graph(n, edges)
    raise GraphGenerationError(
        f"failed to build a simple {k}-regular graph on {n} nodes "
        f"after {max_attempts} attempts"
    )


def _try_pairing(n: int, k: int, rng: np.random.Generator) -> set[tuple[int, int]] | None:
    stubs = np.repeat(np.arange(n, dtype=np.int64), k)
    edges: set[tuple[int, int]] = set()
    while stubs.size:
        rng.shuffle(stubs)
        pairs = stubs.tolist()
        leftover: list[int] = []
        progress = False
        for i in range(0, len(pairs), 2):
            u, v = pairs[i], pairs[i + 1]
            if u == v:
                leftover += (u, v)
                continue
            e = (u, v) if u < v else (v, u)
            if e in edges:
                leftover += (u, v)
                continue
            edges.add(e)
            progress = True
        if not progress:
            return None
        stubs = np.asarray(leftover, dtype=np.int64)
    return edges


def generate_scale_free(n: int, m_attach: int, seed: int) -> Graph:
    """Barabasi-Albert preferential-attachment graph.

    Starts from a star on ``m_attach + 1`` nodes; every later node attaches
    to ``m_attach`` distinct existing nodes chosen proportionally to degree.
    Provided for completeness behind the common generator interface.
    """
    if m_attach < 1:
        raise ValueError(f"m_attach must be >= 1, got {m_attach}")
    if n < m_attach + 1:
        raise ValueError(f"need n >= m_attach + 1, got n={n}, m_attach={m_attach}")
    rng = np.random.default_rng(seed)
    edges: set[tuple[int, int]] = set()
    # repeated_nodes holds each node id once per incident edge endpoint
    repeated: list[int] = []
    for v in range(1, m_attach + 1):
        edges.add((0, v))
        repeated += (0, v)
    for u in range(m_attach + 1, n):
        targets: set[int] = set()
        while len(targets) < m_attach:
            t = repeated[int(rng.integers(len(repeated)))]
            targets.add(t)
        for t in sorted(targets):
            edges.add((t, u))
            repeated += (t, u)
    return build_graph(n, edges)


def _generate_for_spec(spec: TopologySpec, seed: int) -> Graph:
    if spec.kind is TopologyKind.RANDOM:
        return generate_random(spec.node_count, spec.edge_count, seed)
    if spec.kind is TopologyKind.SMALL_WORLD:
        p = spec.rewire_probability
        p = DEFAULT_REWIRE_PROBABILITY if p is None else p
        return generate_small_world(spec.node_count, spec.degree_parameter(), p, seed)
    if spec.kind is TopologyKind.K_REGULAR:
        return generate_k_regular(spec.node_count, spec.degree_parameter(), seed)
    m_attach = max(1, round(spec.mean_degree / 2))
    return generate_scale_free(spec.node_count, m_attach, seed)


def generate_with_constraints(spec: TopologySpec) -> Graph:
    """Generate a graph satisfying connectivity and the optional diameter cap.

    Invokes the underlying generator with per-attempt derived sub-seeds
    until the result is connected and, when ``spec.max_diameter`` is set,
    its diameter does not exceed it.  Raises :class:`ConstraintError`
    naming the failed constraint once the retry budget is exhausted.
    """
    failed = "connectivity"
    for attempt in range(spec.retry_budget):
        g = _generate_for_spec(spec, subseed(spec.seed, TOPOLOGY_ATTEMPT_STREAM, attempt))
        if spec.max_diameter is not None:
            d = diameter(g)
            if d <= spec.max_diameter:
                if attempt:
                    log.info("constraints met after %d retries", attempt)
                return g
            failed = "connectivity" if d == math.inf else f"diameter<={spec.max_diameter}"
        else:
            if is_connected(g):
                if attempt:
                    log.info("constraints met after %d retries", attempt)
                return g
            failed = "connectivity"
    raise ConstraintError(failed, spec.retry_budget)


# ---------------------------------------------------------------------------
# Analysis
# ---------------------------------------------------------------------------


def is_connected(g: Graph) -> bool:
    """True when every node is reachable from node 0."""
    n = g.node_count
    if n == 1:
        return True
    seen = bytearray(n)
    seen[0] = 1
    frontier = [0]
    count = 1
    adj = g.adjacency
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = 1
                    count += 1
                    nxt.append(v)
        frontier = nxt
    return count == n


def diameter(g: Graph, chunk: int = 1024) -> int | float:
    """Longest shortest-path length over all node pairs.

    All-pairs breadth-first distances, computed in source chunks to bound
    memory.  Returns ``math.inf`` when the graph is disconnected.
    """
    n = g.node_count
    if n == 1:
        return 0
    if not g.edges:
        return math.inf
    rows = np.fromiter((u for u, _ in g.edges), dtype=np.int64, count=len(g.edges))
    cols = np.fromiter((v for _, v in g.edges), dtype=np.int64, count=len(g.edges))
    data = np.ones(len(g.edges), dtype=np.int8)
    mat = csr_array(
        (np.concatenate([data, data]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n, n),
    )
    best = 0.0
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        dist = shortest_path(mat, method="D", unweighted=True, indices=idx)
        furthest = dist.max()
        if np.isinf(furthest):
            return math.inf
        best = max(best, float(furthest))
    return int(best)


# ---------------------------------------------------------------------------
# Edge-list serialization
# ---------------------------------------------------------------------------


def save_edge_list(g: Graph, sink) -> None:
    """Write ``g`` as canonical edge-list text.

    Format: header ``# nodes=<n> edges=<m>`` followed by one ``u v`` line
    per edge with ``u < v``, sorted by pair.  ``sink`` is a path or a text
    file object.
    """
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="ascii", newline="\n") as fh:
            save_edge_list(g, fh)
        return
    sink.write(f"# nodes={g.node_count} edges={len(g.edges)}\n")
    for u, v in g.edges:
        sink.write(f"{u} {v}\n")


def load_edge_list(source) -> Graph:
    """Parse edge-list text produced by :func:`save_edge_list`.

    Raises :class:`EdgeListError` with the offending 1-based line number on
    malformed input, out-of-range ids, self-loops, or duplicate edges.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="ascii") as fh:
            return load_edge_list(fh)
    if isinstance(source, io.TextIOBase) or hasattr(source, "readlines"):
        lines = source.readlines()
    else:
        raise TypeError("source must be a path or a text file object")
    if not lines:
        raise EdgeListError("missing header", 1)
    header = lines[0].strip()
    parts = header.split()
    if (
        len(parts) != 3
        or parts[0] != "#"
        or not parts[1].startswith("nodes=")
        or not parts[2].startswith("edges=")
    ):
        raise EdgeListError(f"bad header {header!r}", 1)
    try:
        n = int(parts[1][len("nodes="):])
        m = int(parts[2][len("edges="):])
    except ValueError:
        raise EdgeListError(f"bad header {header!r}", 1) from None
    if n < 1 or m < 0:
        raise EdgeListError(f"bad header values {header!r}", 1)

    edges: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text:
            continue
        fields = text.split()
        if len(fields) != 2:
            raise EdgeListError(f"expected 'u v', got {text!r}", lineno)
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise EdgeListError(f"expected 'u v', got {text!r}", lineno) from None
        if u == v:
            raise EdgeListError(f"self-loop at node {u}", lineno)
        if not (0 <= u < n and 0 <= v < n):
            raise EdgeListError(f"node id out of range in ({u}, {v})", lineno)
        e = (u, v) if u < v else (v, u)
        if e in edges:
            raise EdgeListError(f"duplicate edge ({e[0]}, {e[1]})", lineno)
        edges.add(e)
    if len(edges) != m:
        raise EdgeListError(f"header declares {m} edges, found {len(edges)}", 1)
    return build_graph(n, edges)
