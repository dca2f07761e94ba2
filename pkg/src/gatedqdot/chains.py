"""Coupling graphs, connectedness-chain decisions and non-resonance certificates.

A control field couples a pair of levels when the corresponding coupling
entry is nonzero; a set of pairs that links every pair of levels through
overlapping hops is a connectedness chain, rendered here as connectivity
of the undirected coupling graph.  All verdicts are finite: they hold at
the stated truncation and tolerance, never for the infinite mode family.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .coupling import CouplingMatrix
from .spectral import ModeIndex


@dataclass(frozen=True)
class CouplingGraph:
    """Undirected graph over the first `node_count` ordering positions."""

    modes: tuple[ModeIndex, ...]
    edges: frozenset[tuple[int, int]]  # (a, b) with a < b
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    @property
    def node_count(self) -> int:
        return len(self.modes)

    def neighbors(self, node: int) -> tuple[int, ...]:
        return self.adjacency[node]

    def resolve(self, node) -> int:
        """Accept an ordering position or a ModeIndex; return the position."""
        if isinstance(node, (int, np.integer)):
            pos = int(node)
            if not 0 <= pos < self.node_count:
                raise ValueError(f"node position {pos} out of range")
            return pos
        target = ModeIndex(*node)
        for i, m in enumerate(self.modes):
            if m == target:
                return i
        raise ValueError(f"mode {tuple(target)} not among graph nodes")


def build_graph(matrix: CouplingMatrix, node_count: int) -> CouplingGraph:
    """Graph with the stored off-diagonal entries among the first nodes as edges."""
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    if node_count > len(matrix.modes):
        raise ValueError("node_count exceeds coupling matrix mode count")
    edges = frozenset(
        (a, b) for (a, b) in matrix.entries if a != b and a < node_count and b < node_count
    )
    adj = [[] for _ in range(node_count)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    return CouplingGraph(
        modes=tuple(matrix.modes[:node_count]),
        edges=edges,
        adjacency=tuple(tuple(sorted(x)) for x in adj),
    )


def check_connected(graph: CouplingGraph) -> tuple[bool, list[list[int]]]:
    """Breadth-first connectivity; components listed in order of least member."""
    seen = [False] * graph.node_count
    components = []
    for start in range(graph.node_count):
        if seen[start]:
            continue
        comp = []
        queue = deque([start])
        seen[start] = True
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in graph.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        components.append(sorted(comp))
    return len(components) == 1, components


def coupling_path(graph: CouplingGraph, j, k) -> list[int] | None:
    """Shortest coupling path from j to k, or None across components.

    Ties are broken towards lexicographically smaller node sequences by
    always stepping to the smallest admissible neighbor.
    """
    src = graph.resolve(j)
    dst = graph.resolve(k)
    if src == dst:
        return [src]
    dist = {dst: 0}
    queue = deque([dst])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    if src not in dist:
        return None
    path = [src]
    current = src
    while current != dst:
        current = min(v for v in graph.neighbors(current) if dist.get(v, -1) == dist[current] - 1)
        path.append(current)
    return path


def spanning_chain(graph: CouplingGraph) -> list[tuple[int, int]]:
    """Breadth-first spanning forest edges, the default chain to certify."""
    seen = [False] * graph.node_count
    edges = []
    for start in range(graph.node_count):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in graph.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    edges.append((min(u, v), max(u, v)))
                    queue.append(v)
    return edges


def certify_nonresonant_chain(
    eigenvalues,
    matrix: CouplingMatrix,
    chain_edges,
    tol: float,
) -> list[tuple[tuple[int, int], tuple[int, int], float]]:
    """Transition-frequency collisions between chain edges and coupled pairs.

    For every oriented chain edge (s1, s2) and every oriented coupled pair
    (t1, t2) != (s1, s2) (diagonal pairs included), reports
    |（lam_s1 - lam_s2) - (lam_t1 - lam_t2)| <= tol.  Chain edges are
    oriented with the larger eigenvalue first and mirror-image duplicates
    are canonicalized away.  An empty list certifies the non-resonant
    chain condition at this truncation and tolerance.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.size
    coupled = [(a, b) for (a, b) in matrix.entries if a < n and b < n]
    coupled_set = set(coupled)
    chain = []
    for a, b in chain_edges:
        a, b = int(a), int(b)
        key = (min(a, b), max(a, b))
        if key[0] == key[1] or key not in coupled_set:
            raise ValueError(f"chain edge {key} is not a stored off-diagonal coupling")
        chain.append(key)

    t_pairs = []
    for a, b in coupled:
        t_pairs.append((a, b))
        if a != b:
            t_pairs.append((b, a))
    t_arr = np.array(t_pairs, dtype=int)
    t_diff = lam[t_arr[:, 0]] - lam[t_arr[:, 1]]
    order = np.argsort(t_diff, kind="stable")
    t_diff_sorted = t_diff[order]
    t_sorted = t_arr[order]

    found = {}
    for a, b in sorted(set(chain)):
        s1, s2 = (a, b) if lam[a] >= lam[b] else (b, a)
        d = lam[s1] - lam[s2]
        lo = np.searchsorted(t_diff_sorted, d - tol, side="left")
        hi = np.searchsorted(t_diff_sorted, d + tol, side="right")
        for idx in range(lo, hi):
            t1, t2 = int(t_sorted[idx, 0]), int(t_sorted[idx, 1])
            if (t1, t2) == (s1, s2):
                continue
            # identity up to (s <-> t) and joint within-pair reflection
            key = min(
                tuple(sorted(((s1, s2), (t1, t2)))),
                tuple(sorted(((s2, s1), (t2, t1)))),
            )
            gap = abs(d - float(t_diff_sorted[idx]))
            if key not in found or gap < found[key][2]:
                found[key] = ((s1, s2), (t1, t2), gap)
    return sorted(found.values())


@dataclass(frozen=True)
class ChainCertificate:
    """Finite rendering of the non-resonant connectedness chain condition."""

    connected: bool
    components: list[list[ModeIndex]]
    witness_paths: dict[tuple[ModeIndex, ModeIndex], list[ModeIndex]]
    violations: list
    truncation: int
    resonance_tol: float
    zero_tol: float

    @property
    def certified(self) -> bool:
        return self.connected and not self.violations

    def to_json_dict(self) -> dict:
        return {
            "connected": self.connected,
            "certified": self.certified,
            "components": [[list(m) for m in comp] for comp in self.components],
            "witness_paths": [
                {"from": list(a), "to": list(b), "path": [list(m) for m in p]}
                for (a, b), p in sorted(self.witness_paths.items())
            ],
            "violations": [
                {"chain_pair": [list(s) for s in s_pair], "other_pair": [list(t) for t in t_pair], "gap": gap}
                for s_pair, t_pair, gap in self.violations
            ],
            "truncation": self.truncation,
            "tolerances": {"resonance": self.resonance_tol, "zero": self.zero_tol},
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def certify(
    matrix: CouplingMatrix,
    eigenvalues,
    truncation: int,
    resonance_tol: float,
    chain_edges=None,
) -> ChainCertificate:
    """Full certificate: connectivity, witness paths and resonance scan.

    The default chain is the breadth-first spanning forest of the coupling
    graph; witness paths go from each component's least node to its other
    members (paths between arbitrary pairs concatenate two witnesses).
    """
    graph = build_graph(matrix, truncation)
    connected, components = check_connected(graph)
    witness = {}
    for comp in components:
        root = comp[0]
        for node in comp[1:]:
            path = coupling_path(graph, root, node)
            witness[(graph.modes[root], graph.modes[node])] = [graph.modes[p] for p in path]
    edges = spanning_chain(graph) if chain_edges is None else list(chain_edges)
    raw = certify_nonresonant_chain(eigenvalues, matrix, edges, resonance_tol)
    violations = [
        (
            (graph.modes[s[0]], graph.modes[s[1]]),
            (graph.modes[t[0]], graph.modes[t[1]]),
            gap,
        )
        for s, t, gap in raw
    ]
    return ChainCertificate(
        connected=connected,
        components=[[graph.modes[i] for i in comp] for comp in components],
        witness_paths=witness,
        violations=violations,
        truncation=truncation,
        resonance_tol=resonance_tol,
        zero_tol=matrix.zero_tol,
    )
