"""Exact s/t maximum flow / minimum cut on capacitated graphs.

Augmenting-path solver (Dinic's level-graph variant) over float capacities,
jitted with numba. The minimum cut is recovered by BFS reachability in the
residual graph: nodes unreachable from the source land on the sink side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

EPS = 1e-12  # residual capacities at or below this count as saturated


@dataclass
class FlowNetworkGraph:
    """Directed capacitated graph with designated source and sink nodes."""

    n_nodes: int
    source: int
    sink: int
    tails: np.ndarray
    heads: np.ndarray
    capacities: np.ndarray

    def __post_init__(self):
        self.tails = np.asarray(self.tails, dtype=np.int64)
        self.heads = np.asarray(self.heads, dtype=np.int64)
        self.capacities = np.asarray(self.capacities, dtype=np.float64)
        if not (len(self.tails) == len(self.heads) == len(self.capacities)):
            raise ValueError("tails/heads/capacities must have equal length")
        if np.any(self.capacities < 0) or not np.all(np.isfinite(self.capacities)):
            raise ValueError("capacities must be finite and non-negative")

    @property
    def n_arcs(self) -> int:
        return len(self.capacities)


@njit(cache=True)
def _dinic(n, s, t, indptr, adj, eto, cap):  # pragma: no cover - jitted
    level = np.empty(n, np.int64)
    it = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    path = np.empty(n + 1, np.int64)
    total = 0.0
    while True:
        for i in range(n):
            level[i] = -1
        level[s] = 0
        qh, qt = 0, 1
        queue[0] = s
        while qh < qt:
            v = queue[qh]
            qh += 1
            for idx in range(indptr[v], indptr[v + 1]):
                e = adj[idx]
                u = eto[e]
                if cap[e] > EPS and level[u] < 0:
                    level[u] = level[v] + 1
                    queue[qt] = u
                    qt += 1
        if level[t] < 0:
            break
        for i in range(n):
            it[i] = indptr[i]
        v = s
        plen = 0
        while True:
            if v == t:
                f = 1e300
                for i in range(plen):
                    e = path[i]
                    if cap[e] < f:
                        f = cap[e]
                for i in range(plen):
                    e = path[i]
                    cap[e] -= f
                    cap[e ^ 1] += f
                total += f
                # retreat to just before the first saturated edge
                keep = 0
                v = s
                for i in range(plen):
                    e = path[i]
                    if cap[e] <= EPS:
                        break
                    v = eto[e]
                    keep += 1
                plen = keep
                continue
            advanced = False
            while it[v] < indptr[v + 1]:
                e = adj[it[v]]
                u = eto[e]
                if cap[e] > EPS and level[u] == level[v] + 1:
                    path[plen] = e
                    plen += 1
                    v = u
                    advanced = True
                    break
                it[v] += 1
            if not advanced:
                if v == s:
                    break
                level[v] = -1  # dead end for this phase
                plen -= 1
                e = path[plen]
                v = eto[e ^ 1]
                it[v] += 1
    return total


@njit(cache=True)
def _residual_reachable(n, s, indptr, adj, eto, cap):  # pragma: no cover - jitted
    seen = np.zeros(n, np.bool_)
    queue = np.empty(n, np.int64)
    seen[s] = True
    qh, qt = 0, 1
    queue[0] = s
    while qh < qt:
        v = queue[qh]
        qh += 1
        for idx in range(indptr[v], indptr[v + 1]):
            e = adj[idx]
            u = eto[e]
            if cap[e] > EPS and not seen[u]:
                seen[u] = True
                queue[qt] = u
                qt += 1
    return seen


def _build_adjacency(graph: FlowNetworkGraph):
    """Interleave forward/reverse residual edges (pair e <-> e^1) and index them
    per tail node in CSR form."""
    m = graph.n_arcs
    eto = np.empty(2 * m, dtype=np.int64)
    cap = np.zeros(2 * m, dtype=np.float64)
    etail = np.empty(2 * m, dtype=np.int64)
    eto[0::2] = graph.heads
    eto[1::2] = graph.tails
    cap[0::2] = graph.capacities
    etail[0::2] = graph.tails
    etail[1::2] = graph.heads
    order = np.argsort(etail, kind="stable")
    indptr = np.zeros(graph.n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(etail, minlength=graph.n_nodes), out=indptr[1:])
    return indptr, order, eto, cap


def max_flow(graph: FlowNetworkGraph) -> tuple[float, np.ndarray]:
    """Solve for the exact maximum flow.

    Returns (flow_value, source_side) where source_side[i] is True iff node i
    stays on the source side of a minimum cut.
    """
    indptr, adj, eto, cap = _build_adjacency(graph)
    value = _dinic(graph.n_nodes, graph.source, graph.sink, indptr, adj, eto, cap)
    source_side = np.asarray(
        _residual_reachable(graph.n_nodes, graph.source, indptr, adj, eto, cap)
    )
    source_side[graph.sink] = False
    return float(value), source_side


def cut_capacity(graph: FlowNetworkGraph, source_side: np.ndarray) -> float:
    """Total capacity of arcs crossing from the source side to the sink side."""
    crossing = source_side[graph.tails] & ~source_side[graph.heads]
    return float(graph.capacities[crossing].sum())
