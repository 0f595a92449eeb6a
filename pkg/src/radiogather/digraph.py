"""Directed graphs over labels 0..n-1 with a designated target node.

Graphs are immutable. Structural queries (strongly connected components,
in-graphs, longest-path layers) are pure functions over them.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence


@dataclass(frozen=True)
class Digraph:
    n: int
    edges: frozenset[tuple[int, int]]
    target: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one node, got n={self.n}")
        if not 0 <= self.target < self.n:
            raise ValueError(f"target {self.target} outside [0, {self.n})")
        edges = frozenset((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside [0, {self.n})")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], target: int) -> "Digraph":
        return cls(n, frozenset(edges), target)

    @cached_property
    def out_neighbors(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            out[u].append(v)
        return tuple(tuple(sorted(vs)) for vs in out)

    @cached_property
    def in_neighbors(self) -> tuple[frozenset[int], ...]:
        inn: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            inn[v].add(u)
        return tuple(frozenset(s) for s in inn)

    def sources(self) -> list[int]:
        return [v for v in range(self.n) if not self.in_neighbors[v]]

    def is_acyclic(self) -> bool:
        return topological_order(self) is not None

    def relabel(self, perm: Sequence[int]) -> "Digraph":
        """Return the isomorphic graph where node v becomes perm[v]."""
        return Digraph(self.n, frozenset((perm[u], perm[v]) for u, v in self.edges), perm[self.target])


@dataclass(frozen=True)
class SccPartition:
    component_of: tuple[int, ...]
    components: tuple[frozenset[int], ...]
    condensation_order: tuple[int, ...]

    def component(self, v: int) -> frozenset[int]:
        return self.components[self.component_of[v]]


@dataclass(frozen=True)
class LayerDecomposition:
    delta: tuple[int, ...]
    layers: tuple[frozenset[int], ...]
    r: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "r", len(self.layers) - 1)

    def layer_of(self, v: int) -> int:
        return self.r - self.delta[v]


def validate_target_reachable(g: Digraph) -> bool:
    return len(in_graph(g, {g.target})) == g.n


def in_graph(g: Digraph, nodes: Iterable[int]) -> frozenset[int]:
    """All nodes with a directed path to some member of `nodes` (members included)."""
    seen = set(nodes)
    for v in seen:
        if not 0 <= v < g.n:
            raise ValueError(f"node {v} outside [0, {g.n})")
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for u in g.in_neighbors[v]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return frozenset(seen)


def reachable_from(g: Digraph, v: int) -> frozenset[int]:
    seen = {v}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        for w in g.out_neighbors[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return frozenset(seen)


def distances_to_target(g: Digraph) -> list[int | None]:
    """Shortest-path hop counts to the target (None if unreachable)."""
    dist: list[int | None] = [None] * g.n
    dist[g.target] = 0
    queue = deque([g.target])
    while queue:
        v = queue.popleft()
        for u in g.in_neighbors[v]:
            if dist[u] is None:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def topological_order(g: Digraph) -> list[int] | None:
    indeg = [len(g.in_neighbors[v]) for v in range(g.n)]
    ready = deque(v for v in range(g.n) if indeg[v] == 0)
    order = []
    while ready:
        u = ready.popleft()
        order.append(u)
        for w in g.out_neighbors[u]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return order if len(order) == g.n else None


def compute_scc(g: Digraph) -> SccPartition:
    # Iterative Tarjan; components come out in reverse topological order.
    index = [-1] * g.n
    low = [0] * g.n
    on_stack = [False] * g.n
    stack: list[int] = []
    found: list[list[int]] = []
    counter = 0
    for root in range(g.n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            succ = g.out_neighbors[v]
            if i < len(succ):
                work[-1] = (v, i + 1)
                w = succ[i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                found.append(comp)
    found.reverse()
    component_of = [0] * g.n
    for cid, comp in enumerate(found):
        for v in comp:
            component_of[v] = cid
    return SccPartition(
        component_of=tuple(component_of),
        components=tuple(frozenset(c) for c in found),
        condensation_order=tuple(range(len(found))),
    )


def condensation_depth(g: Digraph, scc: SccPartition | None = None) -> int:
    """Number of edges on the longest path of the condensation DAG."""
    scc = scc or compute_scc(g)
    depth = [0] * len(scc.components)
    for cid in reversed(scc.condensation_order):
        for u in scc.components[cid]:
            for w in g.out_neighbors[u]:
                c2 = scc.component_of[w]
                if c2 != cid:
                    depth[cid] = max(depth[cid], depth[c2] + 1)
    return max(depth)


def layer_decomposition(g: Digraph) -> LayerDecomposition:
    order = topological_order(g)
    if order is None:
        raise ValueError("layer decomposition needs an acyclic graph")
    if not validate_target_reachable(g):
        raise ValueError("target not reachable from every node")
    delta = [0] * g.n
    for v in reversed(order):
        if v == g.target:
            continue
        delta[v] = 1 + max(delta[w] for w in g.out_neighbors[v])
    r = max(delta)
    layers = [set() for _ in range(r + 1)]
    for v in range(g.n):
        layers[r - delta[v]].add(v)
    return LayerDecomposition(tuple(delta), tuple(frozenset(b) for b in layers))


# -- generators ---------------------------------------------------------------

GENERATORS = ("random_dag", "layered_dag", "scc_chain", "random_digraph", "star", "path")


def _shuffled_labels(n: int, rng: random.Random) -> list[int]:
    perm = list(range(n))
    rng.shuffle(perm)
    return perm


def _patch_reachability(n: int, edges: set[tuple[int, int]], target: int) -> None:
    # Fallback edge v -> target for every node that cannot reach the target.
    g = Digraph(n, frozenset(edges), target)
    reach = in_graph(g, {target})
    for v in range(n):
        if v not in reach:
            edges.add((v, target))


def generate(kind: str, n: int, params: dict | None = None, seed: int = 0) -> Digraph:
    """Build a graph of the named shape; deterministic in (kind, n, params, seed).

    Random kinds get their labels shuffled so that label order carries no
    structural information.
    """
    params = dict(params or {})
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = random.Random(f"{kind}:{n}:{sorted(params.items())}:{seed}")

    if kind == "star":
        return Digraph(n, frozenset((i, n - 1) for i in range(n - 1)), n - 1)
    if kind == "path":
        return Digraph(n, frozenset((i, i + 1) for i in range(n - 1)), n - 1)

    edges: set[tuple[int, int]] = set()
    if kind == "random_dag":
        density = float(params.get("density", 0.1))
        # positions 0..n-1 in topological order, target last
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < density:
                    edges.add((i, j))
        target = n - 1
    elif kind == "layered_dag":
        width = int(params.get("width", max(1, round(n ** 0.5))))
        density = float(params.get("density", 0.5))
        if width < 1:
            raise ValueError("width must be positive")
        body = list(range(n - 1))
        layers = [body[i:i + width] for i in range(0, len(body), width)]
        target = n - 1
        for a, b in zip(layers, layers[1:]):
            for u in a:
                outs = [v for v in b if rng.random() < density]
                if not outs:
                    outs = [rng.choice(b)]
                edges.update((u, v) for v in outs)
        if layers:
            edges.update((u, target) for u in layers[-1])
    elif kind == "scc_chain":
        sizes = [int(s) for s in params.get("sizes", [n])]
        if sum(sizes) != n or any(s < 1 for s in sizes):
            raise ValueError(f"component sizes {sizes} must be positive and sum to n={n}")
        density = float(params.get("density", 0.2))
        blobs, start = [], 0
        for s in sizes:
            blobs.append(list(range(start, start + s)))
            start += s
        for blob in blobs:
            if len(blob) > 1:
                order = blob[:]
                rng.shuffle(order)
                edges.update(zip(order, order[1:] + order[:1]))
                for u in blob:
                    for v in blob:
                        if u != v and rng.random() < density:
                            edges.add((u, v))
        for a, b in zip(blobs, blobs[1:]):
            edges.add((rng.choice(a), rng.choice(b)))
            for u in a:
                for v in b:
                    if rng.random() < density / 2:
                        edges.add((u, v))
        target = blobs[-1][-1]
    elif kind == "random_digraph":
        density = float(params.get("density", 0.1))
        for u in range(n):
            for v in range(n):
                if u != v and rng.random() < density:
                    edges.add((u, v))
        target = n - 1
    else:
        raise ValueError(f"unknown generator {kind!r}; expected one of {GENERATORS}")

    _patch_reachability(n, edges, target)
    g = Digraph(n, frozenset(edges), target)
    return g.relabel(_shuffled_labels(n, rng))


# -- file format --------------------------------------------------------------

def format_graph(g: Digraph) -> str:
    lines = [f"{g.n} {g.target}"]
    lines.extend(f"{u} {v}" for u, v in sorted(g.edges))
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> Digraph:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected two integers, got {raw!r}")
        try:
            rows.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValueError(f"line {lineno}: expected two integers, got {raw!r}") from None
    if not rows:
        raise ValueError("empty graph file")
    (n, target), edges = rows[0], rows[1:]
    return Digraph(n, frozenset(edges), target)


def read_graph(path: str | Path) -> Digraph:
    return parse_graph(Path(path).read_text())


def write_graph(g: Digraph, path: str | Path) -> None:
    Path(path).write_text(format_graph(g))
