"""Graphs and binary pairwise (Ising) models.

Nodes and edges are dense integer indices starting at 0.  Every undirected
edge ``e = (i, j)`` carries two directed messages: index ``2*e`` for
``i -> j`` and ``2*e + 1`` for ``j -> i``.  All message-indexed arrays in
the package follow this ordering.

The joint distribution of an :class:`IsingModel` over ``x in {-1, +1}^N`` is

    p(x) ∝ exp(sum_{(i,j)} J_ij x_i x_j + sum_i theta_i x_i).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np


class InvalidArgument(ValueError):
    """Raised when a constructor or operation receives inconsistent input."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with a fixed directed-edge ordering."""

    node_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        object.__setattr__(self, "edges", edges)
        seen = set()
        for i, j in edges:
            if i == j:
                raise InvalidArgument(f"self-loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise InvalidArgument(f"edge ({i}, {j}) out of range")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InvalidArgument(f"duplicate edge {key}")
            seen.add(key)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def message_count(self) -> int:
        return 2 * len(self.edges)

    @cached_property
    def src(self) -> np.ndarray:
        """Sender node of every directed edge."""
        out = np.empty(self.message_count, dtype=np.intp)
        for e, (i, j) in enumerate(self.edges):
            out[2 * e], out[2 * e + 1] = i, j
        return out

    @cached_property
    def dst(self) -> np.ndarray:
        """Receiver node of every directed edge."""
        out = np.empty(self.message_count, dtype=np.intp)
        for e, (i, j) in enumerate(self.edges):
            out[2 * e], out[2 * e + 1] = j, i
        return out

    @cached_property
    def reverse(self) -> np.ndarray:
        return np.arange(self.message_count) ^ 1

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(a) for a in adj)

    @cached_property
    def incoming(self) -> tuple[tuple[int, ...], ...]:
        """Directed-edge indices that point into each node."""
        inc: list[list[int]] = [[] for _ in range(self.node_count)]
        for m, j in enumerate(self.dst):
            inc[j].append(m)
        return tuple(tuple(a) for a in inc)

    @cached_property
    def outgoing(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.node_count)]
        for m, i in enumerate(self.src):
            out[i].append(m)
        return tuple(tuple(a) for a in out)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors], dtype=np.intp)

    @cached_property
    def in_matrix(self) -> np.ndarray:
        """(N, 2|E|) 0/1 matrix summing incoming messages per node."""
        A = np.zeros((self.node_count, self.message_count))
        A[self.dst, np.arange(self.message_count)] = 1.0
        return A

    def directed_index(self, i: int, j: int) -> int:
        """Index of the message ``i -> j``."""
        try:
            return self._directed_lookup[(i, j)]
        except KeyError:
            raise InvalidArgument(f"({i}, {j}) is not an edge") from None

    @cached_property
    def _directed_lookup(self) -> dict[tuple[int, int], int]:
        return {(int(self.src[m]), int(self.dst[m])): m for m in range(self.message_count)}

    def edge_index(self, i: int, j: int) -> int:
        return self.directed_index(i, j) // 2

    def is_connected(self) -> bool:
        return len(_reachable(self, 0)) == self.node_count

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        g.add_edges_from(self.edges)
        return g


def _reachable(graph: Graph, start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


@dataclass(frozen=True)
class IsingModel:
    """Couplings per edge (ordered as ``graph.edges``) and fields per node."""

    graph: Graph
    couplings: np.ndarray
    fields: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.couplings, dtype=float).reshape(-1)
        theta = np.asarray(self.fields, dtype=float).reshape(-1)
        if J.shape[0] != self.graph.edge_count:
            raise InvalidArgument(
                f"expected {self.graph.edge_count} couplings, got {J.shape[0]}"
            )
        if theta.shape[0] != self.graph.node_count:
            raise InvalidArgument(
                f"expected {self.graph.node_count} fields, got {theta.shape[0]}"
            )
        J.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "couplings", J)
        object.__setattr__(self, "fields", theta)

    @property
    def N(self) -> int:
        return self.graph.node_count

    @property
    def is_attractive(self) -> bool:
        return bool(np.all(self.couplings > 0))

    @cached_property
    def message_couplings(self) -> np.ndarray:
        """Coupling of the edge carrying each directed message."""
        return np.repeat(self.couplings, 2)

    def energy(self, x: np.ndarray) -> np.ndarray:
        """E(x) = -sum J x_i x_j - sum theta x_i for states of shape (..., N)."""
        x = np.asarray(x, dtype=float)
        e = np.asarray(self.graph.edges, dtype=np.intp).reshape(-1, 2)
        pair = (x[..., e[:, 0]] * x[..., e[:, 1]]) @ self.couplings
        return -pair - x @ self.fields

    def to_json(self) -> dict:
        return {
            "nodes": self.N,
            "edges": [list(e) for e in self.graph.edges],
            "J": [float(v) for v in self.couplings],
            "theta": [float(v) for v in self.fields],
        }

    @classmethod
    def from_json(cls, data: dict) -> "IsingModel":
        try:
            graph = Graph(int(data["nodes"]), tuple(tuple(e) for e in data["edges"]))
            return cls(graph, np.asarray(data["J"], float), np.asarray(data["theta"], float))
        except KeyError as exc:
            raise InvalidArgument(f"model JSON missing key {exc}") from None

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "IsingModel":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class PatchLayout:
    """Assignment of nodes to patches and a field sign per patch."""

    patch_assignment: tuple[int, ...]
    patch_sign: dict = field(default_factory=dict)

    @property
    def patches(self) -> list[int]:
        return sorted(set(self.patch_assignment))

    def members(self, patch: int) -> list[int]:
        return [i for i, p in enumerate(self.patch_assignment) if p == patch]

    def validate(self, graph: Graph) -> None:
        if len(self.patch_assignment) != graph.node_count:
            raise InvalidArgument("layout does not cover every node")
        for p in self.patches:
            if self.patch_sign.get(p) not in (1, -1):
                raise InvalidArgument(f"patch {p} needs sign +1 or -1")
            nodes = set(self.members(p))
            sub = Graph(
                graph.node_count,
                tuple(e for e in graph.edges if e[0] in nodes and e[1] in nodes),
            )
            start = next(iter(nodes))
            if not nodes <= _reachable(sub, start):
                raise InvalidArgument(f"patch {p} is not connected")


# -- constructors -------------------------------------------------------------


def build_grid(rows: int, cols: int, periodic: bool = False) -> Graph:
    """Square lattice with row-major node numbering ``r * cols + c``.

    With ``periodic`` set, the last row/column wraps around to the first so
    every node has degree 4.  Wrapping a dimension of length 2 would create
    parallel edges, so periodic grids need both dimensions >= 3.
    """
    if rows < 2 or cols < 2:
        raise InvalidArgument("grid dimensions must be >= 2")
    if periodic and (rows < 3 or cols < 3):
        raise InvalidArgument("periodic grids need dimensions >= 3")
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1))
            elif periodic:
                edges.append((r * cols, u))
            if r + 1 < rows:
                edges.append((u, u + cols))
            elif periodic:
                edges.append((c, u))
    return Graph(rows * cols, tuple(edges))


def build_complete(N: int) -> Graph:
    if N < 2:
        raise InvalidArgument("complete graph needs N >= 2")
    return Graph(N, tuple((i, j) for i in range(N) for j in range(i + 1, N)))


def build_chain(N: int) -> Graph:
    if N < 2:
        raise InvalidArgument("chain needs N >= 2")
    return Graph(N, tuple((i, i + 1) for i in range(N - 1)))


def build_random(N: int, avg_degree: float, seed: int) -> Graph:
    """Connected simple graph with ``round(avg_degree * N / 2)`` edges.

    A uniformly random spanning tree (random-walk/Aldous-Broder) is drawn
    first, then the remaining edges are chosen uniformly from the
    non-edges.
    """
    n_edges = int(round(avg_degree * N / 2))
    if N < 2 or n_edges < N - 1 or n_edges > N * (N - 1) // 2:
        raise InvalidArgument(
            f"cannot build a connected simple graph with N={N}, |E|={n_edges}"
        )
    rng = np.random.default_rng(seed)
    visited = {0}
    current = 0
    tree = []
    while len(visited) < N:
        nxt = int(rng.integers(N - 1))
        nxt += nxt >= current
        if nxt not in visited:
            visited.add(nxt)
            tree.append((min(current, nxt), max(current, nxt)))
        current = nxt
    present = set(tree)
    rest = [(i, j) for i in range(N) for j in range(i + 1, N) if (i, j) not in present]
    extra_idx = rng.choice(len(rest), size=n_edges - len(tree), replace=False)
    edges = sorted(present | {rest[k] for k in extra_idx})
    return Graph(N, tuple(edges))


def build_random_tree(N: int, seed: int) -> Graph:
    return build_random(N, 2 * (N - 1) / N, seed)


CouplingSpec = Union[float, Sequence[float], tuple]


def _resolve(spec, size: int, rng: np.random.Generator, what: str) -> np.ndarray:
    """Turn a value spec into an array.

    Accepted forms: a scalar (uniform value), a sequence of length ``size``
    (explicit), or ``("uniform", lo, hi)`` for i.i.d. U(lo, hi) draws.
    """
    if isinstance(spec, tuple) and len(spec) == 3 and spec[0] == "uniform":
        _, lo, hi = spec
        return rng.uniform(lo, hi, size)
    if np.isscalar(spec):
        return np.full(size, float(spec))
    arr = np.asarray(spec, dtype=float).reshape(-1)
    if arr.shape[0] != size:
        raise InvalidArgument(f"{what}: expected {size} values, got {arr.shape[0]}")
    return arr


def make_ising(graph: Graph, coupling_spec, field_spec, seed: int = 0) -> IsingModel:
    """Populate couplings and fields; couplings are drawn before fields."""
    rng = np.random.default_rng(seed)
    J = _resolve(coupling_spec, graph.edge_count, rng, "couplings")
    theta = _resolve(field_spec, graph.node_count, rng, "fields")
    return IsingModel(graph, J, theta)


def halves_layout(rows: int, cols: int) -> PatchLayout:
    """Left half of the columns gets sign +1, right half -1."""
    assign = tuple(0 if c < cols // 2 else 1 for r in range(rows) for c in range(cols))
    return PatchLayout(assign, {0: 1, 1: -1})


def make_patch_model(
    rows: int, cols: int, layout: PatchLayout, J: float, theta: float
) -> IsingModel:
    if J <= 0 or theta <= 0:
        raise InvalidArgument("patch models need J > 0 and theta > 0")
    graph = build_grid(rows, cols)
    layout.validate(graph)
    fields = np.array([layout.patch_sign[p] * theta for p in layout.patch_assignment])
    return IsingModel(graph, np.full(graph.edge_count, float(J)), fields)


def scale_couplings(model: IsingModel, zeta: float) -> IsingModel:
    """Model with couplings zeta * J (pairwise potentials raised to zeta)."""
    if not 0.0 <= zeta <= 1.0:
        raise InvalidArgument(f"scaling {zeta} outside [0, 1]")
    return IsingModel(model.graph, zeta * model.couplings, model.fields)


def is_bipartite(graph: Graph) -> bool:
    color = [-1] * graph.node_count
    for s in range(graph.node_count):
        if color[s] >= 0:
            continue
        color[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in graph.neighbors[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    queue.append(v)
                elif color[v] == color[u]:
                    return False
    return True
