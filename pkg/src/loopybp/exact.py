"""Exact and sampling reference solutions for Ising models.

Marginal tables use the state index convention ``0 <-> +1, 1 <-> -1`` so
that ``pairwise[e][a, b]`` is ``P(x_i = s_a, x_j = s_b)`` for edge
``e = (i, j)`` with ``s = (+1, -1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import IsingModel, InvalidArgument, build_grid

SPINS = np.array([1.0, -1.0])
MAX_BRUTE_FORCE_NODES = 22


class SizeLimitError(InvalidArgument):
    pass


@dataclass(frozen=True)
class ExactSummary:
    singleton: np.ndarray  # P(x_i = +1), shape (N,)
    pairwise: np.ndarray  # shape (|E|, 2, 2)
    log_partition: float

    @property
    def means(self) -> np.ndarray:
        return 2.0 * self.singleton - 1.0


def _spin_block(start: int, count: int, N: int) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(N, dtype=np.int64)) & 1
    return 1.0 - 2.0 * bits  # bit 0 -> +1


def brute_force(model: IsingModel, block: int = 1 << 16) -> ExactSummary:
    """Sum over all 2^N states, chunked, in log-sum-exp arithmetic."""
    N = model.N
    if N > MAX_BRUTE_FORCE_NODES:
        raise SizeLimitError(f"brute force limited to N <= {MAX_BRUTE_FORCE_NODES}")
    total = 1 << N
    edges = np.asarray(model.graph.edges, dtype=np.intp).reshape(-1, 2)

    chunk_lse = []
    for start in range(0, total, block):
        x = _spin_block(start, min(block, total - start), N)
        chunk_lse.append(logsumexp(-model.energy(x)))
    logZ = float(logsumexp(chunk_lse))

    single = np.zeros(N)
    pair = np.zeros((len(edges), 2, 2))
    for start in range(0, total, block):
        x = _spin_block(start, min(block, total - start), N)
        w = np.exp(-model.energy(x) - logZ)
        plus = x > 0
        single += w @ plus
        xi, xj = plus[:, edges[:, 0]], plus[:, edges[:, 1]]
        for a, ia in enumerate((xi, ~xi)):
            for b, jb in enumerate((xj, ~xj)):
                pair[:, a, b] += w @ (ia & jb)
    return ExactSummary(single, pair, logZ)


def _check_grid(model: IsingModel, rows: int, cols: int) -> dict:
    ref = build_grid(rows, cols)
    if model.N != rows * cols or model.graph.edge_count != ref.edge_count:
        raise InvalidArgument("model graph is not a non-periodic rows x cols grid")
    lookup = {}
    for e, (i, j) in enumerate(model.graph.edges):
        lookup[(min(i, j), max(i, j))] = e
    for i, j in ref.edges:
        if (i, j) not in lookup:
            raise InvalidArgument("model graph is not a non-periodic rows x cols grid")
    return lookup


def transfer_matrix_grid(model: IsingModel, rows: int, cols: int) -> ExactSummary:
    """Exact summary of a grid model by column-to-column elimination.

    The grid is transposed internally when ``rows > cols`` so the column
    state space is ``2^min(rows, cols)``.
    """
    lookup = _check_grid(model, rows, cols)
    if min(rows, cols) > 16:
        raise SizeLimitError("transfer matrix limited to 16 rows")

    # node(r, c) in the working orientation where columns have height h
    if rows <= cols:
        h, w = rows, cols
        node = lambda r, c: r * cols + c  # noqa: E731
    else:
        h, w = cols, rows
        node = lambda r, c: c * cols + r  # noqa: E731

    def coupling(u, v):
        return model.couplings[lookup[(min(u, v), max(u, v))]]

    S = 1 << h
    states = _spin_block(0, S, h)  # (S, h) spins of one column
    theta = model.fields

    col_logw = np.empty((w, S))
    for c in range(w):
        lw = states @ np.array([theta[node(r, c)] for r in range(h)])
        for r in range(h - 1):
            lw += coupling(node(r, c), node(r + 1, c)) * states[:, r] * states[:, r + 1]
        col_logw[c] = lw
    link = np.empty((max(w - 1, 0), S, S))
    for c in range(w - 1):
        Jh = np.array([coupling(node(r, c), node(r, c + 1)) for r in range(h)])
        link[c] = (states * Jh) @ states.T

    fwd = np.empty((w, S))  # includes the column's own weight
    fwd[0] = col_logw[0]
    for c in range(1, w):
        fwd[c] = col_logw[c] + logsumexp(fwd[c - 1][:, None] + link[c - 1], axis=0)
    bwd = np.zeros((w, S))  # excludes the column's own weight
    for c in range(w - 2, -1, -1):
        bwd[c] = logsumexp(link[c] + (col_logw[c + 1] + bwd[c + 1])[None, :], axis=1)
    logZ = float(logsumexp(fwd[-1]))

    single = np.zeros(model.N)
    pair = np.zeros((model.graph.edge_count, 2, 2))
    plus = states > 0
    masks = (plus, ~plus)

    def put_pair(u, v, table):
        e = lookup[(min(u, v), max(u, v))]
        # table is indexed [state of u, state of v]
        pair[e] = table if model.graph.edges[e][0] == u else table.T

    for c in range(w):
        p = np.exp(fwd[c] + bwd[c] - logZ)
        p /= p.sum()
        for r in range(h):
            single[node(r, c)] = p @ plus[:, r]
        for r in range(h - 1):
            t = np.array([[p @ (ma[:, r] & mb[:, r + 1]) for mb in masks] for ma in masks])
            put_pair(node(r, c), node(r + 1, c), t)
    for c in range(w - 1):
        joint = fwd[c][:, None] + link[c] + (col_logw[c + 1] + bwd[c + 1])[None, :]
        joint = np.exp(joint - logZ)
        joint /= joint.sum()
        for r in range(h):
            t = np.array(
                [[ma[:, r] @ joint @ mb[:, r] for mb in masks] for ma in masks], dtype=float
            )
            put_pair(node(r, c), node(r, c + 1), t)
    return ExactSummary(single, pair, logZ)


def gibbs_sample(
    model: IsingModel, sweeps: int, burn_in: int, seed: int
) -> np.ndarray:
    """Heat-bath Gibbs estimate of P(x_i = +1).

    Nodes are updated in index order; after each sweep past ``burn_in``
    the current state is counted once.
    """
    if not sweeps > burn_in >= 0:
        raise InvalidArgument("need sweeps > burn_in >= 0")
    rng = np.random.default_rng(seed)
    N = model.N
    nbr_list = [list(model.graph.neighbors[i]) for i in range(N)]
    J_list = [
        [float(model.couplings[model.graph.edge_index(i, j)]) for j in nbr_list[i]]
        for i in range(N)
    ]
    theta = model.fields.tolist()
    x = np.where(rng.random(N) < 0.5, 1.0, -1.0)
    counts = np.zeros(N)
    xs = x.tolist()
    for sweep in range(sweeps):
        u = rng.random(N).tolist()
        for i in range(N):
            h = theta[i]
            for j, Jij in zip(nbr_list[i], J_list[i]):
                h += Jij * xs[j]
            # P(+1) = 1 / (1 + exp(-2h)); clamp the exponent against overflow
            xs[i] = 1.0 if u[i] * (1.0 + math.exp(min(-2.0 * h, 700.0))) < 1.0 else -1.0
        if sweep >= burn_in:
            counts += np.asarray(xs) > 0
    return counts / (sweeps - burn_in)
