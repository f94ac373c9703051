"""Sum-product decoding of the (7,4) Hamming code over a binary symmetric channel."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .model import InvalidArgument

# 0-indexed variables of the three parity checks
HAMMING74_CHECKS = ((0, 1, 2, 4), (1, 2, 3, 5), (0, 2, 3, 6))
MAX_EXACT_VARIABLES = 20


@dataclass(frozen=True)
class Factor:
    variables: tuple
    table: np.ndarray  # shape (2,) * len(variables), indexed by bit values


@dataclass(frozen=True)
class FactorGraph:
    n_variables: int
    factors: tuple = field(default_factory=tuple)

    def adding(self, *factors: Factor) -> "FactorGraph":
        return FactorGraph(self.n_variables, self.factors + tuple(factors))

    @property
    def parity_factors(self) -> tuple:
        return tuple(f for f in self.factors if len(f.variables) > 1)

    def degree(self, v: int) -> int:
        return sum(v in f.variables for f in self.parity_factors)


def parity_table(k: int) -> np.ndarray:
    """1 where the bits sum to an even number, else 0."""
    bits = np.indices((2,) * k).sum(axis=0)
    return (bits % 2 == 0).astype(float)


def build_hamming74() -> FactorGraph:
    factors = tuple(Factor(c, parity_table(len(c))) for c in HAMMING74_CHECKS)
    return FactorGraph(7, factors)


def codewords(fg: FactorGraph) -> list:
    words = []
    for w in itertools.product((0, 1), repeat=fg.n_variables):
        if all(f.table[tuple(w[v] for v in f.variables)] > 0 for f in fg.parity_factors):
            words.append(w)
    return words


def attach_channel(fg: FactorGraph, eps: float, received) -> FactorGraph:
    """Add f_i(Y_i): 1 - eps on the received bit, eps on the other."""
    if not 0.0 < eps < 0.5:
        raise InvalidArgument("BSC error probability must lie in (0, 0.5)")
    y = [int(b) for b in received]
    if len(y) != fg.n_variables or any(b not in (0, 1) for b in y):
        raise InvalidArgument("received word must be binary with one bit per variable")
    channel = []
    for i, b in enumerate(y):
        t = np.full(2, eps)
        t[b] = 1.0 - eps
        channel.append(Factor((i,), t))
    return fg.adding(*channel)


@dataclass
class FactorBPOutcome:
    beliefs: np.ndarray  # (n_variables, 2): P(Y_i = 0), P(Y_i = 1)
    converged: bool
    sweeps: int


def _factor_to_variable(f: Factor, incoming: list, target: int) -> np.ndarray:
    t = f.table
    for axis, q in enumerate(incoming):
        if axis == target:
            continue
        shape = [1] * t.ndim
        shape[axis] = 2
        t = t * q.reshape(shape)
    others = tuple(a for a in range(t.ndim) if a != target)
    m = t.sum(axis=others)
    return m / m.sum()


def run_factor_bp(fg: FactorGraph, max_sweeps: int = 200, tol: float = 1e-12) -> FactorBPOutcome:
    """Flooding schedule: all factor-to-variable, then all variable-to-factor messages."""
    n = fg.n_variables
    links = [(a, v) for a, f in enumerate(fg.factors) for v in f.variables]
    to_var = {(a, v): np.full(2, 0.5) for a, v in links}
    to_fac = {(v, a): np.full(2, 0.5) for a, v in links}
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        new_to_var = {}
        for a, f in enumerate(fg.factors):
            incoming = [to_fac[(v, a)] for v in f.variables]
            for pos, v in enumerate(f.variables):
                new_to_var[(a, v)] = _factor_to_variable(f, incoming, pos)
        change = max((np.max(np.abs(new_to_var[k] - to_var[k])) for k in links), default=0.0)
        to_var = new_to_var
        for a, v in links:
            m = np.ones(2)
            for b, u in links:
                if u == v and b != a:
                    m = m * to_var[(b, u)]
            to_fac[(v, a)] = m / m.sum()  # normalization alpha_{iA}
        if change < tol:
            converged = True
            break
    beliefs = np.ones((n, 2))
    for a, v in links:
        beliefs[v] *= to_var[(a, v)]
    beliefs /= beliefs.sum(axis=1, keepdims=True)
    return FactorBPOutcome(beliefs, converged, sweeps)


def exact_posterior(fg: FactorGraph) -> np.ndarray:
    """Per-variable posteriors by enumerating all 2^n assignments."""
    n = fg.n_variables
    if n > MAX_EXACT_VARIABLES:
        raise InvalidArgument(f"exact posterior limited to {MAX_EXACT_VARIABLES} variables")
    words = np.array(list(itertools.product((0, 1), repeat=n)))
    weight = np.ones(len(words))
    for f in fg.factors:
        weight *= f.table[tuple(words[:, v] for v in f.variables)]
    post = np.stack([weight @ (words == 0), weight @ (words == 1)], axis=1)
    return post / post.sum(axis=1, keepdims=True)


def decode_beliefs(eps: float, received, decoder: str) -> np.ndarray:
    fg = attach_channel(build_hamming74(), eps, received)
    if decoder == "bp":
        return run_factor_bp(fg).beliefs
    if decoder == "exact":
        return exact_posterior(fg)
    raise InvalidArgument(f"unknown decoder {decoder!r}")


def single_flip_word(position: int) -> list:
    """All-zeros codeword with bit ``position`` (1-indexed) flipped."""
    if not 1 <= position <= 7:
        raise InvalidArgument("flip position must be in 1..7")
    y = [0] * 7
    y[position - 1] = 1
    return y


def is_corrected(position: int, eps: float, decoder: str) -> bool:
    b = decode_beliefs(eps, single_flip_word(position), decoder)
    return bool(b[position - 1, 0] > 0.5)


def correction_threshold(
    position: int, decoder: str, resolution: float = 1e-3, lo: float = 1e-3, hi: float = 0.499
) -> float:
    """Largest eps (to ``resolution``) at which a single flip at ``position`` is undone.

    Returns 0 when the flip is not corrected even at ``lo``.
    """
    if not is_corrected(position, lo, decoder):
        return 0.0
    if is_corrected(position, hi, decoder):
        return hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if is_corrected(position, mid, decoder):
            lo = mid
        else:
            hi = mid
    return lo


def threshold_rows(positions=range(1, 8), decoders=("bp", "exact"), epsilons=None) -> list:
    """Rows flip_position, epsilon, decoder, belief_at_flip, corrected."""
    if epsilons is None:
        epsilons = np.round(np.arange(0.01, 0.50, 0.01), 2)
    rows = []
    for pos in positions:
        y = single_flip_word(pos)
        for dec in decoders:
            for eps in epsilons:
                b = decode_beliefs(float(eps), y, dec)[pos - 1, 0]
                rows.append(
                    {
                        "flip_position": pos,
                        "epsilon": float(eps),
                        "decoder": dec,
                        "belief_at_flip": float(b),
                        "corrected": bool(b > 0.5),
                    }
                )
    return rows
