"""Belief propagation on binary pairwise models.

Messages are stored as an array of shape ``(2|E|, 2)``: row ``m`` holds
``(mu_m(+1), mu_m(-1))`` for directed edge ``m`` (see :mod:`loopybp.model`
for the ordering).  The reparameterized form keeps one real per directed
edge, ``nu = arctanh(mu(+1) - mu(-1))``, and the update becomes
``tanh(nu') = tanh(J) tanh(h)`` with the cavity field ``h``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp, xlogy

from .model import Graph, IsingModel, InvalidArgument

SCHEDULERS = ("synchronous", "round_robin", "random", "rbp", "wdbp", "nibp")
REPARAM_CLIP = 1.0 - 1e-12
NOISE_CLIP = 1e-12
OSCILLATION_ATOL = 1e-9


@dataclass(frozen=True)
class BPConfig:
    max_iterations: int = 1000
    tolerance: float = 1e-8
    damping: float = 0.0
    scheduler: str = "synchronous"
    seed: int = 0
    noise_sigma: float = 0.1
    oscillation_window: int = 10

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise InvalidArgument(f"damping {self.damping} outside [0, 1)")
        if self.tolerance <= 0:
            raise InvalidArgument("tolerance must be positive")
        if self.scheduler not in SCHEDULERS:
            raise InvalidArgument(f"unknown scheduler {self.scheduler!r}")
        if self.max_iterations < 1:
            raise InvalidArgument("max_iterations must be >= 1")


@dataclass(frozen=True)
class Pseudomarginals:
    """Beliefs and the Bethe quantities evaluated on them.

    ``pairwise[e, a, b]`` uses the index convention ``0 <-> +1, 1 <-> -1``
    with ``a`` referring to the first node of ``graph.edges[e]``.
    """

    singleton: np.ndarray
    pairwise: np.ndarray
    energy: float
    entropy: float
    free_energy: float
    log_partition: float

    @property
    def means(self) -> np.ndarray:
        return 2.0 * self.singleton - 1.0

    @property
    def correlations(self) -> np.ndarray:
        """E[x_i x_j] under each pairwise belief."""
        p = self.pairwise
        return p[:, 0, 0] + p[:, 1, 1] - p[:, 0, 1] - p[:, 1, 0]


@dataclass
class BPOutcome:
    messages: np.ndarray
    converged: bool
    iterations: int
    updates: int
    residuals: list = field(default_factory=list)
    beliefs: Optional[Pseudomarginals] = None

    def to_json(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "updates": self.updates,
            "final_residual": self.residuals[-1] if self.residuals else None,
            "marginals": self.beliefs.singleton.tolist() if self.beliefs else None,
            "F_B": self.beliefs.free_energy if self.beliefs else None,
            "logZ_B": self.beliefs.log_partition if self.beliefs else None,
        }


# -- messages -----------------------------------------------------------------


def init_messages(graph: Graph, mode: str = "uniform", seed: Optional[int] = None) -> np.ndarray:
    M = graph.message_count
    if mode == "uniform":
        return np.full((M, 2), 0.5)
    if mode == "random":
        p = np.random.default_rng(seed).uniform(0.01, 0.99, M)
        return np.column_stack([p, 1.0 - p])
    raise InvalidArgument(f"unknown init mode {mode!r}")


def messages_from_pairs(p_plus: np.ndarray) -> np.ndarray:
    p = np.asarray(p_plus, dtype=float)
    return np.column_stack([p, 1.0 - p])


def update_message(model: IsingModel, messages: np.ndarray, m: int) -> np.ndarray:
    """Sum-product update of the message ``i -> j`` with index ``m``.

    Evaluated in the two-component form, in log space, and normalized.
    """
    g = model.graph
    i = g.src[m]
    J = model.message_couplings[m]
    s = np.array([1.0, -1.0])
    log_in = model.fields[i] * s
    for k in g.incoming[i]:
        if k != m ^ 1:
            log_in = log_in + np.log(messages[k])
    # out[b] = log sum_a exp(J s_a s_b + log_in[a])
    out = logsumexp(J * np.outer(s, s) + log_in[:, None], axis=0)
    out -= logsumexp(out)
    return np.exp(out)


def to_reparam(messages: np.ndarray) -> np.ndarray:
    d = np.clip(messages[:, 0] - messages[:, 1], -REPARAM_CLIP, REPARAM_CLIP)
    return np.arctanh(d)


def from_reparam(nu: np.ndarray) -> np.ndarray:
    t = np.tanh(np.asarray(nu, dtype=float))
    return np.column_stack([(1.0 + t) / 2.0, (1.0 - t) / 2.0])


def _nu_to_pairs(nu: np.ndarray) -> np.ndarray:
    # Same map as from_reparam, written so neither component loses precision.
    return np.column_stack([expit(2.0 * nu), expit(-2.0 * nu)])


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def _scalar_log_cosh(x: float) -> float:
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


def cavity_field(model: IsingModel, nu: np.ndarray, m: int) -> float:
    g = model.graph
    i = g.src[m]
    return float(model.fields[i] + sum(nu[k] for k in g.incoming[i] if k != m ^ 1))


def reparam_update(model: IsingModel, nu: np.ndarray, m: int) -> float:
    """nu' = arctanh(tanh(J) tanh(h)), evaluated as a log-cosh difference.

    ``arctanh(tanh a tanh b) = (log cosh(a + b) - log cosh(a - b)) / 2``
    avoids the arctanh singularity for strong couplings.
    """
    h = cavity_field(model, nu, m)
    J = model.message_couplings[m]
    return 0.5 * (_scalar_log_cosh(h + J) - _scalar_log_cosh(h - J))


def cavity_fields(model: IsingModel, nu: np.ndarray) -> np.ndarray:
    """All cavity fields; ``nu`` may carry leading batch dimensions."""
    g = model.graph
    node_sum = nu @ g.in_matrix.T
    return model.fields[g.src] + node_sum[..., g.src] - nu[..., g.reverse]


def reparam_map(model: IsingModel, nu: np.ndarray) -> np.ndarray:
    """One synchronous BP step in nu-space (batched over leading axes)."""
    h = cavity_fields(model, nu)
    J = model.message_couplings
    return 0.5 * (_log_cosh(h + J) - _log_cosh(h - J))


def bp_map(model: IsingModel, messages: np.ndarray) -> np.ndarray:
    """Synchronous update of every message from the same input set."""
    nu = 0.5 * (np.log(messages[:, 0]) - np.log(messages[:, 1]))
    return _nu_to_pairs(reparam_map(model, nu))


# -- pseudomarginals ----------------------------------------------------------


def pseudomarginals(model: IsingModel, messages: np.ndarray) -> Pseudomarginals:
    g = model.graph
    s = np.array([1.0, -1.0])
    logmu = np.log(messages)
    node_log = g.in_matrix @ logmu  # (N, 2)
    theta = model.fields

    log_single = theta[:, None] * s[None, :] + node_log
    log_single -= logsumexp(log_single, axis=1, keepdims=True)
    single = np.exp(log_single)

    E = g.edge_count
    if E:
        ii = g.src[0::2]
        jj = g.dst[0::2]
        cav_i = theta[ii, None] * s + node_log[ii] - logmu[1::2]
        cav_j = theta[jj, None] * s + node_log[jj] - logmu[0::2]
        log_pair = (
            model.couplings[:, None, None] * np.outer(s, s)[None]
            + cav_i[:, :, None]
            + cav_j[:, None, :]
        )
        log_pair -= logsumexp(log_pair, axis=(1, 2), keepdims=True)
        pair = np.exp(log_pair)
    else:
        pair = np.zeros((0, 2, 2))

    energy = -float(np.sum(single * (theta[:, None] * s)))
    energy -= float(np.sum(pair * (model.couplings[:, None, None] * np.outer(s, s))))
    entropy = -float(np.sum(xlogy(pair, pair)))
    entropy += float(np.sum((g.degrees - 1) * np.sum(xlogy(single, single), axis=1)))
    free = energy - entropy
    return Pseudomarginals(single[:, 0].copy(), pair, energy, entropy, free, -free)


# -- schedulers ---------------------------------------------------------------


class _Engine:
    """Mutable message state shared by the asynchronous schedulers."""

    def __init__(self, model: IsingModel, messages: np.ndarray, damping: float):
        g = model.graph
        self.M = g.message_count
        self.damping = damping
        self.p = messages[:, 0].astype(float).tolist()
        self.q = messages[:, 1].astype(float).tolist()
        self.nu = [0.5 * (math.log(a) - math.log(b)) for a, b in zip(self.p, self.q)]
        self.theta_src = [float(model.fields[i]) for i in g.src]
        self.J = model.message_couplings.tolist()
        self.cavity_inputs = [
            [k for k in g.incoming[g.src[m]] if k != m ^ 1] for m in range(self.M)
        ]
        # messages whose lookahead depends on message m
        self.dependents = [
            [k for k in g.outgoing[g.dst[m]] if k != m ^ 1] for m in range(self.M)
        ]
        self.look_p = [0.0] * self.M
        self.look_q = [0.0] * self.M
        self.residual = np.zeros(self.M)

    def lookahead(self, m: int) -> None:
        nu = self.nu
        h = self.theta_src[m]
        for k in self.cavity_inputs[m]:
            h += nu[k]
        J = self.J[m]
        new = 0.5 * (_scalar_log_cosh(h + J) - _scalar_log_cosh(h - J))
        e = math.exp(-2.0 * abs(new))
        big, small = 1.0 / (1.0 + e), e / (1.0 + e)
        p, q = (big, small) if new >= 0 else (small, big)
        self.look_p[m], self.look_q[m] = p, q
        self.residual[m] = max(abs(p - self.p[m]), abs(q - self.q[m]))

    def refresh_all(self) -> None:
        for m in range(self.M):
            self.lookahead(m)

    def apply(self, m: int, p: float, q: float) -> float:
        """Write a (damped) new value for message m; returns the change."""
        eps = self.damping
        if eps:
            p = (1.0 - eps) * p + eps * self.p[m]
            q = (1.0 - eps) * q + eps * self.q[m]
        change = max(abs(p - self.p[m]), abs(q - self.q[m]))
        self.p[m], self.q[m] = p, q
        self.nu[m] = 0.5 * (math.log(p) - math.log(q))
        return change

    def messages(self) -> np.ndarray:
        return np.column_stack([self.p, self.q])


class RoundRobin:
    """Fixed order m = n mod 2|E|."""

    def __init__(self, M: int, rng=None):
        self.M = M
        self.n = 0

    def order(self):
        return range(self.M)

    def next(self, engine=None) -> int:
        m = self.n % self.M
        self.n += 1
        return m


class RandomOrder(RoundRobin):
    """A fresh random permutation of all messages for every pass."""

    def __init__(self, M: int, rng):
        super().__init__(M)
        self.rng = rng
        self._perm = None

    def order(self):
        return self.rng.permutation(self.M).tolist()

    def next(self, engine=None) -> int:
        if self.n % self.M == 0:
            self._perm = self.order()
        m = self._perm[self.n % self.M]
        self.n += 1
        return m


class Residual:
    """Pick the message with the largest lookahead residual (lowest index on ties)."""

    def __init__(self, M: int, rng=None):
        self.M = M

    def next(self, engine: _Engine) -> int:
        return int(np.argmax(engine.residual))

    def value(self, engine: _Engine, m: int) -> tuple[float, float]:
        return engine.look_p[m], engine.look_q[m]


class WeightDecay(Residual):
    """Residual divided by the number of times the message was scheduled."""

    def __init__(self, M: int, rng=None):
        super().__init__(M)
        self.counts = np.ones(M)

    def next(self, engine: _Engine) -> int:
        m = int(np.argmax(engine.residual / self.counts))
        self.counts[m] += 1
        return m


class NoiseInjection(Residual):
    """Residual scheduling plus Gaussian noise on oscillating messages."""

    def __init__(self, M: int, rng, sigma: float = 0.1, window: int = 10):
        super().__init__(M)
        self.rng = rng
        self.sigma = sigma
        self.history = [deque(maxlen=window) for _ in range(M)]
        self.injections = 0

    def value(self, engine: _Engine, m: int) -> tuple[float, float]:
        p = engine.look_p[m]
        q = engine.look_q[m]
        hist = self.history[m]
        if any(abs(p - old) < OSCILLATION_ATOL for old in hist):
            p = p + self.sigma * float(self.rng.standard_normal())
            p = min(max(p, NOISE_CLIP), 1.0 - NOISE_CLIP)
            q = 1.0 - p
            self.injections += 1
        hist.append(p)
        return p, q


def make_scheduler(config: BPConfig, M: int, rng):
    name = config.scheduler
    if name == "round_robin":
        return RoundRobin(M, rng)
    if name == "random":
        return RandomOrder(M, rng)
    if name == "rbp":
        return Residual(M, rng)
    if name == "wdbp":
        return WeightDecay(M, rng)
    if name == "nibp":
        return NoiseInjection(M, rng, config.noise_sigma, config.oscillation_window)
    raise InvalidArgument(f"{name!r} is not an asynchronous scheduler")


# -- drivers ------------------------------------------------------------------


def _run_synchronous(model, config, messages):
    P = messages.copy()
    eps = config.damping
    history = []
    for it in range(1, config.max_iterations + 1):
        new = bp_map(model, P)
        residual = float(np.max(np.abs(new - P))) if len(P) else 0.0
        P = (1.0 - eps) * new + eps * P if eps else new
        history.append(residual)
        if residual < config.tolerance:
            return P, True, it, it * len(P), history
    return P, False, config.max_iterations, config.max_iterations * len(P), history


def _run_sweeps(model, config, messages, rng):
    engine = _Engine(model, messages, config.damping)
    sched = make_scheduler(config, engine.M, rng)
    history = []
    for it in range(1, config.max_iterations + 1):
        worst = 0.0
        for m in sched.order():
            engine.lookahead(m)
            worst = max(worst, engine.residual[m])
            engine.apply(m, engine.look_p[m], engine.look_q[m])
        history.append(float(worst))
        if worst < config.tolerance:
            return engine.messages(), True, it, it * engine.M, history
    n = config.max_iterations
    return engine.messages(), False, n, n * engine.M, history


def _run_adaptive(model, config, messages, rng):
    engine = _Engine(model, messages, config.damping)
    sched = make_scheduler(config, engine.M, rng)
    engine.refresh_all()
    budget = config.max_iterations * engine.M
    history = []
    for step in range(budget):
        worst = float(engine.residual.max())
        if step % engine.M == 0:
            history.append(worst)
        if worst < config.tolerance:
            iters = -(-step // engine.M)
            return engine.messages(), True, iters, step, history
        m = sched.next(engine)
        p, q = sched.value(engine, m)
        engine.apply(m, p, q)
        engine.lookahead(m)
        for k in engine.dependents[m]:
            engine.lookahead(k)
    worst = float(engine.residual.max())
    history.append(worst)
    converged = worst < config.tolerance
    return engine.messages(), converged, config.max_iterations, budget, history


def run_bp(
    model: IsingModel,
    config: BPConfig = BPConfig(),
    initial: Optional[np.ndarray] = None,
) -> BPOutcome:
    """Iterate BP until the largest message change in a full pass is below
    ``config.tolerance`` or the iteration budget is spent.

    For the adaptive schedulers an iteration is ``2|E|`` single-message
    updates and the convergence test is the largest lookahead residual over
    all messages.
    """
    if initial is None:
        initial = init_messages(model.graph)
    messages = np.asarray(initial, dtype=float)
    rng = np.random.default_rng(config.seed)
    if model.graph.message_count == 0:
        return BPOutcome(messages, True, 0, 0, [], pseudomarginals(model, messages))
    if config.scheduler == "synchronous":
        result = _run_synchronous(model, config, messages)
    elif config.scheduler in ("round_robin", "random"):
        result = _run_sweeps(model, config, messages, rng)
    else:
        result = _run_adaptive(model, config, messages, rng)
    P, converged, iters, updates, history = result
    return BPOutcome(P, converged, iters, updates, history, pseudomarginals(model, P))
