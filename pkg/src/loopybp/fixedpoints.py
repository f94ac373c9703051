"""BP fixed points as roots of the reparameterized residual system.

A message set is a fixed point iff ``F(nu) = nu - BP(nu)`` vanishes.  The
enumerator runs damped Newton from a deterministic set of starts plus
random ones and clusters the roots it reaches.  Exhaustiveness is only
statistical; :func:`fixed_point_count_parity` flags even counts, which
cannot be complete.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .bp import Pseudomarginals, from_reparam, pseudomarginals, reparam_map, _nu_to_pairs
from .model import IsingModel, InvalidArgument

REFINE_TOL = 1e-10
DEDUP_TOL = 1e-6
FD_STEP = 1e-6
BIASED_START = 3.0


@dataclass(frozen=True)
class FixedPoint:
    nu: np.ndarray
    messages: np.ndarray
    beliefs: Pseudomarginals
    residual: float
    stability: Optional[object] = None  # a StabilityRecord once attached

    @property
    def free_energy(self) -> float:
        return self.beliefs.free_energy

    @property
    def log_partition(self) -> float:
        return self.beliefs.log_partition

    def with_stability(self, record) -> "FixedPoint":
        return replace(self, stability=record)

    def to_json(self) -> dict:
        out = {
            "nu": self.nu.tolist(),
            "F_B": self.free_energy,
            "logZ_B": self.log_partition,
            "stability": None,
        }
        if self.stability is not None:
            out["stability"] = self.stability.to_json()
        return out


def residual_system(model: IsingModel, nu: np.ndarray) -> np.ndarray:
    """``nu - arctanh(tanh J tanh h)`` per directed edge; batched over leading axes."""
    nu = np.asarray(nu, dtype=float)
    return nu - reparam_map(model, nu)


def numeric_jacobian(model: IsingModel, nu: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of :func:`residual_system`, all columns at once."""
    M = nu.size
    offsets = step * np.eye(M)
    plus = residual_system(model, nu[None, :] + offsets)
    minus = residual_system(model, nu[None, :] - offsets)
    return ((plus - minus) / (2.0 * step)).T


def make_fixed_point(model: IsingModel, nu: np.ndarray) -> FixedPoint:
    nu = np.asarray(nu, dtype=float)
    res = float(np.max(np.abs(residual_system(model, nu)))) if nu.size else 0.0
    messages = _nu_to_pairs(nu)
    return FixedPoint(nu, messages, pseudomarginals(model, messages), res)


def newton_refine(
    model: IsingModel,
    guess: np.ndarray,
    tol: float = REFINE_TOL,
    max_steps: int = 50,
    max_halvings: int = 20,
) -> Optional[FixedPoint]:
    """Damped Newton on the residual system; returns ``None`` on failure."""
    x = np.array(guess, dtype=float)
    if x.size == 0:
        return make_fixed_point(model, x)
    if not np.all(np.isfinite(x)):
        return None
    r = residual_system(model, x)
    norm = np.max(np.abs(r))
    for _ in range(max_steps):
        if norm < tol:
            return make_fixed_point(model, x)
        try:
            delta = np.linalg.solve(numeric_jacobian(model, x), r)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(delta)):
            return None
        alpha = 1.0
        for _ in range(max_halvings + 1):
            trial = x - alpha * delta
            r_trial = residual_system(model, trial)
            n_trial = np.max(np.abs(r_trial))
            if n_trial < norm:
                break
            alpha *= 0.5
        else:
            return None
        x, r, norm = trial, r_trial, n_trial
    return make_fixed_point(model, x) if norm < tol else None


def starting_points(model: IsingModel, restarts: int, seed: int) -> np.ndarray:
    """Zero, all +3, all -3, then ``restarts - 3`` draws from U(-3, 3)."""
    M = model.graph.message_count
    fixed = [np.zeros(M), np.full(M, BIASED_START), np.full(M, -BIASED_START)]
    starts = fixed[: max(restarts, 1)]
    n_random = max(restarts - 3, 0)
    if n_random:
        rng = np.random.default_rng(seed)
        starts += list(rng.uniform(-BIASED_START, BIASED_START, size=(n_random, M)))
    return np.array(starts).reshape(-1, M)


def deduplicate(points: list, tol: float = DEDUP_TOL) -> list:
    """Greedy clustering in the infinity norm, keeping the first representative."""
    kept = []
    for fp in points:
        if all(np.max(np.abs(fp.nu - other.nu), initial=0.0) > tol for other in kept):
            kept.append(fp)
    return kept


def enumerate_fixed_points(
    model: IsingModel, restarts: int = 1000, seed: int = 0, tol: float = REFINE_TOL
) -> list:
    """Multi-start Newton enumeration, deduplicated and sorted by F_B."""
    if restarts < 1:
        raise InvalidArgument("restarts must be >= 1")
    found = []
    for start in starting_points(model, restarts, seed):
        fp = newton_refine(model, start, tol=tol)
        if fp is not None:
            found.append(fp)
    # deterministic reduce: order by F_B (ties by nu) before clustering
    found.sort(key=lambda fp: (round(fp.free_energy, 9), tuple(np.round(fp.nu, 6))))
    unique = deduplicate(found)
    unique.sort(key=lambda fp: fp.free_energy)
    return unique


def batched_bp(
    model: IsingModel,
    nu0: np.ndarray,
    max_iterations: int = 2000,
    tolerance: float = 1e-9,
    damping: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Damped synchronous BP on a batch of nu-space starts.

    Damping acts on the messages, as in :func:`loopybp.bp.run_bp`; it
    couples the two interleaved sub-iterations that undamped synchronous
    BP splits into on bipartite graphs.  Returns ``(nu, converged)``.
    """
    nu = np.array(nu0, dtype=float)
    p = _nu_to_pairs(nu.ravel())[:, 0].reshape(nu.shape)
    done = np.zeros(len(nu), dtype=bool)
    for _ in range(max_iterations):
        active = ~done
        if not active.any():
            break
        new_nu = reparam_map(model, nu[active])
        new_p = 0.5 * (1.0 + np.tanh(new_nu))
        change = np.max(np.abs(new_p - p[active]), axis=1)
        mixed_p = (1.0 - damping) * new_p + damping * p[active]
        p[active] = mixed_p
        nu[active] = np.arctanh(np.clip(2.0 * mixed_p - 1.0, -1 + 1e-15, 1 - 1e-15))
        idx = np.flatnonzero(active)
        done[idx[change < tolerance]] = True
    return nu, done


def enumerate_bp_fixed_points(
    model: IsingModel, restarts: int = 200, seed: int = 0, tol: float = REFINE_TOL, **bp_kwargs
) -> list:
    """Fixed points reached by BP from random initial messages.

    Each converged run is polished with Newton and the results are
    clustered.  Unstable fixed points (saddles of the Bethe free energy)
    are almost never reached this way.
    """
    if restarts < 1:
        raise InvalidArgument("restarts must be >= 1")
    M = model.graph.message_count
    rng = np.random.default_rng(seed)
    p0 = rng.uniform(0.01, 0.99, size=(restarts, M))
    nu, ok = batched_bp(model, np.arctanh(2.0 * p0 - 1.0), **bp_kwargs)
    found = [fp for fp in (newton_refine(model, x, tol=tol) for x in nu[ok]) if fp is not None]
    found.sort(key=lambda fp: (round(fp.free_energy, 9), tuple(np.round(fp.nu, 6))))
    unique = deduplicate(found)
    unique.sort(key=lambda fp: fp.free_energy)
    return unique


def fixed_point_count_parity(points) -> bool:
    """True iff the number of fixed points is odd, as a complete set must be."""
    return len(points) % 2 == 1


def fixed_points_to_json(points) -> list:
    return [fp.to_json() for fp in points]


def from_messages(model: IsingModel, messages: np.ndarray, tol: float = REFINE_TOL):
    """Polish a converged BP message set into a :class:`FixedPoint`."""
    nu = 0.5 * (np.log(messages[:, 0]) - np.log(messages[:, 1]))
    return newton_refine(model, nu, tol=tol)


__all__ = [
    "FixedPoint",
    "residual_system",
    "numeric_jacobian",
    "make_fixed_point",
    "newton_refine",
    "starting_points",
    "deduplicate",
    "enumerate_fixed_points",
    "fixed_point_count_parity",
    "batched_bp",
    "enumerate_bp_fixed_points",
    "fixed_points_to_json",
    "from_messages",
    "from_reparam",
]
