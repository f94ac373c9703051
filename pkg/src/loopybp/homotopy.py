"""Predictor-corrector homotopy continuation and the 2-D mixed volume.

Used at example scale only: a start system ``Q`` with known roots is
deformed into a target ``F`` along ``H(x, t) = (1 - t) Q(x) + gamma t F(x)``.
The random complex ``gamma`` keeps paths away from singularities with
probability one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .model import InvalidArgument


class TrackingFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class PolynomialSystem:
    """Square polynomial system; each polynomial maps exponent tuples to coefficients."""

    polynomials: tuple

    def __init__(self, polynomials: Sequence[Mapping[tuple, complex]]):
        polys = tuple({tuple(k): complex(v) for k, v in p.items()} for p in polynomials)
        n = len(polys)
        for p in polys:
            if any(len(k) != n for k in p):
                raise InvalidArgument("exponent tuples must have one entry per variable")
        object.__setattr__(self, "polynomials", polys)

    @property
    def size(self) -> int:
        return len(self.polynomials)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        return np.array(
            [sum(c * np.prod(x ** np.array(k)) for k, c in p.items()) for p in self.polynomials]
        )

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        n = self.size
        out = np.zeros((n, n), dtype=complex)
        for r, p in enumerate(self.polynomials):
            for k, c in p.items():
                k = np.array(k)
                for v in range(n):
                    if k[v] == 0:
                        continue
                    kk = k.copy()
                    kk[v] -= 1
                    out[r, v] += c * k[v] * np.prod(x**kk)
        return out

    @classmethod
    def univariate(cls, coefficients: Sequence[complex]) -> "PolynomialSystem":
        """From coefficients in descending powers, like numpy.polyval."""
        deg = len(coefficients) - 1
        return cls([{(deg - i,): c for i, c in enumerate(coefficients)}])


@dataclass(frozen=True)
class TrackerConfig:
    initial_step: float = 0.05
    min_step: float = 1e-6
    max_step: float = 0.1
    grow_after: int = 3
    grow_factor: float = 1.5
    corrector_steps: int = 4
    corrector_tol: float = 1e-10
    divergence: float = 1e8
    endgame_tol: float = 1e-13


@dataclass
class PathResult:
    start: np.ndarray
    end: np.ndarray
    lost: bool
    steps: int


def random_gamma(seed: int) -> complex:
    phi = np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi)
    return complex(math.cos(phi), math.sin(phi))


def _newton(fun, jac, x, steps, tol):
    for _ in range(steps):
        try:
            dx = np.linalg.solve(jac(x), fun(x))
        except np.linalg.LinAlgError:
            return x, False
        x = x - dx
        if not np.all(np.isfinite(x)):
            return x, False
        if np.max(np.abs(dx)) < tol * max(1.0, np.max(np.abs(x))):
            return x, True
    return x, False


def _track_one(x0, Q, F, gamma, cfg: TrackerConfig) -> PathResult:
    def H(x, t):
        return (1.0 - t) * Q(x) + gamma * t * F(x)

    def Hx(x, t):
        return (1.0 - t) * Q.jacobian(x) + gamma * t * F.jacobian(x)

    def Ht(x):
        return gamma * F(x) - Q(x)

    x = np.asarray(x0, dtype=complex)
    t = 0.0
    step = cfg.initial_step
    streak = 0
    steps = 0
    while t < 1.0:
        dt = min(step, 1.0 - t)
        try:
            dxdt = -np.linalg.solve(Hx(x, t), Ht(x))
        except np.linalg.LinAlgError:
            return PathResult(x0, x, True, steps)
        guess = x + dt * dxdt
        t_new = t + dt
        corrected, ok = _newton(
            lambda y: H(y, t_new), lambda y: Hx(y, t_new), guess, cfg.corrector_steps, cfg.corrector_tol
        )
        steps += 1
        if ok:
            x, t = corrected, t_new
            if np.max(np.abs(x)) > cfg.divergence:
                return PathResult(x0, x, True, steps)
            streak += 1
            if streak >= cfg.grow_after:
                step = min(step * cfg.grow_factor, cfg.max_step)
                streak = 0
        else:
            streak = 0
            step *= 0.5
            if step < cfg.min_step:
                return PathResult(x0, x, True, steps)
    x, _ = _newton(F, F.jacobian, x, 10, cfg.endgame_tol)
    lost = not np.all(np.isfinite(x)) or np.max(np.abs(x)) > cfg.divergence
    return PathResult(x0, x, lost, steps)


def track_paths(
    start_values, start_system: PolynomialSystem, target_system: PolynomialSystem,
    gamma: complex, config: TrackerConfig = TrackerConfig(),
) -> list:
    """Track every start root; returns one :class:`PathResult` per path."""
    if start_system.size != target_system.size:
        raise InvalidArgument("start and target systems differ in variable count")
    results = []
    for x0 in start_values:
        x0 = np.atleast_1d(np.asarray(x0, dtype=complex))
        if np.max(np.abs(start_system(x0))) > 1e-10:
            raise InvalidArgument("start value does not solve the start system")
        results.append(_track_one(x0, start_system, target_system, gamma, config))
    return results


def track_path(start_values, start_system, target_system, gamma, config=TrackerConfig()):
    """Endpoints of all non-lost paths at t = 1.

    Raises:
        TrackingFailure: more than half of the paths were lost.
    """
    results = track_paths(start_values, start_system, target_system, gamma, config)
    lost = sum(r.lost for r in results)
    if lost * 2 > len(results):
        raise TrackingFailure(f"{lost} of {len(results)} paths lost")
    return [r.end for r in results if not r.lost]


# -- mixed volume -------------------------------------------------------------


def _area(points: np.ndarray) -> float:
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)  # in 2-D the "volume" is the area
    except QhullError:
        return 0.0  # collinear


def minkowski_sum(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    P = np.asarray(P)
    Q = np.asarray(Q)
    return (P[:, None, :] + Q[None, :, :]).reshape(-1, 2)


def mixed_volume_2d(Q1, Q2) -> int:
    """M(Q1, Q2) = V(Q1 + Q2) - V(Q1) - V(Q2) with V the Euclidean area."""
    Q1 = np.asarray(Q1, dtype=int).reshape(-1, 2)
    Q2 = np.asarray(Q2, dtype=int).reshape(-1, 2)
    if len(Q1) == 0 or len(Q2) == 0:
        raise InvalidArgument("supports must be nonempty")
    for Q in (Q1, Q2):
        if len(np.unique(Q, axis=0)) != len(Q):
            raise InvalidArgument("support contains duplicate exponents")
    mv = _area(minkowski_sum(Q1, Q2)) - _area(Q1) - _area(Q2)
    return int(round(mv))
