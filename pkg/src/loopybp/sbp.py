"""Self-guided belief propagation.

The couplings are switched on gradually, ``J -> zeta * J`` for
``zeta = 0 = zeta_1 < zeta_2 < ... = 1``.  At ``zeta = 0`` the model
factorizes and uniform messages are its exact fixed point; every later
model is solved by BP started from messages extrapolated along the path.
When BP stops converging the last fixed point on the path is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .bp import BPConfig, Pseudomarginals, _nu_to_pairs, run_bp
from .fixedpoints import FixedPoint, from_messages, make_fixed_point
from .model import IsingModel, InvalidArgument, scale_couplings

NU_CLIP = 14.0


@dataclass(frozen=True)
class SBPConfig:
    step: float = 0.1
    adaptive: bool = True
    threshold: float = 1e-3
    order: int = 4  # number of past fixed points used for extrapolation
    bp: BPConfig = BPConfig(max_iterations=1000, tolerance=1e-10, scheduler="random")
    retry: bool = True
    polish: bool = True

    def __post_init__(self):
        if not 0.0 < self.step <= 1.0:
            raise InvalidArgument("step must lie in (0, 1]")
        if not 1 <= self.order <= 4:
            raise InvalidArgument("extrapolation order must be 1..4 points")


@dataclass(frozen=True)
class PathEntry:
    zeta: float
    fixed_point: FixedPoint


@dataclass
class SBPOutcome:
    path: list
    completed: bool
    bp_iterations: int
    failed_zeta: Optional[float] = None

    @property
    def zeta(self) -> float:
        return self.path[-1].zeta

    @property
    def beliefs(self) -> Pseudomarginals:
        return self.path[-1].fixed_point.beliefs

    def to_json(self) -> list:
        return [
            {
                "zeta": e.zeta,
                "F_B": e.fixed_point.free_energy,
                "logZ_B": e.fixed_point.log_partition,
                "marginals": e.fixed_point.beliefs.singleton.tolist(),
            }
            for e in self.path
        ]


def adaptive_step(history: list, step_init: float, threshold: float = 1e-3) -> float:
    """Grow the step while recent fixed points barely move.

    ``history`` holds fixed-point message arrays (any shape), oldest first.
    The change between the latest entry and the ``l``-th previous one is
    the mean squared difference of the messages.
    """
    if not history:
        raise InvalidArgument("history must be nonempty")
    step = step_init
    latest = np.asarray(history[-1])
    l = 1
    while l < len(history):
        change = float(np.mean((latest - np.asarray(history[-1 - l])) ** 2))
        if change >= threshold:
            break
        l += 1
        step += step_init * l
    return step


def extrapolate_messages(zetas, nus, zeta_next: float, order: int = 4) -> np.ndarray:
    """Polynomial extrapolation of each nu-coordinate through the last points."""
    zetas = np.asarray(zetas, dtype=float)[-order:]
    nus = np.asarray(nus, dtype=float)[-order:]
    if len(zetas) == 0:
        raise InvalidArgument("history must be nonempty")
    if len(zetas) == 1:
        guess = nus[0].copy()
    else:
        guess = BarycentricInterpolator(zetas, nus)(zeta_next)
    return np.clip(guess, -NU_CLIP, NU_CLIP)


def _solve(model, zeta, nu0, config: SBPConfig):
    scaled = scale_couplings(model, zeta)
    out = run_bp(scaled, config.bp, _nu_to_pairs(nu0))
    if not out.converged:
        return None, out.iterations
    fp = from_messages(scaled, out.messages) if config.polish else None
    if fp is None:
        nu = 0.5 * (np.log(out.messages[:, 0]) - np.log(out.messages[:, 1]))
        fp = make_fixed_point(scaled, nu)
    return fp, out.iterations


def run_sbp(model: IsingModel, config: SBPConfig = SBPConfig()) -> SBPOutcome:
    M = model.graph.message_count
    start = make_fixed_point(scale_couplings(model, 0.0), np.zeros(M))
    path = [PathEntry(0.0, start)]
    iterations = 0
    retried = False
    while path[-1].zeta < 1.0:
        zetas = [e.zeta for e in path]
        nus = [e.fixed_point.nu for e in path]
        if config.adaptive:
            mus = [e.fixed_point.messages[:, 0] for e in path]
            step = adaptive_step(mus, config.step, config.threshold)
        else:
            step = config.step
        zeta = min(zetas[-1] + step, 1.0)
        fp, used = _solve(model, zeta, extrapolate_messages(zetas, nus, zeta, config.order), config)
        iterations += used
        if fp is None and config.retry and not retried:
            retried = True
            zeta = zetas[-1] + 0.5 * (zeta - zetas[-1])
            fp, used = _solve(model, zeta, extrapolate_messages(zetas, nus, zeta, config.order), config)
            iterations += used
        if fp is None:
            return SBPOutcome(path, False, iterations, failed_zeta=zeta)
        path.append(PathEntry(zeta, fp))
    return SBPOutcome(path, True, iterations)
