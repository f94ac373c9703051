"""Accuracy of BP fixed points, fixed-point combination, and patch-model analysis."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.special import logsumexp, softmax

from .bp import Pseudomarginals
from .fixedpoints import batched_bp, enumerate_bp_fixed_points, newton_refine
from .model import IsingModel, InvalidArgument, PatchLayout
from .stability import StabilityClass


class UndefinedMetric(InvalidArgument):
    pass


class EstimationError(RuntimeError):
    pass


def _singleton(x) -> np.ndarray:
    if hasattr(x, "singleton"):
        return np.asarray(x.singleton)
    if hasattr(x, "beliefs"):
        return np.asarray(x.beliefs.singleton)
    return np.asarray(x, dtype=float)


def marginal_mse(approx, exact) -> float:
    """(2/N) sum_i (P_i(+1) - P~_i(+1))^2."""
    a, e = _singleton(approx), _singleton(exact)
    if a.shape != e.shape:
        raise InvalidArgument("marginal arrays differ in length")
    return float(2.0 * np.mean((e - a) ** 2))


def partition_error(logZ_B: float, logZ: float) -> float:
    if logZ == 0.0:
        raise UndefinedMetric("relative error undefined for log Z = 0")
    return abs(logZ_B - logZ) / logZ


def expected_mean(beliefs) -> float:
    return float(np.mean(2.0 * _singleton(beliefs) - 1.0))


@dataclass(frozen=True)
class AccuracyReport:
    marginal_mse: float
    partition_error: float
    expected_mean: float


def accuracy_report(beliefs: Pseudomarginals, exact) -> AccuracyReport:
    return AccuracyReport(
        marginal_mse(beliefs, exact),
        partition_error(beliefs.log_partition, exact.log_partition),
        expected_mean(beliefs),
    )


# -- combining fixed points ---------------------------------------------------


class Subset(str, enum.Enum):
    ALL = "ALL"
    MINIMA = "MINIMA"


_MINIMA = (StabilityClass.STABLE_BP, StabilityClass.STABLE_WITH_DAMPING)


def _filter(fixed_points, subset: Subset) -> list:
    fps = list(fixed_points)
    if Subset(subset) is Subset.MINIMA:
        if any(fp.stability is None for fp in fps):
            raise InvalidArgument("MINIMA needs stability records; see attach_stability")
        fps = [fp for fp in fps if fp.stability.cls in _MINIMA]
    if not fps:
        raise InvalidArgument("no fixed points left to combine")
    return fps


def rsb_weights(fixed_points) -> np.ndarray:
    """Z_B^m / sum_m Z_B^m, via a softmax over log Z_B."""
    return softmax(np.array([fp.log_partition for fp in fixed_points]))


def rsb_combine(fixed_points, subset: Subset = Subset.ALL) -> Pseudomarginals:
    """Partition-weighted convex combination of fixed-point beliefs.

    The result carries ``log_partition = log sum_m Z_B^m``; energy and
    entropy have no meaning for a mixture and are NaN.
    """
    fps = _filter(fixed_points, subset)
    w = rsb_weights(fps)
    single = np.einsum("m,mi->i", w, np.array([fp.beliefs.singleton for fp in fps]))
    pair = np.einsum("m,mekl->ekl", w, np.array([fp.beliefs.pairwise for fp in fps]))
    log_z = float(logsumexp([fp.log_partition for fp in fps]))
    return Pseudomarginals(single, pair, math.nan, math.nan, -log_z, log_z)


def select_max_partition(fixed_points):
    fps = list(fixed_points)
    if not fps:
        raise InvalidArgument("no fixed points")
    return fps[int(np.argmax([fp.log_partition for fp in fps]))]


def mse_from_partition_ratios(fixed_points, k: int) -> float:
    """Marginal MSE of fixed point ``k`` written through the Z_B ratios.

    Equals ``marginal_mse(fixed_points[k], rsb_combine(fixed_points))``
    identically; it matches the MSE against the exact marginals whenever
    the partition-weighted combination reproduces them.
    """
    fps = list(fixed_points)
    logz = np.array([fp.log_partition for fp in fps])
    shift = logz.max()
    z = np.exp(logz - shift)
    P = np.array([fp.beliefs.singleton for fp in fps])
    others = np.arange(len(fps)) != k
    inner = (z[others, None] * (P[others] - P[k])).sum(axis=0)
    N = P.shape[1]
    return float(2.0 / (N * z.sum() ** 2) * np.sum(inner**2))


# -- patch models -------------------------------------------------------------


def effective_field(model: IsingModel, messages: np.ndarray, i: int, patch_nodes: Iterable[int]) -> float:
    """theta_i plus arctanh(2 mu_{j->i}(+1) - 1) over neighbors j outside the patch."""
    inside = set(patch_nodes)
    g = model.graph
    total = float(model.fields[i])
    for j in g.neighbors[i]:
        if j not in inside:
            p = messages[g.directed_index(j, i), 0]
            total += math.atanh(2.0 * p - 1.0)
    return total


class PatchClass(str, enum.Enum):
    STATE_PRESERVING = "StatePreserving"
    BIASED_PLUS = "BiasedPlus"
    BIASED_MINUS = "BiasedMinus"
    MIXED = "Mixed"


@dataclass(frozen=True)
class PatchReport:
    flipped: np.ndarray
    n_flipped: int
    n_aligned: int
    cls: PatchClass
    boundary_edges: tuple
    conflicting_edges: tuple
    entropy_gap: Optional[float] = None  # S_B(reference) - S_B(this)
    mismatch: Optional[np.ndarray] = None  # P~_i(this) - P~_i(reference)


def boundary_edges(model: IsingModel, layout: PatchLayout) -> tuple:
    a = layout.patch_assignment
    return tuple(e for e, (i, j) in enumerate(model.graph.edges) if a[i] != a[j])


def classify_patch_fixed_point(
    model: IsingModel,
    beliefs: Pseudomarginals,
    layout: PatchLayout,
    reference: Optional[Pseudomarginals] = None,
) -> PatchReport:
    P = np.asarray(beliefs.singleton)
    theta = model.fields
    with np.errstate(divide="ignore"):
        flipped = (P / (1.0 - P) - 1.0) * theta < 0.0
    if not flipped.any():
        cls = PatchClass.STATE_PRESERVING
    elif np.all(P > 0.5):
        cls = PatchClass.BIASED_PLUS
    elif np.all(P < 0.5):
        cls = PatchClass.BIASED_MINUS
    else:
        cls = PatchClass.MIXED
    edges = model.graph.edges
    boundary = boundary_edges(model, layout)
    side = np.sign(P - 0.5)
    conflicting = tuple(e for e in boundary if side[edges[e][0]] != side[edges[e][1]])
    n_f = int(flipped.sum())
    gap = mismatch = None
    if reference is not None:
        gap = float(reference.entropy - beliefs.entropy)
        mismatch = P - np.asarray(reference.singleton)
    return PatchReport(flipped, n_f, model.N - n_f, cls, boundary, conflicting, gap, mismatch)


def global_min_bound_check(report: PatchReport, J: float, theta: float, N: int) -> bool:
    """2J(|E_P| - |E_C|) < theta (N - N_c + N_f) + dS_B for the fixed point in ``report``.

    ``report`` describes the competing fixed point with ``entropy_gap``
    measured from the state-preserving one.  True means the state-preserving
    fixed point has the lower Bethe free energy under the bound's assumptions.
    """
    gap = report.entropy_gap if report.entropy_gap is not None else 0.0
    lhs = 2.0 * J * (len(report.boundary_edges) - len(report.conflicting_edges))
    return lhs < theta * (N - report.n_aligned + report.n_flipped) + gap


def simplified_bound(J: float, theta: float, N: int) -> bool:
    """2 sqrt(N) J < N theta: two equal halves of a square grid."""
    return 2.0 * math.sqrt(N) * J < N * theta


# -- region boundaries --------------------------------------------------------


def count_fixed_points(model: IsingModel, restarts: int = 200, seed: int = 0) -> int:
    return len(enumerate_bp_fixed_points(model, restarts, seed))


def anti_aligned_probe(model: IsingModel, layout: PatchLayout, strength: float = 2.0) -> PatchClass:
    """Class of the fixed point BP reaches when every node starts against its field.

    Each patch then sees its neighbours flipped.  Inside region (II) the
    boundary fields pull the run back to an ordered fixed point; beyond it
    the disordered start survives.
    """
    nu0 = -strength * np.sign(model.fields[model.graph.src])
    nu, ok = batched_bp(model, nu0[None, :])
    if not ok[0]:
        return PatchClass.MIXED
    fp = newton_refine(model, nu[0])
    if fp is None:
        return PatchClass.MIXED
    return classify_patch_fixed_point(model, fp.beliefs, layout).cls


def _bisect(pred: Callable[[float], bool], lo: float, hi: float, resolution: float) -> float:
    """Smallest J in (lo, hi] with pred true, assuming monotonicity; inf if none."""
    if pred(lo):
        raise EstimationError(f"predicate already true at the lower bracket {lo}")
    if not pred(hi):
        return math.inf
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def estimate_region_boundaries(
    family: Callable[[float], IsingModel],
    layout: Optional[PatchLayout] = None,
    restarts: int = 200,
    j_range: tuple = (0.05, 2.0),
    resolution: float = 0.01,
    seed: int = 0,
) -> tuple[float, float]:
    """Numerical (J_A, J_C) for a family J -> model.

    J_A is where BP from random starts first reaches more than one fixed
    point.  J_C is where a run started against every local field ends in a
    disordered (Mixed) fixed point; it needs ``layout`` and is ``inf`` when
    not requested or not reached within ``j_range``.
    """
    lo, hi = j_range
    j_a = _bisect(lambda J: count_fixed_points(family(J), restarts, seed) > 1, lo, hi, resolution)
    if layout is None or not math.isfinite(j_a):
        return j_a, math.inf
    j_c = _bisect(
        lambda J: anti_aligned_probe(family(J), layout) is PatchClass.MIXED, j_a, hi, resolution
    )
    return j_a, j_c
