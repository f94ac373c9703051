"""Local stability of BP fixed points and the phase regions of regular models.

The BP map is linearized in nu-space.  A fixed point is stable under plain
BP when every eigenvalue of the Jacobian lies inside the unit circle.
Damping maps each eigenvalue to ``(1 - eps) * lam + eps``, so any spectrum
with all real parts below one can be pulled inside by a large enough eps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .bp import cavity_fields
from .model import IsingModel, InvalidArgument

MARGINAL_BAND = 1e-9
MAX_DIMENSION = 400


class NumericFailure(RuntimeError):
    pass


class StabilityClass(str, enum.Enum):
    STABLE_BP = "StableBP"
    STABLE_WITH_DAMPING = "StableWithDamping"
    UNSTABLE = "Unstable"


class PhaseRegion(str, enum.Enum):
    F = "F"
    AF = "AF"
    P = "P"


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # complex

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues), initial=0.0))

    @property
    def max_real_part(self) -> float:
        return float(np.max(self.eigenvalues.real, initial=-np.inf))

    def to_json(self) -> list:
        return [[float(z.real), float(z.imag)] for z in self.eigenvalues]


@dataclass(frozen=True)
class StabilityRecord:
    spectrum: Spectrum
    cls: StabilityClass
    marginal: bool

    def to_json(self) -> dict:
        return {
            "class": self.cls.value,
            "marginal": self.marginal,
            "spectral_radius": self.spectrum.spectral_radius,
            "max_real_part": self.spectrum.max_real_part,
        }


# -- Jacobian -----------------------------------------------------------------


def bp_jacobian(model: IsingModel, nu: np.ndarray) -> np.ndarray:
    """d nu'_{i->j} / d nu_{k->i} for k in the neighbors of i other than j."""
    g = model.graph
    h = cavity_fields(model, np.asarray(nu, dtype=float))
    tJ = np.tanh(model.message_couplings)
    th = np.tanh(h)
    value = tJ * (1.0 - th**2) / (1.0 - tJ**2 * th**2)
    # pattern[m, n] = 1 iff dst(n) == src(m) and n is not the reverse of m
    pattern = (g.dst[None, :] == g.src[:, None]).astype(float)
    pattern[np.arange(g.message_count), g.reverse] = 0.0
    return value[:, None] * pattern


# -- eigenvalues --------------------------------------------------------------


def balance(a: np.ndarray, radix: float = 2.0) -> np.ndarray:
    """Parlett-Reinsch diagonal similarity scaling (powers of the radix)."""
    a = a.copy()
    n = a.shape[0]
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(a[:, i])) - abs(a[i, i])
            r = np.sum(np.abs(a[i, :])) - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            s = c + r
            f = 1.0
            g = r / radix
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def hessenberg(a: np.ndarray) -> np.ndarray:
    """Upper Hessenberg form by Householder similarity transforms."""
    h = np.array(a, dtype=float)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k]
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(norm, x[0])
        v /= np.linalg.norm(v)
        h[k + 1 :, k:] -= 2.0 * np.outer(v, v @ h[k + 1 :, k:])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v)
        h[k + 2 :, k] = 0.0
    return h


def _hqr(a: np.ndarray) -> np.ndarray:
    """Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only)."""
    n = a.shape[0]
    wr = np.zeros(n, dtype=complex)
    eps = np.finfo(float).eps
    small = np.finfo(float).tiny
    anorm = float(np.sum(np.abs(np.triu(a, -1))))
    budget = 100 * max(n, 1)
    sweeps = 0
    nn = n - 1
    t = 0.0
    its = 0
    while nn >= 0:
        # look for a single small subdiagonal element
        l = nn
        while l > 0:
            s = abs(a[l - 1, l - 1]) + abs(a[l, l])
            if s == 0.0:
                s = anorm
            if abs(a[l, l - 1]) <= max(eps * s, small):
                a[l, l - 1] = 0.0
                break
            l -= 1
        x = a[nn, nn]
        if l == nn:
            wr[nn] = x + t
            nn -= 1
            its = 0
            continue
        y = a[nn - 1, nn - 1]
        w = a[nn, nn - 1] * a[nn - 1, nn]
        if l == nn - 1:
            p = 0.5 * (y - x)
            q = p * p + w
            z = math.sqrt(abs(q))
            x += t
            if q >= 0.0:
                z = p + math.copysign(z, p)
                wr[nn - 1] = wr[nn] = x + z
                if z != 0.0:
                    wr[nn] = x - w / z
            else:
                wr[nn] = complex(x + p, -z)
                wr[nn - 1] = complex(x + p, z)
            nn -= 2
            its = 0
            continue
        if sweeps >= budget:
            raise NumericFailure("QR iteration did not converge")
        if its and its % 10 == 0:
            # exceptional shift
            t += x
            a[np.arange(nn + 1), np.arange(nn + 1)] -= x
            s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
            y = x = 0.75 * s
            w = -0.4375 * s * s
        its += 1
        sweeps += 1
        # form the shift and look for two consecutive small subdiagonals
        m = nn - 2
        while m >= l:
            z = a[m, m]
            r = x - z
            s = y - z
            p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
            q = a[m + 1, m + 1] - z - r - s
            r = a[m + 2, m + 1]
            s = abs(p) + abs(q) + abs(r)
            p /= s
            q /= s
            r /= s
            if m == l:
                break
            u = abs(a[m, m - 1]) * (abs(q) + abs(r))
            v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
            if u <= eps * v:
                break
            m -= 1
        for i in range(m, nn - 1):
            a[i + 2, i] = 0.0
            if i != m:
                a[i + 2, i - 1] = 0.0
        # double-shift QR sweep on rows/columns l..nn
        for k in range(m, nn):
            if k != m:
                p = a[k, k - 1]
                q = a[k + 1, k - 1]
                r = a[k + 2, k - 1] if k + 1 != nn else 0.0
                x = abs(p) + abs(q) + abs(r)
                if x != 0.0:
                    p /= x
                    q /= x
                    r /= x
            s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
            if s == 0.0:
                continue
            if k == m:
                if l != m:
                    a[k, k - 1] = -a[k, k - 1]
            else:
                a[k, k - 1] = -s * x
            p += s
            x = p / s
            y = q / s
            z = r / s
            q /= p
            r /= p
            third = k + 1 != nn
            cols = slice(k, nn + 1)
            pv = a[k, cols] + q * a[k + 1, cols]
            if third:
                pv += r * a[k + 2, cols]
                a[k + 2, cols] -= pv * z
            a[k + 1, cols] -= pv * y
            a[k, cols] -= pv * x
            rows = slice(l, min(nn, k + 3) + 1)
            pv = x * a[rows, k] + y * a[rows, k + 1]
            if third:
                pv += z * a[rows, k + 2]
                a[rows, k + 2] -= pv * r
            a[rows, k + 1] -= pv * q
            a[rows, k] -= pv
    return wr


def eigenvalues(matrix: np.ndarray) -> Spectrum:
    """Full complex spectrum of a real square matrix.

    Raises:
        InvalidArgument: non-square input or dimension above 400.
        NumericFailure: QR did not converge within 100 n sweeps.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgument("matrix must be square")
    if a.shape[0] > MAX_DIMENSION:
        raise InvalidArgument(f"dimension above {MAX_DIMENSION}")
    if a.shape[0] == 0:
        return Spectrum(np.zeros(0, dtype=complex))
    if not np.all(np.isfinite(a)):
        raise NumericFailure("matrix has non-finite entries")
    # scale by a power of two so tiny or huge entries do not under/overflow
    _, exponent = math.frexp(float(np.max(np.abs(a))) or 1.0)
    lam = _hqr(hessenberg(balance(np.ldexp(a, -exponent))))
    lam = np.ldexp(lam.real, exponent) + 1j * np.ldexp(lam.imag, exponent)
    order = np.lexsort((lam.imag, lam.real))
    return Spectrum(lam[order])


# -- classification -----------------------------------------------------------


def classify_stability(spectrum: Spectrum) -> StabilityClass:
    if spectrum.spectral_radius < 1.0:
        return StabilityClass.STABLE_BP
    if spectrum.max_real_part < 1.0:
        return StabilityClass.STABLE_WITH_DAMPING
    return StabilityClass.UNSTABLE


def is_marginal(spectrum: Spectrum) -> bool:
    """Within the band where linearization cannot decide stability."""
    return (
        abs(spectrum.spectral_radius - 1.0) < MARGINAL_BAND
        or abs(spectrum.max_real_part - 1.0) < MARGINAL_BAND
    )


def damped_spectrum(spectrum: Spectrum, eps: float) -> Spectrum:
    if not 0.0 <= eps < 1.0:
        raise InvalidArgument("damping must lie in [0, 1)")
    return Spectrum((1.0 - eps) * spectrum.eigenvalues + eps)


def stability_record(model: IsingModel, nu: np.ndarray) -> StabilityRecord:
    spec = eigenvalues(bp_jacobian(model, nu))
    return StabilityRecord(spec, classify_stability(spec), is_marginal(spec))


def attach_stability(model: IsingModel, fixed_point):
    return fixed_point.with_stability(stability_record(model, fixed_point.nu))


# -- phase regions ------------------------------------------------------------


def arccoth(x: float) -> float:
    return math.atanh(1.0 / x)


def phase_function(J: float, d: int) -> float:
    """Critical field magnitude p(J, d); 0 inside (P).

    ``d`` is the number of messages entering each cavity field, so a
    (d + 1)-regular graph.  With that reading J = arccoth(d) is where the
    uniform paramagnetic solution loses stability, and |theta| = p(J, d)
    is where the ordered (J > 0) or staggered (J < 0) solutions vanish.
    """
    if d < 2:
        raise InvalidArgument("degree must be >= 2")
    if J == 0.0:
        return 0.0
    jc = arccoth(d)
    if abs(J) <= jc:
        return 0.0
    w = math.tanh(abs(J))
    rad1 = (d * w - 1.0) / (d / w - 1.0)
    rad2 = (d - 1.0 / w) / (d - w)
    if rad1 < 0.0 or rad2 < 0.0:
        return 0.0
    first = d * math.atanh(math.sqrt(rad1))
    second = math.atanh(math.sqrt(rad2))
    return first - second if J > jc else first + second


def classify_phase(J: float, theta: float, d: int) -> PhaseRegion:
    jc = arccoth(d)
    p = phase_function(J, d)
    if J > jc and abs(theta) <= p:
        return PhaseRegion.F
    if J < -jc and abs(theta) < p:
        return PhaseRegion.AF
    return PhaseRegion.P
