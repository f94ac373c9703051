import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from loopybp import model, stability
from loopybp.model import InvalidArgument
from loopybp.stability import PhaseRegion, Spectrum, StabilityClass


def _sorted(lam):
    lam = np.asarray(lam)
    return lam[np.lexsort((np.round(lam.imag, 8), np.round(lam.real, 8)))]


@given(
    arrays(np.float64, st.tuples(st.integers(1, 12), st.just(1)), elements=st.floats(-5, 5)).flatmap(
        lambda col: arrays(np.float64, (col.shape[0], col.shape[0]), elements=st.floats(-5, 5))
    )
)
def test_eigenvalues_match_lapack(a):
    ours = _sorted(stability.eigenvalues(a).eigenvalues)
    ref = _sorted(np.linalg.eigvals(a))
    scale = max(1.0, np.max(np.abs(ref)))
    # defective matrices lose accuracy like sqrt(eps); compare as multisets
    assert np.max(np.abs(np.sort_complex(ours) - np.sort_complex(ref))) < 1e-5 * scale or np.allclose(
        np.poly(ours), np.poly(ref), atol=1e-6 * scale ** a.shape[0]
    )


def test_rotation_has_complex_pair():
    c, s = math.cos(0.3), math.sin(0.3)
    lam = stability.eigenvalues(np.array([[c, -s], [s, c]])).eigenvalues
    np.testing.assert_allclose(lam, [c - 1j * s, c + 1j * s], atol=1e-14)


def test_companion_matrix_roots():
    # x^3 - 6x^2 + 11x - 6 = (x - 1)(x - 2)(x - 3)
    comp = np.array([[6.0, -11.0, 6.0], [1, 0, 0], [0, 1, 0]])
    np.testing.assert_allclose(stability.eigenvalues(comp).eigenvalues, [1, 2, 3], atol=1e-12)


def test_eigenvalues_input_checks():
    with pytest.raises(InvalidArgument):
        stability.eigenvalues(np.zeros((2, 3)))
    with pytest.raises(InvalidArgument):
        stability.eigenvalues(np.zeros((401, 401)))
    with pytest.raises(stability.NumericFailure):
        stability.eigenvalues(np.array([[np.inf]]))
    assert stability.eigenvalues(np.zeros((0, 0))).eigenvalues.size == 0


def test_hessenberg_preserves_spectrum():
    a = np.random.default_rng(3).normal(size=(8, 8))
    h = stability.hessenberg(a)
    assert np.allclose(np.tril(h, -2), 0.0)
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(h)), np.sort_complex(np.linalg.eigvals(a)), atol=1e-10)


def test_jacobian_sparsity_and_value():
    m = model.make_ising(model.build_chain(3), 0.7, 0.0)
    jac = stability.bp_jacobian(m, np.zeros(4))
    g = m.graph
    # the only dependency: 0->1 feeds 1->2, and 2->1 feeds 1->0
    nz = {(int(r), int(c)) for r, c in zip(*np.nonzero(jac))}
    assert nz == {(g.directed_index(1, 2), g.directed_index(0, 1)), (g.directed_index(1, 0), g.directed_index(2, 1))}
    assert jac[g.directed_index(1, 2), g.directed_index(0, 1)] == pytest.approx(math.tanh(0.7))


@pytest.mark.parametrize("d,graph", [(4, model.build_grid(4, 4, periodic=True)), (4, model.build_complete(5))])
def test_paramagnetic_radius(d, graph):
    for J in (0.2, -0.5, 1.0):
        m = model.make_ising(graph, J, 0.0)
        rho = stability.eigenvalues(stability.bp_jacobian(m, np.zeros(graph.message_count))).spectral_radius
        assert rho == pytest.approx((d - 1) * math.tanh(abs(J)), abs=1e-10)


def test_classification_thresholds():
    assert stability.classify_stability(Spectrum(np.array([0.5, -0.9]))) is StabilityClass.STABLE_BP
    assert stability.classify_stability(Spectrum(np.array([-1.5, 0.5]))) is StabilityClass.STABLE_WITH_DAMPING
    assert stability.classify_stability(Spectrum(np.array([1.2, 0.0]))) is StabilityClass.UNSTABLE
    assert stability.is_marginal(Spectrum(np.array([1.0 + 1e-12])))
    assert not stability.is_marginal(Spectrum(np.array([0.5])))


@given(st.floats(-3, 0.99), st.floats(0.0, 0.99))
def test_damping_maps_stable_with_damping_into_unit_disk(re, eps):
    lam = Spectrum(np.array([re]))
    damped = stability.damped_spectrum(lam, eps)
    assert damped.eigenvalues[0] == pytest.approx((1 - eps) * re + eps)
    assert damped.max_real_part < 1.0


def test_record_and_attach():
    m = model.make_ising(model.build_complete(4), -1.5, 0.5)
    from loopybp.fixedpoints import enumerate_fixed_points

    fp = stability.attach_stability(m, enumerate_fixed_points(m, 50)[0])
    assert fp.stability.cls is StabilityClass.STABLE_WITH_DAMPING
    assert fp.to_json()["stability"]["class"] == "StableWithDamping"


_NU = np.linspace(-15, 15, 60_001)


def _crossings(values) -> int:
    return int(np.sum(np.sign(values[1:]) != np.sign(values[:-1])))


def _cavity_map(J, theta, d):
    # d incoming messages feed each cavity field
    return lambda nu: np.arctanh(np.tanh(J) * np.tanh(theta + d * nu))


@settings(max_examples=15)
@given(st.sampled_from([3, 4, 5]), st.floats(0.45, 1.5))
def test_ferromagnetic_branch_is_spinodal(d, J):
    p = stability.phase_function(J, d)
    assert p > 0
    for scale, roots in ((0.97, 3), (1.03, 1)):
        f = _cavity_map(J, scale * p, d)
        assert _crossings(_NU - f(_NU)) == roots


@settings(max_examples=15)
@given(st.sampled_from([3, 4, 5]), st.floats(-1.5, -0.45))
def test_antiferromagnetic_branch_is_spinodal(d, J):
    # staggered solutions are 2-cycles of the uniform cavity map
    p = stability.phase_function(J, d)
    for scale, roots in ((0.97, 3), (1.03, 1)):
        f = _cavity_map(J, scale * p, d)
        assert _crossings(_NU - f(f(_NU))) == roots


def test_phase_regions():
    d = 4
    jc = stability.arccoth(d)
    assert jc == pytest.approx(math.atanh(0.25))
    assert stability.phase_function(0.5 * jc, d) == 0.0
    assert stability.classify_phase(0.1, 0.0, d) is PhaseRegion.P
    assert stability.classify_phase(1.0, 0.0, d) is PhaseRegion.F
    assert stability.classify_phase(1.0, 10.0, d) is PhaseRegion.P
    assert stability.classify_phase(-1.0, 0.0, d) is PhaseRegion.AF
    with pytest.raises(InvalidArgument):
        stability.phase_function(1.0, 1)


def test_antiferromagnetic_branch_exceeds_ferromagnetic():
    # Staggered order tolerates stronger fields than uniform order at equal |J|.
    assert stability.phase_function(-1.0, 4) > stability.phase_function(1.0, 4)


@pytest.mark.parametrize("c", [2.22507386e-309, 1e-300, 1e300])
def test_extreme_scales(c):
    # rank-one all-c matrix: spectrum {0, 0, 3c}
    lam = stability.eigenvalues(np.full((3, 3), c)).eigenvalues
    assert lam[-1].real == pytest.approx(3 * c, rel=1e-12)
    assert np.max(np.abs(lam[:2])) <= 1e-12 * 3 * c
