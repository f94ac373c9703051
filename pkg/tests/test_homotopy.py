import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loopybp import homotopy
from loopybp.homotopy import PolynomialSystem
from loopybp.model import InvalidArgument


def test_univariate_evaluation_and_derivative():
    p = PolynomialSystem.univariate([2, -3, 1])  # 2x^2 - 3x + 1
    assert p(np.array([2.0]))[0] == pytest.approx(3.0)
    assert p.jacobian(np.array([2.0]))[0, 0] == pytest.approx(5.0)


def test_bivariate_jacobian_matches_finite_differences():
    sys_ = PolynomialSystem([{(2, 1): 1.0, (0, 0): -2.0}, {(1, 0): 3.0, (0, 3): 1.0j}])
    x = np.array([0.7 + 0.1j, -0.4 + 0.3j])
    h = 1e-7
    fd = np.column_stack([(sys_(x + h * e) - sys_(x - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(sys_.jacobian(x), fd, atol=1e-7)


def test_exponent_length_checked():
    with pytest.raises(InvalidArgument):
        PolynomialSystem([{(1, 0): 1.0}])


@given(st.integers(0, 10_000))
def test_gamma_on_unit_circle(seed):
    assert abs(homotopy.random_gamma(seed)) == pytest.approx(1.0)


def test_quadratic_roots():
    Q = PolynomialSystem.univariate([1, 0, -1])
    F = PolynomialSystem.univariate([1, 1j, -2])
    ends = homotopy.track_path([[1], [-1]], Q, F, homotopy.random_gamma(0))
    got = sorted((complex(e[0]) for e in ends), key=lambda z: z.real)
    want = [(-math.sqrt(7) - 1j) / 2, (math.sqrt(7) - 1j) / 2]
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_total_degree_system():
    # x^2 = 1, y^2 = 4 from the start system x^2 - 1, y^2 - 1
    Q = PolynomialSystem([{(2, 0): 1, (0, 0): -1}, {(0, 2): 1, (0, 0): -1}])
    F = PolynomialSystem([{(2, 0): 1, (0, 0): -1}, {(0, 2): 1, (0, 0): -4}])
    starts = [[a, b] for a in (1, -1) for b in (1, -1)]
    ends = homotopy.track_path(starts, Q, F, homotopy.random_gamma(3))
    got = {(round(e[0].real, 8), round(e[1].real, 8)) for e in ends}
    assert got == {(1.0, 2.0), (1.0, -2.0), (-1.0, 2.0), (-1.0, -2.0)}


def test_start_values_must_solve_start_system():
    Q = PolynomialSystem.univariate([1, 0, -1])
    with pytest.raises(InvalidArgument):
        homotopy.track_path([[2]], Q, Q, 1.0)


def test_losing_most_paths_raises():
    Q = PolynomialSystem.univariate([1, 0, -1])
    F = PolynomialSystem.univariate([0, 1, -1])  # degree drops: one path diverges
    cfg = homotopy.TrackerConfig(divergence=1e3)
    results = homotopy.track_paths([[1], [-1]], Q, F, homotopy.random_gamma(1), cfg)
    assert sum(r.lost for r in results) == 1
    with pytest.raises(homotopy.TrackingFailure):
        homotopy.track_path([[1]], Q, PolynomialSystem.univariate([0, 0, 1]), 1.0, cfg)


def test_mixed_volume_examples():
    assert homotopy.mixed_volume_2d([(0, 0), (1, 0), (2, 2)], [(0, 0), (1, 0), (0, 1), (1, 2)]) == 4
    # standard simplices: one root (Bernstein's count for two generic linear equations)
    simplex = [(0, 0), (1, 0), (0, 1)]
    assert homotopy.mixed_volume_2d(simplex, simplex) == 1


@given(st.integers(1, 5), st.integers(1, 5))
def test_mixed_volume_of_scaled_simplices_is_bezout(a, b):
    s = lambda k: [(0, 0), (k, 0), (0, k)]  # noqa: E731
    assert homotopy.mixed_volume_2d(s(a), s(b)) == a * b


def test_minkowski_sum_size():
    P = np.array([[0, 0], [1, 0]])
    assert homotopy.minkowski_sum(P, P).shape == (4, 2)
