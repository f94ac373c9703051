import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from loopybp import bp, exact, fixedpoints, model
from loopybp.model import InvalidArgument


def _k4_magnetized_nu(J: float) -> float:
    # On K4 with theta = 0 a symmetric fixed point solves nu = atanh(tanh J tanh 2nu).
    f = lambda nu: nu - math.atanh(math.tanh(J) * math.tanh(2 * nu))  # noqa: E731
    return brentq(f, 1e-3, 20.0)


def test_complete4_ferromagnet_has_three_fixed_points():
    m = model.make_ising(model.build_complete(4), 1.5, 0.0)
    fps = fixedpoints.enumerate_fixed_points(m, restarts=200, seed=0)
    assert len(fps) == 3
    nu_star = _k4_magnetized_nu(1.5)
    values = sorted(float(np.mean(fp.nu)) for fp in fps)
    assert values == pytest.approx([-nu_star, 0.0, nu_star], abs=1e-9)
    for fp in fps:
        assert np.ptp(fp.nu) < 1e-9  # symmetric solutions
    # the two magnetized solutions share the lowest free energy
    assert fps[0].free_energy == pytest.approx(fps[1].free_energy, abs=1e-9)
    assert fps[2].free_energy > fps[0].free_energy


def test_weak_coupling_unique():
    m = model.make_ising(model.build_complete(4), 0.2, 0.0)
    fps = fixedpoints.enumerate_fixed_points(m, restarts=100)
    assert len(fps) == 1
    np.testing.assert_allclose(fps[0].nu, 0.0, atol=1e-12)


def test_residual_is_zero_at_fixed_points():
    m = model.make_ising(model.build_grid(3, 3), ("uniform", -2, 2), ("uniform", -1, 1), 3)
    for fp in fixedpoints.enumerate_fixed_points(m, restarts=20):
        assert np.max(np.abs(fixedpoints.residual_system(m, fp.nu))) < 1e-10
        assert fp.residual < 1e-10


def test_numeric_jacobian_matches_analytic():
    from loopybp.stability import bp_jacobian

    m = model.make_ising(model.build_grid(2, 3), ("uniform", -1, 1), ("uniform", -1, 1), 1)
    nu = np.random.default_rng(0).normal(size=m.graph.message_count)
    fd = fixedpoints.numeric_jacobian(m, nu)
    np.testing.assert_allclose(np.eye(len(nu)) - fd, bp_jacobian(m, nu), atol=1e-8)


def test_newton_polishes_bp_output():
    m = model.make_ising(model.build_grid(3, 3), 0.5, 0.1)
    out = bp.run_bp(m, bp.BPConfig(tolerance=1e-4))
    fp = fixedpoints.from_messages(m, out.messages)
    assert fp is not None and fp.residual < 1e-10
    np.testing.assert_allclose(fp.beliefs.singleton, out.beliefs.singleton, atol=1e-3)


def test_newton_gives_up_on_nonfinite_start():
    m = model.make_ising(model.build_chain(3), 1.0, 0.0)
    assert fixedpoints.newton_refine(m, np.array([np.nan, 0, 0, 0])) is None


def test_starting_points_layout():
    m = model.make_ising(model.build_chain(3), 1.0, 0.0)
    s = fixedpoints.starting_points(m, 6, seed=0)
    assert s.shape == (6, 4)
    np.testing.assert_array_equal(s[0], 0.0)
    np.testing.assert_array_equal(s[1], 3.0)
    np.testing.assert_array_equal(s[2], -3.0)
    assert np.all(np.abs(s[3:]) <= 3.0)


def test_enumeration_rejects_zero_restarts():
    m = model.make_ising(model.build_chain(3), 1.0, 0.0)
    with pytest.raises(InvalidArgument):
        fixedpoints.enumerate_fixed_points(m, restarts=0)


def test_enumeration_is_deterministic():
    m = model.make_ising(model.build_grid(3, 3), 1.5, 0.0)
    a = fixedpoints.enumerate_fixed_points(m, 30, seed=4)
    b = fixedpoints.enumerate_fixed_points(m, 30, seed=4)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.nu, y.nu)


def test_bp_enumeration_skips_saddle():
    # K4 ferromagnet: BP from random starts only reaches the two magnetized minima.
    m = model.make_ising(model.build_complete(4), 1.5, 0.0)
    fps = fixedpoints.enumerate_bp_fixed_points(m, restarts=50)
    assert len(fps) == 2
    assert all(abs(np.mean(fp.nu)) > 1 for fp in fps)


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_tree_fixed_point_unique_and_exact(seed):
    m = model.make_ising(model.build_random_tree(7, seed), ("uniform", -2, 2), ("uniform", -2, 2), seed)
    fps = fixedpoints.enumerate_fixed_points(m, restarts=10, seed=seed)
    assert len(fps) == 1
    assert fps[0].log_partition == pytest.approx(exact.brute_force(m).log_partition, abs=1e-9)


def test_parity_and_json():
    m = model.make_ising(model.build_complete(4), 1.5, 0.0)
    fps = fixedpoints.enumerate_fixed_points(m, 50)
    assert fixedpoints.fixed_point_count_parity(fps)
    data = fixedpoints.fixed_points_to_json(fps)
    assert [set(d) for d in data] == [{"nu", "F_B", "logZ_B", "stability"}] * 3
