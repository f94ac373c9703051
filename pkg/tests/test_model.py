import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loopybp import model
from loopybp.model import Graph, InvalidArgument, IsingModel


def test_directed_index_convention():
    g = Graph(3, ((0, 1), (1, 2)))
    assert g.directed_index(0, 1) == 0
    assert g.directed_index(1, 0) == 1
    assert g.directed_index(2, 1) == 3
    np.testing.assert_array_equal(g.reverse, [1, 0, 3, 2])
    np.testing.assert_array_equal(g.src, [0, 1, 1, 2])
    np.testing.assert_array_equal(g.dst, [1, 0, 2, 1])


@pytest.mark.parametrize("edges", [((0, 0),), ((0, 1), (1, 0)), ((0, 5),)])
def test_graph_rejects_bad_edges(edges):
    with pytest.raises(InvalidArgument):
        Graph(3, edges)


def test_grid_sizes():
    g = model.build_grid(3, 4)
    assert g.node_count == 12
    assert g.edge_count == 3 * 3 + 2 * 4
    t = model.build_grid(3, 3, periodic=True)
    assert t.edge_count == 18
    assert set(t.degrees) == {4}


def test_periodic_grid_needs_three():
    with pytest.raises(InvalidArgument):
        model.build_grid(2, 5, periodic=True)


def test_complete_and_chain():
    assert model.build_complete(5).edge_count == 10
    assert model.build_chain(4).edges == ((0, 1), (1, 2), (2, 3))


@given(st.integers(2, 30), st.integers(0, 10_000))
def test_random_tree_is_spanning_tree(n, seed):
    g = model.build_random_tree(n, seed)
    assert g.edge_count == n - 1
    assert g.is_connected()


@given(st.integers(6, 25), st.floats(2.0, 3.5), st.integers(0, 1000))
def test_random_graph_connected_with_edge_count(n, degree, seed):
    g = model.build_random(n, degree, seed)
    assert g.is_connected()
    assert g.edge_count == int(round(degree * n / 2))


def test_random_graph_deterministic():
    assert model.build_random(12, 3.0, 7).edges == model.build_random(12, 3.0, 7).edges


def test_energy_single_edge():
    m = IsingModel(Graph(2, ((0, 1),)), [0.7], [0.2, -0.3])
    x = np.array([[1, 1], [1, -1], [-1, -1]])
    np.testing.assert_allclose(m.energy(x), [-0.7 - 0.2 + 0.3, 0.7 - 0.5, -0.7 - 0.1])


def test_make_ising_shapes_and_validation():
    g = model.build_grid(2, 2)
    m = model.make_ising(g, ("uniform", -1, 1), 0.5, seed=3)
    assert m.couplings.shape == (4,) and np.all(np.abs(m.couplings) <= 1)
    np.testing.assert_array_equal(m.fields, 0.5)
    with pytest.raises(InvalidArgument):
        model.make_ising(g, [1.0, 2.0], 0.0)


def test_model_is_immutable():
    m = model.make_ising(model.build_chain(3), 1.0, 0.0)
    with pytest.raises(ValueError):
        m.couplings[0] = 2.0


def test_json_round_trip(tmp_path):
    m = model.make_ising(model.build_random(8, 3.0, 1), ("uniform", -2, 2), ("uniform", -1, 1), 4)
    path = tmp_path / "m.json"
    m.save(path)
    back = IsingModel.load(path)
    assert back.graph.edges == m.graph.edges
    np.testing.assert_array_equal(back.couplings, m.couplings)
    np.testing.assert_array_equal(back.fields, m.fields)
    assert set(json.loads(path.read_text())) == {"nodes", "edges", "J", "theta"}


def test_halves_layout_and_patch_model():
    layout = model.halves_layout(4, 4)
    m = model.make_patch_model(4, 4, layout, 0.5, 0.1)
    assert layout.members(0) == [0, 1, 4, 5, 8, 9, 12, 13]
    np.testing.assert_allclose(m.fields.reshape(4, 4), [[0.1, 0.1, -0.1, -0.1]] * 4)
    with pytest.raises(InvalidArgument):
        model.make_patch_model(4, 4, layout, -0.5, 0.1)


def test_layout_rejects_disconnected_patch():
    layout = model.PatchLayout((0, 1, 0, 1), {0: 1, 1: -1})
    with pytest.raises(InvalidArgument):
        layout.validate(model.build_chain(4))


def test_scale_couplings():
    m = model.make_ising(model.build_chain(3), 2.0, 0.1)
    np.testing.assert_allclose(model.scale_couplings(m, 0.25).couplings, 0.5)
    with pytest.raises(InvalidArgument):
        model.scale_couplings(m, 1.5)


def test_bipartite():
    assert model.is_bipartite(model.build_grid(3, 4))
    assert not model.is_bipartite(model.build_complete(3))
    assert not model.is_bipartite(model.build_grid(3, 3, periodic=True))
