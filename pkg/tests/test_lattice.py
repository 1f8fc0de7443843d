import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatial_gpd.lattice import (Cell, Lattice, LatticeError, build_lattice,
                                 build_proximity_matrix, center_by_component, grid_lattice,
                                 pairwise_quadratic_form, read_grid_csv)


def test_three_by_three_proximity():
    lat = grid_lattice(3, 3)
    W = build_proximity_matrix(lat)
    assert np.trace(W) == 24
    assert list(lat.neighbor_counts) == [2, 3, 2, 3, 4, 3, 2, 3, 2]
    np.testing.assert_array_equal(W, W.T)
    np.testing.assert_allclose(W.sum(axis=1), 0)
    assert W[4, 1] == W[4, 3] == W[4, 5] == W[4, 7] == -1
    assert W[0, 4] == 0
    assert len(lat.edges) == 12


def test_queen_adjacency():
    lat = grid_lattice(3, 3, adjacency="queen")
    assert lat.neighbor_counts[4] == 8
    assert lat.neighbor_counts[0] == 3


def test_null_space_is_constant():
    W = build_proximity_matrix(grid_lattice(4, 5))
    lam = np.linalg.eigvalsh(W)
    assert np.sum(np.abs(lam) < 1e-9) == 1
    assert lam.min() > -1e-9


def test_canonical_order_from_shuffled_cells():
    coords = [(10 + r * 3 + c, c * 0.5, r * 0.5, r, c) for r in range(3) for c in range(3)]
    rng = np.random.default_rng(0)
    rng.shuffle(coords)
    lat = build_lattice(coords)
    assert list(lat.cell_ids) == list(range(10, 19))
    assert lat.index_of(14) == 4


def test_rejects_bad_layouts():
    with pytest.raises(LatticeError):
        build_lattice([(0, 0, 0, 0, 0)])
    with pytest.raises(LatticeError):
        build_lattice([(0, 0, 0, 0, 0), (0, 1, 0, 0, 1)])
    with pytest.raises(LatticeError):
        build_lattice([(0, 0, 0, 0, 0), (1, 1, 0, 0, 1), (2, 5, 5, 5, 5)])
    with pytest.raises(LatticeError):
        Lattice([Cell(0, 0, 0, 0, 0), Cell(1, 0, 0, 0, 1)], adjacency="hex")


def test_disconnected_components_centered_separately():
    coords = [(0, 0, 0, 0, 0), (1, 0, 0, 0, 1), (2, 0, 0, 0, 3), (3, 0, 0, 0, 4)]
    with pytest.warns(UserWarning, match="components"):
        lat = build_lattice(coords)
    assert lat.n_components == 2
    phi = center_by_component(lat, np.array([[1.0], [3.0], [10.0], [20.0]]))
    np.testing.assert_allclose(phi.ravel(), [-1, 1, -5, 5])
    W = build_proximity_matrix(lat)
    assert np.sum(np.abs(np.linalg.eigvalsh(W)) < 1e-9) == 2


@settings(max_examples=40, deadline=None)
@given(n_rows=st.integers(1, 6), n_cols=st.integers(2, 6), seed=st.integers(0, 10_000))
def test_quadratic_form_matches_dense(n_rows, n_cols, seed):
    lat = grid_lattice(n_rows, n_cols)
    W = build_proximity_matrix(lat)
    phi = np.random.default_rng(seed).standard_normal((lat.size, 2))
    np.testing.assert_allclose(pairwise_quadratic_form(lat, phi), phi.T @ W @ phi, atol=1e-10)
    assert pairwise_quadratic_form(lat, phi[:, 0]) == pytest.approx(phi[:, 0] @ W @ phi[:, 0])
    c = center_by_component(lat, phi)
    np.testing.assert_allclose(c.sum(axis=0), 0, atol=1e-12)


def test_read_grid_csv(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("# comment\ncell_id,lon,lat,row,col\n0,0,50,0,0\n1,0.5,50,0,1\n")
    lat = read_grid_csv(path)
    assert lat.size == 2 and lat.cells[1].lon == 0.5
    bad = tmp_path / "bad.csv"
    bad.write_text("id,x\n0,1\n")
    with pytest.raises(LatticeError):
        read_grid_csv(bad)


def test_connected_grid_does_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert grid_lattice(2, 2).is_connected
