import numpy as np
import pytest

from glvortex.grid import (
    WeightedMatrix,
    build_grid,
    default_grid,
    neg_laplacian,
    radial_schrodinger_matrix,
    symmetrize_to_standard,
    weighted_inner_product,
)


def test_build_grid_basic():
    g = build_grid(0.01, 20.0, 2000)
    assert g.nodes[0] == pytest.approx(0.01)
    assert g.nodes[-1] == pytest.approx(20.0)
    assert g.h == pytest.approx(0.0100, abs=2e-5)
    assert np.all(np.diff(g.nodes) > 0)
    assert np.all(g.weights > 0)


def test_weights_sum_matches_measure():
    g = build_grid(0.01, 20.0, 2000)
    assert np.sum(g.weights) == pytest.approx((20.0**2 - 0.01**2) / 2, rel=1e-6)
    gs = default_grid()
    assert np.sum(gs.weights) == pytest.approx(gs.r_max**2 / 2, rel=1e-5)


def test_build_grid_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_grid(1.0, 0.5, 100)
    with pytest.raises(ValueError):
        build_grid(0.0, 10.0, 100)
    with pytest.raises(ValueError):
        build_grid(0.01, 10.0, 8)


def test_inner_product_examples():
    g = build_grid(0.01, 20.0, 2000)
    one = np.ones(g.n_points)
    assert weighted_inner_product(g, one, one) == pytest.approx(199.99995, rel=1e-6)
    r = g.nodes
    assert weighted_inner_product(g, one, r) == pytest.approx(20.0**3 / 3, rel=1e-3)
    u = (r < 10.0).astype(float)
    v = (r >= 10.0).astype(float)
    assert weighted_inner_product(g, u, v) == 0.0
    with pytest.raises(ValueError):
        weighted_inner_product(g, one[:-1], one)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_quadrature_order(k):
    g = default_grid(n_points=2000)
    exact = g.r_max ** (k + 2) / (k + 2)
    got = float(np.sum(g.weights * g.nodes**k))
    assert abs(got - exact) / exact <= g.h**2


def test_neg_laplacian_psd_and_symmetric(grid_coarse):
    g = grid_coarse
    A = WeightedMatrix(g, 1, neg_laplacian(g), weighted_symmetric=True)
    assert A.weighted_symmetry_defect() <= 1e-12
    S = A.standard_form().toarray()
    evals = np.linalg.eigvalsh(S)
    assert evals.min() >= -1e-12


def test_schrodinger_action_on_r_squared():
    g = default_grid(n_points=2000)
    A = radial_schrodinger_matrix(g, 0.0, np.zeros(g.n_points))
    u = g.active_nodes**2
    y = A.apply(u)
    interior = (g.active_nodes > 0.5) & (g.active_nodes < 15.0)
    assert np.max(np.abs(y[interior] + 4.0)) <= 1e-6


def test_schrodinger_r_harmonic_for_m1():
    g = default_grid(n_points=2000)
    A = radial_schrodinger_matrix(g, 1.0, np.zeros(g.n_points))
    u = g.active_nodes.copy()
    y = A.apply(u)
    interior = (g.active_nodes > 0.5) & (g.active_nodes < 15.0)
    assert np.max(np.abs(y[interior])) <= 1e-9


def test_schrodinger_unit_potential_bottom(grid_coarse):
    # bottom of the essential spectrum: potential shifts -Delta_r by 1
    from glvortex.spectra import smallest_eigenpairs

    g = grid_coarse
    A = radial_schrodinger_matrix(g, 0.0, np.ones(g.n_points))
    res = smallest_eigenpairs(A, k=1)
    mu = res.eigenvalues[0]
    assert 1.0 <= mu <= 1.05
    # independent dense cross-check
    dense = A.standard_form().toarray()
    mu_dense = np.linalg.eigvalsh(dense)[0]
    assert mu == pytest.approx(mu_dense, abs=1e-10)


def test_symmetrize_identity_and_spectrum(grid_coarse):
    import scipy.sparse as sp

    g = grid_coarse
    ident = WeightedMatrix(g, 1, sp.identity(g.n_active, format="csr"), True)
    S = symmetrize_to_standard(ident, g)
    assert abs(S - sp.identity(g.n_active)).max() <= 1e-15

    A = radial_schrodinger_matrix(g, 4.0, np.cos(g.nodes))
    S = symmetrize_to_standard(A, g).toarray()
    d = abs(S - S.T).max()
    assert d <= 1e-12
    ew = np.linalg.eigvalsh(S)
    # same spectrum as the weighted operator (checked against dense similarity)
    w = g.cell_weights
    dense = A.mat.toarray()
    ev2 = np.linalg.eigvals(dense)
    assert np.max(np.abs(np.sort(ev2.real) - np.sort(ew))) <= 1e-8 * max(1, np.max(np.abs(ew)))


def test_refined_grid_alignment():
    g = default_grid(n_points=500)
    fine, idx = g.refined(9)
    assert np.allclose(fine.nodes[idx], g.nodes, rtol=0, atol=1e-12)
    assert fine.nodes[-1] == pytest.approx(g.r_max, abs=1e-12)
    with pytest.raises(ValueError):
        g.refined(4)


def test_banded_export_roundtrip(tmp_path, grid_coarse):
    g = grid_coarse
    A = radial_schrodinger_matrix(g, 1.0, np.ones(g.n_points))
    path = tmp_path / "band.txt"
    A.export_banded_text(path)
    lines = path.read_text().strip().split("\n")
    dim, bw = (int(x) for x in lines[0].split())
    assert dim == g.n_active and bw == A.bandwidth
    row0 = [float(x) for x in lines[1].split()]
    assert len(row0) == 2 * bw + 1
    dense = A._interleaved().toarray()
    assert row0[bw] == pytest.approx(dense[0, 0])
    assert row0[bw + 1] == pytest.approx(dense[0, 1])
