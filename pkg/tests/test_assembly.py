import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from ordfem.assembly import (
    Norm,
    ProblemKind,
    ProblemSpec,
    assemble_gram,
    assemble_load,
    assemble_operator,
    bilinear_form,
    curl_matrix,
    divergence_matrix,
    export_matrix_market,
    gradient_matrix,
    linear_form,
)
from ordfem.errors import DegenerateSystemError, InvalidArgumentError
from ordfem.fe_spaces import BC, SpaceKind, make_space
from ordfem.manufactured import manufactured_problem


@pytest.fixture(scope="module", params=["bilaplacian", "quadcurl"])
def system2(request, mesh2):
    return assemble_operator(manufactured_problem(request.param), mesh2)


def test_dims(mesh2, mesh3):
    assert assemble_operator(ProblemSpec("bilaplacian"), mesh2).dims == (1, 29, 26)
    assert assemble_operator(ProblemSpec("bilaplacian"), mesh3).dims == (8, 141, 117)
    assert assemble_operator(ProblemSpec("quadcurl"), mesh2).dims == (26, 75, 72)
    assert assemble_operator(ProblemSpec("quadcurl"), mesh3).dims == (117, 294, 270)


def test_symmetric_and_sorted(system2):
    M = system2.matrix
    assert abs(M - M.T).max() / abs(M).max() < 1e-12
    assert M.has_sorted_indices and M.has_canonical_format


def test_mixed_block_equals_gram_composition(mesh3):
    bl = assemble_operator(ProblemSpec("bilaplacian"), mesh3)
    R, S, Y = bl.spaces
    G = gradient_matrix(R, Y)
    assert abs(bl.blocks["C_RY"] + (bl.gram_Y @ G).T).max() < 1e-13
    qc = assemble_operator(ProblemSpec("quadcurl"), mesh3)
    R, S, Y = qc.spaces
    Cu = curl_matrix(R, Y)
    assert abs(qc.blocks["C_RY"] + (assemble_gram(Y, Norm.L2) @ Cu).T).max() < 1e-13


def test_exact_sequence(mesh3):
    P1 = make_space(mesh3, SpaceKind.P1, BC.ESSENTIAL)
    N = make_space(mesh3, SpaceKind.Nedelec0, BC.ESSENTIAL)
    RT = make_space(mesh3, SpaceKind.RT0, BC.ESSENTIAL)
    P0 = make_space(mesh3, SpaceKind.P0)
    assert abs(curl_matrix(N, RT) @ gradient_matrix(P1, N)).max() == 0
    assert abs(divergence_matrix(RT, P0) @ curl_matrix(N, RT)).max() < 1e-12


def test_curl_matrix_matches_pointwise_curl(mesh2, rng):
    N = make_space(mesh2, SpaceKind.Nedelec0)
    RT = make_space(mesh2, SpaceKind.RT0)
    c = rng.standard_normal(N.num_dofs)
    # (curl w, tau) assembled directly equals M_RT (Cu c)
    direct = bilinear_form(RT, N, [("value", "curl", None)]) @ c
    via = assemble_gram(RT, Norm.L2) @ (curl_matrix(N, RT) @ c)
    assert np.abs(direct - via).max() < 1e-12


def test_constant_in_quadcurl_first_slot(mesh2):
    # a constant field c in N_h (no bc): quadratic form of the mass block equals |c|^2
    N = make_space(mesh2, SpaceKind.Nedelec0)
    c = np.array([1.0, -2.0, 0.5])
    x = mesh2.vertices
    coef = (x[mesh2.edges[:, 1]] - x[mesh2.edges[:, 0]]) @ c
    M = bilinear_form(N, N, [("value", "value", None)])
    assert coef @ M @ coef == pytest.approx(c @ c, rel=1e-12)
    K = bilinear_form(N, N, [("curl", "curl", None)])
    assert abs(coef @ K @ coef) < 1e-12


def test_gram_properties(mesh1, mesh2):
    P0 = make_space(mesh2, SpaceKind.P0)
    G = assemble_gram(P0, Norm.L2)
    assert np.allclose(G.toarray(), np.diag(mesh2.geometry().volume))
    M = assemble_gram(SpaceKind.P1, Norm.L2, mesh1)
    assert M.sum() == pytest.approx(1.0, abs=1e-14)
    Gc = assemble_gram(SpaceKind.Nedelec0, Norm.HCURL, mesh2, BC.ESSENTIAL).toarray()
    assert np.linalg.eigvalsh(Gc).min() > 0
    with pytest.raises(InvalidArgumentError):
        assemble_gram(SpaceKind.Nedelec0, Norm.HDIV, mesh2)
    with pytest.raises(InvalidArgumentError):
        assemble_gram(SpaceKind.P0, Norm.H1, mesh2)


def test_load_hat_function(mesh2):
    spec = ProblemSpec("bilaplacian", f1=lambda p: np.ones(len(p)))
    b = assemble_load(spec, mesh2)
    R = make_space(mesh2, SpaceKind.P1, BC.ESSENTIAL)
    centre = int(np.flatnonzero(~mesh2.boundary_vertices)[0])
    vol = mesh2.geometry().volume[np.any(mesh2.cells == centre, axis=1)].sum()
    assert b[0] == pytest.approx(vol / 4, rel=1e-13)
    assert np.all(b[R.num_dofs:] == 0)
    assert not np.any(assemble_load(ProblemSpec("quadcurl"), mesh2))


def test_load_constant_on_whitney(mesh2):
    c = np.array([0.4, 1.0, -0.7])
    N = make_space(mesh2, SpaceKind.Nedelec0, BC.ESSENTIAL)
    b = linear_form(N, lambda p: np.tile(c, (len(p), 1)))
    # int_K W_ij dx = |K|/4 (grad l_j - grad l_i): compare with a hand loop over cells
    g = mesh2.geometry()
    ref = np.zeros(N.num_dofs)
    from ordfem.mesh import LOCAL_EDGES

    for k in range(mesh2.num_cells):
        for le, (i, j) in enumerate(LOCAL_EDGES):
            d = N.cell_dofs[k, le]
            if d >= 0:
                ref[d] += g.volume[k] / 4 * c @ (g.grads[k, j] - g.grads[k, i])
    assert np.abs(b - ref).max() < 1e-13


def test_mute_term_on_gradients(mesh2, rng):
    # curl of an interpolated gradient vanishes, so the curl-curl block gives 0 there
    P1 = make_space(mesh2, SpaceKind.P1)
    N = make_space(mesh2, SpaceKind.Nedelec0)
    p = rng.standard_normal(P1.num_dofs)
    w = gradient_matrix(P1, N) @ p
    K = bilinear_form(N, N, [("curl", "curl", None)])
    assert abs(w @ K @ w) < 1e-12 * (1 + w @ w)


def test_deterministic(mesh2):
    a = assemble_operator(manufactured_problem("quadcurl"), mesh2).matrix
    b = assemble_operator(manufactured_problem("quadcurl"), mesh2).matrix
    assert np.array_equal(a.indptr, b.indptr) and np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.data, b.data)


def test_variable_and_matrix_coefficients(mesh2):
    s1 = assemble_operator(manufactured_problem("bilaplacian", "smooth"), mesh2)
    assert abs(s1.matrix - s1.matrix.T).max() < 1e-12
    A = np.array([[2.0, 0.5, 0], [0.5, 1.0, 0.1], [0, 0.1, 1.5]])
    s2 = assemble_operator(manufactured_problem("quadcurl", A), mesh2)
    assert abs(s2.matrix - s2.matrix.T).max() < 1e-12
    with pytest.raises(InvalidArgumentError):
        assemble_operator(ProblemSpec("bilaplacian", coefficient=lambda p: -np.ones(len(p))), mesh2)
    with pytest.raises(InvalidArgumentError):
        ProblemSpec("bilaplacian", coefficient=0.0)


def test_empty_space(mesh1):
    with pytest.raises(DegenerateSystemError):
        assemble_operator(ProblemSpec("bilaplacian"), mesh1)


def test_export(tmp_path, mesh2):
    s = assemble_operator(ProblemSpec("bilaplacian"), mesh2)
    path = tmp_path / "m.mtx"
    export_matrix_market(s.matrix, path)
    back = scipy.io.mmread(str(path))
    assert abs(sp.csr_matrix(back) - s.matrix).max() < 1e-15
    assert ProblemKind("quadcurl") is ProblemKind.QUADCURL
