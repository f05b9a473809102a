"""Eigensolver correctness against independent oracles and spectral laws."""

import numpy as np
import pytest
import sympy

from specsel.graphs import Graph, connected_components, laplacian, permute
from specsel.spectra import (Spectrum, eigenvalues_symmetric, spectrum,
                             write_spectrum_csv, zero_multiplicity)


def random_graph(rng, n, p):
    a = (rng.random((n, n)) < p).astype(np.uint8)
    a = np.triu(a, 1)
    return Graph(n, False, a + a.T)


def charpoly_roots(mat):
    """Exact characteristic polynomial roots of a small integer matrix.

    Coefficients come from integer Faddeev-LeVerrier recursion, roots from
    sympy's exact real-root isolation; fully independent of the solver
    under test.
    """
    n = mat.shape[0]
    a = [[int(v) for v in row] for row in mat]
    coeffs = [1]
    m = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    for k in range(1, n + 1):
        am = [[sum(a[i][h] * m[h][j] for h in range(n)) for j in range(n)]
              for i in range(n)]
        tr = sum(am[i][i] for i in range(n))
        assert tr % k == 0
        ck = -tr // k
        coeffs.append(ck)
        m = [[am[i][j] + (ck if i == j else 0) for j in range(n)]
             for i in range(n)]
    x = sympy.symbols("x")
    poly = sympy.Poly(sum(c * x ** (n - i) for i, c in enumerate(coeffs)), x)
    # real_roots already lists each root with its multiplicity
    return sorted(float(root.evalf(30)) for root in poly.real_roots())


# -- solver basics -------------------------------------------------------------

def test_solver_examples():
    np.testing.assert_allclose(
        eigenvalues_symmetric(np.array([[1.0, -1], [-1, 1]])).values, [0, 2],
        atol=1e-12)
    np.testing.assert_allclose(eigenvalues_symmetric(np.eye(3)).values,
                               [1, 1, 1], atol=0)
    np.testing.assert_allclose(
        eigenvalues_symmetric(np.diag([3.0, 1.0, 2.0])).values, [1, 2, 3],
        atol=0)


def test_solver_rejects_asymmetric():
    with pytest.raises(ValueError, match="not symmetric"):
        eigenvalues_symmetric(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="square"):
        eigenvalues_symmetric(np.zeros((2, 3)))


def test_solver_one_by_one():
    np.testing.assert_array_equal(
        eigenvalues_symmetric(np.array([[4.0]])).values, [4.0])


def test_solver_matches_lapack_on_random_matrices():
    rng = np.random.default_rng(2)
    for n in (2, 3, 4, 8, 17, 40, 90):
        m = rng.normal(size=(n, n))
        m = (m + m.T) / 2
        ours = eigenvalues_symmetric(m).values
        ref = np.linalg.eigvalsh(m)
        np.testing.assert_allclose(ours, ref,
                                   atol=1e-10 * max(1.0, np.abs(ref).max()))


def test_solver_trace_and_frobenius_identities():
    rng = np.random.default_rng(8)
    for _ in range(20):
        n = int(rng.integers(2, 40))
        m = rng.normal(size=(n, n))
        m = (m + m.T) / 2
        vals = eigenvalues_symmetric(m).values
        assert abs(vals.sum() - np.trace(m)) < 1e-8 * max(1, abs(np.trace(m)))
        assert abs((vals ** 2).sum() - (m * m).sum()) < 1e-7 * (m * m).sum()


def test_solver_clamps_only_roundoff_negatives():
    # a genuinely indefinite matrix keeps its negative eigenvalue
    vals = eigenvalues_symmetric(np.array([[0.0, 1.0], [1.0, 0.0]])).values
    np.testing.assert_allclose(vals, [-1, 1], atol=1e-12)


def test_charpoly_oracle_small_graphs():
    rng = np.random.default_rng(31)
    for _ in range(120):
        n = int(rng.integers(2, 7))
        g = random_graph(rng, n, rng.uniform(0.1, 0.9))
        lap = laplacian(g)
        ours = spectrum(g).values
        want = charpoly_roots(lap.astype(np.int64))
        np.testing.assert_allclose(ours, want, atol=1e-6)


# -- graph spectra -------------------------------------------------------------

def test_spectrum_examples():
    np.testing.assert_allclose(spectrum(Graph.complete(3)).values, [0, 3, 3],
                               atol=1e-9)
    p3 = Graph.from_edges(3, [(0, 1), (1, 2)])
    np.testing.assert_allclose(spectrum(p3).values, [0, 1, 3], atol=1e-9)
    for n in (4, 7, 12):
        vals = spectrum(Graph.complete(n)).values
        np.testing.assert_allclose(vals, [0] + [n] * (n - 1), atol=1e-8)


def test_spectrum_length_is_n_for_directed_graphs():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 0)], directed=True)
    s = spectrum(g)
    assert len(s) == 4
    assert s.values[0] >= 0


def test_zero_multiplicity_examples():
    assert zero_multiplicity(spectrum(Graph.empty(5))) == 5
    assert zero_multiplicity(spectrum(Graph.complete(5))) == 1
    two = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    assert zero_multiplicity(spectrum(two)) == 2


def test_zero_multiplicity_validates_eps():
    with pytest.raises(ValueError, match="positive"):
        zero_multiplicity(np.array([0.0, 1.0]), eps=0.0)


def test_spectral_laws_random_corpus():
    # sum rule, component rule, algebraic connectivity, non-negativity
    rng = np.random.default_rng(77)
    for _ in range(150):
        n = int(rng.integers(2, 45))
        g = random_graph(rng, n, rng.uniform(0.05, 0.95))
        s = spectrum(g)
        vals = s.values
        assert vals[0] >= -s.tol
        two_e = 2 * g.edge_count()
        assert abs(vals.sum() - two_e) <= 1e-6 * max(1, two_e)
        comps = connected_components(g)
        assert zero_multiplicity(s) == comps
        eps = 1e-6 * max(1.0, vals[-1])
        assert (vals[1] > eps) == (comps == 1)


def test_permutation_invariance():
    rng = np.random.default_rng(13)
    for _ in range(40):
        n = int(rng.integers(2, 30))
        g = random_graph(rng, n, 0.4)
        h = permute(g, rng.permutation(n))
        assert np.abs(spectrum(g).values - spectrum(h).values).max() <= 1e-8


def test_spectrum_is_ascending():
    rng = np.random.default_rng(99)
    for _ in range(30):
        g = random_graph(rng, int(rng.integers(2, 40)), 0.3)
        vals = spectrum(g).values
        assert np.all(np.diff(vals) >= 0)


# -- CSV ------------------------------------------------------------------------

def test_spectrum_csv(tmp_path):
    path = tmp_path / "spec.csv"
    rows = [("bernoulli", 0, [0.0, 3.0, 3.0]), ("sbm", 1, [0.0, 1.0, 3.0])]
    write_spectrum_csv(path, rows)
    text = path.read_text()
    lines = text.strip().split("\n")
    assert lines[0] == "model_label,replicate_id,lambda_1,lambda_2,lambda_3"
    assert lines[1] == "bernoulli,0,0,3,3"
    assert len(lines) == 3


def test_spectrum_csv_rejects_mixed_lengths(tmp_path):
    with pytest.raises(ValueError, match="mixed"):
        write_spectrum_csv(tmp_path / "x.csv",
                           [("a", 0, [0.0, 1.0]), ("b", 1, [0.0])])
    with pytest.raises(ValueError, match="no spectra"):
        write_spectrum_csv(tmp_path / "y.csv", [])


def test_spectrum_dataclass_is_immutable():
    s = Spectrum(np.array([0.0, 1.0]), 1e-8)
    with pytest.raises(ValueError):
        s.values[0] = 5.0
