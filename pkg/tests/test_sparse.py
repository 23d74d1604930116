import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmoment.sparse import (SingularMatrixError, SparseMatrix, from_triplets,
                            solve)


class TestFromTriplets:
    def test_duplicates_summed(self):
        A = from_triplets(1, 1, [(0, 0, 1.0), (0, 0, 2.0)])
        assert A.nnz == 1
        assert A.values[0] == 3.0

    def test_empty(self):
        A = from_triplets(3, 3, [])
        assert A.nnz == 0
        np.testing.assert_allclose(A.todense(), 0.0)

    def test_transpose_swaps(self):
        A = from_triplets(2, 2, [(0, 1, 5.0), (1, 0, 7.0)])
        At = A.transpose().todense()
        np.testing.assert_allclose(At, [[0, 7], [5, 0]])

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            from_triplets(2, 2, [(2, 0, 1.0)])

    def test_sorted_indices(self):
        A = from_triplets(1, 4, [(0, 3, 1.0), (0, 1, 2.0), (0, 2, 3.0)])
        assert list(A.column_indices) == sorted(A.column_indices)

    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5),
                              st.floats(-10, 10)), max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_matches_dense_accumulation(self, entries):
        A = from_triplets(6, 6, entries)
        D = np.zeros((6, 6))
        for i, j, v in entries:
            D[i, j] += v
        np.testing.assert_allclose(A.todense(), D, atol=1e-12)


class TestSolve:
    def test_identity(self):
        A = from_triplets(3, 3, [(i, i, 1.0) for i in range(3)])
        b = np.array([1.0, -2.0, 0.5])
        x, report = solve(A, b)
        np.testing.assert_allclose(x, b)
        assert report.residual_norm < 1e-14

    def test_poisson_matches_dense(self):
        # 1-D Poisson, N=4, h=1/4, f = 1, zero boundary values
        h = 0.25
        n = 3
        entries = []
        for i in range(n):
            entries.append((i, i, 2.0 / h))
            if i > 0:
                entries.append((i, i - 1, -1.0 / h))
                entries.append((i - 1, i, -1.0 / h))
        A = from_triplets(n, n, entries)
        b = np.full(n, h)
        x, _ = solve(A, b)
        xd = np.linalg.solve(A.todense(), b)
        np.testing.assert_allclose(x, xd, atol=1e-13)

    def test_zero_matrix_singular(self):
        A = from_triplets(3, 3, [(0, 0, 0.0)])
        with pytest.raises(SingularMatrixError):
            solve(A, np.ones(3))

    def test_structurally_singular(self):
        A = from_triplets(3, 3, [(0, 0, 1.0), (1, 1, 1.0)])  # empty last row
        with pytest.raises(SingularMatrixError):
            solve(A, np.ones(3))

    def test_near_singular_pivot_reported(self):
        A = from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 1.0),
                                 (1, 0, 1.0), (1, 1, 1.0 + 1e-16)])
        with pytest.raises(SingularMatrixError):
            solve(A, np.ones(2))

    def test_rectangular_rejected(self):
        A = from_triplets(2, 3, [(0, 0, 1.0)])
        with pytest.raises(ValueError):
            solve(A, np.ones(2))

    def test_report_fields(self):
        A = from_triplets(2, 2, [(0, 0, 2.0), (1, 1, 4.0)])
        _, rep = solve(A, np.ones(2))
        assert rep.nnz_matrix == 2
        assert rep.nnz_factors >= 2
        assert rep.pivot_growth > 0


def _random_spd(rng, n):
    B = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.2)
    D = B @ B.T + n * np.eye(n)
    return D


def _random_diag_dominant(rng, n):
    B = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.3)
    np.fill_diagonal(B, np.abs(B).sum(axis=1) + 1.0)
    return B


class TestSolveProperties:
    def test_residual_over_many_seeds(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(5, 200))
            D = _random_spd(rng, n) if seed % 2 else _random_diag_dominant(rng, n)
            rows, cols = np.nonzero(D)
            A = from_triplets(n, n, zip(rows, cols, D[rows, cols]))
            b = rng.standard_normal(n)
            x, rep = solve(A, b)
            assert rep.relative_residual <= 1e-10

    def test_matches_dense_lu_small(self):
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            n = int(rng.integers(2, 65))
            D = _random_diag_dominant(rng, n)
            rows, cols = np.nonzero(D)
            A = from_triplets(n, n, zip(rows, cols, D[rows, cols]))
            b = rng.standard_normal(n)
            x, _ = solve(A, b)
            xd = np.linalg.solve(D, b)
            assert np.max(np.abs(x - xd)) <= 1e-9


def test_matrix_market_dump(tmp_path):
    A = from_triplets(2, 2, [(0, 0, 1.5), (1, 0, -2.0)])
    path = tmp_path / "mat.mtx"
    A.dump_matrix_market(path)
    text = path.read_text()
    assert "MatrixMarket" in text.splitlines()[0]
