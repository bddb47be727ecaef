"""CSR container and backend kernel tests against dense references."""
import numpy as np
import pytest

from diffgraph import backend
from diffgraph.errors import DataError
from diffgraph.sparse import SparseMatrix


def random_csr(rng, n_rows, n_cols, density=0.3):
    dense = rng.normal(size=(n_rows, n_cols)) * (rng.random((n_rows, n_cols)) < density)
    return SparseMatrix.from_dense(dense), dense


def test_duplicate_triplets_are_summed():
    m = SparseMatrix.from_triplets([0, 0], [0, 0], [1.0, 2.0], 2, 2)
    assert m.nnz == 1
    assert m.to_dense()[0, 0] == 3.0


def test_zero_entries_are_dropped():
    m = SparseMatrix.from_triplets([0, 1], [1, 0], [0.0, 5.0], 2, 2)
    assert m.nnz == 1
    # cancellation inside a duplicate group is dropped too
    m2 = SparseMatrix.from_triplets([0, 0], [1, 1], [2.0, -2.0], 2, 2)
    assert m2.nnz == 0


def test_out_of_range_index_raises():
    with pytest.raises(DataError):
        SparseMatrix.from_triplets([0], [3], [1.0], 2, 2)
    with pytest.raises(DataError):
        SparseMatrix.from_triplets([-1], [0], [1.0], 2, 2)


def test_dense_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m, dense = random_csr(rng, int(rng.integers(1, 12)), int(rng.integers(1, 12)))
        m.validate()
        np.testing.assert_array_equal(m.to_dense(), dense)


def test_identity_and_row_sums():
    eye = SparseMatrix.identity(4)
    np.testing.assert_array_equal(eye.to_dense(), np.eye(4))
    np.testing.assert_array_equal(eye.row_sums(), np.ones(4))


@pytest.mark.parametrize("name", ["numpy", "numba"])
def test_matmul_matches_dense(name):
    backend.use_backend(name)
    try:
        rng = np.random.default_rng(1)
        for _ in range(25):
            n, k, m = (int(x) for x in rng.integers(1, 14, size=3))
            a, da = random_csr(rng, n, k)
            b, db = random_csr(rng, k, m)
            prod = a.matmul(b)
            prod.validate()
            np.testing.assert_allclose(prod.to_dense(), da @ db, atol=1e-13)
    finally:
        backend.use_backend("numba")


@pytest.mark.parametrize("name", ["numpy", "numba"])
def test_dense_matmul_matches_dense(name):
    backend.use_backend(name)
    try:
        rng = np.random.default_rng(2)
        for _ in range(25):
            n, k, d = (int(x) for x in rng.integers(1, 14, size=3))
            a, da = random_csr(rng, n, k)
            x = rng.normal(size=(k, d))
            np.testing.assert_allclose(a.dense_matmul(x), da @ x, atol=1e-13)
    finally:
        backend.use_backend("numba")


def test_backends_bit_identical():
    # same accumulation order in both paths -> exactly equal floats
    rng = np.random.default_rng(3)
    for _ in range(15):
        n, k, m = (int(x) for x in rng.integers(1, 16, size=3))
        a, _ = random_csr(rng, n, k, density=0.5)
        b, _ = random_csr(rng, k, m, density=0.5)
        x = rng.normal(size=(k, 5))
        results = {}
        for name in ("numpy", "numba"):
            backend.use_backend(name)
            results[name] = (
                a.matmul(b),
                a.dense_matmul(x),
                a.transpose(),
                a.add(a.scale(-0.5)),
            )
        backend.use_backend("numba")
        for left, right in zip(results["numpy"], results["numba"]):
            if isinstance(left, SparseMatrix):
                assert left.n_rows == right.n_rows and left.n_cols == right.n_cols
                np.testing.assert_array_equal(left.row_offsets, right.row_offsets)
                np.testing.assert_array_equal(left.col_indices, right.col_indices)
                np.testing.assert_array_equal(left.values, right.values)
            else:
                np.testing.assert_array_equal(left, right)


def test_transpose_add_scale():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n, m = (int(x) for x in rng.integers(1, 12, size=2))
        a, da = random_csr(rng, n, m)
        b, db = random_csr(rng, n, m)
        np.testing.assert_array_equal(a.transpose().to_dense(), da.T)
        np.testing.assert_allclose(a.add(b).to_dense(), da + db, atol=1e-14)
        np.testing.assert_allclose(a.scale(2.5).to_dense(), 2.5 * da, atol=1e-14)
        d_row = rng.normal(size=n)
        d_col = rng.normal(size=m)
        np.testing.assert_allclose(a.scale_rows(d_row).to_dense(), d_row[:, None] * da, atol=1e-14)
        np.testing.assert_allclose(a.scale_cols(d_col).to_dense(), da * d_col[None, :], atol=1e-14)


def test_diagonal_and_get_pairs():
    rng = np.random.default_rng(5)
    m, dense = random_csr(rng, 8, 8, density=0.4)
    np.testing.assert_array_equal(m.diagonal(), np.diag(dense))
    rows = rng.integers(0, 8, size=20)
    cols = rng.integers(0, 8, size=20)
    np.testing.assert_array_equal(m.get_pairs(rows, cols), dense[rows, cols])
    empty = SparseMatrix.zeros(3, 3)
    np.testing.assert_array_equal(empty.get_pairs([0, 2], [1, 2]), np.zeros(2))


def test_matmul_products_keep_invariants():
    rng = np.random.default_rng(6)
    for _ in range(10):
        a, _ = random_csr(rng, 9, 9, density=0.5)
        prod = a.matmul(a).add(a.scale(-1.0))
        prod.validate()


def test_immutability():
    m = SparseMatrix.identity(3)
    with pytest.raises(ValueError):
        m.values[0] = 2.0


def test_shape_mismatch_errors():
    a = SparseMatrix.identity(3)
    b = SparseMatrix.identity(4)
    with pytest.raises(DataError):
        a.matmul(b)
    with pytest.raises(DataError):
        a.add(b)
    with pytest.raises(DataError):
        a.dense_matmul(np.zeros((4, 2)))
