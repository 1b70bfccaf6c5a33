import numpy as np
import pytest

from symtensor import _kernels_py, backend
from symtensor.layer import _kernels, _plan
from symtensor.maplabel import evaluate_compressed
from symtensor.symidx import num_indices

BACKENDS = backend.available()
CASES = [(2, 1, 3), (3, 1, 4), (2, 2, 4), (3, 0, 5), (1, 3, 3), (0, 2, 3), (3, 2, 2)]


def _random_csr(rng, nrows, ncols):
    dense = rng.standard_normal((nrows, ncols)) * (rng.random((nrows, ncols)) < 0.3)
    dense[0] = 0.0  # keep an empty row
    indptr = np.concatenate([[0], np.cumsum((dense != 0).sum(1))]).astype(np.int64)
    r, c = np.nonzero(dense)
    return dense, indptr, c.astype(np.int64), dense[r, c]


class TestPrimitives:
    @pytest.mark.parametrize("name", BACKENDS)
    def test_spmm(self, name, rng):
        impl = backend.get(name)
        dense, indptr, idx, data = _random_csr(rng, 9, 12)
        xt = np.ascontiguousarray(rng.standard_normal((12, 5)))
        np.testing.assert_allclose(impl.spmm(indptr, idx, data, xt), dense @ xt, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("name", BACKENDS)
    def test_spmm_empty(self, name):
        impl = backend.get(name)
        out = impl.spmm(np.zeros(4, np.int64), np.zeros(0, np.int64), np.zeros(0), np.ones((3, 2)))
        np.testing.assert_array_equal(out, np.zeros((3, 2)))

    @pytest.mark.parametrize("name", BACKENDS)
    def test_scatter_rows(self, name, rng):
        impl = backend.get(name)
        out = np.zeros((6, 3))
        G = rng.standard_normal((4, 3))
        rows = np.array([5, 0, 2], dtype=np.int64)
        gidx = np.array([1, 1, 3], dtype=np.int64)
        impl.scatter_rows(out, rows, gidx, G, -2.0)
        expect = np.zeros((6, 3))
        expect[rows] = -2.0 * G[gidx]
        np.testing.assert_allclose(out, expect)


class TestPlans:
    @pytest.mark.parametrize("name", BACKENDS)
    @pytest.mark.parametrize("k,l,n", CASES)
    def test_matches_reference(self, name, k, l, n, rng):
        diagrams, raw, _, _ = _kernels(k, l)
        x = rng.standard_normal((6, num_indices(n, k)))
        got = backend.run_plan(_plan(k, l, n), x, name)
        for d, ker, g in zip(diagrams, raw, got):
            expect = evaluate_compressed(ker, x, n) if d.t <= n else np.zeros_like(g)
            np.testing.assert_allclose(g, expect, rtol=1e-10, atol=1e-10)

    @pytest.mark.parametrize("k,l,n", CASES)
    def test_backends_agree(self, k, l, n, rng):
        x = rng.standard_normal((4, num_indices(n, k)))
        outs = [backend.run_plan(_plan(k, l, n), x, name) for name in BACKENDS]
        for o in outs[1:]:
            np.testing.assert_allclose(o, outs[0], rtol=1e-12, atol=1e-12)

    def test_apply_lowered(self, rng):
        _, _, _, lowered = _kernels(2, 1)
        x = rng.standard_normal((3, num_indices(3, 2)))
        np.testing.assert_allclose(backend.apply_lowered(lowered, x, 3, 2, 1), backend.run_plan(_plan(2, 1, 3), x))

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            backend.run_plan(_plan(2, 1, 3), np.zeros((2, 5)))


class TestSelection:
    def test_python_always_available(self):
        assert "python" in BACKENDS
        assert backend.get("python") is _kernels_py

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            backend.get("fortran")

    def test_default_is_available(self):
        assert backend.BACKEND in BACKENDS

    def test_compiled_extension_built(self):
        # the editable install compiles the extension; the fallback stays importable either way
        pytest.importorskip("symtensor._ckernels")
        assert "cython" in BACKENDS
