"""Pure-numpy implementation of the kernel primitives; mirrors ``_ckernels``."""

from __future__ import annotations

import numpy as np


def spmm(indptr: np.ndarray, indices: np.ndarray, data: np.ndarray, xt: np.ndarray) -> np.ndarray:
    """Rows of a CSR matrix times the dense (N, B) array ``xt``."""
    nrows = len(indptr) - 1
    out = np.zeros((nrows, xt.shape[1]))
    if len(indices) == 0:
        return out
    weighted = xt[indices] * data[:, None]
    starts = indptr[:-1]
    nonempty = indptr[1:] > starts
    out[nonempty] = np.add.reduceat(weighted, starts[nonempty], axis=0)
    return out


def scatter_rows(out: np.ndarray, rows: np.ndarray, gidx: np.ndarray, G: np.ndarray, coef: float) -> None:
    """out[rows[i]] += coef * G[gidx[i]]; ``rows`` holds no repeats."""
    out[rows] += coef * G[gidx]
