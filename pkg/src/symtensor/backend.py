"""Kernel backend selection and execution plans for lowered kernels.

The compiled extension is used when it imports; otherwise, or when
``SYMTENSOR_BACKEND=python`` is set, the numpy implementation is used.

A plan fixes ``n``.  Each distinct free-label sum becomes a sparse count
matrix over compressed input indices (G = C x), and each lowered term a
scatter of G rows into output rows.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _kernels_py
from .maplabel import LoweredLabel
from .symidx import num_indices, rank_array

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_AVAILABLE = {"python": _kernels_py}
if _ckernels is not None:
    _AVAILABLE["cython"] = _ckernels


def _default() -> str:
    forced = os.environ.get("SYMTENSOR_BACKEND", "").strip().lower()
    if forced:
        if forced not in ("python", "cython"):
            raise ValueError(f"SYMTENSOR_BACKEND must be 'python' or 'cython', got {forced!r}")
        if forced not in _AVAILABLE:
            raise ImportError("SYMTENSOR_BACKEND=cython but the compiled extension is not available")
        return forced
    return "cython" if "cython" in _AVAILABLE else "python"


BACKEND = _default()


def available() -> list[str]:
    return sorted(_AVAILABLE)


def get(name: str | None = None):
    name = name or BACKEND
    if name not in _AVAILABLE:
        raise ValueError(f"backend {name!r} not available; have {available()}")
    return _AVAILABLE[name]


# ---------------------------------------------------------------------------
# plans


def _rows(it, width: int) -> np.ndarray:
    rows = list(it)
    return np.array(rows, dtype=np.int64).reshape(len(rows), width)


@lru_cache(maxsize=512)
def _count_matrix(n: int, k: int, pcounts: tuple, fcounts: tuple):
    """CSR (indptr, indices, data): row c counts free assignments per compressed index."""
    p, nf = len(pcounts), len(fcounts)
    combos = _rows(itertools.combinations(range(n), p), p)
    frees = _rows(itertools.product(range(n), repeat=nf), nf)
    nc, nw = len(combos), len(frees)
    parts = [np.broadcast_to(np.repeat(combos[:, j : j + 1], c, axis=1)[:, None, :], (nc, nw, c)) for j, c in enumerate(pcounts)]
    parts += [np.broadcast_to(np.repeat(frees[:, q : q + 1], c, axis=1)[None], (nc, nw, c)) for q, c in enumerate(fcounts)]
    if k:
        cols = rank_array(np.concatenate(parts, axis=2), n)
    else:
        cols = np.zeros((nc, nw), dtype=np.int64)
    nk = num_indices(n, k)
    keys, counts = np.unique((np.arange(nc)[:, None] * nk + cols).ravel(), return_counts=True)
    indptr = np.zeros(nc + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys // nk, minlength=nc), out=indptr[1:])
    return indptr, keys % nk, counts.astype(np.float64)


@lru_cache(maxsize=512)
def _scatter_index(n: int, l: int, out_counts: tuple, sel: tuple):
    a, p = len(out_counts), len(sel)
    combos = _rows(itertools.combinations(range(n), a), a)
    rows = rank_array(np.repeat(combos, out_counts, axis=1), n) if l else np.zeros(len(combos), dtype=np.int64)
    sub = combos[:, list(sel)]
    # lexicographic rank among strictly increasing p-subsets of range(n)
    g = np.full(len(combos), math.comb(n, p) - 1, dtype=np.int64)
    for i in range(p):
        g -= np.array([math.comb(n - 1 - int(v), p - i) for v in sub[:, i]], dtype=np.int64)
    return rows, g


@dataclass(frozen=True)
class Plan:
    n: int
    k: int
    l: int
    sums: tuple  # (indptr, indices, data) per distinct free sum
    ops: tuple  # (kernel index, rows, gidx, sum index, coef)
    nkernels: int


@lru_cache(maxsize=128)
def build_plan(lowered: tuple, n: int, k: int, l: int) -> Plan:
    keys: dict[tuple, int] = {}
    sums = []
    ops = []
    for d, labels in enumerate(lowered):
        for lab in labels:
            if len(lab.out_counts) > n:
                continue
            for term in lab.terms:
                sel = tuple(j for j, c in enumerate(term.lhs_counts) if c)
                key = (tuple(term.lhs_counts[j] for j in sel), term.free_counts)
                if key not in keys:
                    keys[key] = len(sums)
                    sums.append(_count_matrix(n, k, *key))
                rows, g = _scatter_index(n, l, lab.out_counts, sel)
                ops.append((d, rows, g, keys[key], float(term.coef)))
    return Plan(n, k, l, tuple(sums), tuple(ops), len(lowered))


def run_plan(plan: Plan, x: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Evaluate a plan on compressed inputs (B, N_k); returns (kernels, B, N_l)."""
    impl = get(backend)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != num_indices(plan.n, plan.k):
        raise ValueError(f"expected inputs of shape (B, {num_indices(plan.n, plan.k)}), got {x.shape}")
    xt = np.ascontiguousarray(x.T)
    G = [impl.spmm(indptr, idx, data, xt) for indptr, idx, data in plan.sums]
    out = np.zeros((plan.nkernels, num_indices(plan.n, plan.l), x.shape[0]))
    for d, rows, g, s, coef in plan.ops:
        impl.scatter_rows(out[d], rows, g, G[s], coef)
    return out.transpose(0, 2, 1)


def apply_lowered(
    lowered: Sequence[Sequence[LoweredLabel]],
    x: np.ndarray,
    n: int,
    k: int,
    l: int,
    backend: str | None = None,
) -> np.ndarray:
    """Evaluate lowered kernels on compressed inputs; shape (len(lowered), B, N_l)."""
    plan = build_plan(tuple(tuple(lab) for lab in lowered), n, k, l)
    return run_plan(plan, x, backend)
