"""Orbit-basis and diagram-basis matrices between symmetric powers.

Rows are indexed by the compressed order-l indices and columns by the
compressed order-k indices, both in rank order.  Matrices are 0/1 and stored
as coordinate lists.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .bipart import Bipartition, generate_bipartitions, set_partitions
from .symidx import full_to_compressed, num_indices, rank_array


@dataclass(frozen=True)
class BasisMatrix:
    k: int
    l: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    kind: str
    source: Bipartition

    @property
    def shape(self) -> tuple[int, int]:
        return (num_indices(self.n, self.l), num_indices(self.n, self.k))

    @property
    def nnz(self) -> int:
        return len(self.rows)

    def toarray(self, dtype=np.int64) -> np.ndarray:
        out = np.zeros(self.shape, dtype=dtype)
        out[self.rows, self.cols] = 1
        return out


def _wire_labels(blocks: Sequence[tuple[int, int]], which: int) -> np.ndarray:
    # block position of each wire on one side (0 = inputs, 1 = outputs)
    return np.array([b for b, blk in enumerate(blocks) for _ in range(blk[which])], dtype=np.int64)


def _build(pi: Bipartition, n: int, injective: bool, kind: str, strict: bool = True) -> BasisMatrix:
    t = pi.t
    if strict and t > n:
        raise ValueError(f"{pi} has {t} blocks, more than n={n}")
    tuples = list(itertools.permutations(range(n), t) if injective else itertools.product(range(n), repeat=t))
    labels = np.array(tuples, dtype=np.int64).reshape(len(tuples), t)
    out_wires = _wire_labels(pi.blocks, 1)
    in_wires = _wire_labels(pi.blocks, 0)
    rows = rank_array(labels[:, out_wires], n) if pi.l else np.zeros(len(labels), dtype=np.int64)
    cols = rank_array(labels[:, in_wires], n) if pi.k else np.zeros(len(labels), dtype=np.int64)
    ncols = num_indices(n, pi.k)
    # many labellings give the same matrix unit; keep each once
    keys = np.unique(rows * ncols + cols)
    return BasisMatrix(pi.k, pi.l, n, keys // ncols, keys % ncols, kind, pi)


@lru_cache(maxsize=4096)
def build_orbit_matrix(pi: Bipartition, n: int) -> BasisMatrix:
    """X_pi: label spiders with pairwise distinct values and collect the units."""
    return _build(pi, n, True, "orbit")


@lru_cache(maxsize=4096)
def build_diagram_matrix(pi: Bipartition, n: int, strict: bool = True) -> BasisMatrix:
    """D_pi: labels may repeat; equal labels fuse their spiders.

    With ``strict=False`` a diagram with more than n blocks is accepted; the
    result is then the sum of the orbit matrices of its coarsenings that fit.
    """
    return _build(pi, n, False, "diagram", strict)


# ---------------------------------------------------------------------------
# partial order


def _merge(groups) -> Bipartition:
    return Bipartition([(sum(b[0] for b in g), sum(b[1] for b in g)) for g in groups])


@lru_cache(maxsize=None)
def _coarsenings(pi: Bipartition) -> tuple[Bipartition, ...]:
    seen = {}
    for groups in set_partitions(pi.blocks):
        theta = _merge(groups)
        seen.setdefault(theta, None)
    return tuple(sorted(seen, key=Bipartition.sort_key, reverse=True))


def coarsenings(pi: Bipartition) -> list[Bipartition]:
    """Every theta with pi <= theta, each multiset once (finest first)."""
    return list(_coarsenings(pi))


def leq(pi: Bipartition, theta: Bipartition) -> bool:
    if (pi.k, pi.l) != (theta.k, theta.l):
        raise ValueError(f"(k,l) mismatch: {pi} vs {theta}")
    return theta in _coarsenings(pi)


def transition_matrix(k: int, l: int, n: int) -> np.ndarray:
    """Row i expands D_{pi_i} in the orbit basis, in canonical list order."""
    parts = generate_bipartitions(k, l, n)
    pos = {p: i for i, p in enumerate(parts)}
    out = np.zeros((len(parts), len(parts)), dtype=np.int64)
    for i, p in enumerate(parts):
        for theta in _coarsenings(p):
            if theta in pos:
                out[i, pos[theta]] = 1
    return out


# ---------------------------------------------------------------------------
# weight matrices


@dataclass
class WeightMatrix:
    k: int
    l: int
    n: int
    lambdas: np.ndarray


def assemble_weight_matrix(w: WeightMatrix) -> np.ndarray:
    """Sum of lambda_pi D_pi over the canonical bipartition list."""
    parts = generate_bipartitions(w.k, w.l, w.n)
    lam = np.asarray(w.lambdas)
    if lam.shape != (len(parts),):
        raise ValueError(f"expected {len(parts)} weights for (k,l,n)=({w.k},{w.l},{w.n}), got {lam.shape}")
    out = np.zeros((num_indices(w.n, w.l), num_indices(w.n, w.k)), dtype=np.result_type(lam, np.int64))
    for coef, p in zip(lam, parts):
        m = build_diagram_matrix(p, w.n)
        out[m.rows, m.cols] += coef
    return out


def unroll(m, k: int, l: int, n: int) -> np.ndarray:
    """Read every (I, J) over full tensor-power indices at (sorted I, sorted J)."""
    dense = m.toarray() if isinstance(m, BasisMatrix) else np.asarray(m)
    if dense.shape != (num_indices(n, l), num_indices(n, k)):
        raise ValueError(f"matrix of shape {dense.shape} does not match (k,l,n)=({k},{l},{n})")
    return dense[np.ix_(full_to_compressed(n, l), full_to_compressed(n, k))]


def exact_rank(rows) -> int:
    """Rank over the rationals by plain Gaussian elimination."""
    mat = [[Fraction(int(v)) for v in r] for r in rows]
    if not mat:
        return 0
    rank = 0
    ncols = len(mat[0])
    for c in range(ncols):
        piv = next((r for r in range(rank, len(mat)) if mat[r][c] != 0), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        p = mat[rank]
        for r in range(len(mat)):
            if r != rank and mat[r][c] != 0:
                f = mat[r][c] / p[c]
                mat[r] = [a - f * b for a, b in zip(mat[r], p)]
        rank += 1
        if rank == len(mat):
            break
    return rank
