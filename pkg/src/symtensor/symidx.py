"""Indexing of symmetric tensor powers and compressed symmetric-tensor storage.

Indices are 1-based at the public boundary (matching the usual ``T_{1,1,2}``
notation) and 0-based inside the rank arithmetic.  A weakly increasing
k-tuple over ``[n]`` is ranked in lexicographic order through the
combinatorial number system, so rank/unrank never need a lookup table.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np


def num_indices(n: int, k: int) -> int:
    """Cardinality of the index set of the k-th symmetric power of R^n."""
    return math.comb(k + n - 1, k)


def enumerate_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """All weakly increasing k-tuples over 1..n in lexicographic order."""
    if n < 1 or k < 0:
        raise ValueError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    return list(itertools.combinations_with_replacement(range(1, n + 1), k))


def _check_index(index: Sequence[int], n: int) -> None:
    prev = 1
    for v in index:
        if not 1 <= v <= n:
            raise ValueError(f"entry {v} outside 1..{n}")
        if v < prev:
            raise ValueError(f"index {tuple(index)} is not weakly increasing")
        prev = v


def rank(index: Sequence[int], n: int) -> int:
    """Lexicographic position of a weakly increasing 1-based tuple."""
    _check_index(index, n)
    k = len(index)
    total = k + n - 1
    r = math.comb(total, k) - 1
    for i, v in enumerate(index):
        c = (v - 1) + i
        r -= math.comb(total - 1 - c, k - i)
    return r


def unrank(r: int, n: int, k: int) -> tuple[int, ...]:
    size = num_indices(n, k)
    if not 0 <= r < size:
        raise IndexError(f"rank {r} out of range for n={n}, k={k} (size {size})")
    total = k + n - 1
    # walk the complement colex representation greedily
    remaining = size - 1 - r
    out = []
    top = total
    for i in range(k):
        j = k - i
        d = j - 1
        while math.comb(d + 1, j) <= remaining and d + 1 < top:
            d += 1
        remaining -= math.comb(d, j)
        top = d
        c = total - 1 - d
        out.append(c - i + 1)
    return tuple(out)


@lru_cache(maxsize=None)
def _rank_table(n: int, k: int) -> np.ndarray:
    return np.array([[math.comb(m, j) for j in range(k + 1)] for m in range(n + k)], dtype=np.int64)


def rank_array(values: np.ndarray, n: int) -> np.ndarray:
    """Vectorised rank of 0-based index rows (any order; rows are sorted first).

    ``values`` has shape ``(..., k)``; the result has shape ``(...)``.
    """
    values = np.sort(np.asarray(values, dtype=np.int64), axis=-1)
    k = values.shape[-1]
    total = k + n - 1
    table = _rank_table(n, k)
    r = np.full(values.shape[:-1], math.comb(total, k) - 1, dtype=np.int64)
    for i in range(k):
        c = values[..., i] + i
        r -= table[total - 1 - c, k - i]
    return r


@lru_cache(maxsize=64)
def multiplicities(n: int, k: int) -> np.ndarray:
    """Number of full k-tuples that sort to each compressed index (multinomials)."""
    out = np.empty(num_indices(n, k), dtype=np.int64)
    fk = math.factorial(k)
    for r, idx in enumerate(itertools.combinations_with_replacement(range(n), k)):
        denom = 1
        for _, grp in itertools.groupby(idx):
            denom *= math.factorial(sum(1 for _ in grp))
        out[r] = fk // denom
    return out


@lru_cache(maxsize=64)
def full_to_compressed(n: int, k: int) -> np.ndarray:
    """Rank of sorted(J) for every full index J in C (row-major) order."""
    if k == 0:
        return np.zeros(1, dtype=np.int64)
    grid = np.array(list(itertools.product(range(n), repeat=k)), dtype=np.int64)
    return rank_array(grid, n)


# ---------------------------------------------------------------------------
# permutations and the S_n action


def identity(n: int) -> tuple[int, ...]:
    return tuple(range(1, n + 1))


def from_cycles(cycles: Iterable[Sequence[int]], n: int) -> tuple[int, ...]:
    """Build the image tuple of a permutation given in (1-based) cycle notation."""
    images = list(range(1, n + 1))
    for cyc in cycles:
        if any(not 1 <= v <= n for v in cyc):
            raise ValueError(f"cycle {tuple(cyc)} has entries outside 1..{n}")
        for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
            images[a - 1] = b
    if sorted(images) != list(range(1, n + 1)):
        raise ValueError(f"cycles {cycles} do not define a permutation of 1..{n}")
    return tuple(images)


def compose(sigma: Sequence[int], tau: Sequence[int]) -> tuple[int, ...]:
    """(sigma tau)(x) = sigma(tau(x))."""
    return tuple(sigma[t - 1] for t in tau)


def random_permutation(n: int, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(v) + 1 for v in rng.permutation(n))


def act_index(sigma: Sequence[int], index: Sequence[int]) -> tuple[int, ...]:
    """Apply sigma entrywise and re-sort."""
    return tuple(sorted(sigma[v - 1] for v in index))


def _act_positions(sigma: Sequence[int], n: int, k: int) -> np.ndarray:
    # position of act_index(sigma, I) for every compressed I, in rank order
    if k == 0:
        return np.zeros(1, dtype=np.int64)
    perm = np.asarray(sigma, dtype=np.int64) - 1
    idx = np.array(list(itertools.combinations_with_replacement(range(n), k)), dtype=np.int64)
    return rank_array(perm[idx], n)


# ---------------------------------------------------------------------------
# compressed storage


@dataclass(frozen=True)
class SymmetricTensor:
    """A symmetric order-k tensor over R^n, one value per weakly increasing index."""

    n: int
    k: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (num_indices(self.n, self.k),):
            raise ValueError(
                f"expected {num_indices(self.n, self.k)} values for n={self.n}, k={self.k}, "
                f"got shape {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, n: int, k: int) -> "SymmetricTensor":
        return cls(n, k, np.zeros(num_indices(n, k)))

    @classmethod
    def random(cls, n: int, k: int, rng: np.random.Generator) -> "SymmetricTensor":
        return cls(n, k, rng.standard_normal(num_indices(n, k)))

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SymmetricTensor":
        """Compress a dense tensor, reading each entry at its sorted index.

        The dense tensor is assumed symmetric; no symmetrisation is done.
        """
        dense = np.asarray(dense, dtype=np.float64)
        k = dense.ndim
        n = dense.shape[0] if k else 1
        idx = list(itertools.combinations_with_replacement(range(n), k))
        return cls(n, k, np.array([dense[i] for i in idx]) if k else dense.reshape(1))

    def to_dense(self) -> np.ndarray:
        flat = self.values[full_to_compressed(self.n, self.k)]
        return flat.reshape((self.n,) * self.k)

    def __getitem__(self, index: Sequence[int]) -> float:
        return get_unrolled(self, index)

    # io -----------------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "k": self.k, "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "SymmetricTensor":
        obj = json.loads(text)
        return cls(int(obj["n"]), int(obj["k"]), np.asarray(obj["values"], dtype=np.float64))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "value"])
        for r, v in enumerate(self.values):
            w.writerow([r, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n: int, k: int) -> "SymmetricTensor":
        rows = list(csv.reader(io.StringIO(text)))
        vals = np.zeros(num_indices(n, k))
        for row in rows[1:]:
            vals[int(row[0])] = float(row[1])
        return cls(n, k, vals)


def get_unrolled(tensor: SymmetricTensor, index: Sequence[int]) -> float:
    """Value at an arbitrary (unsorted) 1-based k-tuple."""
    if len(index) != tensor.k:
        raise ValueError(f"expected a {tensor.k}-tuple, got {tuple(index)}")
    for v in index:
        if not 1 <= v <= tensor.n:
            raise IndexError(f"entry {v} outside 1..{tensor.n}")
    return float(tensor.values[rank(sorted(index), tensor.n)])


def act_tensor(sigma: Sequence[int], tensor: SymmetricTensor) -> SymmetricTensor:
    """The representation of S_n on the symmetric power: out[sigma.I] = in[I]."""
    if len(sigma) != tensor.n:
        raise ValueError(f"permutation on {len(sigma)} points applied to n={tensor.n}")
    pos = _act_positions(tuple(sigma), tensor.n, tensor.k)
    out = np.empty_like(tensor.values)
    out[pos] = tensor.values
    return SymmetricTensor(tensor.n, tensor.k, out)


def act_batch(sigma: Sequence[int], values: np.ndarray, n: int, k: int) -> np.ndarray:
    """act_tensor over the last axis of a batch of compressed tensors."""
    pos = _act_positions(tuple(sigma), n, k)
    out = np.empty_like(values)
    out[..., pos] = values
    return out
