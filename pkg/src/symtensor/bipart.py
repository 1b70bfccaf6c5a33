"""(k,l)-bipartitions with a bounded number of blocks.

A bipartition is a multiset of blocks ``(x, y)``: ``x`` input wires and ``y``
output wires attached to one spider.  Blocks are kept in canonical order
(``y`` descending, then ``x`` descending) so tuple equality is multiset
equality.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

Block = tuple[int, int]


def _canonical(blocks: Iterable[Sequence[int]]) -> tuple[Block, ...]:
    return tuple(sorted(((int(x), int(y)) for x, y in blocks), key=lambda b: (-b[1], -b[0])))


@dataclass(frozen=True, order=False)
class Bipartition:
    blocks: tuple[Block, ...]

    def __init__(self, blocks: Iterable[Sequence[int]]):
        canon = _canonical(blocks)
        for x, y in canon:
            if x < 0 or y < 0 or x + y == 0:
                raise ValueError(f"invalid block [{x},{y}]")
        object.__setattr__(self, "blocks", canon)

    @property
    def k(self) -> int:
        return sum(x for x, _ in self.blocks)

    @property
    def l(self) -> int:
        return sum(y for _, y in self.blocks)

    @property
    def t(self) -> int:
        return len(self.blocks)

    def sort_key(self):
        """Order used for the canonical bipartition list: block count, then blocks."""
        return (len(self.blocks), self.blocks)

    def to_json(self) -> str:
        return json.dumps({"blocks": [list(b) for b in self.blocks]})

    @classmethod
    def from_json(cls, text: str) -> "Bipartition":
        return cls(json.loads(text)["blocks"])

    @classmethod
    def parse(cls, text: str) -> "Bipartition":
        """Accept JSON (``{"blocks": ...}`` or a bare list) or ``"2,1;1,0"``."""
        text = text.strip()
        if text.startswith("{"):
            return cls.from_json(text)
        if text.startswith("["):
            return cls(json.loads(text))
        blocks = []
        for part in text.split(";"):
            x, y = part.split(",")
            blocks.append((int(x), int(y)))
        return cls(blocks)

    def __str__(self) -> str:
        return "{" + ", ".join(f"[{x},{y}]" for x, y in self.blocks) + "}"

    def __repr__(self) -> str:
        return f"Bipartition({list(self.blocks)})"


def integer_partitions(m: int, max_parts: int) -> list[tuple[int, ...]]:
    """Partitions of m into at most max_parts parts, padded with zeros, reverse lex."""
    if m < 0 or max_parts < 1:
        raise ValueError(f"need m >= 0 and max_parts >= 1, got {m}, {max_parts}")
    out: list[tuple[int, ...]] = []

    def rec(remaining: int, cap: int, prefix: list[int]) -> None:
        if remaining == 0:
            out.append(tuple(prefix) + (0,) * (max_parts - len(prefix)))
            return
        if len(prefix) == max_parts:
            return
        for part in range(min(remaining, cap), 0, -1):
            prefix.append(part)
            rec(remaining - part, part, prefix)
            prefix.pop()

    rec(m, m, [])
    return out


def weak_compositions(m: int, n: int) -> list[tuple[int, ...]]:
    """All n-tuples of non-negative integers summing to m (stars and bars)."""
    if m < 0 or n < 1:
        raise ValueError(f"need m >= 0 and n >= 1, got {m}, {n}")
    out = []
    for bars in itertools.combinations(range(m + n - 1), n - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(m + n - 1 - prev - 1)
        out.append(tuple(parts))
    return out


def fits_inside(mu: Sequence[int], lam: Sequence[int]) -> bool:
    if len(mu) != len(lam):
        raise ValueError(f"length mismatch: {len(mu)} vs {len(lam)}")
    return all(a >= b for a, b in zip(lam, mu))


def duplication_test(lam: Sequence[int], mu: Sequence[int]) -> bool:
    """True (pass) iff mu is weakly decreasing on every run of equal non-zero parts of lam."""
    if len(mu) != len(lam):
        raise ValueError(f"length mismatch: {len(mu)} vs {len(lam)}")
    for i in range(1, len(lam)):
        if lam[i] != 0 and lam[i] == lam[i - 1] and mu[i] > mu[i - 1]:
            return False
    return True


def _iter_bipartitions(k: int, l: int, n: int) -> Iterator[Bipartition]:
    if k == 0 and l == 0:
        yield Bipartition([])
        return
    m_is_l = l <= k
    m = l if m_is_l else k
    for lam in integer_partitions(k + l, n):
        support = sum(1 for p in lam if p)
        # compositions with support beyond lam's parts are discarded up front
        for head in weak_compositions(m, support):
            mu = head + (0,) * (n - support)
            if not duplication_test(lam, mu) or not fits_inside(mu, lam):
                continue
            if m_is_l:
                blocks = [(a - b, b) for a, b in zip(lam[:support], head)]
            else:
                blocks = [(b, a - b) for a, b in zip(lam[:support], head)]
            yield Bipartition(blocks)


@lru_cache(maxsize=None)
def _generate_cached(k: int, l: int, n: int) -> tuple[Bipartition, ...]:
    return tuple(sorted(_iter_bipartitions(k, l, n), key=Bipartition.sort_key))


def generate_bipartitions(k: int, l: int, n: int) -> list[Bipartition]:
    """All (k,l)-bipartitions with at most n blocks, in canonical list order."""
    if k < 0 or l < 0 or n < 1:
        raise ValueError(f"need k, l >= 0 and n >= 1, got k={k}, l={l}, n={n}")
    return list(_generate_cached(k, l, n))


def count_pn(k: int, l: int, n: int) -> int:
    return len(_generate_cached(k, l, n))


def count_p(k: int, l: int) -> int:
    return count_pn(k, l, max(k + l, 1))


def set_partitions(items: Sequence) -> Iterator[list[list]]:
    """All set partitions of ``items`` (by position), blocks in first-element order."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
