"""Map-label compiler: from a bipartition diagram to a matrix-free kernel.

Labels are small integers.  Output-bearing spiders receive fixed labels
``0..a-1``; spiders without outputs are either merged into a fixed label or
given free labels ``a, a+1, ...`` that are summed over.  A compiled
:class:`Kernel` is independent of ``n``: a label pattern with more distinct
labels than ``n`` simply has no injective assignment and contributes nothing.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .bipart import Bipartition, set_partitions
from .symidx import num_indices, rank_array

Pattern = tuple[int, ...]


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True, order=True)
class PartialDiagram:
    """Output-bearing spiders labelled 0..a-1, the rest unlabelled.

    ``fixed[L] = (x, y)`` for label ``L``; ``unlabelled`` lists the input
    counts of the output-free spiders, largest first.
    """

    fixed: tuple[tuple[int, int], ...]
    unlabelled: tuple[int, ...]

    @property
    def grouped_output(self) -> Pattern:
        return tuple(L for L, (_, y) in enumerate(self.fixed) for _ in range(y))


@dataclass(frozen=True, order=True)
class FullDiagram:
    """Every spider labelled and equal labels merged.

    Free labels are numbered after the fixed ones in the order of ``free``
    (input counts, largest first).
    """

    fixed: tuple[tuple[int, int], ...]
    free: tuple[int, ...]

    @property
    def spiders(self) -> int:
        return len(self.fixed) + len(self.free)

    @property
    def grouped_output(self) -> Pattern:
        return tuple(L for L, (_, y) in enumerate(self.fixed) for _ in range(y))


@dataclass(frozen=True)
class Term:
    coef: int
    tuple: Pattern
    free: tuple[int, ...]
    distinct: bool
    spiders: int = 0

    def to_dict(self) -> dict:
        return {
            "coef": self.coef,
            "tuple": list(self.tuple),
            "free": list(self.free),
            "distinct": self.distinct,
            "spiders": self.spiders,
        }


@dataclass(frozen=True)
class GroupedMapLabel:
    lhs: Pattern
    rhs: Pattern
    free: tuple[int, ...]
    spiders: int


@dataclass
class LeftGroupedMapLabel:
    lhs: Pattern
    terms: list[Term] = field(default_factory=list)


@dataclass(frozen=True)
class MapLabel:
    lhs: Pattern
    terms: tuple[Term, ...]
    min_spiders: int

    @property
    def labels(self) -> int:
        return len(set(self.lhs))


@dataclass(frozen=True)
class Kernel:
    diagram: Bipartition
    labels: tuple[MapLabel, ...]

    @property
    def k(self) -> int:
        return self.diagram.k

    @property
    def l(self) -> int:
        return self.diagram.l

    @property
    def simplified(self) -> bool:
        return all(not t.distinct for lab in self.labels for t in lab.terms)

    def to_dict(self) -> dict:
        return {
            "diagram": {"blocks": [list(b) for b in self.diagram.blocks]},
            "labels": [
                {
                    "lhs": list(lab.lhs),
                    "terms": [t.to_dict() for t in lab.terms],
                    "min_spiders": lab.min_spiders,
                }
                for lab in self.labels
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "Kernel":
        labels = []
        for lab in obj["labels"]:
            terms = tuple(
                Term(
                    int(t["coef"]),
                    tuple(int(v) for v in t["tuple"]),
                    tuple(int(v) for v in t["free"]),
                    bool(t["distinct"]),
                    int(t.get("spiders", 0)),
                )
                for t in lab["terms"]
            )
            labels.append(MapLabel(tuple(int(v) for v in lab["lhs"]), terms, int(lab["min_spiders"])))
        return cls(Bipartition(obj["diagram"]["blocks"]), tuple(labels))

    @classmethod
    def from_json(cls, text: str) -> "Kernel":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# small combinatorial helpers


def _first_occurrence(seq: Sequence[int], keep: Iterable[int] = (), start: int | None = None) -> Pattern:
    """Relabel ``seq`` by first occurrence, leaving labels in ``keep`` untouched."""
    keep = set(keep)
    nxt = start if start is not None else 0
    mapping: dict[int, int] = {}
    out = []
    for v in seq:
        if v in keep:
            out.append(v)
            continue
        if v not in mapping:
            mapping[v] = nxt
            nxt += 1
        out.append(mapping[v])
    return tuple(out)


def _distinct_permutations(seq: Sequence[int]) -> list[Pattern]:
    return sorted(set(itertools.permutations(seq)))


def _is_blocky(lhs: Pattern) -> bool:
    seen = set()
    prev = None
    for v in lhs:
        if v != prev:
            if v in seen:
                return False
            seen.add(v)
            prev = v
    return True


# ---------------------------------------------------------------------------
# Subprocedure I


def subprocedure_I(d: Bipartition) -> dict[Pattern, list[PartialDiagram]]:
    """All grouped outputs of ``d`` with their partially labelled diagrams.

    Every way of fusing the output-bearing spiders is taken in one pass
    (set partitions), so no second merging round is needed.
    """
    outputs = [b for b in d.blocks if b[1] > 0]
    unlabelled = tuple(sorted((b[0] for b in d.blocks if b[1] == 0), reverse=True))
    found: dict[Pattern, set[PartialDiagram]] = defaultdict(set)
    for groups in set_partitions(outputs):
        merged = [(sum(b[0] for b in g), sum(b[1] for b in g)) for g in groups]
        merged.sort(key=lambda b: (-b[1], -b[0]))
        by_y = [list(grp) for _, grp in itertools.groupby(merged, key=lambda b: b[1])]
        # within equal output counts, which label carries which input count matters
        choices = [_distinct_permutations([x for x, _ in grp]) for grp in by_y]
        for combo in itertools.product(*choices):
            fixed = tuple((x, grp[0][1]) for grp, xs in zip(by_y, combo) for x in xs)
            p = PartialDiagram(fixed, unlabelled)
            found[p.grouped_output].add(p)
    keys = sorted(found, key=lambda pat: (-len(set(pat)), pat))
    return {key: sorted(found[key]) for key in keys}


# ---------------------------------------------------------------------------
# Subprocedure II


def subprocedure_II(p: PartialDiagram) -> list[FullDiagram]:
    """Merged, deduplicated fully labelled diagrams for one partial diagram."""
    a = len(p.fixed)
    out: set[FullDiagram] = set()
    for groups in set_partitions(list(p.unlabelled)):
        # each group goes to a distinct fixed label or becomes a free label
        for targets in itertools.product(range(-1, a), repeat=len(groups)):
            used = [t for t in targets if t >= 0]
            if len(used) != len(set(used)):
                continue
            fixed = [list(b) for b in p.fixed]
            free = []
            for g, t in zip(groups, targets):
                if t >= 0:
                    fixed[t][0] += sum(g)
                else:
                    free.append(sum(g))
            out.add(FullDiagram(tuple(tuple(b) for b in fixed), tuple(sorted(free, reverse=True))))
    return sorted(out)


def count_premerge_labellings(p: PartialDiagram) -> int:
    """Labellings of the unlabelled spiders before merging.

    Counted modulo swapping spiders with equal input counts and relabelling
    free labels; fixed labels may repeat.
    """
    a, s = len(p.fixed), len(p.unlabelled)
    xs = p.unlabelled
    swaps = [perm for perm in itertools.permutations(range(s)) if all(xs[i] == xs[perm[i]] for i in range(s))]
    keys = set()
    for assign in itertools.product(range(a + s), repeat=s):
        best = min(_first_occurrence([assign[i] for i in perm], keep=range(a), start=a) for perm in swaps)
        keys.add(best)
    return len(keys)


# ---------------------------------------------------------------------------
# Subprocedures III, IV, V


def subprocedure_III(f: FullDiagram) -> GroupedMapLabel:
    a = len(f.fixed)
    rhs = [L for L, (x, _) in enumerate(f.fixed) for _ in range(x)]
    rhs += [a + q for q, x in enumerate(f.free) for _ in range(x)]
    free = tuple(range(a, a + len(f.free)))
    return GroupedMapLabel(f.grouped_output, tuple(rhs), free, f.spiders)


def subprocedure_IV(g: GroupedMapLabel) -> LeftGroupedMapLabel:
    """Every permutation of the rhs, up to relabelling the free labels."""
    fixed = set(g.lhs)
    start = len(fixed)
    seen: dict[Pattern, Pattern] = {}
    for perm in _distinct_permutations(g.rhs):
        seen.setdefault(_first_occurrence(perm, keep=fixed, start=start), perm)
    terms = [Term(1, perm, g.free, True, g.spiders) for perm in seen.values()]
    return LeftGroupedMapLabel(g.lhs, terms)


def subprocedure_V(lg: LeftGroupedMapLabel) -> list[MapLabel]:
    """Every permutation of the lhs, up to relabelling all labels."""
    seen: dict[Pattern, Pattern] = {}
    for perm in _distinct_permutations(lg.lhs):
        seen.setdefault(_first_occurrence(perm), perm)
    a = len(set(lg.lhs))
    return [MapLabel(perm, tuple(lg.terms), a) for perm in seen.values()]


# ---------------------------------------------------------------------------
# orchestration


@lru_cache(maxsize=None)
def _compile(d: Bipartition, n: int | None) -> Kernel:
    labels: list[MapLabel] = []
    for pattern, partials in subprocedure_I(d).items():
        fulls: set[FullDiagram] = set()
        for p in partials:
            fulls.update(subprocedure_II(p))
        if n is not None:
            fulls = {f for f in fulls if f.spiders <= n}
        if not fulls:
            continue
        combined = LeftGroupedMapLabel(pattern)
        for f in sorted(fulls):
            combined.terms.extend(subprocedure_IV(subprocedure_III(f)).terms)
        labels.extend(subprocedure_V(combined))
    return Kernel(d, tuple(labels))


def compile_kernel(d: Bipartition, n: int | None = None) -> Kernel:
    """Compile the kernel of D_d; with ``n`` given, drop contributions needing more than n spiders."""
    return _compile(d, n)


def _expand_term(term: Term, lhs_labels: Sequence[int]) -> dict[Pattern, int]:
    # inclusion-exclusion over merges of the labels that must stay distinct
    fixed = list(lhs_labels)
    fixed_set = set(fixed)
    labels = list(term.free) + fixed
    out: dict[Pattern, int] = defaultdict(int)
    for groups in set_partitions(labels):
        coef = term.coef
        mapping = {}
        ok = True
        for g in groups:
            fx = [v for v in g if v in fixed_set]
            if len(fx) > 1:
                ok = False
                break
            target = fx[0] if fx else min(g)
            for v in g:
                mapping[v] = target
            size = len(g)
            coef *= (-1) ** (size - 1) * math.factorial(size - 1)
        if not ok:
            continue
        tup = tuple(mapping[v] for v in term.tuple)
        key = _first_occurrence(tup, keep=fixed_set, start=len(fixed_set))
        out[key] += coef
    return out


def simplify_kernel(ker: Kernel) -> Kernel:
    """Rewrite distinct-label sums as unconstrained sums with integer corrections."""
    labels = []
    for lab in ker.labels:
        lhs_labels = sorted(set(lab.lhs))
        acc: dict[Pattern, int] = defaultdict(int)
        order: list[Pattern] = []
        for term in lab.terms:
            if term.distinct:
                expanded = _expand_term(term, lhs_labels)
            else:
                expanded = {_first_occurrence(term.tuple, keep=lhs_labels, start=len(lhs_labels)): term.coef}
            for key, c in expanded.items():
                if key not in acc:
                    order.append(key)
                acc[key] += c
        terms = []
        for key in order:
            if acc[key] == 0:
                continue
            free = tuple(sorted({v for v in key if v not in set(lhs_labels)}))
            terms.append(Term(acc[key], key, free, False, len(set(key) | set(lhs_labels))))
        labels.append(MapLabel(lab.lhs, tuple(terms), lab.min_spiders))
    return Kernel(ker.diagram, tuple(labels))


# ---------------------------------------------------------------------------
# reference evaluation on full (unrolled) tensors


def _as_rows(rows: list, width: int) -> np.ndarray:
    return np.array(rows, dtype=np.int64).reshape(len(rows), width)


def _injective(n: int, a: int) -> np.ndarray:
    return _as_rows(list(itertools.permutations(range(n), a)), a)


def _product(n: int, a: int) -> np.ndarray:
    return _as_rows(list(itertools.product(range(n), repeat=a)), a)


def _ravel(values: np.ndarray, n: int) -> np.ndarray:
    # row-major flat index of each row of label values
    if values.shape[-1] == 0:
        return np.zeros(values.shape[:-1], dtype=np.int64)
    weights = n ** np.arange(values.shape[-1] - 1, -1, -1, dtype=np.int64)
    return values @ weights


def kernel_matrix(ker: Kernel, n: int) -> np.ndarray:
    """The n^l x n^k matrix that the kernel applies to flattened full tensors.

    Built label by label from the label assignments, so it doubles as the
    reference evaluator.
    """
    k, l = ker.k, ker.l
    out = np.zeros((n**l, n**k), dtype=np.int64)
    for lab in ker.labels:
        a = lab.labels
        if a > n:
            continue
        lhs_vals = _injective(n, a)
        rows = _ravel(lhs_vals[:, list(lab.lhs)], n)
        for term in lab.terms:
            nf = len(term.free)
            free_vals = _product(n, nf)
            # label values: lhs labels occupy 0..a-1, free labels follow
            full = np.concatenate(
                [np.repeat(lhs_vals[:, None, :], len(free_vals), 1), np.broadcast_to(free_vals, (len(lhs_vals),) + free_vals.shape)],
                axis=2,
            )
            pos = {L: L for L in range(a)}
            pos.update({f: a + q for q, f in enumerate(term.free)})
            cols = _ravel(full[:, :, [pos[v] for v in term.tuple]], n)
            if term.distinct:
                srt = np.sort(full, axis=2)
                mask = np.all(srt[:, :, 1:] != srt[:, :, :-1], axis=2) if full.shape[2] > 1 else np.ones(full.shape[:2], bool)
            else:
                mask = np.ones(full.shape[:2], dtype=bool)
            r = np.broadcast_to(rows[:, None], cols.shape)
            np.add.at(out, (r[mask], cols[mask]), term.coef)
    return out


def evaluate_dense(ker: Kernel, x_full: np.ndarray, n: int) -> np.ndarray:
    """Apply the kernel to a batch of flattened full tensors, shape (B, n^k)."""
    return np.asarray(x_full) @ kernel_matrix(ker, n).T


# ---------------------------------------------------------------------------
# compressed evaluation (raw form, distinctness enforced by masks)


def blocky_labels(ker: Kernel) -> list[MapLabel]:
    """Labels whose lhs is sorted-shaped; one per compressed output pattern."""
    return [lab for lab in ker.labels if _is_blocky(lab.lhs)]


def _first_appearance(lhs: Pattern) -> list[int]:
    seen = []
    for v in lhs:
        if v not in seen:
            seen.append(v)
    return seen


def evaluate_compressed(ker: Kernel, x: np.ndarray, n: int) -> np.ndarray:
    """Apply the kernel to compressed inputs ``x`` of shape (B, N_k).

    Output rows are compressed order-l indices.  Works for raw and simplified
    kernels alike; the fast path for simplified kernels lives in the backend.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    k, l = ker.k, ker.l
    out = np.zeros((x.shape[0], num_indices(n, l)))
    for lab in blocky_labels(ker):
        order = _first_appearance(lab.lhs)
        a = len(order)
        if a > n:
            continue
        combos = _as_rows(list(itertools.combinations(range(n), a)), a)
        vals = np.zeros((len(combos), a), dtype=np.int64)
        for j, L in enumerate(order):
            vals[:, L] = combos[:, j]
        rows = rank_array(vals[:, list(lab.lhs)], n) if l else np.zeros(len(combos), dtype=np.int64)
        for term in lab.terms:
            nf = len(term.free)
            free_vals = _product(n, nf)
            full = np.concatenate(
                [np.repeat(vals[:, None, :], len(free_vals), 1), np.broadcast_to(free_vals, (len(vals),) + free_vals.shape)],
                axis=2,
            )
            pos = {L: L for L in range(a)}
            pos.update({f: a + q for q, f in enumerate(term.free)})
            tup = full[:, :, [pos[v] for v in term.tuple]]
            cols = rank_array(tup, n) if k else np.zeros(tup.shape[:2], dtype=np.int64)
            if term.distinct and full.shape[2] > 1:
                srt = np.sort(full, axis=2)
                mask = np.all(srt[:, :, 1:] != srt[:, :, :-1], axis=2).astype(np.float64)
            else:
                mask = np.ones(full.shape[:2])
            contrib = np.einsum("bcq,cq->bc", x[:, cols], mask)
            out[:, rows] += term.coef * contrib
    return out


# ---------------------------------------------------------------------------
# lowering for the fast backends


@dataclass(frozen=True)
class LoweredTerm:
    """One unconstrained term of a blocky label.

    ``lhs_counts[j]`` is how often the j-th lhs label (first-appearance
    order) occurs in the input tuple; ``free_counts`` the same for free labels.
    """

    lhs_counts: tuple[int, ...]
    free_counts: tuple[int, ...]
    coef: int


@dataclass(frozen=True)
class LoweredLabel:
    out_counts: tuple[int, ...]
    terms: tuple[LoweredTerm, ...]


def lower_kernel(ker: Kernel) -> tuple[LoweredLabel, ...]:
    """Reduce a simplified kernel to count vectors; T's symmetry makes order irrelevant."""
    if not ker.simplified:
        raise ValueError("lowering needs a simplified kernel")
    lowered = []
    for lab in blocky_labels(ker):
        order = _first_appearance(lab.lhs)
        out_counts = tuple(lab.lhs.count(L) for L in order)
        acc: dict[tuple, int] = defaultdict(int)
        keys = []
        for term in lab.terms:
            lc = tuple(term.tuple.count(L) for L in order)
            fc = tuple(sorted((term.tuple.count(f) for f in term.free), reverse=True))
            if (lc, fc) not in acc:
                keys.append((lc, fc))
            acc[(lc, fc)] += term.coef
        terms = tuple(LoweredTerm(lc, fc, acc[(lc, fc)]) for lc, fc in keys if acc[(lc, fc)] != 0)
        lowered.append(LoweredLabel(out_counts, terms))
    return tuple(lowered)
