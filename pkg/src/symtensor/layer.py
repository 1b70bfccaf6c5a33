"""The equivariant linear layer W = sum_pi lambda_pi D_pi, evaluated through kernels."""

from __future__ import annotations

import json
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import backend as _backend
from .bipart import Bipartition, generate_bipartitions
from .maplabel import compile_kernel, evaluate_compressed, lower_kernel, simplify_kernel
from .symidx import SymmetricTensor, multiplicities, num_indices


@lru_cache(maxsize=None)
def _kernels(k: int, l: int):
    diagrams = tuple(generate_bipartitions(k, l, max(k + l, 1)))
    raw = tuple(compile_kernel(d) for d in diagrams)
    simple = tuple(simplify_kernel(r) for r in raw)
    lowered = tuple(lower_kernel(s) for s in simple)
    return diagrams, raw, simple, lowered


@lru_cache(maxsize=None)
def _plan(k: int, l: int, n: int):
    _, _, _, lowered = _kernels(k, l)
    active = tuple(low if d.t <= n else () for d, low in zip(_kernels(k, l)[0], lowered))
    return _backend.build_plan(active, n, k, l)


def _as_batch(T, n: int | None, k: int) -> tuple[np.ndarray, int, bool]:
    if isinstance(T, SymmetricTensor):
        if T.k != k:
            raise ValueError(f"layer expects order-{k} tensors, got order {T.k}")
        return T.values[None, :], T.n, True
    x = np.asarray(T, dtype=np.float64)
    if n is None:
        raise ValueError("n is required when passing raw arrays")
    x = np.atleast_2d(x)
    if x.shape[-1] != num_indices(n, k):
        raise ValueError(f"expected {num_indices(n, k)} compressed entries for n={n}, k={k}, got {x.shape[-1]}")
    return x, n, False


class EquivariantLayer:
    """Linear S_n-equivariant map from order-k to order-l symmetric tensors.

    One weight per (k,l)-bipartition; the same weights apply at every n, with
    diagrams that have more than n blocks masked out.
    """

    def __init__(self, k: int, l: int, lambdas=None, mode: str = "simplified", backend: str | None = None):
        if mode not in ("simplified", "raw"):
            raise ValueError(f"mode must be 'simplified' or 'raw', got {mode!r}")
        self.k, self.l = k, l
        self.mode = mode
        self.backend = backend
        self.diagrams, self._raw, self._simple, self._lowered = _kernels(k, l)
        if lambdas is None:
            lambdas = np.zeros(len(self.diagrams))
        lambdas = np.asarray(lambdas, dtype=np.float64)
        if lambdas.shape != (len(self.diagrams),):
            raise ValueError(f"expected {len(self.diagrams)} weights, got shape {lambdas.shape}")
        self.lambdas = lambdas.copy()

    @property
    def kernels(self):
        return self._simple if self.mode == "simplified" else self._raw

    def __len__(self) -> int:
        return len(self.diagrams)

    def active(self, n: int) -> np.ndarray:
        return np.array([d.t <= n for d in self.diagrams])

    def basis_features(self, T, n: int | None = None) -> np.ndarray:
        """D_pi(T) for every diagram: shape (P, B, N_l); masked diagrams are zero."""
        x, n, _ = _as_batch(T, n, self.k)
        act = self.active(n)
        if self.mode == "simplified":
            feats = _backend.run_plan(_plan(self.k, self.l, n), x, self.backend)
        else:
            feats = np.zeros((len(self.diagrams), x.shape[0], num_indices(n, self.l)))
            for p, (ker, a) in enumerate(zip(self._raw, act)):
                if a:
                    feats[p] = evaluate_compressed(ker, x, n)
        return feats

    def forward(self, T, n: int | None = None):
        x, n, single = _as_batch(T, n, self.k)
        out = np.einsum("p,pbi->bi", self.lambdas, self.basis_features(x, n))
        if single:
            return SymmetricTensor(n, self.l, out[0])
        return out

    __call__ = forward

    def grad_lambdas(self, T, upstream, n: int | None = None) -> np.ndarray:
        """Gradient of the unrolled inner product <upstream, forward(T)> in lambda.

        Each compressed output entry is weighted by the number of full indices
        it stands for.
        """
        x, n, _ = _as_batch(T, n, self.k)
        up = upstream.values[None, :] if isinstance(upstream, SymmetricTensor) else np.atleast_2d(upstream)
        if up.shape != (x.shape[0], num_indices(n, self.l)):
            raise ValueError(f"upstream shape {up.shape} does not match outputs {(x.shape[0], num_indices(n, self.l))}")
        feats = self.basis_features(x, n)
        return np.einsum("bi,pbi->p", up * multiplicities(n, self.l), feats)

    # checkpoints ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "l": self.l,
            "order": [[list(b) for b in d.blocks] for d in self.diagrams],
            "lambdas": self.lambdas.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, obj: dict, **kwargs) -> "EquivariantLayer":
        layer = cls(int(obj["k"]), int(obj["l"]), **kwargs)
        order = [Bipartition(b) for b in obj.get("order", [])]
        if order and order != list(layer.diagrams):
            # reorder to this build's canonical list
            pos = {d: i for i, d in enumerate(order)}
            layer.lambdas = np.array([obj["lambdas"][pos[d]] for d in layer.diagrams])
        else:
            layer.lambdas = np.asarray(obj["lambdas"], dtype=np.float64)
        return layer

    @classmethod
    def from_json(cls, text: str, **kwargs) -> "EquivariantLayer":
        return cls.from_dict(json.loads(text), **kwargs)


def diagram_index(layer: EquivariantLayer, d: Bipartition | Sequence) -> int:
    d = d if isinstance(d, Bipartition) else Bipartition(d)
    return layer.diagrams.index(d)
