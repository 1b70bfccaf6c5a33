"""Permutation-equivariant linear maps between symmetric tensor powers."""

from .bipart import Bipartition, count_p, count_pn, generate_bipartitions
from .symidx import SymmetricTensor, act_tensor, enumerate_indices, rank, unrank

__version__ = "0.1.0"

__all__ = [
    "Bipartition",
    "SymmetricTensor",
    "act_tensor",
    "count_p",
    "count_pn",
    "enumerate_indices",
    "generate_bipartitions",
    "rank",
    "unrank",
    "__version__",
]
