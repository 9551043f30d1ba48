"""Spin-chain locality, random graph ensembles and equilibration times."""

from ._core import (
    DomainError,
    Sample,
    __version__,
    degree_formula,
    equilibration_time,
    evolve,
    max_flow,
    read_matrix,
    sample,
    weight_model,
)

VARIANTS = ("exh", "exa", "brf", "bvf", "brc", "reg")

__all__ = [
    "DomainError",
    "Sample",
    "VARIANTS",
    "__version__",
    "degree_formula",
    "equilibration_time",
    "evolve",
    "max_flow",
    "read_matrix",
    "sample",
    "weight_model",
]
