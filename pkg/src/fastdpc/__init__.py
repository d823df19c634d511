"""Multicore density-peaks clustering."""

from .approx import approx_dpc_run
from .core import (
    INFINITE,
    NOISE,
    UNASSIGNED,
    Clustering,
    ContractError,
    DensityProfile,
    DpcParams,
    distance,
    jitter,
    rand_index,
)
from .exdpc import exdpc_run
from .kdtree import KdTree
from .sapprox import s_approx_run
from .scan import assign_labels, scan_run

__all__ = [
    "INFINITE",
    "NOISE",
    "UNASSIGNED",
    "Clustering",
    "ContractError",
    "DensityProfile",
    "DpcParams",
    "KdTree",
    "approx_dpc_run",
    "assign_labels",
    "distance",
    "exdpc_run",
    "jitter",
    "rand_index",
    "s_approx_run",
    "scan_run",
]
