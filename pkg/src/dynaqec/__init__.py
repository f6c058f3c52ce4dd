"""Numerical toolkit for approximate dynamical quantum error-correcting codes.

Synthesis (alternating per-block semidefinite optimization), evaluation
(entanglement fidelity through two independent computational routes),
certification (duality/KKT reports, solution-stability probes) and decoding
(static and outcome-conditioned Petz recovery, exact recovery from
Knill-Laflamme data, entropic performance bounds) for codes whose checks are
interleaved with multi-round Kraus noise.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .operators import (
    tensor,
    dagger,
    hermitize,
    partial_trace,
    vectorize,
    unvectorize,
    herm_eig,
    sqrt_psd,
    inv_sqrt_psd,
    frobenius_distance,
    haar_isometry,
    random_density,
    random_cptp_kraus,
)

__all__ = [
    "__version__",
    "tensor",
    "dagger",
    "hermitize",
    "partial_trace",
    "vectorize",
    "unvectorize",
    "herm_eig",
    "sqrt_psd",
    "inv_sqrt_psd",
    "frobenius_distance",
    "haar_isometry",
    "random_density",
    "random_cptp_kraus",
]
