"""Purified interrogated dynamics and the entropy-gap fidelity floor.

Encoding one half of a maximally entangled state, interleaving noise rounds
with check branches, and handing every noise term its own environment record
leaves each outcome path ``m`` a pure state on four systems: the reference R,
the data register A, the outcome record B, and the environment E.  How far
that state is from factorizing across the R | BE cut is measured by the
conditional mutual information

    gap(m) = S(R) + S(BE) - S(RBE),

and ``epsilon = max_m gap(m)`` controls decodability: some decoder acting on
A alone recovers the entangled input with

    F >= 1 - 2 * sqrt(epsilon).

``verify_entropy_bound`` checks that floor against an actually constructed
decoder, either the per-path SDP optimum or the temporal Petz family.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import NoiseProcess, kraus_noise
from .operators import haar_isometry, random_cptp_kraus
from .recovery import (
    CodespaceProjector,
    Interrogator,
    path_operators,
    recovery_fidelity,
    temporal_petz,
)
from .sdp import solve_block_sdp

__all__ = [
    "PurifiedState",
    "EntropyReport",
    "BoundReport",
    "purify",
    "von_neumann_entropy",
    "entropy_gap",
    "verify_entropy_bound",
    "random_check_instance",
    "BOUND_CSV_HEADER",
]

# branches carrying less than this probability are dropped by purify()
WEIGHT_FLOOR = 1e-14
# eigenvalues below this are treated as exact zeros in entropies
EIG_FLOOR = 1e-12

BOUND_CSV_HEADER = "epsilon, bound, achieved, vacuous"


@dataclass
class PurifiedState:
    """One outcome branch of the purified dynamics, pure on (R, A, B, E).

    ``vector`` is the normalized state in row-major order over ``dims``;
    ``weight`` is the branch probability, ``outcome`` the check-outcome path.
    The record system B is in the basis state indexing the path, which keeps
    distinct branches orthogonal when they are reassembled into a mixture.
    """

    vector: np.ndarray
    dims: tuple[int, int, int, int]
    outcome: tuple[int, ...]
    weight: float

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=complex)
        if self.vector.shape != (int(np.prod(self.dims)),):
            raise ValueError(
                f"vector length {self.vector.shape} does not match dims {self.dims}"
            )
        norm = float(np.linalg.norm(self.vector))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"purified branch norm {norm} is not 1 within 1e-10")

    def tensor(self) -> np.ndarray:
        return self.vector.reshape(self.dims)


@dataclass
class EntropyReport:
    """Per-branch entropies across the R | BE cut and their worst gap."""

    outcomes: list[tuple[int, ...]]
    weights: list[float]
    s_r: list[float]
    s_be: list[float]
    s_rbe: list[float]
    gaps: list[float]
    epsilon: float


@dataclass
class BoundReport:
    """Fidelity floor 1 - 2*sqrt(epsilon) against an achieved decoder value.

    ``vacuous`` marks a floor below zero (any channel satisfies it); the
    bound still counts as satisfied there.
    """

    epsilon: float
    bound: float
    achieved: float
    satisfied: bool
    vacuous: bool
    decoder_source: str

    def csv_line(self) -> str:
        return (
            f"{self.epsilon:.9f}, {self.bound:.9f}, {self.achieved:.9f}, "
            f"{str(self.vacuous).lower()}"
        )


def purify(
    t: Interrogator,
    noise: NoiseProcess,
    proj: CodespaceProjector | None = None,
) -> list[PurifiedState]:
    """Purified branch states of encode -> interrogated noise, one per path.

    The reference R carries the logical dimension (the codespace rank), the
    environment E one basis state per noise term, and the record B one basis
    state per outcome path.  Branches of probability below ``WEIGHT_FLOOR``
    are dropped.  The input is the maximally entangled state between R and
    the codespace.
    """
    if proj is None:
        proj = CodespaceProjector(np.eye(t.dim, dtype=complex))
    if proj.dim != t.dim:
        raise ValueError(f"codespace dim {proj.dim} != interrogator dim {t.dim}")
    if noise.dim != t.dim:
        raise ValueError(f"noise dim {noise.dim} != interrogator dim {t.dim}")
    dl, d = proj.rank, proj.dim
    paths = t.paths()
    n_b, n_e = len(paths), noise.term_count
    states = []
    for b_idx, path in enumerate(paths):
        ops = path_operators(t, noise, path)  # (E, d, d), weights folded in
        # branch[i, a, e] = <a| B_e V |i> / sqrt(dl)
        branch = np.einsum("eab,bi->iae", ops, proj.basis) / np.sqrt(dl)
        weight = float(np.vdot(branch, branch).real)
        if weight < WEIGHT_FLOOR:
            continue
        full = np.zeros((dl, d, n_b, n_e), dtype=complex)
        full[:, :, b_idx, :] = branch / np.sqrt(weight)
        states.append(
            PurifiedState(full.reshape(-1), (dl, d, n_b, n_e), path, weight)
        )
    return states


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Base-2 entropy of a density matrix; eigenvalues below EIG_FLOOR drop."""
    lam = np.linalg.eigvalsh(np.asarray(rho))
    lam = lam[lam >= EIG_FLOOR]
    return float(-(lam * np.log2(lam)).sum()) if lam.size else 0.0


def _entropy_across(psi: np.ndarray, keep: tuple[int, ...]) -> float:
    """Entropy of the reduced state of ``keep`` for a pure state tensor."""
    moved = np.moveaxis(psi, keep, range(len(keep)))
    rows = int(np.prod([psi.shape[ax] for ax in keep]))
    m = moved.reshape(rows, -1)
    return von_neumann_entropy(m @ m.conj().T)


def entropy_gap(states: list[PurifiedState]) -> EntropyReport:
    """Mutual-information gaps S(R) + S(BE) - S(RBE) per branch.

    Each branch is pure on (R, A, B, E), so S(RBE) equals the entropy of the
    complementary system A; subadditivity keeps every gap nonnegative up to
    rounding.
    """
    outcomes, weights = [], []
    s_r, s_be, s_rbe, gaps = [], [], [], []
    for st in states:
        psi = st.tensor()
        a = _entropy_across(psi, (0,))
        b = _entropy_across(psi, (2, 3))
        c = _entropy_across(psi, (1,))
        outcomes.append(st.outcome)
        weights.append(st.weight)
        s_r.append(a)
        s_be.append(b)
        s_rbe.append(c)
        gaps.append(a + b - c)
    eps = max(gaps) if gaps else 0.0
    return EntropyReport(outcomes, weights, s_r, s_be, s_rbe, gaps, eps)


def _optimal_decoder_fidelity(
    t: Interrogator, noise: NoiseProcess, proj: CodespaceProjector
) -> float:
    """Sum over paths of the SDP-optimal per-path decoder objective."""
    dl, d = proj.rank, proj.dim
    total = 0.0
    for path in t.paths():
        ops = path_operators(t, noise, path)
        # unnormalized branch amplitudes T_e[i, a] = <a| B_e V |i> / sqrt(dl)
        te = np.einsum("eab,bi->eia", ops, proj.basis) / np.sqrt(dl)
        # decoder objective M[(b,j),(a,i)] = sum_e T_e[i,a] conj(T_e[j,b]) / dl
        m4 = np.einsum("eia,ejb->bjai", te, te.conj()) / dl
        mat = m4.reshape(d * dl, d * dl)
        sol = solve_block_sdp([mat], d, dl)
        total += sol.objective
    return total


def random_check_instance(
    rng: np.random.Generator, n: int, outcomes: int = 2
) -> tuple[CodespaceProjector, Interrogator, NoiseProcess]:
    """Random qubit codespace, two-round random Kraus noise, random check.

    Each round applies a random channel with a probability drawn toward the
    gentle end, and the check is a soft readout: a Haar rotation followed by
    block projectors mixed through a random column-stochastic matrix, spanning
    everything from a trivial peek to a projective measurement.  Instances
    therefore range from nearly correctable (tight, non-vacuous floor) to
    heavily disturbed (vacuous floor).
    """
    d = 2**n
    proj = CodespaceProjector(haar_isometry(rng, 2, d))
    # one difficulty scale per instance, skewed toward the gentle end, sets
    # both the noise probability and the measurement strength
    scale = rng.uniform(0.0, 1.0) ** 2

    def round_kraus() -> list[np.ndarray]:
        s = 0.5 * scale * rng.uniform(0.0, 1.0)
        ks = [np.sqrt(1.0 - s) * np.eye(d, dtype=complex)]
        ks += [np.sqrt(s) * k for k in random_cptp_kraus(rng, d, d, kraus_rank=2)]
        return ks

    noise = kraus_noise([round_kraus(), round_kraus()])
    u = haar_isometry(rng, d, d)
    blocks = []
    for idx in np.array_split(np.arange(d), outcomes):
        p = np.zeros((d, d), dtype=complex)
        p[idx, idx] = 1.0
        blocks.append(p)
    strength = scale * rng.uniform(0.0, 1.0)
    mix = rng.uniform(0.05, 1.0, size=(outcomes, outcomes))
    mix /= mix.sum(axis=0)
    # columns always sum to 1 -> trace preservation at any strength
    mix = (1.0 - strength) / outcomes + strength * mix
    ops = [
        sum(np.sqrt(mix[m, b]) * blocks[b] for b in range(outcomes)) @ u
        for m in range(outcomes)
    ]
    return proj, Interrogator(d, [{(): ops}]), noise


def verify_entropy_bound(
    t: Interrogator,
    noise: NoiseProcess,
    proj: CodespaceProjector | None = None,
    decoder_source: str = "sdp_optimal",
    slack: float = 1e-7,
) -> BoundReport:
    """Check achieved decoding fidelity against the entropy-gap floor.

    ``decoder_source`` picks the decoder whose fidelity is compared:
    ``"sdp_optimal"`` solves one SDP per outcome path, ``"temporal_petz"``
    uses the outcome-adaptive Petz family.  A report with ``satisfied=False``
    is a genuine violation of the floor beyond ``slack``.
    """
    if proj is None:
        proj = CodespaceProjector(np.eye(t.dim, dtype=complex))
    eps = max(entropy_gap(purify(t, noise, proj)).epsilon, 0.0)
    bound = 1.0 - 2.0 * np.sqrt(eps)
    if decoder_source == "sdp_optimal":
        achieved = _optimal_decoder_fidelity(t, noise, proj)
    elif decoder_source == "temporal_petz":
        family = temporal_petz(proj, t, noise)
        achieved = recovery_fidelity(family, t, noise)
    else:
        raise ValueError(f"unknown decoder source {decoder_source!r}")
    return BoundReport(
        epsilon=float(eps),
        bound=float(bound),
        achieved=float(achieved),
        satisfied=bool(achieved >= bound - slack),
        vacuous=bool(bound < 0.0),
        decoder_source=decoder_source,
    )
