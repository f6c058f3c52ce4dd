"""Multi-round Kraus noise processes and their precomputed contraction tensors.

A noise process is a weighted list of *terms*; each term fixes one Kraus
operator per round, so a term is what a single branch of the environment sees
across the whole protocol.  Different terms never interfere.  The per-round
marginal channels are carried separately (``round_channels``) because the term
list deliberately enumerates cross-round index pairs and therefore over-counts
any single round on its own.

Amplitude damping is the distinguished concrete model: a total damping rate
``gamma`` splits across the two rounds as ``gamma/2`` and ``gamma/(2-gamma)``,
which composes back to ``gamma`` exactly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .operators import dagger, tensor

__all__ = [
    "DampingSpec",
    "NoiseProcess",
    "NoiseReport",
    "PrecomputedTensors",
    "split_damping",
    "ad_kraus",
    "local_k_noise",
    "weight_k_noise",
    "kraus_noise",
    "collapse_rounds",
    "composite_choi",
    "precompute_tensors",
]


def split_damping(gamma: float) -> tuple[float, float]:
    """Per-round damping rates (g0, g1) that compose to the total ``gamma``.

    Composition law for sequential amplitude damping:
    ``gamma = g0 + g1 - g0*g1``.  The split used here is ``g0 = gamma/2``,
    ``g1 = gamma/(2 - gamma)``; e.g. 0.5 -> (0.25, 1/3) and 1 -> (0.5, 1).
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping rate {gamma} outside [0, 1]")
    g0 = gamma / 2.0
    g1 = gamma / (2.0 - gamma)
    return g0, g1


@dataclass(frozen=True)
class DampingSpec:
    """Total damping rate with its per-round split.

    Rejects triples that do not satisfy the sequential-composition law
    ``total = round0 + round1 - round0*round1`` to 1e-12.
    """

    total: float
    round0: float
    round1: float

    def __post_init__(self) -> None:
        for name in ("total", "round0", "round1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        composed = self.round0 + self.round1 - self.round0 * self.round1
        if abs(composed - self.total) > 1e-12:
            raise ValueError(
                f"rounds ({self.round0}, {self.round1}) compose to {composed}, "
                f"not {self.total}"
            )

    @classmethod
    def from_total(cls, gamma: float) -> "DampingSpec":
        g0, g1 = split_damping(gamma)
        return cls(gamma, g0, g1)


def ad_kraus(gamma_r: float) -> list[np.ndarray]:
    """Single-qubit amplitude-damping Kraus pair for one round.

    ``E0 = [[1, 0], [0, sqrt(1-g)]]``, ``E1 = [[0, sqrt(g)], [0, 0]]``.
    """
    if not 0.0 <= gamma_r <= 1.0:
        raise ValueError(f"damping rate {gamma_r} outside [0, 1]")
    e0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - gamma_r)]], dtype=complex)
    e1 = np.array([[0.0, math.sqrt(gamma_r)], [0.0, 0.0]], dtype=complex)
    return [e0, e1]


@dataclass
class NoiseReport:
    ok: bool
    round_residuals: list[float]
    composite_residual: float
    messages: list[str] = field(default_factory=list)


@dataclass
class NoiseProcess:
    """Weighted multi-round Kraus noise.

    ``terms[t] = (weight, (K_round0, ..., K_roundlast))`` with every Kraus a
    ``2^n x 2^n`` matrix.  ``round_channels[r]`` lists ``(weight, kraus)``
    pairs forming the marginal channel of round ``r`` alone (terms collapse
    their free other-round indices there).  ``incomplete`` marks deliberately
    trace-decreasing truncations; validation then only requires the
    completeness sums to stay below identity.
    """

    n_qubits: int
    rounds: int
    terms: list[tuple[float, tuple[np.ndarray, ...]]]
    round_channels: list[list[tuple[float, np.ndarray]]]
    incomplete: bool = False

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def term_count(self) -> int:
        return len(self.terms)

    def validate(self, tol: float = 1e-9) -> NoiseReport:
        d = self.dim
        msgs: list[str] = []
        for w, ks in self.terms:
            if w < -tol:
                msgs.append(f"negative term weight {w}")
            if len(ks) != self.rounds:
                msgs.append(f"term has {len(ks)} rounds, expected {self.rounds}")
            for k in ks:
                if k.shape != (d, d):
                    msgs.append(f"kraus shape {k.shape} != ({d}, {d})")
        if len(self.round_channels) != self.rounds:
            msgs.append("round_channels length mismatch")
        if msgs:
            return NoiseReport(False, [], float("nan"), msgs)

        eye = np.eye(d)
        round_res: list[float] = []
        for r in range(self.rounds):
            acc = np.zeros((d, d), dtype=complex)
            for w, k in self.round_channels[r]:
                acc += w * (dagger(k) @ k)
            round_res.append(self._completeness_residual(acc, eye, tol, msgs, f"round {r}"))
        comp = np.zeros((d, d), dtype=complex)
        for w, ks in self.terms:
            prod = ks[0]
            for k in ks[1:]:
                prod = k @ prod
            comp += w * (dagger(prod) @ prod)
        comp_res = self._completeness_residual(comp, eye, tol, msgs, "composite")
        return NoiseReport(not msgs, round_res, comp_res, msgs)

    def _completeness_residual(self, acc, eye, tol, msgs, label) -> float:
        res = float(np.abs(acc - eye).max())
        if self.incomplete:
            # truncation: the sum must stay at or below identity
            deficiency_min = float(np.linalg.eigvalsh(eye - acc).min())
            if deficiency_min < -tol:
                msgs.append(f"{label}: completeness sum exceeds identity by {-deficiency_min:.2e}")
        elif res > tol:
            msgs.append(f"{label}: completeness residual {res:.2e} > {tol:.0e}")
        return res


def _local_round_kraus(n: int, subset: tuple[int, ...], indices: tuple[int, ...],
                       kraus_pair: list[np.ndarray]) -> np.ndarray:
    """Tensor the chosen damping Kraus onto ``subset``, identity elsewhere."""
    ops = [np.eye(2, dtype=complex)] * n
    for pos, idx in zip(subset, indices):
        ops[pos] = kraus_pair[idx]
    return tensor(*ops)


def local_k_noise(n: int, k: int, gamma: float) -> NoiseProcess:
    """Uniform mixture of full two-round damping on every k-qubit subset.

    One term per (subset, round-0 index tuple, round-1 index tuple) with
    weight ``1/C(n, k)``; the damped subset is shared between the rounds of a
    term.  Kraus factors that vanish identically (e.g. the jump operator at
    gamma = 0) are pruned before enumeration.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    g0, g1 = split_damping(gamma)
    pair0 = [e for e in ad_kraus(g0) if np.abs(e).max() > 1e-14]
    pair1 = [e for e in ad_kraus(g1) if np.abs(e).max() > 1e-14]
    subsets = list(itertools.combinations(range(n), k))
    w = 1.0 / len(subsets)

    terms = []
    chan0: list[tuple[float, np.ndarray]] = []
    chan1: list[tuple[float, np.ndarray]] = []
    for sub in subsets:
        ops0 = [(i, _local_round_kraus(n, sub, i, pair0))
                for i in itertools.product(range(len(pair0)), repeat=k)]
        ops1 = [(j, _local_round_kraus(n, sub, j, pair1))
                for j in itertools.product(range(len(pair1)), repeat=k)]
        chan0.extend((w, op) for _, op in ops0)
        chan1.extend((w, op) for _, op in ops1)
        for _, k0 in ops0:
            for _, k1 in ops1:
                terms.append((w, (k0, k1)))
    return NoiseProcess(n, 2, terms, [chan0, chan1], incomplete=False)


def weight_k_noise(n: int, k: int, gamma: float) -> NoiseProcess:
    """Truncated expansion keeping at most ``k`` damping jumps per round.

    Round ``r`` retains the Kraus operators ``prod_s E_{i_s}(g_r)`` with jump
    weight ``sum(i) <= k``; terms pair every round-0 operator with every
    round-1 operator.  For ``k < n`` the truncation is trace-decreasing and
    the process is flagged ``incomplete`` (never silently renormalized).
    Coincides with :func:`local_k_noise` at ``k = n``.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    g0, g1 = split_damping(gamma)

    def round_ops(g: float) -> list[np.ndarray]:
        pair = ad_kraus(g)
        ops = []
        for bits in itertools.product((0, 1), repeat=n):
            if sum(bits) > k:
                continue
            op = tensor(*[pair[b] for b in bits])
            if np.abs(op).max() > 1e-14:
                ops.append(op)
        return ops

    ops0 = round_ops(g0)
    ops1 = round_ops(g1)
    terms = [(1.0, (a, b)) for a in ops0 for b in ops1]
    chans = [[(1.0, a) for a in ops0], [(1.0, b) for b in ops1]]
    return NoiseProcess(n, 2, terms, chans, incomplete=(k < n and gamma > 0.0))


def kraus_noise(round_kraus: list[list[np.ndarray]]) -> NoiseProcess:
    """Build a process from independent per-round Kraus decompositions.

    ``round_kraus[r]`` lists the Kraus operators of round ``r``; terms
    enumerate every cross-round combination with unit weight, so the process
    is exactly the sequential composition of the given channels.
    """
    if not round_kraus or any(not ks for ks in round_kraus):
        raise ValueError("every round needs at least one Kraus operator")
    dim = round_kraus[0][0].shape[0]
    n = int(np.log2(dim))
    if 2**n != dim:
        raise ValueError(f"Kraus dimension {dim} is not a power of two")
    terms = [
        (1.0, combo)
        for combo in itertools.product(*[[np.asarray(k, complex) for k in ks]
                                         for ks in round_kraus])
    ]
    chans = [[(1.0, np.asarray(k, complex)) for k in ks] for ks in round_kraus]
    return NoiseProcess(n, len(round_kraus), terms, chans)


def collapse_rounds(noise: NoiseProcess) -> NoiseProcess:
    """Compose each term's rounds into a single Kraus product (one round)."""
    terms = []
    for w, ks in noise.terms:
        prod = ks[0]
        for k in ks[1:]:
            prod = k @ prod
        terms.append((w, (prod,)))
    chan = [(w, ks[0]) for w, ks in terms]
    return NoiseProcess(noise.n_qubits, 1, terms, [chan], incomplete=noise.incomplete)


def composite_choi(noise: NoiseProcess) -> np.ndarray:
    """Choi matrix (input x output factor order) of the full composed channel."""
    d = noise.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for w, ks in noise.terms:
        prod = ks[0]
        for k in ks[1:]:
            prod = k @ prod
        # choi4[i, x, j, y] = K[x, i] conj(K[y, j])
        c4 = np.einsum("xi,yj->ixjy", prod, prod.conj())
        out += w * c4.reshape(d * d, d * d)
    return out


# ---------------------------------------------------------------------------
# precomputed contraction tensors
# ---------------------------------------------------------------------------


@dataclass
class PrecomputedTensors:
    """Noise/state tensors consumed by the factorized objective contraction.

    ``n0[a, b, e]`` is the matrix ``w_e * conj(E0_e)|a><b|E0_e^T`` (term
    weight folded into round 0), ``n1[c, d, e]`` the unweighted round-1
    analogue, and ``r[s, t]`` the matrix ``rho|s><t|rho^dag``.  For one-round
    processes ``n1`` is ``None``.
    """

    n0: np.ndarray  # (d, d, E, d, d)
    n1: np.ndarray | None  # (d, d, E, d, d)
    r: np.ndarray  # (dL, dL, dL, dL)
    rho: np.ndarray
    weights: np.ndarray  # (E,)
    rounds: int

    @property
    def term_count(self) -> int:
        return len(self.weights)


def precompute_tensors(noise: NoiseProcess, rho: np.ndarray) -> PrecomputedTensors:
    """Build the contraction tensors for a one- or two-round process.

    ``rho`` must be a density matrix (Hermitian, unit trace, PSD) to 1e-9.
    """
    if noise.rounds not in (1, 2):
        raise ValueError("tensor precomputation covers one- or two-round processes")
    rho = np.asarray(rho, dtype=complex)
    if np.abs(rho - dagger(rho)).max() > 1e-9:
        raise ValueError("rho is not Hermitian to 1e-9")
    if abs(np.trace(rho) - 1.0) > 1e-9:
        raise ValueError("rho does not have unit trace to 1e-9")
    if float(np.linalg.eigvalsh(0.5 * (rho + dagger(rho))).min()) < -1e-9:
        raise ValueError("rho is not PSD to 1e-9")

    weights = np.array([w for w, _ in noise.terms], dtype=float)
    e0 = np.stack([ks[0] for _, ks in noise.terms])  # (E, d, d)
    f0 = np.sqrt(weights)[:, None, None] * e0
    n0 = np.einsum("exa,eyb->abexy", f0.conj(), f0)
    n1 = None
    if noise.rounds == 2:
        e1 = np.stack([ks[1] for _, ks in noise.terms])
        n1 = np.einsum("exc,eyd->cdexy", e1.conj(), e1)
    r = np.einsum("us,vt->stuv", rho, rho.conj())
    return PrecomputedTensors(n0=n0, n1=n1, r=r, rho=rho, weights=weights,
                              rounds=noise.rounds)
