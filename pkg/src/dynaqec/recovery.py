"""Recovery construction and correctability diagnostics.

Static Petz, outcome-adaptive (temporal) Petz, the algebraic correctability
check for interrogated noise, and the exact recovery family on correctable
instances.  Recovery Kraus operators act on the physical space with range in
the codespace; ``as_decoders`` rotates them down to the logical space.

Outcome-adaptivity enters through an ``Interrogator``: a tree of
single-operator check branches interleaved with the noise rounds.  All
fidelities computed here use the maximally mixed logical input.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import ChoiOperator, MultiRoundCode, StrategicCode, choi_from_kraus, kraus_from_choi
from .noise import NoiseProcess
from .operators import dagger, herm_eig, hermitize, inv_sqrt_psd, vectorize

__all__ = [
    "CodespaceProjector",
    "Interrogator",
    "KLReport",
    "RecoveryFamily",
    "path_operators",
    "weighted_kraus",
    "kl_check",
    "static_petz",
    "temporal_petz",
    "perfect_recovery",
    "recovery_fidelity",
]

KL_TOL = 1e-8  # separates numerical dust (<=1e-10 exact) from violations (>=1e-3 generic)
_CUT = 1e-10  # relative pseudo-inverse / branch-weight cutoff


@dataclass
class CodespaceProjector:
    """Codespace as an orthonormal basis; column j of ``basis`` is codeword j."""

    basis: np.ndarray

    def __post_init__(self) -> None:
        self.basis = np.asarray(self.basis, dtype=complex)
        if self.basis.ndim != 2 or self.basis.shape[0] < self.basis.shape[1]:
            raise ValueError(f"basis shape {self.basis.shape} is not a tall matrix")
        g = dagger(self.basis) @ self.basis
        if np.abs(g - np.eye(self.rank)).max() > 1e-10:
            raise ValueError("codespace basis columns not orthonormal to 1e-10")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return self.basis @ dagger(self.basis)

    @classmethod
    def from_isometry(cls, v: np.ndarray) -> "CodespaceProjector":
        return cls(np.asarray(v, dtype=complex))

    @classmethod
    def from_encoder(cls, encoder: ChoiOperator) -> "CodespaceProjector":
        ops = kraus_from_choi(encoder)
        if len(ops) != 1:
            raise ValueError(
                f"encoder has Kraus rank {len(ops)}, not an isometry channel"
            )
        return cls(ops[0])


@dataclass
class Interrogator:
    """Tree of single-operator check branches, one matrix per outcome per round.

    ``layers[r]`` maps an outcome prefix of length r to that layer's branch
    operators.  A terminal path composes (right to left) to the operator
    whose vectorization is the outcome record; ``composite_vec`` returns it.
    A proper instrument tree satisfies sum_m C_m^dag C_m = I; construction
    rejects anything off by more than 1e-9.
    """

    dim: int
    layers: list[dict[tuple[int, ...], list[np.ndarray]]]
    # refined path -> outcome path of the source instrument (from_code only)
    source_paths: dict[tuple[int, ...], tuple[int, ...]] | None = None

    def __post_init__(self) -> None:
        self.layers = [
            {tuple(p): [np.asarray(op, dtype=complex) for op in ops]
             for p, ops in layer.items()}
            for layer in self.layers
        ]
        for layer in self.layers:
            for ops in layer.values():
                for op in ops:
                    if op.shape != (self.dim, self.dim):
                        raise ValueError(f"branch operator shape {op.shape} != dim {self.dim}")
        res = self.tp_residual()
        if res > 1e-9:
            raise ValueError(f"composite instrument completeness residual {res:.2e} > 1e-9")

    @property
    def checks(self) -> int:
        return len(self.layers)

    @property
    def rounds(self) -> int:
        """Noise rounds this tree interleaves with (one per gap, one after)."""
        return len(self.layers) + 1

    def paths(self) -> list[tuple[int, ...]]:
        ps: list[tuple[int, ...]] = [()]
        for layer in self.layers:
            ps = [p + (m,) for p in ps for m in range(len(layer[p]))]
        return ps

    def branch(self, path: tuple[int, ...]) -> tuple[np.ndarray, ...]:
        return tuple(self.layers[r][tuple(path[:r])][path[r]] for r in range(len(self.layers)))

    def composite(self, path: tuple[int, ...]) -> np.ndarray:
        op = np.eye(self.dim, dtype=complex)
        for c in self.branch(path):
            op = c @ op
        return op

    def composite_vec(self, path: tuple[int, ...]) -> np.ndarray:
        return vectorize(self.composite(path))

    def tp_residual(self) -> float:
        acc = np.zeros((self.dim, self.dim), dtype=complex)
        for p in self.paths():
            c = self.composite(p)
            acc += dagger(c) @ c
        return float(np.abs(acc - np.eye(self.dim)).max())

    @classmethod
    def absent(cls, dim: int) -> "Interrogator":
        """No check at all (single empty path; pairs with one-round noise)."""
        return cls(dim, [])

    @classmethod
    def identity(cls, dim: int) -> "Interrogator":
        """Trivial single-outcome check (pairs with two-round noise)."""
        return cls(dim, [{(): [np.eye(dim, dtype=complex)]}])

    @classmethod
    def from_code(cls, code: StrategicCode | MultiRoundCode, refine: bool = True) -> "Interrogator":
        """Extract the check tree of a code, one Kraus operator per branch.

        Outcome blocks of Kraus rank > 1 are fine-grained into one refined
        outcome per Kraus operator when ``refine`` is set (the environment is
        promoted to part of the record), else rejected.  ``source_paths``
        maps each refined path back to the code's outcome path.
        """
        if isinstance(code, StrategicCode):
            code = MultiRoundCode.from_strategic(code)
        dim = code.encoder.d_out
        layers: list[dict[tuple[int, ...], list[np.ndarray]]] = []
        pmap: dict[tuple[int, ...], tuple[int, ...]] = {(): ()}
        for r in range(code.layers):
            layer: dict[tuple[int, ...], list[np.ndarray]] = {}
            nxt: dict[tuple[int, ...], tuple[int, ...]] = {}
            for rp, op_ in pmap.items():
                flat: list[np.ndarray] = []
                for mo, block in enumerate(code.checks[r][op_]):
                    ops = kraus_from_choi(block)
                    if len(ops) > 1 and not refine:
                        raise ValueError(
                            f"check layer {r} outcome {mo} has Kraus rank {len(ops)}; "
                            "pass refine=True to fine-grain it"
                        )
                    for op in ops:
                        nxt[rp + (len(flat),)] = op_ + (mo,)
                        flat.append(op)
                layer[rp] = flat
            layers.append(layer)
            pmap = nxt
        return cls(dim, layers, source_paths=pmap)


def path_operators(t: Interrogator, noise: NoiseProcess, path: tuple[int, ...]) -> np.ndarray:
    """Stack over noise terms of sqrt(w) * E_l C_l ... C_1 E_0 along one path."""
    if noise.rounds != len(path) + 1:
        raise ValueError(f"noise has {noise.rounds} rounds, path needs {len(path) + 1}")
    branch = t.branch(path)
    out = []
    for w, ks in noise.terms:
        op = ks[0]
        for r, c in enumerate(branch):
            op = ks[r + 1] @ (c @ op)
        out.append(np.sqrt(w) * op)
    return np.stack(out)


def weighted_kraus(noise: NoiseProcess) -> list[np.ndarray]:
    """sqrt(weight) x composed-round Kraus operator, one per noise term."""
    out = []
    for w, ks in noise.terms:
        op = ks[0]
        for k in ks[1:]:
            op = k @ op
        out.append(np.sqrt(w) * op)
    return out


@dataclass
class KLReport:
    """Correctability table: lambda_table[(e', e, path)] is the mean diagonal
    of the codespace sandwich of path operators e' and e; the residuals
    measure its failure to be a multiple of the logical identity."""

    lambda_table: dict[tuple[int, int, tuple[int, ...]], complex]
    offdiag_residual: float
    diag_variance_residual: float
    correctable: bool
    threshold: float = KL_TOL

    def lambda_matrix(self, path: tuple[int, ...]) -> np.ndarray:
        es = sorted({e for (_, e, p) in self.lambda_table if p == path})
        lam = np.zeros((len(es), len(es)), dtype=complex)
        for ep in es:
            for e in es:
                lam[ep, e] = self.lambda_table[(ep, e, path)]
        return lam


def kl_check(proj: CodespaceProjector, t: Interrogator, noise: NoiseProcess,
             tol: float = KL_TOL) -> KLReport:
    """Algebraic correctability of interrogated noise on the codespace.

    For every outcome path the sandwich V^dag B_e'^dag B_e V must be a
    multiple of the logical identity; ``offdiag_residual`` is the largest
    logical off-diagonal entry, ``diag_variance_residual`` the largest
    deviation of a diagonal entry from its mean.
    """
    v = proj.basis
    table: dict[tuple[int, int, tuple[int, ...]], complex] = {}
    off = 0.0
    var = 0.0
    for path in t.paths():
        bv = np.einsum("exy,yj->exj", path_operators(t, noise, path), v)
        sand = np.einsum("pxi,qxj->pqij", bv.conj(), bv)
        lam = np.einsum("pqii->pq", sand) / proj.rank
        diag = np.einsum("pqii->pqi", sand)
        var = max(var, float(np.abs(diag - lam[:, :, None]).max()))
        offpart = sand.copy()
        k = np.arange(proj.rank)
        offpart[:, :, k, k] = 0.0
        off = max(off, float(np.abs(offpart).max()))
        for ep in range(lam.shape[0]):
            for e in range(lam.shape[1]):
                table[(ep, e, path)] = complex(lam[ep, e])
    return KLReport(table, off, var, correctable=(off <= tol and var <= tol),
                    threshold=tol)


@dataclass
class RecoveryFamily:
    """Per-outcome-path recovery Kraus sets (physical -> physical, range in
    the codespace).  ``completed`` marks paths whose complement had to be
    routed to codeword 0 to reach trace preservation."""

    kraus: list[list[np.ndarray]]
    kind: str  # static_petz | temporal_petz | perfect
    proj: CodespaceProjector
    paths: list[tuple[int, ...]] = field(default_factory=lambda: [()])
    completed: bool = False

    def tp_residual(self) -> float:
        worst = 0.0
        eye = np.eye(self.proj.dim)
        for ks in self.kraus:
            acc = sum((dagger(r) @ r for r in ks), np.zeros_like(eye, dtype=complex))
            worst = max(worst, float(np.abs(acc - eye).max()))
        return worst

    def as_decoders(self) -> list[ChoiOperator]:
        """Recovery followed by un-encoding, as logical-output channels."""
        v = self.proj.basis
        return [
            choi_from_kraus([dagger(v) @ r for r in ks],
                            (self.proj.dim,), (self.proj.rank,))
            for ks in self.kraus
        ]


def _complete(kraus_sets: list[list[np.ndarray]], proj: CodespaceProjector,
              tol: float = 1e-8) -> tuple[list[list[np.ndarray]], bool]:
    """Append operators routing any unrecovered complement to codeword 0."""
    eye = np.eye(proj.dim, dtype=complex)
    target = proj.basis[:, 0]
    completed = False
    out = []
    for ks in kraus_sets:
        acc = sum((dagger(r) @ r for r in ks), np.zeros_like(eye))
        w, u = herm_eig(eye - acc)
        if float(w[0]) < -tol:
            raise ValueError(f"recovery family exceeds trace preservation by {-w[0]:.2e}")
        add = [np.sqrt(lam) * np.outer(target, vec.conj())
               for lam, vec in zip(w, u.T) if lam > 1e-9]
        if add:
            completed = True
        out.append(ks + add)
    return out, completed


def _inv_sqrt(m: np.ndarray) -> np.ndarray:
    top = float(herm_eig(m)[0][-1])
    return inv_sqrt_psd(m, cutoff=max(_CUT * top, 1e-300))


def _gauge(proj: CodespaceProjector, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenbasis of the correctability table, heaviest branch first.

    Returns (weights d_e, unitary u) with column e of u mixing the raw path
    operators into branch e: F_e = sum_e' conj(u[e', e]) B_e'.
    """
    bv = np.einsum("exy,yj->exj", b, proj.basis)
    lam = np.einsum("pxi,qxi->pq", bv.conj(), bv) / proj.rank
    w, u = herm_eig(lam)
    order = np.argsort(-w)
    return w[order], u[:, order]


def static_petz(proj: CodespaceProjector, kraus: list[np.ndarray]) -> RecoveryFamily:
    """R_e = P K_e^dag N^{-1/2} with N the noise image of the codespace projector."""
    p = proj.matrix
    n = hermitize(sum(k @ p @ dagger(k) for k in kraus))
    if float(np.abs(n).max()) < 1e-14:
        raise ValueError("noise image of the codespace is numerically zero")
    nv = _inv_sqrt(n)
    ks = [p @ dagger(k) @ nv for k in kraus]
    ks = [r for r in ks if float(np.abs(r).max()) > 1e-12]
    sets, completed = _complete([ks], proj)
    return RecoveryFamily(sets, "static_petz", proj, [()], completed)


def temporal_petz(proj: CodespaceProjector, t: Interrogator, noise: NoiseProcess,
                  gauge: str | list[np.ndarray] = "raw") -> RecoveryFamily:
    """Outcome-adaptive Petz family R_{e|m} = P F_{e|m}^dag N_m^{-1/2}.

    N_m is the conditional noise image sum_e B_{e,m} P B_{e,m}^dag.  The
    ``gauge`` picks the Kraus labeling only — the channel is invariant:
    "raw" keeps the term operators, "diagonal" mixes them into the
    correctability-table eigenbasis (the labeling under which, on a
    correctable instance, each Kraus operator coincides with the exact
    recovery family's), or pass one mixing unitary per path.  With an
    absent interrogator (one empty path) this is exactly ``static_petz``.
    """
    p = proj.matrix
    paths = t.paths()
    sets = []
    for idx, path in enumerate(paths):
        b = path_operators(t, noise, path)
        nm = hermitize(np.einsum("exy,yz,ewz->xw", b, p, b.conj()))
        nv = _inv_sqrt(nm)
        if isinstance(gauge, str):
            if gauge == "raw":
                f = b
            elif gauge == "diagonal":
                _, u = _gauge(proj, b)
                f = np.einsum("pe,pxy->exy", u.conj(), b)
            else:
                raise ValueError(f"unknown gauge {gauge!r}")
        else:
            u = np.asarray(gauge[idx], dtype=complex)
            f = np.einsum("pe,pxy->exy", u.conj(), b)
        ks = [p @ dagger(fe) @ nv for fe in f]
        ks = [r for r in ks if float(np.abs(r).max()) > 1e-12]
        sets.append(ks)
    sets, completed = _complete(sets, proj)
    return RecoveryFamily(sets, "temporal_petz", proj, paths, completed)


def perfect_recovery(proj: CodespaceProjector, t: Interrogator, noise: NoiseProcess,
                     kl: KLReport) -> RecoveryFamily:
    """Exact recovery on a correctable instance.

    In the correctability-table eigenbasis each branch F_e maps the codespace
    isometrically (weight d_e) onto a subspace orthogonal across branches;
    the recovery reflects each subspace back: R_{e|m} = V W_{e|m}^dag with
    W = F V / sqrt(d).
    """
    if not kl.correctable:
        raise ValueError(
            f"instance not correctable at threshold {kl.threshold:.0e} "
            f"(offdiag {kl.offdiag_residual:.2e}, diag var {kl.diag_variance_residual:.2e})"
        )
    v = proj.basis
    paths = t.paths()
    sets = []
    for path in paths:
        b = path_operators(t, noise, path)
        dw, u = _gauge(proj, b)
        f = np.einsum("pe,pxy->exy", u.conj(), b)
        top = max(float(dw[0]), 0.0)
        ks = []
        for de, fe in zip(dw, f):
            if de > _CUT * max(top, 1e-300):
                w_iso = (fe @ v) / np.sqrt(de)
                ks.append(v @ dagger(w_iso))
        sets.append(ks)
    sets, completed = _complete(sets, proj)
    return RecoveryFamily(sets, "perfect", proj, paths, completed)


def recovery_fidelity(family: RecoveryFamily, t: Interrogator, noise: NoiseProcess,
                      rho: np.ndarray | None = None) -> float:
    """Decoded objective of encode -> interrogated noise -> recover -> un-encode."""
    v = family.proj.basis
    rho = np.eye(family.proj.rank) / family.proj.rank if rho is None else np.asarray(rho, dtype=complex)
    total = 0.0
    for ks, path in zip(family.kraus, family.paths):
        bv = np.einsum("exy,yj->exj", path_operators(t, noise, path), v)
        for r in ks:
            d_log = dagger(v) @ r
            amps = np.einsum("ij,jx,exi->e", rho, d_log, bv)
            total += float((np.abs(amps) ** 2).sum())
    return total
