"""Choi-operator code containers, fixtures, and JSON (de)serialization.

Factor-order convention: every Choi matrix lives on (input x output), i.e.
``C = sum_ij |i><j|_in (x) K|i><j|K^dag_out`` for a Kraus representation.
Trace preservation is therefore "partial trace over the trailing output
factors equals the identity on the input".

A strategic code is an encoder channel, a list of check-instrument outcome
blocks (completely positive, summing to trace preserving), and one decoder
channel per outcome.  A static code has no check layer.  The multi-round
container generalizes to several check layers with outcome-history-adaptive
blocks.
"""
from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .operators import (
    dagger,
    haar_isometry,
    herm_eig,
    hermitize,
    partial_trace,
    random_cptp_kraus,
    sqrt_psd,
    tensor,
)

__all__ = [
    "ChoiOperator",
    "BlockReport",
    "CodeReport",
    "StrategicCode",
    "StaticCode",
    "MultiRoundCode",
    "choi_from_kraus",
    "kraus_from_choi",
    "identity_choi",
    "isometry_choi",
    "trace_out_choi",
    "compose_choi",
    "basis_column_channel",
    "repetition_isometry",
    "protocol_2qubit",
    "protocol_3qubit",
    "leung_4qubit_encoder",
    "trivial_code",
    "trivial_static_code",
    "random_strategic_code",
    "serialize_code",
    "deserialize_code",
    "save_code",
    "load_code",
]


# ---------------------------------------------------------------------------
# Choi operators
# ---------------------------------------------------------------------------


@dataclass
class ChoiOperator:
    """Choi matrix of a completely positive map, on (input x output)."""

    matrix: np.ndarray
    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=complex)
        self.in_dims = tuple(int(d) for d in self.in_dims)
        self.out_dims = tuple(int(d) for d in self.out_dims)
        d = self.d_in * self.d_out
        if self.matrix.shape != (d, d):
            raise ValueError(
                f"Choi matrix shape {self.matrix.shape} does not match "
                f"in_dims {self.in_dims} x out_dims {self.out_dims}"
            )

    @property
    def d_in(self) -> int:
        return int(np.prod(self.in_dims))

    @property
    def d_out(self) -> int:
        return int(np.prod(self.out_dims))

    def min_eigenvalue(self) -> float:
        return float(herm_eig(self.matrix)[0][0])

    def marginal(self) -> np.ndarray:
        """Partial trace over the output factors (trace-preservation check)."""
        n_in = len(self.in_dims)
        dims = self.in_dims + self.out_dims
        return partial_trace(self.matrix, dims, keep=range(n_in))

    def marginal_residual(self, target: np.ndarray | None = None) -> float:
        t = np.eye(self.d_in) if target is None else target
        return float(np.linalg.norm(self.marginal() - t))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Channel action ``N(rho)[x,y] = sum_ij rho[i,j] C4[i,x,j,y]``."""
        c4 = self.matrix.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        return np.einsum("ij,ixjy->xy", np.asarray(rho, dtype=complex), c4)

    def copy(self) -> "ChoiOperator":
        return ChoiOperator(self.matrix.copy(), self.in_dims, self.out_dims)


def choi_from_kraus(
    kraus: list[np.ndarray] | tuple[np.ndarray, ...],
    in_dims: tuple[int, ...],
    out_dims: tuple[int, ...],
    weights: list[float] | None = None,
) -> ChoiOperator:
    """Choi matrix ``sum_k w_k sum_ij |i><j| (x) K_k|i><j|K_k^dag``."""
    d_in = int(np.prod(in_dims))
    d_out = int(np.prod(out_dims))
    acc = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    ws = weights if weights is not None else [1.0] * len(kraus)
    for w, k in zip(ws, kraus):
        k = np.asarray(k, dtype=complex)
        if k.shape != (d_out, d_in):
            raise ValueError(f"Kraus shape {k.shape}, expected ({d_out}, {d_in})")
        c4 = np.einsum("xi,yj->ixjy", k, k.conj())
        acc += w * c4.reshape(d_in * d_out, d_in * d_out)
    return ChoiOperator(acc, tuple(in_dims), tuple(out_dims))


def kraus_from_choi(choi: ChoiOperator, tol: float = 1e-12) -> list[np.ndarray]:
    """Kraus decomposition by eigendecomposition (eigenvalues <= tol dropped)."""
    w, v = herm_eig(choi.matrix)
    scale = max(float(w[-1]), 0.0)
    ops = []
    for lam, vec in zip(w, v.T):
        if lam > tol * max(1.0, scale):
            # vec[(i, x)] = K[x, i]
            ops.append(np.sqrt(lam) * vec.reshape(choi.d_in, choi.d_out).T)
    return ops


def identity_choi(dims: tuple[int, ...]) -> ChoiOperator:
    d = int(np.prod(dims))
    return choi_from_kraus([np.eye(d)], tuple(dims), tuple(dims))


def isometry_choi(
    v: np.ndarray, in_dims: tuple[int, ...], out_dims: tuple[int, ...]
) -> ChoiOperator:
    return choi_from_kraus([v], tuple(in_dims), tuple(out_dims))


def trace_out_choi(dims: tuple[int, ...], n_keep: int) -> ChoiOperator:
    """Choi of ``rho -> Tr_trailing(rho)`` keeping the first ``n_keep`` factors."""
    keep_dims = tuple(dims[:n_keep])
    traced_dims = tuple(dims[n_keep:])
    d_keep = int(np.prod(keep_dims)) if keep_dims else 1
    d_tr = int(np.prod(traced_dims)) if traced_dims else 1
    eye = np.eye(d_keep)
    kraus = []
    for b in range(d_tr):
        bra = np.zeros((1, d_tr))
        bra[0, b] = 1.0
        kraus.append(np.kron(eye, bra))
    return choi_from_kraus(kraus, tuple(dims), keep_dims)


def compose_choi(second: ChoiOperator, first: ChoiOperator) -> ChoiOperator:
    """Choi of ``second o first`` (first acts first)."""
    if first.d_out != second.d_in:
        raise ValueError("dimension mismatch in channel composition")
    a4 = first.matrix.reshape(first.d_in, first.d_out, first.d_in, first.d_out)
    b4 = second.matrix.reshape(second.d_in, second.d_out, second.d_in, second.d_out)
    c4 = np.einsum("ixjy,xzyw->izjw", a4, b4)
    d_in, d_out = first.d_in, second.d_out
    return ChoiOperator(
        c4.reshape(d_in * d_out, d_in * d_out), first.in_dims, second.out_dims
    )


# ---------------------------------------------------------------------------
# code containers
# ---------------------------------------------------------------------------


@dataclass
class BlockReport:
    min_eig: float
    marginal_residual: float


@dataclass
class CodeReport:
    ok: bool
    blocks: dict[str, BlockReport]
    messages: list[str] = field(default_factory=list)


def _psd_floor(block: ChoiOperator) -> float:
    scale = max(1.0, float(np.abs(block.matrix).max()))
    return -1e-8 * scale


def _check_block(name, block, target, blocks, msgs, tol):
    me = block.min_eigenvalue()
    res = float(np.linalg.norm(
        partial_trace(block.matrix, block.in_dims + block.out_dims,
                      range(len(block.in_dims))) - target
    ))
    blocks[name] = BlockReport(me, res)
    if res > tol:
        msgs.append(f"{name}: marginal residual {res:.2e} > {tol:.0e}")
    if me < _psd_floor(block):
        msgs.append(f"{name}: min eigenvalue {me:.2e} below PSD tolerance")


@dataclass
class StrategicCode:
    """Encoder -> (noise) -> check instrument -> (noise) -> per-outcome decoder."""

    encoder: ChoiOperator
    checks: list[ChoiOperator]
    decoders: list[ChoiOperator]
    outcome_count: int

    def __post_init__(self) -> None:
        if len(self.checks) != self.outcome_count or len(self.decoders) != self.outcome_count:
            raise ValueError("checks/decoders length must equal outcome_count")

    @property
    def logical_dim(self) -> int:
        return self.encoder.d_in

    @property
    def n_qubits(self) -> int:
        return len(self.encoder.out_dims)

    def validate(self, tol: float = 1e-6) -> CodeReport:
        blocks: dict[str, BlockReport] = {}
        msgs: list[str] = []
        _check_block("encoder", self.encoder, np.eye(self.encoder.d_in), blocks, msgs, tol)
        # check blocks: completely positive individually, TP in sum
        summed = sum(c.marginal() for c in self.checks)
        sum_res = float(np.linalg.norm(summed - np.eye(self.checks[0].d_in)))
        for m, c in enumerate(self.checks):
            blocks[f"check[{m}]"] = BlockReport(c.min_eigenvalue(), sum_res)
            if c.min_eigenvalue() < _psd_floor(c):
                msgs.append(f"check[{m}]: min eigenvalue below PSD tolerance")
        if sum_res > tol:
            msgs.append(f"check sum: marginal residual {sum_res:.2e} > {tol:.0e}")
        for m, d in enumerate(self.decoders):
            _check_block(f"decoder[{m}]", d, np.eye(d.d_in), blocks, msgs, tol)
        return CodeReport(not msgs, blocks, msgs)


@dataclass
class StaticCode:
    """Encoder -> (noise) -> decoder, no check layer."""

    encoder: ChoiOperator
    decoder: ChoiOperator

    @property
    def logical_dim(self) -> int:
        return self.encoder.d_in

    @property
    def n_qubits(self) -> int:
        return len(self.encoder.out_dims)

    def validate(self, tol: float = 1e-6) -> CodeReport:
        blocks: dict[str, BlockReport] = {}
        msgs: list[str] = []
        _check_block("encoder", self.encoder, np.eye(self.encoder.d_in), blocks, msgs, tol)
        _check_block("decoder", self.decoder, np.eye(self.decoder.d_in), blocks, msgs, tol)
        return CodeReport(not msgs, blocks, msgs)


@dataclass
class MultiRoundCode:
    """Encoder plus ``l`` check layers with history-adaptive outcome blocks.

    ``checks[r]`` maps an outcome prefix ``(m_1, ..., m_r)`` of length ``r``
    to the list of outcome blocks of layer ``r+1``; ``decoders`` maps each
    full outcome path to its decoder.  Noise rounds interleave: one before
    each check layer and one after the last.
    """

    encoder: ChoiOperator
    checks: list[dict[tuple[int, ...], list[ChoiOperator]]]
    decoders: dict[tuple[int, ...], ChoiOperator]
    outcome_counts: list[int]

    @property
    def layers(self) -> int:
        return len(self.checks)

    def paths(self) -> list[tuple[int, ...]]:
        return [tuple(p) for p in itertools.product(*[range(c) for c in self.outcome_counts])]

    def check_chain(self, path: tuple[int, ...]) -> list[ChoiOperator]:
        return [self.checks[r][tuple(path[:r])][path[r]] for r in range(self.layers)]

    def validate(self, tol: float = 1e-6) -> CodeReport:
        blocks: dict[str, BlockReport] = {}
        msgs: list[str] = []
        _check_block("encoder", self.encoder, np.eye(self.encoder.d_in), blocks, msgs, tol)
        for r, layer in enumerate(self.checks):
            for prefix, outs in layer.items():
                summed = sum(c.marginal() for c in outs)
                res = float(np.linalg.norm(summed - np.eye(outs[0].d_in)))
                blocks[f"check[{r}]{prefix}"] = BlockReport(
                    min(c.min_eigenvalue() for c in outs), res)
                if res > tol:
                    msgs.append(f"check layer {r} prefix {prefix}: residual {res:.2e}")
                for c in outs:
                    if c.min_eigenvalue() < _psd_floor(c):
                        msgs.append(f"check layer {r} prefix {prefix}: PSD violation")
        for path, d in self.decoders.items():
            _check_block(f"decoder{path}", d, np.eye(d.d_in), blocks, msgs, tol)
        return CodeReport(not msgs, blocks, msgs)

    def to_strategic(self) -> StrategicCode:
        if self.layers != 1:
            raise ValueError("only single-layer codes convert to StrategicCode")
        outs = self.checks[0][()]
        return StrategicCode(
            encoder=self.encoder,
            checks=list(outs),
            decoders=[self.decoders[(m,)] for m in range(len(outs))],
            outcome_count=len(outs),
        )

    @classmethod
    def from_strategic(cls, code: StrategicCode) -> "MultiRoundCode":
        return cls(
            encoder=code.encoder,
            checks=[{(): list(code.checks)}],
            decoders={(m,): code.decoders[m] for m in range(code.outcome_count)},
            outcome_counts=[code.outcome_count],
        )


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


def basis_column_channel(
    columns: np.ndarray,
    in_dims: tuple[int, ...],
    out_dims: tuple[int, ...],
    groups: list[tuple[int, ...]] | None = None,
) -> tuple[list[np.ndarray], ChoiOperator]:
    """Realize a basis-state map as a channel via isometric splitting.

    ``columns[:, c]`` is the (possibly sub-normalized) image of basis state
    ``c``.  Columns sharing a Kraus operator act *coherently* on
    superpositions of their basis states, so the partition into groups is
    physics, not bookkeeping.  Pass ``groups`` (disjoint tuples of column
    indices covering every nonzero column) to pin it down; images within a
    group must be mutually orthogonal.  Without ``groups``, columns are
    visited in index order and join the first compatible group — adequate
    only when no superposition input straddles two groups.  A
    ``sqrt(I - sum K^dag K)`` completion operator is appended when the
    stated columns are deficient.
    """
    columns = np.asarray(columns, dtype=complex)
    d_out, d_in = columns.shape
    nonzero = [c for c in range(d_in) if np.abs(columns[:, c]).max() >= 1e-14]
    if groups is None:
        built: list[list[int]] = []
        for c in nonzero:
            img = columns[:, c]
            for g in built:
                if all(abs(columns[:, o].conj() @ img) < 1e-12 for o in g):
                    g.append(c)
                    break
            else:
                built.append([c])
        groups = [tuple(g) for g in built]
    else:
        flat = [c for g in groups for c in g]
        if sorted(flat) != sorted(nonzero):
            raise ValueError("groups must cover each nonzero column exactly once")
        for g in groups:
            for a in g:
                for b in g:
                    if a < b and abs(columns[:, a].conj() @ columns[:, b]) > 1e-10:
                        raise ValueError(
                            f"columns {a} and {b} have non-orthogonal images"
                        )
    kraus = []
    for g in groups:
        k = np.zeros((d_out, d_in), dtype=complex)
        for c in g:
            k[:, c] = columns[:, c]
        kraus.append(k)
    acc = sum(dagger(k) @ k for k in kraus)
    deficiency = np.eye(d_in) - acc
    if np.abs(deficiency).max() > 1e-12:
        kraus.append(sqrt_psd(hermitize(deficiency)))
    return kraus, choi_from_kraus(kraus, in_dims, out_dims)


def _ket(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def repetition_isometry(n: int) -> np.ndarray:
    """``|0> -> |0...0>``, ``|1> -> |1...1>`` on ``n`` qubits."""
    v = np.zeros((2**n, 2), dtype=complex)
    v[0, 0] = 1.0
    v[-1, 1] = 1.0
    return v


def protocol_2qubit() -> StrategicCode:
    """Reported two-qubit single-check protocol (single outcome).

    Encoder ``|0> -> (|00>+|11>)/sqrt2``, ``|1> -> (|00>-|11>)/sqrt2``; the
    check and decoder are the stated basis maps realized as channels.  The
    stated check map is not injective, so it splits into two Kraus
    operators; the split keeps ``{00, 11}`` coherent (that is the undamped
    codeword span — separating them would dephase every logical state) and
    isolates ``10``, whose image collides with the ``11`` column.  The
    decoder likewise keeps its unspecified (identity) columns ``{00, 10}``
    coherent — the span holding the recovered logical qubit — and then
    traces out the auxiliary (second) qubit.
    """
    s2 = 1.0 / np.sqrt(2.0)
    enc = np.zeros((4, 2), dtype=complex)
    enc[:, 0] = s2 * (_ket("00") + _ket("11"))
    enc[:, 1] = s2 * (_ket("00") - _ket("11"))
    encoder = isometry_choi(enc, (2,), (2, 2))

    chk = np.zeros((4, 4), dtype=complex)
    chk[:, 0] = s2 * (_ket("00") + _ket("10"))
    chk[:, 1] = _ket("01")
    chk[:, 2] = s2 * (_ket("00") - _ket("10"))
    chk[:, 3] = s2 * (_ket("00") - _ket("10"))
    _, check = basis_column_channel(chk, (2, 2), (2, 2), groups=[(0, 1, 3), (2,)])

    dec = np.zeros((4, 4), dtype=complex)
    dec[:, 0] = _ket("00")  # unspecified: unchanged
    dec[:, 1] = s2 * (_ket("00") - _ket("10"))
    dec[:, 2] = _ket("10")  # unspecified: unchanged
    dec[:, 3] = s2 * (_ket("00") - _ket("10"))
    _, dec_map = basis_column_channel(dec, (2, 2), (2, 2),
                                      groups=[(0, 2), (1,), (3,)])
    decoder = compose_choi(trace_out_choi((2, 2), 1), dec_map)

    return StrategicCode(encoder, [check], [decoder], outcome_count=1)


def protocol_3qubit(logical_one: str) -> StrategicCode:
    """Reported three-qubit single-check protocol (single outcome).

    The source lists ``|1_L>`` identical to ``|0_L>``, which cannot be an
    isometry, so the caller must choose: ``logical_one="natural"`` uses
    ``(|000> - |111>)/sqrt2``; ``logical_one="literal"`` keeps the stated
    duplicate state, realized as the (valid, but rank-deficient)
    measure-and-prepare channel it implies.  There is no default.
    """
    if logical_one not in ("natural", "literal"):
        raise ValueError('logical_one must be "natural" or "literal"')
    s2 = 1.0 / np.sqrt(2.0)
    psi0 = s2 * (_ket("000") + _ket("111"))
    psi1 = s2 * (_ket("000") - _ket("111")) if logical_one == "natural" else psi0.copy()
    enc = np.stack([psi0, psi1], axis=1)
    if logical_one == "natural":
        encoder = isometry_choi(enc, (2,), (2, 2, 2))
    else:
        _, encoder = basis_column_channel(enc, (2,), (2, 2, 2))

    # stated with literal 1/2 prefactors: the affected columns are
    # sub-normalized and the realization carries a completion operator.
    # the undamped codeword span {000, 111} stays in one Kraus operator;
    # the 100 column must sit apart (its image collides with 111's).
    chk = np.zeros((8, 8), dtype=complex)
    for c in range(8):
        chk[c, c] = 1.0  # "other state would remain unchanged"
    chk[:, 0b101] = 0.5 * (_ket("100") + _ket("101"))
    chk[:, 0b110] = 0.5 * (_ket("100") + _ket("110"))
    chk[:, 0b111] = _ket("100")
    _, check = basis_column_channel(
        chk, (2, 2, 2), (2, 2, 2),
        groups=[(0, 1, 2, 3, 7), (4,), (5,), (6,)],
    )

    # {000, 100} is the span carrying the recovered logical qubit after the
    # check, so those two columns act in one Kraus operator; the other six
    # columns share a single image and go one per operator
    dec = np.zeros((8, 8), dtype=complex)
    dec[:, 0] = s2 * (_ket("000") + _ket("100"))
    for c in range(1, 8):
        dec[:, c] = s2 * (_ket("000") - _ket("100"))
    _, dec_map = basis_column_channel(
        dec, (2, 2, 2), (2, 2, 2),
        groups=[(0, 4), (1,), (2,), (3,), (5,), (6,), (7,)],
    )
    decoder = compose_choi(trace_out_choi((2, 2, 2), 1), dec_map)

    return StrategicCode(encoder, [check], [decoder], outcome_count=1)


def leung_4qubit_encoder() -> ChoiOperator:
    """Four-qubit approximate-code encoder ``(|0000>+|1111>, |0011>+|1100>)/sqrt2``."""
    s2 = 1.0 / np.sqrt(2.0)
    v = np.zeros((16, 2), dtype=complex)
    v[:, 0] = s2 * (_ket("0000") + _ket("1111"))
    v[:, 1] = s2 * (_ket("0011") + _ket("1100"))
    return isometry_choi(v, (2,), (2, 2, 2, 2))


def trivial_code(n: int = 1) -> StrategicCode:
    """Identity protocol on ``n`` qubits: append |0> ancillas, do nothing, discard."""
    dims = (2,) * n
    if n == 1:
        encoder = identity_choi((2,))
        decoder = identity_choi((2,))
    else:
        v = np.zeros((2**n, 2), dtype=complex)
        v[0, 0] = 1.0
        v[1 << (n - 1), 1] = 1.0  # |x> -> |x, 0...0>
        encoder = isometry_choi(v, (2,), dims)
        decoder = trace_out_choi(dims, 1)
    return StrategicCode(encoder, [identity_choi(dims)], [decoder], outcome_count=1)


def trivial_static_code(n: int = 1) -> StaticCode:
    c = trivial_code(n)
    return StaticCode(c.encoder, c.decoders[0])


def random_strategic_code(
    rng: np.random.Generator, n: int = 2, m_count: int = 1, d_logical: int = 2
) -> StrategicCode:
    """Generic complex-valued protocol instance (for cross-validation).

    The encoder is a Haar-random isometry channel, the check instrument is a
    Haar-random CPTP map with its Kraus operators dealt round-robin among the
    outcomes, and each decoder is an independent random channel.  Nothing
    about the instance is real-valued or symmetric, which is the point.
    """
    d = 2**n
    dims = (2,) * n
    encoder = isometry_choi(haar_isometry(rng, d_logical, d), (d_logical,), dims)
    joint = random_cptp_kraus(rng, d, d, kraus_rank=2 * m_count)
    checks = [
        choi_from_kraus(joint[m::m_count], dims, dims) for m in range(m_count)
    ]
    decoders = [
        choi_from_kraus(random_cptp_kraus(rng, d, d_logical), dims, (d_logical,))
        for _ in range(m_count)
    ]
    return StrategicCode(encoder, checks, decoders, outcome_count=m_count)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def _matrix_from_json(data: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def _block_to_json(b: ChoiOperator) -> dict:
    return {
        "matrix": _matrix_to_json(b.matrix),
        "in_dims": list(b.in_dims),
        "out_dims": list(b.out_dims),
    }


def _block_from_json(data: dict) -> ChoiOperator:
    m = _matrix_from_json(data["matrix"])
    in_dims = tuple(data["in_dims"])
    out_dims = tuple(data["out_dims"])
    d = int(np.prod(in_dims)) * int(np.prod(out_dims))
    if m.shape != (d, d):
        raise ValueError(
            f"block matrix shape {m.shape} does not match dims product {d}"
        )
    block = ChoiOperator(m, in_dims, out_dims)
    if block.min_eigenvalue() < -1e-6:
        warnings.warn(
            f"deserialized block has negative eigenvalue {block.min_eigenvalue():.2e}",
            stacklevel=2,
        )
    return block


def serialize_code(code: StrategicCode | StaticCode) -> dict:
    if isinstance(code, StrategicCode):
        return {
            "kind": "strategic",
            "dims": {"logical": code.logical_dim, "n_qubits": code.n_qubits},
            "encoder": _block_to_json(code.encoder),
            "checks": [_block_to_json(c) for c in code.checks],
            "decoders": [_block_to_json(d) for d in code.decoders],
        }
    if isinstance(code, StaticCode):
        return {
            "kind": "static",
            "dims": {"logical": code.logical_dim, "n_qubits": code.n_qubits},
            "encoder": _block_to_json(code.encoder),
            "checks": [],
            "decoders": [_block_to_json(code.decoder)],
        }
    raise TypeError(f"cannot serialize {type(code).__name__}")


def deserialize_code(data: dict) -> StrategicCode | StaticCode:
    kind = data.get("kind")
    if kind == "strategic":
        checks = [_block_from_json(c) for c in data["checks"]]
        decoders = [_block_from_json(d) for d in data["decoders"]]
        if len(checks) != len(decoders):
            raise ValueError("checks/decoders count mismatch")
        return StrategicCode(
            encoder=_block_from_json(data["encoder"]),
            checks=checks,
            decoders=decoders,
            outcome_count=len(checks),
        )
    if kind == "static":
        decs = data["decoders"]
        if len(decs) != 1:
            raise ValueError("static code needs exactly one decoder")
        return StaticCode(
            encoder=_block_from_json(data["encoder"]),
            decoder=_block_from_json(decs[0]),
        )
    raise ValueError(f"unknown code kind {kind!r}")


def save_code(code: StrategicCode | StaticCode, path) -> None:
    with open(path, "w") as fh:
        json.dump(serialize_code(code), fh)


def load_code(path) -> StrategicCode | StaticCode:
    with open(path) as fh:
        return deserialize_code(json.load(fh))
