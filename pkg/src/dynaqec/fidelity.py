"""Entanglement-fidelity evaluation and per-block linear-objective assembly.

Two deliberately independent routes compute the same scalar:

* :func:`fidelity_direct` composes the protocol channel explicitly — for each
  outcome path and noise term it pushes one half of an (unnormalized)
  maximally entangled pair through encoder / noise / checks / noise / decoder
  Choi applications, then pairs the result with the reference state.
* :func:`fidelity_factorized` contracts the precomputed noise/state tensors
  against the block Choi matrices without ever forming the composed channel.

The factorized contraction is the hot path: freezing all blocks but one turns
it into a linear functional ``Tr[block @ M]``, and the ``*_objectives``
functions below return exactly those Hermitian coefficient matrices ``M``.
Orientation note: ``M`` carries the entrywise *conjugate* of the naive
rank-one pattern (sums of conj(S)-vec outer S-vec); the cross-route tests on
complex-random codes pin this down, where real-valued examples would not.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import ChoiOperator, MultiRoundCode, StaticCode, StrategicCode
from .noise import NoiseProcess, PrecomputedTensors, precompute_tensors
from .operators import hermitize

__all__ = [
    "ObjectiveValue",
    "fidelity_direct",
    "fidelity_factorized",
    "single_check_decoder_objectives",
    "single_check_check_objectives",
    "single_check_encoder_objective",
    "static_decoder_objective",
    "static_encoder_objective",
    "chain_decoder_objectives",
    "chain_check_objectives",
    "chain_encoder_objective",
    "mixed_state",
]

_FID_SLACK = 1e-7


def mixed_state(d: int) -> np.ndarray:
    """Maximally mixed state ``I/d`` (the default logical input)."""
    return np.eye(d, dtype=complex) / d


@dataclass
class ObjectiveValue:
    """A fidelity value tagged with the route that produced it."""

    fidelity: float
    method: str

    def __post_init__(self) -> None:
        if not -_FID_SLACK <= self.fidelity <= 1.0 + _FID_SLACK:
            raise ValueError(
                f"fidelity {self.fidelity} outside [-{_FID_SLACK}, 1+{_FID_SLACK}]"
            )
        if self.method not in ("direct", "factorized"):
            raise ValueError(f"unknown method {self.method!r}")


# ---------------------------------------------------------------------------
# direct route: explicit channel composition on half an entangled pair
# ---------------------------------------------------------------------------


def _pair_identity(d: int) -> np.ndarray:
    s4 = np.zeros((d, d, d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s4[i, i, j, j] = 1.0
    return s4


def _pair_apply_choi(s4: np.ndarray, block: ChoiOperator) -> np.ndarray:
    c4 = block.matrix.reshape(block.d_in, block.d_out, block.d_in, block.d_out)
    return np.einsum("ixjy,xzyw->izjw", s4, c4)


def _pair_apply_kraus(s4: np.ndarray, k: np.ndarray) -> np.ndarray:
    return np.einsum("ixjy,zx,wy->izjw", s4, k, k.conj())


def fidelity_direct(
    code: StrategicCode | StaticCode | MultiRoundCode,
    noise: NoiseProcess,
    rho: np.ndarray | None = None,
) -> ObjectiveValue:
    """Entanglement fidelity by explicit composition (the reference route)."""
    mr = _as_multiround(code)
    if noise.rounds != mr.layers + 1:
        raise ValueError(
            f"noise has {noise.rounds} rounds, code expects {mr.layers + 1}"
        )
    d_l = mr.encoder.d_in
    rho = mixed_state(d_l) if rho is None else np.asarray(rho, dtype=complex)

    q4 = np.zeros((d_l, d_l, d_l, d_l), dtype=complex)
    for path in mr.paths():
        chain = mr.check_chain(path)
        decoder = mr.decoders[path]
        for w, ks in noise.terms:
            s4 = _pair_identity(d_l)
            s4 = _pair_apply_choi(s4, mr.encoder)
            s4 = _pair_apply_kraus(s4, ks[0])
            for r, check in enumerate(chain):
                s4 = _pair_apply_choi(s4, check)
                s4 = _pair_apply_kraus(s4, ks[r + 1])
            s4 = _pair_apply_choi(s4, decoder)
            q4 += w * s4
    f = np.einsum("ixjy,yj,xi->", q4, rho, rho.conj())
    return ObjectiveValue(float(f.real), "direct")


def _as_multiround(code) -> MultiRoundCode:
    if isinstance(code, MultiRoundCode):
        return code
    if isinstance(code, StrategicCode):
        return MultiRoundCode.from_strategic(code)
    if isinstance(code, StaticCode):
        return MultiRoundCode(
            encoder=code.encoder, checks=[], decoders={(): code.decoder},
            outcome_counts=[],
        )
    raise TypeError(f"cannot evaluate {type(code).__name__}")


# ---------------------------------------------------------------------------
# factorized route: tensor contraction, single check layer or none
# ---------------------------------------------------------------------------


def _c04(encoder: ChoiOperator) -> np.ndarray:
    dl, d = encoder.d_in, encoder.d_out
    return encoder.matrix.reshape(dl, d, dl, d)


def _c14(check: ChoiOperator) -> np.ndarray:
    d0, d1 = check.d_in, check.d_out
    return check.matrix.reshape(d0, d1, d0, d1)


def _d4(decoder: ChoiOperator) -> np.ndarray:
    d1, dl = decoder.d_in, decoder.d_out
    return decoder.matrix.reshape(d1, dl, d1, dl)


def _t1(check: ChoiOperator, t: PrecomputedTensors) -> np.ndarray:
    # T1[e,i,j,h,k] = Tr[check (N0[i,j,e] x |h><k|)]
    return np.einsum("akbh,ijeba->eijhk", _c14(check), t.n0, optimize=True)


def _t2(decoder: ChoiOperator, t: PrecomputedTensors) -> np.ndarray:
    # T2[e,h,k,s,t] = Tr[decoder (N1[h,k,e] x R[s,t])]
    return np.einsum("cudv,hkedc,stvu->ehkst", _d4(decoder), t.n1, t.r,
                     optimize=True)


def fidelity_factorized(
    code: StrategicCode | StaticCode, tensors: PrecomputedTensors
) -> ObjectiveValue:
    """Entanglement fidelity by tensor contraction (the optimizer's route)."""
    if isinstance(code, StrategicCode):
        if tensors.rounds != 2:
            raise ValueError("strategic codes need two-round tensors")
        ms = single_check_decoder_objectives(code.encoder, code.checks, tensors)
        f = sum(np.einsum("pq,qp->", d.matrix, m).real
                for d, m in zip(code.decoders, ms))
    elif isinstance(code, StaticCode):
        if tensors.rounds != 1:
            raise ValueError("static codes need one-round tensors")
        m = static_decoder_objective(code.encoder, tensors)
        f = np.einsum("pq,qp->", code.decoder.matrix, m).real
    else:
        raise TypeError(f"cannot evaluate {type(code).__name__}")
    return ObjectiveValue(float(f), "factorized")


def single_check_decoder_objectives(
    encoder: ChoiOperator, checks: list[ChoiOperator], tensors: PrecomputedTensors
) -> list[np.ndarray]:
    """Per-outcome Hermitian ``M_m`` with ``F = sum_m Tr[decoder_m @ M_m]``."""
    c04 = _c04(encoder)
    out = []
    for check in checks:
        q = np.einsum("tjsi,eijhk->ehkst", c04, _t1(check, tensors), optimize=True)
        m4 = np.einsum("ehkst,hkecd,stuv->cudv", q, tensors.n1, tensors.r,
                       optimize=True)
        d1 = check.d_out
        dl = tensors.r.shape[0]
        out.append(hermitize(m4.reshape(d1 * dl, d1 * dl)))
    return out


def single_check_check_objectives(
    encoder: ChoiOperator, decoders: list[ChoiOperator], tensors: PrecomputedTensors
) -> list[np.ndarray]:
    """Per-outcome Hermitian ``M_m`` with ``F = sum_m Tr[check_m @ M_m]``."""
    c04 = _c04(encoder)
    out = []
    for dec in decoders:
        g = np.einsum("tjsi,ehkst->eijhk", c04, _t2(dec, tensors), optimize=True)
        m4 = np.einsum("eijhk,ijexy->xhyk", g, tensors.n0, optimize=True)
        d0 = encoder.d_out
        d1 = dec.d_in
        out.append(hermitize(m4.reshape(d0 * d1, d0 * d1)))
    return out


def single_check_encoder_objective(
    checks: list[ChoiOperator], decoders: list[ChoiOperator],
    tensors: PrecomputedTensors,
) -> np.ndarray:
    """Hermitian ``M`` with ``F = Tr[encoder @ M]``."""
    acc = None
    for check, dec in zip(checks, decoders):
        m4 = np.einsum("eijhk,ehkst->sitj", _t1(check, tensors),
                       _t2(dec, tensors), optimize=True)
        acc = m4 if acc is None else acc + m4
    dl = tensors.r.shape[0]
    d0 = checks[0].d_in
    return hermitize(acc.reshape(dl * d0, dl * d0))


def static_decoder_objective(
    encoder: ChoiOperator, tensors: PrecomputedTensors
) -> np.ndarray:
    c04 = _c04(encoder)
    m4 = np.einsum("tjsi,ijecd,stuv->cudv", c04, tensors.n0, tensors.r,
                   optimize=True)
    d0 = encoder.d_out
    dl = tensors.r.shape[0]
    return hermitize(m4.reshape(d0 * dl, d0 * dl))


def static_encoder_objective(
    decoder: ChoiOperator, tensors: PrecomputedTensors
) -> np.ndarray:
    m4 = np.einsum("cudv,ijedc,stvu->sitj", _d4_static(decoder), tensors.n0,
                   tensors.r, optimize=True)
    dl = tensors.r.shape[0]
    d0 = decoder.d_in
    return hermitize(m4.reshape(dl * d0, dl * d0))


def _d4_static(decoder: ChoiOperator) -> np.ndarray:
    d0, dl = decoder.d_in, decoder.d_out
    return decoder.matrix.reshape(d0, dl, d0, dl)


# ---------------------------------------------------------------------------
# chain route: history-adaptive multi-layer assembly
#
# The running object is the four-index pattern G[x,u,y,v] =
# sum_hidden conj(S[x,u]) S[y,v] for the partial operator product S.  Left
# multiplication, right multiplication, and completely positive maps on
# either operator slot each have a small einsum below.
# ---------------------------------------------------------------------------


def _g_init(rho: np.ndarray) -> np.ndarray:
    return np.einsum("xu,yv->xuyv", rho.conj(), rho)


def _g_left_kraus(g: np.ndarray, k: np.ndarray) -> np.ndarray:
    return np.einsum("xi,iujv,yj->xuyv", k.conj(), g, k)


def _g_left_choi(g: np.ndarray, block: ChoiOperator) -> np.ndarray:
    c4 = block.matrix.reshape(block.d_in, block.d_out, block.d_in, block.d_out)
    return np.einsum("ixjy,iujv->xuyv", c4.conj(), g)


def _g_right_matrix(g: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ui,aubv,vj->aibj", b.conj(), g, b)


def _g_right_choi_adjoint(g: np.ndarray, block: ChoiOperator) -> np.ndarray:
    c4 = block.matrix.reshape(block.d_in, block.d_out, block.d_in, block.d_out)
    return np.einsum("iujv,aubv->aibj", c4.conj(), g)


def _g_to_matrix(g: np.ndarray) -> np.ndarray:
    a, b = g.shape[0], g.shape[1]
    return hermitize(g.reshape(a * b, a * b))


def chain_decoder_objectives(
    code: MultiRoundCode, noise: NoiseProcess, rho: np.ndarray | None = None
) -> dict[tuple[int, ...], np.ndarray]:
    """Per-path decoder coefficient matrices for any number of check layers."""
    if noise.rounds != code.layers + 1:
        raise ValueError("noise round count does not match code layers")
    rho = mixed_state(code.encoder.d_in) if rho is None else np.asarray(rho, complex)
    out = {}
    for path in code.paths():
        chain = code.check_chain(path)
        acc = None
        for w, ks in noise.terms:
            g = _g_init(rho)
            g = _g_left_choi(g, code.encoder)
            g = _g_left_kraus(g, ks[0])
            for r, check in enumerate(chain):
                g = _g_left_choi(g, check)
                g = _g_left_kraus(g, ks[r + 1])
            acc = w * g if acc is None else acc + w * g
        out[path] = _g_to_matrix(acc)
    return out


def chain_check_objectives(
    code: MultiRoundCode,
    noise: NoiseProcess,
    layer: int,
    rho: np.ndarray | None = None,
) -> dict[tuple[tuple[int, ...], int], np.ndarray]:
    """Coefficient matrices for layer ``layer`` blocks, keyed (prefix, outcome).

    Outcomes of later layers are summed out; the prefix and the block's own
    outcome stay fixed.
    """
    if not 0 <= layer < code.layers:
        raise ValueError(f"layer {layer} out of range")
    rho = mixed_state(code.encoder.d_in) if rho is None else np.asarray(rho, complex)
    out: dict[tuple[tuple[int, ...], int], np.ndarray] = {}
    for path in code.paths():
        chain = code.check_chain(path)
        key = (tuple(path[:layer]), path[layer])
        acc = out.get(key)
        for w, ks in noise.terms:
            g = _g_init(rho)
            g = _g_left_choi(g, code.encoder)
            g = _g_left_kraus(g, ks[0])
            for r in range(layer):
                g = _g_left_choi(g, chain[r])
                g = _g_left_kraus(g, ks[r + 1])
            # backward side: decoder first, then the tail of the chain
            g = _g_right_choi_adjoint(g, code.decoders[path])
            for r in range(code.layers - 1, layer, -1):
                g = _g_right_matrix(g, ks[r + 1])
                g = _g_right_choi_adjoint(g, chain[r])
            g = _g_right_matrix(g, ks[layer + 1])
            acc = w * g if acc is None else acc + w * g
        out[key] = acc
    return {k: _g_to_matrix(v) for k, v in out.items()}


def chain_encoder_objective(
    code: MultiRoundCode, noise: NoiseProcess, rho: np.ndarray | None = None
) -> np.ndarray:
    """Coefficient matrix for the encoder block (all outcomes summed)."""
    rho = mixed_state(code.encoder.d_in) if rho is None else np.asarray(rho, complex)
    acc = None
    for path in code.paths():
        chain = code.check_chain(path)
        dec = code.decoders[path]
        d4 = dec.matrix.reshape(dec.d_in, dec.d_out, dec.d_in, dec.d_out)
        g0 = np.conj(np.transpose(d4, (1, 0, 3, 2)))
        for w, ks in noise.terms:
            g = _g_right_matrix(g0, ks[-1])
            for r in range(code.layers - 1, -1, -1):
                g = _g_right_choi_adjoint(g, chain[r])
                g = _g_right_matrix(g, ks[r])
            g = _g_left_kraus(g, rho)
            acc = w * g if acc is None else acc + w * g
    return _g_to_matrix(acc)
