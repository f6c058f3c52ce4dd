"""Alternating-SDP search for high-fidelity dynamical codes.

With every other block frozen, each block of a code (encoder, check
instrument outcomes, per-outcome decoders) enters the entanglement fidelity
linearly, so a block update is one exact instrument SDP and the objective
can only go up.  The search sweeps the blocks in a fixed order (decoders,
then checks from the last layer back, then the encoder) until the relative
gain stalls, restarts from fresh random points, and keeps the best restart.
The landscape has local maxima, so the spread of final values across
restarts is reported alongside the winner.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codes import (
    ChoiOperator,
    MultiRoundCode,
    StaticCode,
    StrategicCode,
    choi_from_kraus,
    identity_choi,
    isometry_choi,
    protocol_2qubit,
    protocol_3qubit,
    trivial_code,
)
from .fidelity import (
    fidelity_direct,
    fidelity_factorized,
    chain_check_objectives,
    chain_decoder_objectives,
    chain_encoder_objective,
    mixed_state,
    single_check_check_objectives,
    single_check_decoder_objectives,
    single_check_encoder_objective,
    static_decoder_objective,
    static_encoder_objective,
)
from .noise import NoiseProcess, local_k_noise, precompute_tensors, weight_k_noise
from .operators import haar_isometry, hermitize, inv_sqrt_psd, random_cptp_kraus
from .recovery import CodespaceProjector, Interrogator, recovery_fidelity, temporal_petz
from .sdp import (
    MAX_BLOCK_DIM,
    BudgetError,
    KktReport,
    SolverError,
    certify_kkt,
    solve_block_sdp,
)

__all__ = [
    "SeesawConfig",
    "SeesawTrace",
    "SweepRow",
    "SweepTable",
    "seesaw_single_check",
    "seesaw_static",
    "seesaw_general",
    "certify_converged",
    "sweep",
]

# One block solve may misreport the objective by roughly the solver tolerance
# times the problem scale; two consecutive recorded values may therefore
# disagree by twice that budget before it means anything is actually wrong.
_GAIN_SLACK = 2e-7
_STRIKES = 3  # consecutive below-threshold gains before declaring convergence

_INIT_STRATEGIES = ("random_isometry", "maximally_mixed_marginal", "fixture")


@dataclass(frozen=True)
class SeesawConfig:
    """Knobs for the alternating optimization.

    ``init_strategy`` seeds the first restart; later restarts always draw
    fresh random starts so multi-start keeps its point even when the first
    start is deterministic.  ``fixture`` requires ``fixture_code`` and warm
    starts restart 0 from that code's blocks.  ``rho`` overrides the logical
    input state (maximally mixed when ``None``).
    """

    max_iters: int = 200
    rel_tol: float = 1e-7
    restarts: int = 5
    seed: int = 0
    init_strategy: str = "random_isometry"
    fixture_code: StrategicCode | StaticCode | MultiRoundCode | None = None
    solver_tol: float = 1e-9
    rho: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.init_strategy not in _INIT_STRATEGIES:
            raise ValueError(f"unknown init strategy {self.init_strategy!r}")
        if self.init_strategy == "fixture" and self.fixture_code is None:
            raise ValueError("the fixture strategy needs fixture_code")


@dataclass
class SeesawTrace:
    """Progress record of one multi-start run.

    ``objectives`` holds the winning restart's objective after every block
    solve, prefixed with the value of its starting point; ``certified`` and
    ``seconds`` align with ``objectives[1:]``.  ``restart_objectives`` keeps
    the same sequence for every restart.
    """

    objectives: list[float]
    certified: list[bool]
    seconds: list[float]
    iterations: int
    restart_finals: list[float]
    restart_objectives: list[list[float]]
    restart_iterations: list[int]
    best_restart: int

    @property
    def final(self) -> float:
        return self.objectives[-1]

    @property
    def spread(self) -> float:
        return max(self.restart_finals) - min(self.restart_finals)

    @property
    def iterations_total(self) -> int:
        return sum(self.restart_iterations)


class _Run:
    """Per-restart accumulator enforcing the monotone-objective invariant."""

    def __init__(self, initial: float):
        self.objectives = [float(initial)]
        self.certified: list[bool] = []
        self.seconds: list[float] = []

    def record(self, value: float, ok: bool, dt: float) -> None:
        if value < self.objectives[-1] - _GAIN_SLACK:
            raise SolverError(
                f"objective fell from {self.objectives[-1]:.12f} to {value:.12f}"
            )
        self.objectives.append(float(value))
        self.certified.append(bool(ok))
        self.seconds.append(float(dt))


def _psd_clip(m: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(hermitize(m))
    return (u * np.maximum(w, 0.0)) @ u.conj().T


def _repair_group(mats: list[np.ndarray], d_in: int, d_out: int):
    """Project a trial block group back onto the instrument set.

    Clip every block to the PSD cone, then fix the summed marginal exactly by
    the congruence X -> (A^-1/2 (x) I) X (A^-1/2 (x) I) with A the summed
    marginal; returns None when the marginal is too degenerate to repair.
    """
    fixed = [_psd_clip(m) for m in mats]
    marg = sum(
        np.einsum("axbx->ab", f.reshape(d_in, d_out, d_in, d_out)) for f in fixed
    )
    marg = hermitize(marg)
    if float(np.linalg.eigvalsh(marg).min()) < 0.2:
        return None
    a = inv_sqrt_psd(marg, cutoff=1e-12)
    k = np.kron(a, np.eye(d_out))
    return [hermitize(k @ f @ k.conj().T) for f in fixed]


class _Extrapolator:
    """Safeguarded secant acceleration between sweeps.

    Alternating block solves crawl along nearly flat valleys, so after each
    sweep a trial step is taken along the last displacement with a doubling
    step length, each trial repaired back onto the feasible set and kept only
    while the exact objective improves.  Rejected trials leave the state
    untouched, so monotonicity and determinism are preserved.
    """

    _STEP_CAP = 64.0

    def __init__(self, dims, get_groups, set_groups, objective_of_groups):
        self.dims = dims
        self.get_groups = get_groups
        self.set_groups = set_groups
        self.objective_of_groups = objective_of_groups
        self.history: list[list[list[np.ndarray]]] = []

    def _repair_all(self, ext_groups):
        trial = []
        for ext, (di, do) in zip(ext_groups, self.dims):
            rep = _repair_group(ext, di, do)
            if rep is None:
                return None
            trial.append(rep)
        return trial

    def _trial_linear(self, beta: float):
        old, new = self.history[-2], self.history[-1]
        ext = [
            [nw + beta * (nw - od) for nw, od in zip(gn, go)]
            for gn, go in zip(new, old)
        ]
        return self._repair_all(ext)

    def advance(self, state, current: float) -> None:
        groups = self.get_groups(state)
        self.history.append(groups)
        self.history = self.history[-2:]
        if len(self.history) < 2:
            return
        best_val, best_groups = current, None
        step = 1.0
        while step <= self._STEP_CAP:
            trial = self._trial_linear(step)
            if trial is None:
                break
            val = self.objective_of_groups(trial)
            if val <= best_val + 1e-12:
                break
            best_val, best_groups = val, trial
            step *= 2.0
        if best_groups is not None:
            self.set_groups(state, best_groups)
            self.history = [best_groups]


def _restart_loop(cfg, seed_path, make_state, objective_of, sweep_once,
                  make_extrapolator=None):
    """Run ``cfg.restarts`` independent see-saws; return best state and trace.

    Termination per restart: the relative gain of a full sweep stays below
    ``rel_tol`` for three sweeps in a row, or ``max_iters`` is hit.  Once the
    objective is within ``rel_tol`` of one, no future sweep can clear the
    gain threshold (fidelity is bounded by one), so the confirmation sweeps
    are skipped.
    """
    runs: list[_Run] = []
    iters: list[int] = []
    states: list = []
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, *seed_path, r])
        state = make_state(rng, r)
        run = _Run(objective_of(state))
        extra = make_extrapolator() if make_extrapolator is not None else None
        warm: dict = {}  # per-block previous solutions, reused as starts
        strikes = 0
        used = 0
        for _ in range(cfg.max_iters):
            before = run.objectives[-1]
            if extra is not None:
                extra.advance(state, before)
            sweep_once(state, run, warm)
            used += 1
            now = run.objectives[-1]
            if now >= 1.0 - cfg.rel_tol:
                break
            gain = (now - before) / max(abs(before), 1e-15)
            strikes = strikes + 1 if gain < cfg.rel_tol else 0
            if strikes >= _STRIKES:
                break
        runs.append(run)
        iters.append(used)
        states.append(state)

    finals = [r.objectives[-1] for r in runs]
    best = int(np.argmax(finals))  # first maximum wins: deterministic ties
    trace = SeesawTrace(
        objectives=runs[best].objectives,
        certified=runs[best].certified,
        seconds=runs[best].seconds,
        iterations=iters[best],
        restart_finals=finals,
        restart_objectives=[r.objectives for r in runs],
        restart_iterations=iters,
        best_restart=best,
    )
    return states[best], trace


def _require_budget(d_in: int, d_out: int, label: str) -> None:
    need = d_in * d_out
    if need > MAX_BLOCK_DIM:
        raise BudgetError(
            f"{label} block needs dimension {need}, over the {MAX_BLOCK_DIM} budget"
        )


def _contract(block: ChoiOperator, mat: np.ndarray) -> float:
    return float(np.einsum("pq,qp->", block.matrix, mat).real)


def _post_checks(code, trace: SeesawTrace, reevaluate) -> None:
    report = code.validate(1e-6)
    if not report.ok:
        raise SolverError(
            "converged code fails validation: " + "; ".join(report.messages)
        )
    value = reevaluate()
    if abs(value - trace.objectives[-1]) > 1e-9:
        raise SolverError(
            f"trace end {trace.objectives[-1]:.12f} disagrees with "
            f"re-evaluation {value:.12f}"
        )


# ---------------------------------------------------------------------------
# one check layer
# ---------------------------------------------------------------------------


def seesaw_single_check(
    noise: NoiseProcess,
    n: int,
    m_count: int,
    cfg: SeesawConfig,
    d_logical: int = 2,
    seed_path: tuple[int, ...] = (),
) -> tuple[StrategicCode, SeesawTrace]:
    """Optimize encoder, an ``m_count``-outcome check, and per-outcome decoders.

    ``seed_path`` namespaces the restart RNG streams so nested drivers (the
    gamma sweep) stay deterministic under any execution order.
    """
    if noise.rounds != 2:
        raise ValueError(f"single-check codes take two-round noise, got {noise.rounds}")
    if m_count < 1:
        raise ValueError("m_count must be at least 1")
    d = 2**n
    dims = (2,) * n
    ldims = (d_logical,)
    _require_budget(d, d, "check")
    _require_budget(d, d_logical, "decoder")
    _require_budget(d_logical, d, "encoder")
    rho = mixed_state(d_logical) if cfg.rho is None else np.asarray(cfg.rho, complex)
    tensors = precompute_tensors(noise, rho)

    def make_state(rng: np.random.Generator, restart: int) -> list:
        if cfg.init_strategy == "fixture" and restart == 0:
            fx = cfg.fixture_code
            if not isinstance(fx, StrategicCode):
                raise ValueError("fixture_code must be a StrategicCode here")
            return [fx.encoder, list(fx.checks), list(fx.decoders)]
        if cfg.init_strategy == "maximally_mixed_marginal" and restart == 0:
            enc = ChoiOperator(np.eye(d_logical * d, dtype=complex) / d, ldims, dims)
            checks = [
                ChoiOperator(np.eye(d * d, dtype=complex) / (d * m_count), dims, dims)
                for _ in range(m_count)
            ]
            decs = [
                ChoiOperator(np.eye(d * d_logical, dtype=complex) / d_logical, dims, ldims)
                for _ in range(m_count)
            ]
            return [enc, checks, decs]
        enc = isometry_choi(haar_isometry(rng, d_logical, d), ldims, dims)
        ident = identity_choi(dims)
        checks = [
            ChoiOperator(ident.matrix / m_count, dims, dims) for _ in range(m_count)
        ]
        decs = [
            choi_from_kraus(random_cptp_kraus(rng, d, d_logical), dims, ldims)
            for _ in range(m_count)
        ]
        return [enc, checks, decs]

    def objective_of(state: list) -> float:
        code = StrategicCode(state[0], list(state[1]), list(state[2]), m_count)
        return fidelity_factorized(code, tensors).fidelity

    def sweep_once(state: list, run: _Run, warm: dict) -> None:
        # decoders: independent trace-preserving blocks, one SDP each
        mats = single_check_decoder_objectives(state[0], state[1], tensors)
        contrib = [_contract(dec, mat) for dec, mat in zip(state[2], mats)]
        for m, mat in enumerate(mats):
            t0 = time.perf_counter()
            sol = solve_block_sdp([mat], d, d_logical, tol=cfg.solver_tol,
                                  warm=warm.get(("dec", m)))
            dt = time.perf_counter() - t0
            warm[("dec", m)] = sol
            if sol.objective > contrib[m]:  # keep the incumbent on a stall
                state[2][m] = ChoiOperator(sol.blocks[0], dims, ldims)
                contrib[m] = sol.objective
            run.record(sum(contrib), sol.status == "optimal", dt)
        # check outcomes: one joint SDP sharing the completeness constraint
        cmats = single_check_check_objectives(state[0], state[2], tensors)
        t0 = time.perf_counter()
        sol = solve_block_sdp(cmats, d, d, tol=cfg.solver_tol, warm=warm.get("check"))
        dt = time.perf_counter() - t0
        warm["check"] = sol
        if sol.objective > run.objectives[-1]:
            state[1] = [ChoiOperator(x, dims, dims) for x in sol.blocks]
            run.record(sol.objective, sol.status == "optimal", dt)
        else:
            run.record(run.objectives[-1], sol.status == "optimal", dt)
        # encoder
        emat = single_check_encoder_objective(state[1], state[2], tensors)
        t0 = time.perf_counter()
        sol = solve_block_sdp([emat], d_logical, d, tol=cfg.solver_tol,
                              warm=warm.get("enc"))
        dt = time.perf_counter() - t0
        warm["enc"] = sol
        if sol.objective > run.objectives[-1]:
            state[0] = ChoiOperator(sol.blocks[0], ldims, dims)
            run.record(sol.objective, sol.status == "optimal", dt)
        else:
            run.record(run.objectives[-1], sol.status == "optimal", dt)

    group_dims = [(d_logical, d), (d, d)] + [(d, d_logical)] * m_count

    def get_groups(state: list) -> list[list[np.ndarray]]:
        return [[state[0].matrix], [c.matrix for c in state[1]],
                *[[dec.matrix] for dec in state[2]]]

    def set_groups(state: list, groups: list[list[np.ndarray]]) -> None:
        state[0] = ChoiOperator(groups[0][0], ldims, dims)
        state[1] = [ChoiOperator(m, dims, dims) for m in groups[1]]
        state[2] = [ChoiOperator(g[0], dims, ldims) for g in groups[2:]]

    def objective_of_groups(groups: list[list[np.ndarray]]) -> float:
        code = StrategicCode(
            ChoiOperator(groups[0][0], ldims, dims),
            [ChoiOperator(m, dims, dims) for m in groups[1]],
            [ChoiOperator(g[0], dims, ldims) for g in groups[2:]],
            m_count,
        )
        return fidelity_factorized(code, tensors).fidelity

    def make_extrapolator() -> _Extrapolator:
        return _Extrapolator(group_dims, get_groups, set_groups, objective_of_groups)

    state, trace = _restart_loop(
        cfg, seed_path, make_state, objective_of, sweep_once, make_extrapolator
    )
    code = StrategicCode(state[0], list(state[1]), list(state[2]), m_count)
    _post_checks(code, trace, lambda: fidelity_factorized(code, tensors).fidelity)
    return code, trace


# ---------------------------------------------------------------------------
# no check layer
# ---------------------------------------------------------------------------


def seesaw_static(
    noise: NoiseProcess,
    n: int,
    cfg: SeesawConfig,
    d_logical: int = 2,
    fixed_encoder: ChoiOperator | None = None,
    seed_path: tuple[int, ...] = (),
) -> tuple[StaticCode, SeesawTrace]:
    """Optimize encoder and decoder around single-round noise.

    Passing ``fixed_encoder`` pins the encoder and alternates the decoder
    only (useful for decoder-only studies of a hand-built encoder).
    """
    if noise.rounds != 1:
        raise ValueError(f"static codes take single-round noise, got {noise.rounds}")
    d = 2**n
    dims = (2,) * n
    ldims = (d_logical,)
    _require_budget(d, d_logical, "decoder")
    _require_budget(d_logical, d, "encoder")
    rho = mixed_state(d_logical) if cfg.rho is None else np.asarray(cfg.rho, complex)
    tensors = precompute_tensors(noise, rho)

    def make_state(rng: np.random.Generator, restart: int) -> list:
        if cfg.init_strategy == "fixture" and restart == 0:
            fx = cfg.fixture_code
            if not isinstance(fx, StaticCode):
                raise ValueError("fixture_code must be a StaticCode here")
            enc = fx.encoder if fixed_encoder is None else fixed_encoder
            return [enc, fx.decoder]
        if cfg.init_strategy == "maximally_mixed_marginal" and restart == 0:
            enc = fixed_encoder
            if enc is None:
                enc = ChoiOperator(np.eye(d_logical * d, dtype=complex) / d, ldims, dims)
            dec = ChoiOperator(np.eye(d * d_logical, dtype=complex) / d_logical, dims, ldims)
            return [enc, dec]
        enc = fixed_encoder
        if enc is None:
            enc = isometry_choi(haar_isometry(rng, d_logical, d), ldims, dims)
        dec = choi_from_kraus(random_cptp_kraus(rng, d, d_logical), dims, ldims)
        return [enc, dec]

    def objective_of(state: list) -> float:
        return fidelity_factorized(StaticCode(state[0], state[1]), tensors).fidelity

    def sweep_once(state: list, run: _Run, warm: dict) -> None:
        mat = static_decoder_objective(state[0], tensors)
        t0 = time.perf_counter()
        sol = solve_block_sdp([mat], d, d_logical, tol=cfg.solver_tol,
                              warm=warm.get("dec"))
        dt = time.perf_counter() - t0
        warm["dec"] = sol
        if sol.objective > run.objectives[-1]:
            state[1] = ChoiOperator(sol.blocks[0], dims, ldims)
            run.record(sol.objective, sol.status == "optimal", dt)
        else:
            run.record(run.objectives[-1], sol.status == "optimal", dt)
        if fixed_encoder is not None:
            return
        emat = static_encoder_objective(state[1], tensors)
        t0 = time.perf_counter()
        sol = solve_block_sdp([emat], d_logical, d, tol=cfg.solver_tol,
                              warm=warm.get("enc"))
        dt = time.perf_counter() - t0
        warm["enc"] = sol
        if sol.objective > run.objectives[-1]:
            state[0] = ChoiOperator(sol.blocks[0], ldims, dims)
            run.record(sol.objective, sol.status == "optimal", dt)
        else:
            run.record(run.objectives[-1], sol.status == "optimal", dt)

    # with a pinned encoder only the decoder block may move
    group_dims = ([(d, d_logical)] if fixed_encoder is not None
                  else [(d_logical, d), (d, d_logical)])

    def get_groups(state: list) -> list[list[np.ndarray]]:
        if fixed_encoder is not None:
            return [[state[1].matrix]]
        return [[state[0].matrix], [state[1].matrix]]

    def set_groups(state: list, groups: list[list[np.ndarray]]) -> None:
        if fixed_encoder is None:
            state[0] = ChoiOperator(groups[0][0], ldims, dims)
        state[1] = ChoiOperator(groups[-1][0], dims, ldims)

    def objective_of_groups(groups: list[list[np.ndarray]]) -> float:
        enc = (fixed_encoder if fixed_encoder is not None
               else ChoiOperator(groups[0][0], ldims, dims))
        code = StaticCode(enc, ChoiOperator(groups[-1][0], dims, ldims))
        return fidelity_factorized(code, tensors).fidelity

    def make_extrapolator() -> _Extrapolator:
        return _Extrapolator(group_dims, get_groups, set_groups, objective_of_groups)

    state, trace = _restart_loop(
        cfg, seed_path, make_state, objective_of, sweep_once, make_extrapolator
    )
    code = StaticCode(state[0], state[1])
    _post_checks(code, trace, lambda: fidelity_factorized(code, tensors).fidelity)
    return code, trace


# ---------------------------------------------------------------------------
# any number of check layers
# ---------------------------------------------------------------------------


def seesaw_general(
    noise: NoiseProcess,
    n: int,
    m_counts: list[int],
    cfg: SeesawConfig,
    d_logical: int = 2,
    seed_path: tuple[int, ...] = (),
) -> tuple[MultiRoundCode, SeesawTrace]:
    """Optimize a code with ``len(m_counts)`` history-adaptive check layers.

    Layer ``r`` keeps one block per outcome prefix, so the block count grows
    as the product of earlier outcome counts; the per-block SDP budget guard
    refuses instances whose check blocks cannot be solved.
    """
    layers = len(m_counts)
    if layers < 1:
        raise ValueError("need at least one check layer")
    if any(m < 1 for m in m_counts):
        raise ValueError("every layer needs at least one outcome")
    if noise.rounds != layers + 1:
        raise ValueError(
            f"noise has {noise.rounds} rounds, {layers} check layers need {layers + 1}"
        )
    d = 2**n
    dims = (2,) * n
    ldims = (d_logical,)
    _require_budget(d, d, "check")
    _require_budget(d, d_logical, "decoder")
    _require_budget(d_logical, d, "encoder")
    rho = mixed_state(d_logical) if cfg.rho is None else np.asarray(cfg.rho, complex)

    def prefixes_of(layer: int) -> list[tuple[int, ...]]:
        return [tuple(p) for p in itertools.product(*[range(c) for c in m_counts[:layer]])]

    def make_state(rng: np.random.Generator, restart: int) -> MultiRoundCode:
        if cfg.init_strategy == "fixture" and restart == 0:
            fx = cfg.fixture_code
            if isinstance(fx, StrategicCode):
                fx = MultiRoundCode.from_strategic(fx)
            if not isinstance(fx, MultiRoundCode):
                raise ValueError("fixture_code must convert to a MultiRoundCode")
            if list(fx.outcome_counts) != list(m_counts):
                raise ValueError("fixture outcome counts do not match m_counts")
            checks = [{p: list(v) for p, v in layer.items()} for layer in fx.checks]
            return MultiRoundCode(fx.encoder, checks, dict(fx.decoders), list(m_counts))
        mixed_start = cfg.init_strategy == "maximally_mixed_marginal" and restart == 0
        if mixed_start:
            enc = ChoiOperator(np.eye(d_logical * d, dtype=complex) / d, ldims, dims)
        else:
            enc = isometry_choi(haar_isometry(rng, d_logical, d), ldims, dims)
        ident = identity_choi(dims)
        checks = []
        for r in range(layers):
            blocks = {
                p: [
                    ChoiOperator(ident.matrix / m_counts[r], dims, dims)
                    for _ in range(m_counts[r])
                ]
                for p in prefixes_of(r)
            }
            checks.append(blocks)
        decoders = {}
        for path in itertools.product(*[range(c) for c in m_counts]):
            if mixed_start:
                dec = ChoiOperator(
                    np.eye(d * d_logical, dtype=complex) / d_logical, dims, ldims
                )
            else:
                dec = choi_from_kraus(random_cptp_kraus(rng, d, d_logical), dims, ldims)
            decoders[tuple(path)] = dec
        return MultiRoundCode(enc, checks, decoders, list(m_counts))

    def objective_of(code: MultiRoundCode) -> float:
        mats = chain_decoder_objectives(code, noise, rho)
        return sum(_contract(code.decoders[p], mats[p]) for p in code.paths())

    def sweep_once(code: MultiRoundCode, run: _Run, warm: dict) -> None:
        mats = chain_decoder_objectives(code, noise, rho)
        contrib = {p: _contract(code.decoders[p], mats[p]) for p in code.paths()}
        for p in code.paths():
            t0 = time.perf_counter()
            sol = solve_block_sdp([mats[p]], d, d_logical, tol=cfg.solver_tol,
                                  warm=warm.get(("dec", p)))
            dt = time.perf_counter() - t0
            warm[("dec", p)] = sol
            if sol.objective > contrib[p]:
                code.decoders[p] = ChoiOperator(sol.blocks[0], dims, ldims)
                contrib[p] = sol.objective
            run.record(sum(contrib.values()), sol.status == "optimal", dt)
        # check layers from the last back to the first, one joint SDP per prefix
        for layer in range(code.layers - 1, -1, -1):
            cmats = chain_check_objectives(code, noise, layer, rho)
            per = {}
            for pref in prefixes_of(layer):
                per[pref] = sum(
                    _contract(code.checks[layer][pref][m], cmats[(pref, m)])
                    for m in range(m_counts[layer])
                )
            for pref in prefixes_of(layer):
                group = [cmats[(pref, m)] for m in range(m_counts[layer])]
                t0 = time.perf_counter()
                sol = solve_block_sdp(group, d, d, tol=cfg.solver_tol,
                                      warm=warm.get(("check", layer, pref)))
                dt = time.perf_counter() - t0
                warm[("check", layer, pref)] = sol
                if sol.objective > per[pref]:
                    code.checks[layer][pref] = [
                        ChoiOperator(x, dims, dims) for x in sol.blocks
                    ]
                    per[pref] = sol.objective
                run.record(sum(per.values()), sol.status == "optimal", dt)
        emat = chain_encoder_objective(code, noise, rho)
        t0 = time.perf_counter()
        sol = solve_block_sdp([emat], d_logical, d, tol=cfg.solver_tol,
                              warm=warm.get("enc"))
        dt = time.perf_counter() - t0
        warm["enc"] = sol
        if sol.objective > run.objectives[-1]:
            code.encoder = ChoiOperator(sol.blocks[0], ldims, dims)
            run.record(sol.objective, sol.status == "optimal", dt)
        else:
            run.record(run.objectives[-1], sol.status == "optimal", dt)

    all_paths = [tuple(p) for p in itertools.product(*[range(c) for c in m_counts])]
    group_dims = (
        [(d_logical, d)]
        + [(d, d) for r in range(layers) for _ in prefixes_of(r)]
        + [(d, d_logical)] * len(all_paths)
    )

    def get_groups(code: MultiRoundCode) -> list[list[np.ndarray]]:
        groups = [[code.encoder.matrix]]
        for r in range(layers):
            for pref in prefixes_of(r):
                groups.append([c.matrix for c in code.checks[r][pref]])
        groups.extend([code.decoders[p].matrix] for p in all_paths)
        return groups

    def _build(groups: list[list[np.ndarray]]) -> MultiRoundCode:
        enc = ChoiOperator(groups[0][0], ldims, dims)
        checks = []
        at = 1
        for r in range(layers):
            blocks = {}
            for pref in prefixes_of(r):
                blocks[pref] = [ChoiOperator(m, dims, dims) for m in groups[at]]
                at += 1
            checks.append(blocks)
        decoders = {
            p: ChoiOperator(groups[at + i][0], dims, ldims)
            for i, p in enumerate(all_paths)
        }
        return MultiRoundCode(enc, checks, decoders, list(m_counts))

    def set_groups(code: MultiRoundCode, groups: list[list[np.ndarray]]) -> None:
        built = _build(groups)
        code.encoder = built.encoder
        code.checks = built.checks
        code.decoders = built.decoders

    def make_extrapolator() -> _Extrapolator:
        return _Extrapolator(
            group_dims, get_groups, set_groups, lambda gs: objective_of(_build(gs))
        )

    code, trace = _restart_loop(
        cfg, seed_path, make_state, objective_of, sweep_once, make_extrapolator
    )
    _post_checks(code, trace, lambda: objective_of(code))
    return code, trace


# ---------------------------------------------------------------------------
# first-order certification of a converged point
# ---------------------------------------------------------------------------


def certify_converged(
    code: StrategicCode,
    noise: NoiseProcess,
    rho: np.ndarray | None = None,
    tol: float = 1e-10,
) -> dict[str, KktReport]:
    """Re-solve every block at the converged code and certify each solution.

    Returns one report per block ("decoder[m]", "check", "encoder"); at a
    genuine see-saw fixed point every re-solve reproduces the incumbent block
    value and certifies with small slackness and near-feasible dual.
    """
    d = code.encoder.d_out
    dl = code.logical_dim
    rho = mixed_state(dl) if rho is None else np.asarray(rho, complex)
    tensors = precompute_tensors(noise, rho)
    out: dict[str, KktReport] = {}
    dmats = single_check_decoder_objectives(code.encoder, code.checks, tensors)
    for m, mat in enumerate(dmats):
        sol = solve_block_sdp([mat], d, dl, tol=tol)
        out[f"decoder[{m}]"] = certify_kkt(sol, [mat], d, dl)
    cmats = single_check_check_objectives(code.encoder, code.decoders, tensors)
    sol = solve_block_sdp(cmats, d, d, tol=tol)
    out["check"] = certify_kkt(sol, cmats, d, d)
    emat = single_check_encoder_objective(code.checks, code.decoders, tensors)
    sol = solve_block_sdp([emat], dl, d, tol=tol)
    out["encoder"] = certify_kkt(sol, [emat], dl, d)
    return out


# ---------------------------------------------------------------------------
# damping-rate sweeps
# ---------------------------------------------------------------------------

_CSV_HEADER = (
    "gamma, model, n, k, m_count, restarts, best_fidelity, spread, "
    "baseline_unencoded, baseline_protocol, baseline_petz, iters_total, seconds"
)


@dataclass
class SweepRow:
    gamma: float
    model: str
    n: int
    k: int
    m_count: int
    restarts: int
    best_fidelity: float
    spread: float
    baseline_unencoded: float
    baseline_protocol: float
    baseline_petz: float
    iters_total: int
    seconds: float
    error: str = ""  # non-empty when the optimizer failed at this point

    def csv_line(self) -> str:
        return (
            f"{self.gamma:.6f}, {self.model}, {self.n}, {self.k}, {self.m_count}, "
            f"{self.restarts}, {self.best_fidelity:.6f}, {self.spread:.6f}, "
            f"{self.baseline_unencoded:.6f}, {self.baseline_protocol:.6f}, "
            f"{self.baseline_petz:.6f}, {self.iters_total}, {self.seconds:.3f}"
        )


@dataclass
class SweepTable:
    rows: list[SweepRow]

    def to_csv(self) -> str:
        return "\n".join([_CSV_HEADER, *[r.csv_line() for r in self.rows]]) + "\n"


def _noise_for(model: str, n: int, k: int, gamma: float) -> NoiseProcess:
    if model == "local":
        return local_k_noise(n, k, gamma)
    if model == "weight":
        return weight_k_noise(n, k, gamma)
    raise ValueError(f"unknown noise model {model!r}")


def _baselines(
    n: int, k: int, model: str, gamma: float, noise: NoiseProcess, rho: np.ndarray
) -> tuple[float, float, float]:
    """Unencoded qubit, hand-built protocol, and protocol-plus-Petz baselines."""
    one = _noise_for(model, 1, min(k, 1), gamma)
    unencoded = fidelity_direct(trivial_code(1), one, rho).fidelity
    if n == 2:
        fx = protocol_2qubit()
    elif n == 3:
        fx = protocol_3qubit("natural")
    else:
        return unencoded, float("nan"), float("nan")
    proto = fidelity_direct(fx, noise, rho).fidelity
    proj = CodespaceProjector.from_encoder(fx.encoder)
    t = Interrogator.from_code(fx)
    family = temporal_petz(proj, t, noise)
    petz = recovery_fidelity(family, t, noise, rho)
    return unencoded, proto, petz


def sweep(
    gammas,
    model: str,
    n: int,
    k: int,
    m_count: int,
    cfg: SeesawConfig,
    jobs: int = 1,
) -> SweepTable:
    """Optimize at every damping rate and tabulate against the baselines.

    Points are independent; with ``jobs > 1`` they run on a thread pool and
    results are still reduced in gamma order.  A failure at one point is
    recorded in its row (NaN fidelity plus the message) without aborting the
    rest of the sweep.
    """
    gammas = [float(g) for g in gammas]

    def point(gi: int) -> SweepRow:
        gamma = gammas[gi]
        t0 = time.perf_counter()
        noise = _noise_for(model, n, k, gamma)
        rho = mixed_state(2) if cfg.rho is None else np.asarray(cfg.rho, complex)
        err = ""
        try:
            _, trace = seesaw_single_check(noise, n, m_count, cfg, seed_path=(gi,))
            best = trace.objectives[-1]
            spread = trace.spread
            iters = trace.iterations_total
        except (BudgetError, SolverError) as exc:
            best = spread = float("nan")
            iters = 0
            err = f"{type(exc).__name__}: {exc}"
        unencoded, proto, petz = _baselines(n, k, model, gamma, noise, rho)
        return SweepRow(
            gamma=gamma,
            model=model,
            n=n,
            k=k,
            m_count=m_count,
            restarts=cfg.restarts,
            best_fidelity=best,
            spread=spread,
            baseline_unencoded=unencoded,
            baseline_protocol=proto,
            baseline_petz=petz,
            iters_total=iters,
            seconds=time.perf_counter() - t0,
            error=err,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(point, range(len(gammas))))
    else:
        rows = [point(gi) for gi in range(len(gammas))]
    return SweepTable(rows)
