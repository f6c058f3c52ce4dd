"""Marginal-constrained block SDP solver (dense primal-dual interior point).

Solves   max  sum_m <C_m, X_m>
         s.t. sum_m Tr_out(X_m) = I,   X_m >= 0  (Hermitian, complex)

where every block lives on (in (x) out) and Tr_out traces the trailing
factor — i.e. the blocks form the Choi matrices of one instrument whose
summed marginal is trace preserving.  Per-block TP constraints are the
M = 1 case (callers loop).

Method: solved directly in Hermitian form by an infeasible-start
Nesterov-Todd predictor-corrector; the constraint operator works in an
orthonormal Hermitian basis of the marginal space, so the Schur complement
is a real d_in^2-dimensional system assembled from a contracted four-index
tensor of the scaling point rather than per-constraint congruences, which
keeps the per-iteration cost at a few dense factorizations.  Everything is
deterministic: no randomization, no iteration-order ambiguity.  (The SDPA
export alone uses the classical real embedding, as the format is real.)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import hermitize

__all__ = [
    "BudgetError",
    "SdpSolution",
    "KktReport",
    "ProbeReport",
    "solve_block_sdp",
    "certify_kkt",
    "perturbation_probe",
    "sdpa_dump",
]

MAX_BLOCK_DIM = 256  # complex block dimension guard


class BudgetError(RuntimeError):
    """Problem dimensions exceed what the dense solver is sized for."""


class SolverError(RuntimeError):
    """Interior point iteration failed to reach the requested tolerance."""


@dataclass
class SdpSolution:
    blocks: list[np.ndarray]      # optimal X_m, complex Hermitian PSD
    objective: float              # sum_m <C_m, X_m>
    dual_matrix: np.ndarray       # Y with Y (x) I >= C_m for all m
    dual_objective: float         # Tr(Y) >= objective
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    status: str                   # "optimal" or "max_iterations"
    warm_data: dict | None = None  # embedded iterate, reusable as a warm start


@dataclass
class KktReport:
    slackness: float              # max_m ||(Y (x) I - C_m) X_m||_F
    dual_min_eigenvalue: float    # min_m lambda_min(Y (x) I - C_m)
    primal_min_eigenvalue: float  # min_m lambda_min(X_m)
    marginal_residual: float      # ||sum_m Tr_out(X_m) - I||_F
    duality_gap: float            # |dual_objective - objective|
    ok: bool


@dataclass
class ProbeReport:
    entries: list[tuple[float, float, float]]  # (eps, objective drop, distance)
    linear_coefficient: float                  # distance per unit drop


# -- real embedding (SDPA export only) ----------------------------------------

_J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def _embed(c: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(2), c.real) + np.kron(_J2, c.imag)


def _sym_basis(k2: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ii, jj = [], []
    for i in range(k2):
        ii.append(i)
        jj.append(i)
    for i in range(k2):
        for j in range(i + 1, k2):
            ii.append(i)
            jj.append(j)
    b = np.array([1.0 if i == j else 0.0 for i, j in zip(ii, jj)])
    return np.array(ii), np.array(jj), b


# -- constraint operator -------------------------------------------------------
#
# orthonormal Hermitian basis of the marginal space: E_ii, then per i<j the
# pair (E_ij + E_ji)/sqrt2 and i(E_ji - E_ij)/sqrt2.  Each element touches at
# most two entries, kept as (k2, 2) support arrays; diagonals pad with a zero
# coefficient so everything vectorizes.


def _herm_basis(d: int):
    rows, cols, coefs = [], [], []
    for i in range(d):
        rows.append((i, 0))
        cols.append((i, 0))
        coefs.append((1.0, 0.0))
    s = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            rows.append((i, j))
            cols.append((j, i))
            coefs.append((s, s))
            rows.append((i, j))
            cols.append((j, i))
            coefs.append((-1j * s, 1j * s))
    b = np.zeros(d * d)
    b[:d] = 1.0
    return np.array(rows), np.array(cols), np.array(coefs, dtype=complex), b


def _marginals(xs: list[np.ndarray], d: int, t: int) -> np.ndarray:
    p = np.zeros((d, d), dtype=complex)
    for x in xs:
        p += np.einsum("axbx->ab", x.reshape(d, t, d, t))
    return p


def _a_of(xs, basis, d, t) -> np.ndarray:
    rows, cols, coefs, _ = basis
    p = _marginals(xs, d, t)
    # <S_k, X> = sum over support entries coef * p[col, row]
    return np.einsum("ku,ku->k", coefs, p[cols, rows]).real


def _astar(y, basis, d) -> np.ndarray:
    rows, cols, coefs, _ = basis
    s = np.zeros((d, d), dtype=complex)
    np.add.at(s, (rows.ravel(), cols.ravel()), (y[:, None] * coefs).ravel())
    return s


def _astar_block(y, basis, d, t) -> np.ndarray:
    return np.kron(_astar(y, basis, d), np.eye(t))


def _schur(ws: list[np.ndarray], basis, d: int, t: int) -> np.ndarray:
    # M[p,q] = sum_m Tr[(S_p (x) I) W_m (S_q (x) I) W_m]; contract the trace
    # factor once per block, then gather the <=2x2 basis support pairs
    rows, cols, coefs, _ = basis
    kk = np.zeros((d, d, d, d), dtype=complex)
    for w in ws:
        w4 = w.reshape(d, t, d, t)
        kk += np.einsum("bxcy,dyax->abcd", w4, w4, optimize=True)
    big = kk[rows[:, :, None, None], cols[:, :, None, None],
             rows[None, None, :, :], cols[None, None, :, :]]
    return np.einsum("pu,qv,puqv->pq", coefs, coefs, big, optimize=True).real


# -- factorization helpers ----------------------------------------------------


def _chol(s: np.ndarray) -> np.ndarray:
    jitter = 0.0
    for _ in range(4):
        try:
            return np.linalg.cholesky(s + jitter * np.eye(s.shape[0]))
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100,
                         1e-14 * max(1.0, float(np.trace(s).real) / s.shape[0]))
    raise SolverError("cholesky failed after jitter retries")


def _nt_scaling(x: np.ndarray, z: np.ndarray):
    # W = L (L^H Z L)^{-1/2} L^H with X = L L^H satisfies W Z W = X.
    # T = L Q lam^{-1/4} factors W = T T^H and diagonalizes the scaled pair:
    # T^{-1} X T^{-H} = T^H Z T = diag(sqrt(lam)), the NT "V" matrix.
    l = _chol(x)
    m = l.conj().T @ z @ l
    lam, q = np.linalg.eigh((m + m.conj().T) / 2)
    lam = np.maximum(lam, 1e-300)
    quarter = lam**-0.25
    tf = (l @ q) * quarter
    tinv = (q.conj().T / quarter[:, None]) @ np.linalg.inv(l)
    w = tf @ tf.conj().T
    return (w + w.conj().T) / 2, tf, tinv, np.sqrt(lam)


def _step_bound(s: np.ndarray, ds: np.ndarray) -> float:
    # largest a with s + a ds >= 0, via lambda_min(L^-1 ds L^-H)
    l = _chol(s)
    linv = np.linalg.inv(l)
    m1 = linv @ ds @ linv.conj().T
    lam_min = float(np.linalg.eigvalsh((m1 + m1.conj().T) / 2).min())
    if lam_min >= 0:
        return np.inf
    return 1.0 / (-lam_min)


def _solve_core(cs: list[np.ndarray], d: int, t: int, tol: float,
                max_iter: int, warm: dict | None = None) -> dict:
    """min sum <C~, X> over Hermitian blocks; C~ = -C of the max problem."""
    nblk = len(cs)
    n = d * t
    basis = _herm_basis(d)
    b = basis[3]
    cnorm = max(float(np.linalg.norm(c)) for c in cs)
    bnorm = float(np.linalg.norm(b))

    xs = [np.eye(n, dtype=complex) / (t * nblk) for _ in range(nblk)]
    zs = [(1.0 + cnorm) * np.eye(n, dtype=complex) for _ in range(nblk)]
    y = np.zeros(len(b))
    if (warm is not None and len(warm["xs"]) == nblk
            and warm["xs"][0].shape == (n, n) and warm["y"].shape == y.shape):
        # blend the previous optimum toward the cold interior point; the pure
        # optimum sits on the boundary and would freeze the very first step
        lam = 0.2
        xs = [(1 - lam) * wx + lam * x for wx, x in zip(warm["xs"], xs)]
        zs = [(1 - lam) * wz + lam * z for wz, z in zip(warm["zs"], zs)]
        y = (1 - lam) * warm["y"]

    status = "max_iterations"
    it = 0
    rp_norm = rd_norm = gap = np.inf
    best = None  # (score, xs, zs, y, rp_norm, rd_norm, gap)
    for it in range(1, max_iter + 1):
        ay = _astar_block(y, basis, d, t)
        rp = b - _a_of(xs, basis, d, t)
        rds = [cs[m] - zs[m] - ay for m in range(nblk)]
        mu = sum(np.vdot(x, z).real for x, z in zip(xs, zs)) / (n * nblk)
        pobj = sum(np.vdot(c, x).real for c, x in zip(cs, xs))
        dobj = float(b @ y)
        rp_norm = float(np.linalg.norm(rp))
        rd_norm = max(float(np.linalg.norm(r)) for r in rds)
        gap = abs(pobj - dobj)
        scale = 1.0 + abs(pobj) + abs(dobj)
        score = (rp_norm / (1 + bnorm) + rd_norm / (1 + cnorm)
                 + mu * n * nblk / scale)
        if best is None or score < best[0]:
            best = (score, [x.copy() for x in xs], [z.copy() for z in zs],
                    y.copy(), rp_norm, rd_norm, gap)
        if (rp_norm <= tol * (1 + bnorm) and rd_norm <= tol * (1 + cnorm)
                and mu * n * nblk <= tol * scale):
            status = "optimal"
            break
        if score > 1e4 * best[0] and it > 5:
            status = "stalled"  # diverging past double precision
            break

        try:
            with np.errstate(all="ignore"):
                step = _ipm_step(cs, xs, zs, y, rp, rds, mu, basis, d, t,
                                 nblk, n)
        except (SolverError, np.linalg.LinAlgError):
            step = None
        if step is None or not all(np.isfinite(s).all() for s in step[0]):
            status = "stalled"
            break
        xs, zs, y = step

    if status != "optimal" and best is not None:
        _, xs, zs, y, rp_norm, rd_norm, gap = best
    yr = _astar(y, basis, d)
    return {
        "xs": xs, "y_matrix": yr, "status": status, "iterations": it,
        "rp": rp_norm, "rd": rd_norm, "gap": gap,
        "warm": {"xs": xs, "zs": zs, "y": y},
    }


def _ipm_step(cs, xs, zs, y, rp, rds, mu, basis, d, t, nblk, n):
    scal = [_nt_scaling(x, z) for x, z in zip(xs, zs)]
    ws = [s[0] for s in scal]
    if not all(np.isfinite(w).all() for w in ws):
        return None
    schur = _schur(ws, basis, d, t)
    ls = _chol(schur + 1e-14 * np.trace(schur) / len(rp) * np.eye(len(rp)))

    def newton(rcs):
        rhs = rp - _a_of(rcs, basis, d, t) + _a_of(
            [w @ r @ w for w, r in zip(ws, rds)], basis, d, t)
        dy = np.linalg.solve(ls.T, np.linalg.solve(ls, rhs))
        day = _astar_block(dy, basis, d, t)
        dzs = [rds[m] - day for m in range(nblk)]
        dxs = [rcs[m] - ws[m] @ dzs[m] @ ws[m] for m in range(nblk)]
        dxs = [(dd + dd.conj().T) / 2 for dd in dxs]
        dzs = [(dd + dd.conj().T) / 2 for dd in dzs]
        return dy, dxs, dzs

    # predictor (affine scaling)
    _, dxa, dza = newton([-x for x in xs])
    ap = min(min(_step_bound(x, dx) for x, dx in zip(xs, dxa)), 1.0)
    ad = min(min(_step_bound(z, dz) for z, dz in zip(zs, dza)), 1.0)
    mu_aff = sum(
        np.vdot(x + ap * dx, z + ad * dz).real
        for x, dx, z, dz in zip(xs, dxa, zs, dza)
    ) / (n * nblk)
    sigma = min(1.0, max((max(mu_aff, 0.0) / mu) ** 3, 1e-8))

    # corrector: recentring plus the exact second-order term.  In the T-frame
    # (T = L Q lam^{-1/4}, W = T T^H) both scaled variables equal D = diag(d),
    # so the linearized complementarity reads L_D(dX~ + dZ~)/2 = rhs and the
    # Lyapunov solve is elementwise division by (d_i + d_j)/2.  The recentring
    # part pulls back to sigma*mu*Z^{-1} - X; the cross term to T E T^H.
    zinvs = []
    for z in zs:
        linv = np.linalg.inv(_chol(z))
        zinvs.append(linv.conj().T @ linv)
    rcs = []
    for m in range(nblk):
        _, tf, tinv, dv = scal[m]
        dxt = tinv @ dxa[m] @ tinv.conj().T
        dzt = tf.conj().T @ dza[m] @ tf
        cross = (dxt @ dzt + dzt @ dxt) / (dv[:, None] + dv[None, :])
        cross = tf @ cross @ tf.conj().T
        rcs.append(sigma * mu * zinvs[m] - xs[m] - (cross + cross.conj().T) / 2)
    dy, dxs, dzs = newton(rcs)
    tau = 0.98
    ap = min(tau * min(_step_bound(x, dx) for x, dx in zip(xs, dxs)), 1.0)
    ad = min(tau * min(_step_bound(z, dz) for z, dz in zip(zs, dzs)), 1.0)
    xs_n = [(x + ap * dx + (x + ap * dx).conj().T) / 2 for x, dx in zip(xs, dxs)]
    zs_n = [(z + ad * dz + (z + ad * dz).conj().T) / 2 for z, dz in zip(zs, dzs)]
    return xs_n, zs_n, y + ad * dy


# -- public complex-side interface --------------------------------------------


def _validate_objectives(objectives, d_in, d_out):
    n = d_in * d_out
    if n > MAX_BLOCK_DIM:
        raise BudgetError(
            f"block dimension {n} exceeds the dense solver limit {MAX_BLOCK_DIM}")
    out = []
    for c in objectives:
        c = np.asarray(c, dtype=complex)
        if c.shape != (n, n):
            raise ValueError(f"objective shape {c.shape} != ({n}, {n})")
        if np.abs(c - c.conj().T).max() > 1e-10 * max(1.0, np.abs(c).max()):
            raise ValueError("objective blocks must be Hermitian")
        out.append(hermitize(c))
    return out


def solve_block_sdp(
    objectives: list[np.ndarray],
    d_in: int,
    d_out: int,
    tol: float = 1e-10,
    max_iterations: int = 100,
    warm: SdpSolution | None = None,
) -> SdpSolution:
    """Maximize ``sum_m <C_m, X_m>`` over instruments with summed marginal I.

    ``objectives[m]`` is Hermitian on the ``d_in * d_out`` block space with
    the ``d_in`` marginal pinned (trailing ``d_out`` factor traced).  For a
    per-block trace-preservation constraint call once per block.  ``warm``
    may carry the solution of a nearby instance of the same shape; it only
    changes the starting iterate, never the answer.
    """
    cs = _validate_objectives(objectives, d_in, d_out)
    warm_data = warm.warm_data if warm is not None else None
    core = _solve_core([-c for c in cs], d_in, d_out, tol, max_iterations,
                       warm=warm_data)

    blocks = [hermitize(x) for x in core["xs"]]
    objective = sum(np.vdot(c, x).real for c, x in zip(cs, blocks))
    dual = hermitize(-core["y_matrix"])
    return SdpSolution(
        blocks=blocks,
        objective=float(objective),
        dual_matrix=dual,
        dual_objective=float(np.trace(dual).real),
        iterations=core["iterations"],
        primal_residual=core["rp"],
        dual_residual=core["rd"],
        gap=core["gap"],
        status=core["status"],
        warm_data=core["warm"],
    )


def certify_kkt(
    solution: SdpSolution,
    objectives: list[np.ndarray],
    d_in: int,
    d_out: int,
    slackness_tol: float = 1e-5,
    dual_eig_tol: float = -1e-6,
) -> KktReport:
    """Check complementary slackness and dual feasibility of a solution."""
    cs = _validate_objectives(objectives, d_in, d_out)
    yi = np.kron(solution.dual_matrix, np.eye(d_out))
    slack = 0.0
    dual_min = np.inf
    primal_min = np.inf
    marg = -np.eye(d_in, dtype=complex)
    for c, x in zip(cs, solution.blocks):
        s = yi - c
        slack = max(slack, float(np.linalg.norm(s @ x)))
        dual_min = min(dual_min, float(np.linalg.eigvalsh(hermitize(s)).min()))
        primal_min = min(primal_min, float(np.linalg.eigvalsh(hermitize(x)).min()))
        marg += np.einsum("axbx->ab", x.reshape(d_in, d_out, d_in, d_out))
    gap = abs(solution.dual_objective - solution.objective)
    # judged purely by the residuals of the returned pair: a best-so-far
    # iterate handed back after an endgame stall can still certify
    ok = (
        slack <= slackness_tol
        and dual_min >= dual_eig_tol
        and primal_min >= -1e-8
        and float(np.linalg.norm(marg)) <= 1e-6
    )
    return KktReport(
        slackness=slack,
        dual_min_eigenvalue=dual_min,
        primal_min_eigenvalue=primal_min,
        marginal_residual=float(np.linalg.norm(marg)),
        duality_gap=gap,
        ok=ok,
    )


def perturbation_probe(
    solution: SdpSolution,
    objectives: list[np.ndarray],
    d_in: int,
    d_out: int,
    eps_values: tuple[float, ...] = (1e-2, 1e-4),
) -> ProbeReport:
    """Feasible-direction robustness probe around the optimum.

    Mixes the optimal blocks toward the maximally mixed feasible instrument.
    The objective is linear, so a mixing weight ``t`` costs exactly
    ``t * (obj_opt - obj_mixed)``; the report records how far (Frobenius) one
    must move to give up each ``eps`` of objective.
    """
    cs = _validate_objectives(objectives, d_in, d_out)
    nblk = len(cs)
    ref = [np.eye(d_in * d_out, dtype=complex) / (d_out * nblk) for _ in cs]
    obj_ref = sum(np.vdot(c, r).real for c, r in zip(cs, ref))
    drop_full = solution.objective - obj_ref
    dist_full = np.sqrt(sum(
        float(np.linalg.norm(x - r)) ** 2 for x, r in zip(solution.blocks, ref)))
    entries = []
    for eps in eps_values:
        if drop_full <= 0:
            entries.append((eps, 0.0, 0.0))
            continue
        tmix = min(eps / drop_full, 1.0)
        entries.append((eps, tmix * drop_full, tmix * dist_full))
    coeff = dist_full / drop_full if drop_full > 0 else 0.0
    return ProbeReport(entries=entries, linear_coefficient=coeff)


def sdpa_dump(
    objectives: list[np.ndarray], d_in: int, d_out: int, path
) -> None:
    """Write the real-embedded problem in sparse SDPA format (.dat-s).

    The exported problem is the dual form ``min b^T y`` s.t.
    ``sum_q y_q (S_q (x) I) - C_m >= 0`` per block, so any off-the-shelf
    SDPA-family solver reproduces our objective (times two, from the real
    embedding) for cross-checking.
    """
    cs = _validate_objectives(objectives, d_in, d_out)
    k2, t = 2 * d_in, d_out
    ii, jj, b = _sym_basis(k2)
    n = k2 * t
    lines = [
        '"marginal-constrained block SDP (real embedding)"',
        f"{len(b)} = mDIM",
        f"{len(cs)} = nBLOCK",
        " ".join(str(n) for _ in cs) + " = bLOCKsTRUCT",
        " ".join(f"{v:.1f}" for v in b),
    ]
    for m, c in enumerate(cs, start=1):
        cr = _embed(c)
        for r in range(n):
            for s in range(r, n):
                if abs(cr[r, s]) > 1e-15:
                    lines.append(f"0 {m} {r + 1} {s + 1} {cr[r, s]:.17g}")
    for q in range(len(b)):
        i, j = int(ii[q]), int(jj[q])
        w = 1.0 if i == j else 1.0 / np.sqrt(2.0)
        for m in range(1, len(cs) + 1):
            for x in range(t):
                r, s = i * t + x, j * t + x
                lines.append(f"{q + 1} {m} {r + 1} {s + 1} {w:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
