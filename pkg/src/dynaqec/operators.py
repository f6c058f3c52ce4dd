"""Dense operator primitives shared by every other module.

Conventions used throughout the package:

* Multi-factor spaces are ordered big-endian: factor 0 is the slowest index,
  so ``tensor(a, b) == np.kron(a, b)`` puts ``a`` on factor 0.
* ``vectorize(A)`` stacks by action on basis kets, ``|A>> = sum_j (A|j>) x |j>``,
  which for a numpy array is exactly the row-major flatten.  Useful identity:
  ``<<A|(B x C)|A>> = Tr(A^dag B A C^T)``.
* Anything documented as Hermitian is symmetrized as ``(M + M^dag)/2`` before
  an eigensolve; inputs further than ``HERM_TOL`` from Hermitian (relative to
  their norm) are rejected where the contract says so.

All functions are pure and operate on ``numpy.ndarray`` with complex dtype.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "HERM_TOL",
    "tensor",
    "dagger",
    "hermitize",
    "is_hermitian",
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
    "basis_ket",
]

HERM_TOL = 1e-10


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more operators, factor 0 slowest.

    :param ops: square or rectangular matrices.
    :return: the Kronecker product in the given order.
    """
    if not ops:
        raise ValueError("tensor() needs at least one operator")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(a).conj().T


def hermitize(m: np.ndarray) -> np.ndarray:
    """Return the Hermitian part ``(M + M^dag)/2``."""
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m + m.conj().T)


def is_hermitian(m: np.ndarray, tol: float = HERM_TOL) -> bool:
    """Check ``M == M^dag`` within ``tol`` relative to ``max(1, ||M||_F)``."""
    m = np.asarray(m)
    scale = max(1.0, float(np.linalg.norm(m)))
    return float(np.abs(m - m.conj().T).max()) <= tol * scale


def basis_ket(index: int, dim: int) -> np.ndarray:
    """Computational-basis column vector ``|index>`` in dimension ``dim``."""
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def partial_trace(
    m: np.ndarray, dims: Sequence[int], keep: Iterable[int]
) -> np.ndarray:
    """Trace out all factors not in ``keep``.

    :param m: square matrix on the tensor product of ``dims``.
    :param dims: dimension of each factor, factor 0 slowest.
    :param keep: indices of the factors to retain.  The retained factors
        keep their original relative order regardless of the order given.
    :return: the reduced matrix on the kept factors.
    """
    m = np.asarray(m, dtype=complex)
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise ValueError(f"matrix shape {m.shape} does not match dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} factors")

    resh = m.reshape(dims + dims)
    # einsum with repeated labels on the traced factors
    row_labels = list(range(n))
    col_labels = [i if i not in keep else i + n for i in range(n)]
    out_labels = keep + [k + n for k in keep]
    out = np.einsum(resh, row_labels + col_labels, out_labels)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return out.reshape(d_keep, d_keep)


def vectorize(a: np.ndarray) -> np.ndarray:
    """``|A>> = sum_j (A|j>) x |j>`` — the row-major flatten of ``A``.

    ``vectorize(np.eye(2)) == (1, 0, 0, 1)`` and
    ``vectorize(|0><1|) == (0, 1, 0, 0)``.
    """
    return np.asarray(a, dtype=complex).reshape(-1)


def unvectorize(v: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Inverse of :func:`vectorize` for a known matrix shape."""
    v = np.asarray(v, dtype=complex)
    if v.size != shape[0] * shape[1]:
        raise ValueError(f"vector of size {v.size} cannot fill shape {shape}")
    return v.reshape(shape)


def herm_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a (nearly) Hermitian matrix.

    Symmetrizes first, then calls the Hermitian eigensolver.  Eigenvalues
    come back ascending; columns of the second return are the eigenvectors.
    Reconstruction ``V diag(w) V^dag`` is exact to ~1e-10 relative error.
    """
    w, v = np.linalg.eigh(hermitize(m))
    return w, v


def sqrt_psd(m: np.ndarray, cutoff: float | None = None) -> np.ndarray:
    """Principal square root of a PSD matrix (kernel maps to kernel)."""
    w, v = herm_eig(m)
    scale = max(float(w[-1]), 0.0)
    if float(w[0]) < -1e-10 * max(1.0, scale):
        raise ValueError(f"matrix has negative eigenvalue {w[0]:.3e}")
    cut = cutoff if cutoff is not None else 1e-12 * max(1.0, scale)
    root = np.where(w > cut, np.sqrt(np.clip(w, 0.0, None)), 0.0)
    return (v * root) @ v.conj().T


def inv_sqrt_psd(m: np.ndarray, cutoff: float | None = None) -> np.ndarray:
    """Pseudo-inverse square root of a PSD matrix.

    Eigenvalues at or below ``cutoff`` (default ``1e-12 * max(1, lambda_max)``)
    contribute zero, so the result is supported on the numerical range of
    ``m`` only.  Raises ``ValueError`` if ``m`` has an eigenvalue below
    ``-1e-10`` (relative to scale), i.e. is not PSD to tolerance.
    """
    w, v = herm_eig(m)
    scale = max(float(w[-1]), 0.0)
    if float(w[0]) < -1e-10 * max(1.0, scale):
        raise ValueError(f"matrix has negative eigenvalue {w[0]:.3e}")
    cut = cutoff if cutoff is not None else 1e-12 * max(1.0, scale)
    inv_root = np.where(w > cut, 1.0 / np.sqrt(np.clip(w, cut, None)), 0.0)
    return (v * inv_root) @ v.conj().T


def frobenius_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``||a - b||_F``."""
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


# ---------------------------------------------------------------------------
# random operator sampling (deterministic under a seeded Generator)
# ---------------------------------------------------------------------------


def haar_isometry(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    """Haar-random isometry ``V: C^d_in -> C^d_out`` (``V^dag V = I``).

    QR of a complex Gaussian matrix with the phase convention that makes the
    R diagonal real positive, which is the unique Haar-uniform choice.
    """
    if d_out < d_in:
        raise ValueError("isometry needs d_out >= d_in")
    g = rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in))
    q, r = np.linalg.qr(g)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases.conj()


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    """Random density matrix (unit trace, PSD) of the given dimension."""
    r = rank if rank is not None else d
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_cptp_kraus(
    rng: np.random.Generator, d_in: int, d_out: int, kraus_rank: int | None = None
) -> list[np.ndarray]:
    """Kraus operators of a Haar-random CPTP map ``d_in -> d_out``.

    Built by slicing a Haar isometry ``C^d_in -> C^d_out x C^env``.
    """
    env = kraus_rank if kraus_rank is not None else d_in
    w = haar_isometry(rng, d_in, d_out * env)
    return [w.reshape(d_out, env, d_in)[:, j, :] for j in range(env)]
