"""Dense complex linear algebra kernel.

Everything here works on small dense ``numpy`` arrays (at most 64x64 in
practice). Tolerances are relative to ``1 + maxabs(A)`` so that tests do not
depend on the scale of the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .exceptions import InvalidArgumentError

HERMITIAN_TOL = 1e-12

Which = Union[str, int]


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted in descending order and matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def maxabs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D complex array; raise on anything else."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    return arr


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return maxabs(a - a.conj().T) <= tol * (1.0 + maxabs(a))


def _check_hermitian(a: np.ndarray, tol: float) -> np.ndarray:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {a.shape}")
    if not is_hermitian(a, tol):
        raise InvalidArgumentError("matrix is not Hermitian within tolerance")
    return a


def herm_eig(a, tol: float = HERMITIAN_TOL) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    The input is symmetrised before LAPACK is called so the result is exactly
    deterministic for a fixed input.
    """
    a = _check_hermitian(a, tol)
    h = 0.5 * (a + a.conj().T)
    w, v = np.linalg.eigh(h)
    return Spectrum(w[::-1].copy(), v[:, ::-1].copy())


def herm_eigvals(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Eigenvalues only, descending. Cheaper than :func:`herm_eig`."""
    a = _check_hermitian(a, tol)
    return np.linalg.eigvalsh(0.5 * (a + a.conj().T))[::-1]


def min_eigenvalue(a) -> float:
    """Smallest eigenvalue of the Hermitian part of ``a`` (no Hermiticity check)."""
    a = np.asarray(a, dtype=complex)
    return float(np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0])


def jacobi_eigh(a, tol: float = 1e-14, max_sweeps: int = 100) -> Spectrum:
    """Cyclic Jacobi eigensolver for complex Hermitian matrices.

    Sweeps over all (p, q) pairs until the off-diagonal Frobenius mass drops
    below ``tol * ||A||_F``. Kept as an independent route to cross-check
    :func:`herm_eig`.
    """
    a = _check_hermitian(a, HERMITIAN_TOL)
    n = a.shape[0]
    h = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(h)
    if scale == 0.0:
        return Spectrum(np.zeros(n), v)
    for _ in range(max_sweeps):
        off = np.linalg.norm(h - np.diag(np.diag(h)))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = h[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                app, aqq = h[p, p].real, h[q, q].real
                theta = 0.5 * np.arctan2(2.0 * mag, app - aqq)
                c, s = np.cos(theta), np.sin(theta)
                # phase fix diag(1, e^{-i phi}) followed by a real Givens rotation
                rot = np.array([[c, -s], [s * np.conj(phase), c * np.conj(phase)]], dtype=complex)
                cols = [p, q]
                h[:, cols] = h[:, cols] @ rot
                h[cols, :] = rot.conj().T @ h[cols, :]
                v[:, cols] = v[:, cols] @ rot
                h[p, q] = 0.0
                h[q, p] = 0.0
    w = np.real(np.diag(h))
    order = np.argsort(w)[::-1]
    return Spectrum(w[order], v[:, order])


def singular_values(a) -> np.ndarray:
    """Singular values, descending."""
    a = as_matrix(a)
    return np.linalg.svd(a, compute_uv=False)


def schatten_norm(a, p: Union[float, str] = 1.0) -> float:
    """Schatten p-norm ``(sum s_i^p)^(1/p)``; ``p=np.inf`` or ``"inf"`` gives the spectral norm."""
    if isinstance(p, str):
        if p not in ("inf", "∞"):
            raise InvalidArgumentError(f"unknown Schatten index {p!r}")
        p = np.inf
    if not p >= 1:
        raise InvalidArgumentError(f"Schatten index must be >= 1, got {p}")
    s = singular_values(a)
    if s.size == 0:
        return 0.0
    if np.isinf(p):
        return float(s[0])
    top = s[0]
    if top == 0.0:
        return 0.0
    # scaled to avoid overflow for large p
    return float(top * np.sum((s / top) ** p) ** (1.0 / p))


def kron(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, np.asarray(m))
    return out


def _which_index(which: Which) -> int:
    if which in ("first", 0, "A"):
        return 0
    if which in ("second", 1, "B"):
        return 1
    raise InvalidArgumentError(f"which must be 'first' or 'second', got {which!r}")


def _check_dims(r: np.ndarray, dims: Sequence[int]) -> Tuple[int, int]:
    if len(dims) != 2:
        raise InvalidArgumentError("dims must be a pair (dA, dB)")
    da, db = int(dims[0]), int(dims[1])
    if da < 1 or db < 1 or r.shape != (da * db, da * db):
        raise InvalidArgumentError(f"dims {dims} inconsistent with matrix of shape {r.shape}")
    return da, db


def partial_trace(r, dims: Sequence[int], which: Which = "second") -> np.ndarray:
    """Trace out subsystem ``which`` of a bipartite operator on ``dA x dB``."""
    r = as_matrix(r)
    da, db = _check_dims(r, dims)
    t = r.reshape(da, db, da, db)
    if _which_index(which) == 0:
        return np.einsum("ijik->jk", t)
    return np.einsum("ijkj->ik", t)


def partial_transpose(r, dims: Sequence[int], which: Which = "second") -> np.ndarray:
    """Transpose subsystem ``which`` of a bipartite operator."""
    r = as_matrix(r)
    da, db = _check_dims(r, dims)
    t = r.reshape(da, db, da, db)
    if _which_index(which) == 0:
        t = t.transpose(2, 1, 0, 3)
    else:
        t = t.transpose(0, 3, 2, 1)
    return t.reshape(da * db, da * db)


def random_unitary_matrix(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix with phase fix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def orthonormal_completion(v: np.ndarray) -> np.ndarray:
    """Extend the orthonormal columns of ``v`` to a full unitary.

    Canonical basis vectors are projected onto the orthogonal complement of
    the columns collected so far and appended when they survive with norm
    above 1e-8 (projection applied twice for stability).
    """
    v = as_matrix(v)
    n, k = v.shape
    cols = [v[:, j] for j in range(k)]
    basis = np.array(cols).T if cols else np.zeros((n, 0), dtype=complex)
    for i in range(n):
        if basis.shape[1] == n:
            break
        e = np.zeros(n, dtype=complex)
        e[i] = 1.0
        for _ in range(2):
            e = e - basis @ (basis.conj().T @ e)
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            basis = np.column_stack([basis, e / nrm])
    if basis.shape[1] != n:
        raise RuntimeError("orthonormal completion failed")
    return basis
