"""Krylov-subspace kernels for the local DMRG and TDVP problems.

Both kernels only need a matrix-vector product, supplied as a callable on
flat complex vectors.
"""

import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from utils.errors import ConvergenceError, NumericalFault


logger = logging.getLogger(__name__)

MatVec = Callable[[np.ndarray], np.ndarray]

# Below this size the local problem is densified.
DENSE_LIMIT = 256


def expm_krylov(matvec: MatVec, v: np.ndarray, tau: complex, tol: float = 1e-12,
                max_dim: int = 40) -> np.ndarray:
    """
    Apply exp(tau * H) to v for Hermitian H with a Lanczos basis.

    Args:
        matvec: Product H @ x
        v: Start vector
        tau: Complex step, e.g. -1j * dt for real-time evolution
        tol: Bound on the a-posteriori error estimate relative to |v|
        max_dim: Largest Krylov dimension before giving up on the estimate

    Returns:
        exp(tau * H) v with the shape of v
    """
    shape = v.shape
    v = v.reshape(-1)
    beta0 = np.linalg.norm(v)
    if beta0 == 0.0:
        return v.reshape(shape).copy()
    max_dim = min(max_dim, v.size)

    basis = [v / beta0]
    alphas = []
    betas = []
    w = matvec(basis[0])
    while True:
        j = len(basis) - 1
        alpha = float(np.vdot(basis[j], w).real)
        alphas.append(alpha)
        w = w - alpha * basis[j]
        if j > 0:
            w = w - betas[-1] * basis[j - 1]
        # full reorthogonalization
        for b in basis:
            w = w - np.vdot(b, w) * b
        beta = float(np.linalg.norm(w))

        coeffs = _tridiagonal_expm(alphas, betas, tau)
        error = beta * abs(coeffs[-1])
        if beta < 1e-14 or error < tol or len(basis) >= max_dim:
            if error >= tol and beta >= 1e-14:
                logger.debug("krylov exponential stopped at dim %d with error %.2e",
                             len(basis), error)
            result = beta0 * (np.array(basis).T @ coeffs)
            if not np.all(np.isfinite(result)):
                raise NumericalFault("non-finite values in Krylov exponential")
            return result.reshape(shape)
        betas.append(beta)
        basis.append(w / beta)
        w = matvec(basis[-1])


def _tridiagonal_expm(alphas: Sequence[float], betas: Sequence[float], tau: complex) -> np.ndarray:
    """First column of exp(tau * T) for the Lanczos tridiagonal T."""
    if len(alphas) == 1:
        return np.array([np.exp(tau * alphas[0])], dtype=complex)
    evals, evecs = eigh_tridiagonal(np.array(alphas), np.array(betas))
    return evecs @ (np.exp(tau * evals) * evecs[0, :])


def lowest_eigenpair(matvec: MatVec, v0: np.ndarray, tol: float = 1e-13,
                     max_iter: Optional[int] = None) -> Tuple[float, np.ndarray]:
    """
    Lowest eigenpair of a Hermitian operator given only its action.

    Small problems are densified; larger ones go to ARPACK's Lanczos.

    Returns:
        (eigenvalue, normalized eigenvector shaped like v0)
    """
    shape = v0.shape
    dim = v0.size
    if dim <= DENSE_LIMIT:
        basis = np.eye(dim, dtype=complex)
        matrix = np.column_stack([matvec(basis[:, k]) for k in range(dim)])
        matrix = 0.5 * (matrix + matrix.conj().T)
        evals, evecs = eigh(matrix)
        return float(evals[0]), evecs[:, 0].reshape(shape)

    operator = LinearOperator((dim, dim), matvec=matvec, dtype=complex)
    start = v0.reshape(-1)
    if np.linalg.norm(start) == 0.0:
        start = np.ones(dim, dtype=complex)
    try:
        evals, evecs = eigsh(operator, k=1, which="SA", v0=start, tol=tol, maxiter=max_iter)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(f"local eigensolver did not converge: {exc}") from exc
    vec = evecs[:, 0]
    return float(evals[0]), (vec / np.linalg.norm(vec)).reshape(shape)
