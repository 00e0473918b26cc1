"""Dense complex linear algebra used throughout the package.

Everything here works on small dense ``(d, d)`` complex arrays. The
biorthonormal decomposition returns right eigenvectors of unit norm and
puts all normalisation into the left eigenvectors; use
:meth:`BiorthonormalSystem.balanced` to switch to the symmetric gauge in
which right and left partners share the same norm.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NonDiagonalizable, NotHermitian, NotPSD

__all__ = [
    "BiorthonormalSystem",
    "as_matrix",
    "dag",
    "eig_biorthonormal",
    "is_positive_definite",
    "is_physically_hermitian",
    "principal_sqrt",
    "sqrt_derivative",
    "group_values",
    "cholesky_factor",
]

DEGENERACY_RTOL = 1e-8


def as_matrix(M) -> np.ndarray:
    """Return ``M`` as a finite, square complex array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def dag(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def group_values(values, atol: float) -> list[list[int]]:
    """Cluster indices of ``values`` whose members lie within ``atol``.

    Clusters are built greedily by single linkage over the values sorted by
    real part then imaginary part, so the output order is deterministic.
    """
    values = np.asarray(values)
    order = np.lexsort((np.imag(values), np.real(values)))
    groups: list[list[int]] = []
    for idx in order:
        for g in groups:
            if np.min(np.abs(values[g] - values[idx])) <= atol:
                g.append(int(idx))
                break
        else:
            groups.append([int(idx)])
    return groups


@dataclass(frozen=True)
class BiorthonormalSystem:
    """Eigenvalues with paired right (columns of ``right``) and left
    (columns of ``left``) eigenvectors, ``left[:, i].conj() @ right[:, j] == delta_ij``.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self, values=None) -> np.ndarray:
        """``sum_i values[i] |right_i><left_i|`` (defaults to the eigenvalues)."""
        v = self.eigenvalues if values is None else np.asarray(values)
        return (self.right * v) @ dag(self.left)

    def projector(self, i: int) -> np.ndarray:
        return np.outer(self.right[:, i], self.left[:, i].conj())

    def biorthogonality_defect(self) -> float:
        return float(np.max(np.abs(dag(self.left) @ self.right - np.eye(self.dim))))

    def completeness_defect(self) -> float:
        return float(np.linalg.norm(self.right @ dag(self.left) - np.eye(self.dim), 2))

    def balanced(self) -> "BiorthonormalSystem":
        """Rescale each pair so that ``||right_i|| == ||left_i||``.

        In this gauge ``sum_i |left_i><left_i|`` is fixed for a nondegenerate
        spectrum, independent of the phases LAPACK happened to pick.
        """
        nr = np.linalg.norm(self.right, axis=0)
        nl = np.linalg.norm(self.left, axis=0)
        s = np.sqrt(nl / nr)
        return BiorthonormalSystem(self.eigenvalues.copy(), self.right * s, self.left / s)


def eig_biorthonormal(M, tol: float = 1e-10) -> BiorthonormalSystem:
    """Biorthonormal eigendecomposition of a diagonalizable matrix.

    Parameters
    ----------
    M : array_like, shape (d, d)
    tol : float
        Relative tolerance. The reconstruction residual must stay below
        ``tol * ||M||`` and the biorthogonality defect below ``tol``.

    Raises
    ------
    NonDiagonalizable
        If either check fails, which is what happens at an exceptional point.
    """
    M = as_matrix(M)
    scale = np.linalg.norm(M, 2)
    w, R = np.linalg.eig(M)
    R = R / np.linalg.norm(R, axis=0)

    # orthonormalise inside each (near-)degenerate cluster
    groups = group_values(w, DEGENERACY_RTOL * max(scale, 1.0))
    for g in groups:
        if len(g) < 2:
            continue
        mean = np.mean(w[g])
        w[g] = mean
        Q, _ = np.linalg.qr(R[:, g])
        R[:, g] = Q
    # deterministic output: ascending (real, imag) order, largest component real positive
    order = [i for g in groups for i in g]
    w, R = w[order], R[:, order]
    big = R[np.argmax(np.abs(R), axis=0), np.arange(R.shape[1])]
    R = R * (np.abs(big) / big)

    try:
        Linv = np.linalg.inv(R)
    except np.linalg.LinAlgError as exc:
        raise NonDiagonalizable("eigenvector matrix is singular") from exc
    system = BiorthonormalSystem(w, R, dag(Linv))

    defect = system.biorthogonality_defect()
    if not np.isfinite(defect) or defect > tol:
        raise NonDiagonalizable(f"biorthogonality defect {defect:.3e} exceeds {tol:.1e}")
    resid = np.linalg.norm(system.reconstruct() - M, 2)
    if resid > tol * scale:
        raise NonDiagonalizable(
            f"reconstruction residual {resid:.3e} exceeds {tol * scale:.3e}"
        )
    return system


def _hermiticity_check(W: np.ndarray, tol: float) -> float:
    scale = max(np.linalg.norm(W, 2), 1.0)
    err = np.linalg.norm(W - dag(W), 2)
    if err > tol * scale:
        raise NotHermitian(f"||W - W^+|| = {err:.3e}")
    return scale


def is_positive_definite(W, tol: float = 1e-10) -> bool:
    """True iff the smallest eigenvalue of the Hermitian matrix ``W`` exceeds ``tol``."""
    W = as_matrix(W)
    _hermiticity_check(W, tol)
    lam = np.linalg.eigvalsh(0.5 * (W + dag(W)))
    return bool(lam[0] > tol)


def is_physically_hermitian(X, W, tol: float = 1e-10, atol: float = 0.0) -> bool:
    """True iff ``||W X - X^+ W|| <= tol * ||W X|| + atol``."""
    X = as_matrix(X)
    W = as_matrix(W)
    WX = W @ X
    return bool(np.linalg.norm(WX - dag(X) @ W, 2) <= tol * np.linalg.norm(WX, 2) + atol)


def principal_sqrt(P, tol: float = 1e-10) -> np.ndarray:
    """Hermitian positive square root of a Hermitian positive-semidefinite matrix.

    Eigenvalues in ``[-tol*||P||, 0)`` are treated as round-off and clipped.
    """
    P = as_matrix(P)
    scale = _hermiticity_check(P, tol)
    lam, V = np.linalg.eigh(0.5 * (P + dag(P)))
    if lam[0] < -tol * scale:
        raise NotPSD(f"smallest eigenvalue {lam[0]:.3e} is negative")
    root = np.sqrt(np.clip(lam, 0.0, None))
    S = (V * root) @ dag(V)
    return 0.5 * (S + dag(S))


def sqrt_derivative(S, dP) -> np.ndarray:
    """Time derivative of ``S = sqrt(P)`` given ``dP``: solves ``S X + X S = dP``.

    ``S`` must be Hermitian positive-definite.
    """
    S = as_matrix(S)
    lam, V = np.linalg.eigh(S)
    if lam[0] <= 0:
        raise NotPSD("square root must be strictly positive to be differentiable")
    B = dag(V) @ dP @ V
    X = B / (lam[:, None] + lam[None, :])
    return V @ X @ dag(V)


def cholesky_factor(W) -> np.ndarray:
    """Lower-triangular ``L`` with ``W = L L^+``."""
    W = as_matrix(W)
    return sla.cholesky(0.5 * (W + dag(W)), lower=True)
