"""Observables, density operators and outcome statistics under a metric ``W``.

An observable ``A`` with ``W A = A^+ W`` is diagonalised through the
Cholesky factor ``W = L L^+``: ``L^+ A L^{-+}`` is Hermitian in the usual
sense, so its eigenvectors mapped back by ``L^{-+}`` are W-orthonormal and
its eigenvalues are exactly real.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import BadWeights, MetricMismatch, NotPhysicallyHermitian, UnnormalizedState
from .linalg import as_matrix, cholesky_factor, dag, group_values, is_physically_hermitian

__all__ = [
    "Observable",
    "DensityOperator",
    "observable_from_operator",
    "ensemble_density",
    "outcome_probabilities",
    "expectation",
    "gibbs_state",
    "partition_function",
]

log = logging.getLogger(__name__)

TOL = 1e-10


@dataclass(frozen=True)
class Observable:
    """Real spectrum ``eigenvalues`` with W-orthonormal eigenvectors (columns of ``vectors``)."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    W: np.ndarray
    tol: float = TOL

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def matrix(self) -> np.ndarray:
        """``sum_i a_i |a_i><a_i| W``."""
        return (self.vectors * self.eigenvalues) @ dag(self.vectors) @ self.W

    def groups(self) -> list[list[int]]:
        scale = max(1.0, float(np.max(np.abs(self.eigenvalues))))
        return group_values(self.eigenvalues, self.tol * scale)

    def levels(self) -> np.ndarray:
        """Distinct eigenvalues, one per degenerate group, ascending."""
        return np.array([float(np.mean(self.eigenvalues[g])) for g in self.groups()])

    def projectors(self) -> list[np.ndarray]:
        """Rank-k projectors ``sum_{i in group} |a_i><a_i| W``, ordered like :meth:`levels`."""
        out = []
        for g in self.groups():
            V = self.vectors[:, g]
            out.append(V @ dag(V) @ self.W)
        return out

    def orthonormality_defect(self) -> float:
        G = dag(self.vectors) @ self.W @ self.vectors
        return float(np.max(np.abs(G - np.eye(self.dim))))


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    W: np.ndarray

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_defect(self) -> float:
        Wr = self.W @ self.matrix
        return float(np.linalg.norm(Wr - dag(Wr), 2))

    def min_weighted_eigenvalue(self) -> float:
        """Smallest eigenvalue of ``W rho``; nonnegative for a valid state."""
        Wr = self.W @ self.matrix
        return float(np.linalg.eigvalsh(0.5 * (Wr + dag(Wr)))[0])

    def is_valid(self, tol: float = 1e-8) -> bool:
        return (abs(self.trace() - 1.0) <= tol and self.hermiticity_defect() <= tol
                and self.min_weighted_eigenvalue() >= -tol)


def observable_from_operator(A, W, tol: float = TOL) -> Observable:
    """Spectral decomposition of an operator that is Hermitian under ``W``."""
    A = as_matrix(A)
    W = as_matrix(W)
    # absolute floor on the energy scale 1 so that a numerically zero A passes
    atol = tol * float(np.linalg.norm(W, 2))
    if not is_physically_hermitian(A, W, max(tol, 1e-9), atol):
        raise NotPhysicallyHermitian("W A != A^+ W")
    L = cholesky_factor(W)
    A_Linvh = dag(sla.solve_triangular(L, dag(A), lower=True))  # A L^{-+}
    B = dag(L) @ A_Linvh
    B = 0.5 * (B + dag(B))
    a, U = np.linalg.eigh(B)
    vectors = sla.solve_triangular(dag(L), U, lower=False)
    return Observable(a, vectors, W, tol)


def ensemble_density(states, W, tol: float = 1e-8) -> DensityOperator:
    """``rho = sum_i p_i |psi_i><psi_i| W`` from ``[(p_i, psi_i), ...]``."""
    W = as_matrix(W)
    ps = np.array([p for p, _ in states], dtype=float)
    if ps.size == 0 or np.any(ps <= 0) or abs(ps.sum() - 1.0) > tol:
        raise BadWeights("weights must be positive and sum to one")
    rho = np.zeros_like(W)
    for p, psi in states:
        psi = np.asarray(psi, dtype=complex)
        n = np.vdot(psi, W @ psi).real
        if abs(n - 1.0) > tol:
            raise UnnormalizedState(f"<psi|W|psi> = {n:.12g}")
        rho += p * np.outer(psi, psi.conj())
    return DensityOperator(rho @ W, W)


def _check_metric(obs: Observable, rho: DensityOperator, tol: float):
    scale = max(1.0, float(np.linalg.norm(obs.W, 2)))
    if obs.W.shape != rho.W.shape or np.linalg.norm(obs.W - rho.W, 2) > tol * scale:
        raise MetricMismatch("observable and state carry different metrics")


def outcome_probabilities(obs: Observable, rho: DensityOperator, tol: float = 1e-10) -> np.ndarray:
    """``P_i = tr(|a_i><a_i| W rho)`` for every eigenvector of ``obs``.

    Round-off negatives down to ``-tol`` are clamped and the vector renormalised.
    """
    _check_metric(obs, rho, 1e-8)
    # tr(|a><a| W rho) = <a| W rho |a>
    P = np.einsum("ji,jk,ki->i", obs.vectors.conj(), obs.W @ rho.matrix, obs.vectors).real
    if np.any(P < -tol):
        raise ValueError(f"negative probability {P.min():.3e}; state is not valid under W")
    if np.any(P < 0):
        log.warning("clamping round-off negative probabilities (min %.3e)", P.min())
        P = np.clip(P, 0.0, None)
        P = P / P.sum()
    return P


def expectation(obs: Observable, rho: DensityOperator, tol: float = 1e-10) -> float:
    """``sum_i a_i P_i``; checked against ``tr(A rho)``."""
    P = outcome_probabilities(obs, rho, tol)
    value = float(np.dot(obs.eigenvalues, P))
    tr = np.trace(obs.matrix @ rho.matrix)
    scale = max(1.0, abs(value))
    if abs(tr.imag) > 1e-8 * scale or abs(tr.real - value) > 1e-8 * scale:
        raise ValueError(f"tr(A rho) = {tr} disagrees with sum a_i P_i = {value}")
    return value


def partition_function(H, W, beta: float) -> float:
    obs = observable_from_operator(H, W)
    return float(np.sum(np.exp(-beta * obs.eigenvalues)))


def gibbs_state(H, W, beta: float) -> DensityOperator:
    """``exp(-beta H) / Z`` assembled from the W-orthonormal eigenbasis of ``H``."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    obs = observable_from_operator(H, W)
    e = obs.eigenvalues
    weights = np.exp(-beta * (e - e.min()))
    weights /= weights.sum()
    V = obs.vectors
    return DensityOperator((V * weights) @ dag(V) @ obs.W, obs.W)
