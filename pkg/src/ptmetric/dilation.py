"""Hermitian dilation of the non-Hermitian dynamics onto ``C^2 (x) C^d``.

With ``M(t) = sqrt(W(t) - I)`` every solution ``psi(t)`` of the non-Hermitian
equation lifts to ``|0>psi + |1>M psi``, and a W-orthonormal solution basis
lifts to an orthonormal basis ``B(t)`` of the doubled space. The dilated
Hamiltonian is ``i dB/dt B^+``. Vectors of the doubled space are stored as
``concat(upper, lower)``, i.e. the ancilla is the leading tensor factor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import HamiltonianSchedule, default_steps, evolution_operator, propagate_state
from .errors import BadWeights, MetricBelowIdentity, MetricMismatch
from .linalg import as_matrix, cholesky_factor, dag, principal_sqrt, sqrt_derivative
from .measurement import Observable
from .metric import MetricTrajectory, build_metric, metric_derivative

__all__ = [
    "DilatedSystem",
    "lift",
    "lift_basis",
    "build_dilation",
    "dilated_hamiltonian",
    "dilated_density",
    "dilated_observable",
    "dilated_measurement",
    "propagate_dilated",
    "schrodinger_consistency",
]


def lift(psi, M) -> np.ndarray:
    """``|0> psi + |1> M psi``."""
    psi = np.asarray(psi, dtype=complex)
    return np.concatenate([psi, M @ psi])


def lift_basis(Psi, M) -> np.ndarray:
    """Columns ``|0>psi_i + |1>M psi_i`` followed by ``|1>psi_i - |0>M psi_i``."""
    MP = M @ Psi
    return np.block([[Psi, -MP], [MP, Psi]])


def _lift_basis_derivative(Psi, dPsi, M, dM) -> np.ndarray:
    dMP = dM @ Psi + M @ dPsi
    return np.block([[dPsi, -dMP], [dMP, dPsi]])


def _check_margin(W, margin: float):
    lam = np.linalg.eigvalsh(W)[..., 0] - 1.0
    slack = 1e-12 * float(np.max(np.linalg.norm(W, ord=2, axis=(-2, -1))))
    if np.min(lam) < margin - slack:
        raise MetricBelowIdentity(
            f"min eig(W - I) = {np.min(lam):.3e} < margin {margin:.1e}; "
            "rescale with metric.ensure_dilation_ready first"
        )


@dataclass(frozen=True)
class DilatedSystem:
    """Dilation sampled on the metric grid.

    ``basis[k]`` holds the ``2d`` lifted basis states as columns and ``H[k]``
    the (symmetrised) dilated Hamiltonian; ``asymmetry[k]`` is
    ``||H - H^+|| / ||H||`` before symmetrisation.
    """

    times: np.ndarray
    M: np.ndarray
    basis: np.ndarray
    H: np.ndarray
    asymmetry: np.ndarray

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    def orthonormality_defect(self) -> float:
        G = dag(self.basis) @ self.basis
        return float(np.max(np.abs(G - np.eye(self.dim))))

    def hermiticity_defect(self) -> float:
        return float(np.max(self.asymmetry))


def default_basis(W0) -> np.ndarray:
    """W-orthonormalised standard basis: columns of ``L^{-+}`` for ``W0 = L L^+``."""
    L = cholesky_factor(W0)
    return np.linalg.solve(dag(L), np.eye(W0.shape[0]))


def build_dilation(metric: MetricTrajectory, schedule: HamiltonianSchedule, basis_states=None,
                   derivative: str = "exact", margin: float = 1e-6) -> DilatedSystem:
    """Lift a W(0)-orthonormal basis, co-propagated on the metric grid.

    ``derivative="exact"`` differentiates the lifted states analytically
    (``dpsi/dt = -i H psi``, ``dM/dt`` from a Sylvester equation);
    ``"central"`` uses second-order finite differences on the grid.
    """
    W = metric.W
    _check_margin(W, margin)
    times = metric.times
    n = len(times) - 1
    Psi0 = default_basis(W[0]) if basis_states is None else np.asarray(basis_states, dtype=complex)
    G = dag(Psi0) @ W[0] @ Psi0
    if np.max(np.abs(G - np.eye(metric.dim))) > 1e-8:
        raise ValueError("basis states must be W(0)-orthonormal")
    U = evolution_operator(schedule, n, full=True).values
    Psi = U @ Psi0
    M = np.array([principal_sqrt(Wk - np.eye(metric.dim)) for Wk in W])
    B = np.array([lift_basis(P, Mk) for P, Mk in zip(Psi, M)])

    if derivative == "exact":
        Hnh = schedule.samples(times)
        dB = np.empty_like(B)
        for k in range(n + 1):
            dPsi = -1j * Hnh[k] @ Psi[k]
            dM = sqrt_derivative(M[k], metric_derivative(Hnh[k], W[k]))
            dB[k] = _lift_basis_derivative(Psi[k], dPsi, M[k], dM)
    elif derivative == "central":
        dB = np.gradient(B, times, axis=0, edge_order=2)
    else:
        raise ValueError(f"unknown derivative mode {derivative!r}")

    Ht = 1j * dB @ dag(B)
    asym = (np.linalg.norm(Ht - dag(Ht), ord=2, axis=(1, 2))
            / np.maximum(np.linalg.norm(Ht, ord=2, axis=(1, 2)), 1e-300))
    Ht = 0.5 * (Ht + dag(Ht))
    return DilatedSystem(times, M, B, Ht, asym)


def dilated_hamiltonian(Hnh, W) -> np.ndarray:
    """Dilated Hamiltonian at one instant from ``H(t)`` and ``W(t)`` alone.

    ``i dB/dt B^+`` depends on the basis only through ``Psi Psi^+ = W^{-1}``,
    so any W-orthonormal basis gives the same result; a Cholesky one is used.
    """
    Hnh = as_matrix(Hnh)
    W = as_matrix(W)
    d = W.shape[0]
    M = principal_sqrt(W - np.eye(d))
    dM = sqrt_derivative(M, metric_derivative(Hnh, W))
    Psi = default_basis(W)
    B = lift_basis(Psi, M)
    dB = _lift_basis_derivative(Psi, -1j * Hnh @ Psi, M, dM)
    Ht = 1j * dB @ dag(B)
    return 0.5 * (Ht + dag(Ht))


def dilated_density(states, M) -> np.ndarray:
    """``sum_i p_i |Psi_i><Psi_i|`` with ``Psi_i`` the lift of ``psi_i``."""
    ps = np.array([p for p, _ in states], dtype=float)
    if ps.size == 0 or np.any(ps <= 0) or abs(ps.sum() - 1.0) > 1e-8:
        raise BadWeights("weights must be positive and sum to one")
    d = M.shape[0]
    rho = np.zeros((2 * d, 2 * d), dtype=complex)
    for p, psi in states:
        v = lift(psi, M)
        rho += p * np.outer(v, v.conj())
    return rho


def dilated_observable(obs: Observable, M) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A, vectors)``: the conventional Hermitian observable
    ``sum_i a_i |a~_i><a~_i|`` and its lifted eigenvectors as columns."""
    vecs = np.concatenate([obs.vectors, M @ obs.vectors], axis=0)
    A = (vecs * obs.eigenvalues) @ dag(vecs)
    return A, vecs


def dilated_measurement(obs: Observable, M, rho_dilated) -> np.ndarray:
    """``<a~_i| rho |a~_i>`` for each eigenvector of ``obs``."""
    d = obs.dim
    if M.shape != (d, d) or np.linalg.norm(M @ M + np.eye(d) - obs.W, 2) > 1e-8 * np.linalg.norm(obs.W, 2):
        raise MetricMismatch("M does not satisfy M^2 = W - I for the observable's metric")
    _, vecs = dilated_observable(obs, M)
    return np.einsum("ji,jk,ki->i", vecs.conj(), rho_dilated, vecs).real


def propagate_dilated(schedule: HamiltonianSchedule, metric: MetricTrajectory, Psi0,
                      steps: int | None = None):
    """Propagate a ``2d`` state under the dilated Hamiltonian with RK4.

    The dilated Hamiltonian is evaluated on a half-step grid from a metric
    rebuilt at twice the resolution from ``metric``'s initial ``eta``.
    Returns ``(times, states)``.
    """
    if steps is None:
        steps = default_steps(schedule)
    eta0 = metric.eta.values[0]
    fine = build_metric(schedule, eta0, 2 * steps)
    # a grid-minimum rescale does not bound W - I between grid points
    _check_margin(fine.W, 0.0)
    Hnh = schedule.samples(fine.times)
    Ht = np.array([dilated_hamiltonian(Hk, Wk) for Hk, Wk in zip(Hnh, fine.W)])
    states = kernels.rk4_linear(np.ascontiguousarray(-1j * Ht), None,
                                np.asarray(Psi0, dtype=complex), schedule.duration / steps)
    return fine.times[::2], states


def schrodinger_consistency(schedule: HamiltonianSchedule, metric: MetricTrajectory, psi0,
                            steps: int | None = None) -> float:
    """Relative endpoint mismatch between the dilated evolution of
    ``lift(psi0, M(0))`` and the lift of the independently propagated ``psi(tau)``."""
    if steps is None:
        steps = default_steps(schedule)
    d = metric.dim
    M0 = principal_sqrt(metric.W[0] - np.eye(d))
    _, states = propagate_dilated(schedule, metric, lift(psi0, M0), steps)
    psi = propagate_state(schedule, psi0, steps).final
    W_tau = build_metric(schedule, metric.eta.values[0], steps).W[-1]
    target = lift(psi, principal_sqrt(W_tau - np.eye(d)))
    return float(np.linalg.norm(states[-1] - target) / np.linalg.norm(target))
