"""The time-dependent metric ``W(t) = eta(t)^+ eta(t)`` and the split of
``H(t)`` into an energy observable and a geometric part.

For a schedule ``Hnh(t)`` the split is ``Hnh = H + iK`` with
``K = -(1/2) W^{-1} dW/dt``. Because ``W`` obeys
``dW/dt = -i (Hnh^+ W - W Hnh)``, ``K`` is evaluated algebraically and the
finite-difference derivative of ``W`` is only used as a cross-check.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import HamiltonianSchedule, Trajectory, propagate_eta
from .errors import IllConditionedMetric, NonDiagonalizable
from .linalg import BiorthonormalSystem, as_matrix, dag, eig_biorthonormal

__all__ = [
    "MetricTrajectory",
    "HamiltonianSplit",
    "ClosedFormSplit",
    "Phase",
    "build_metric",
    "split_hamiltonian",
    "split_at",
    "metric_derivative",
    "closed_form_split",
    "biorthonormal_eta",
    "classify_phase",
    "ensure_dilation_ready",
    "flow_residual",
    "periodicity_defect",
]

COND_BOUND = 1e12
DILATION_MARGIN = 1e-6


@dataclass(frozen=True)
class MetricTrajectory:
    """``eta(t_k)`` and the cached ``W(t_k)`` on a uniform grid.

    ``scale`` records the overall factor already applied to ``eta`` by
    :func:`ensure_dilation_ready` (``W`` carries ``scale**2``).
    """

    eta: Trajectory
    W: np.ndarray
    scale: float = 1.0

    @property
    def times(self) -> np.ndarray:
        return self.eta.times

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def eta_at(self, t: float) -> np.ndarray:
        ts = self.times
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2))
        s = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1.0 - s) * self.eta.values[k] + s * self.eta.values[k + 1]

    def at(self, t: float) -> np.ndarray:
        """``W(t)`` off the grid, rebuilt from linearly interpolated ``eta``."""
        e = self.eta_at(t)
        return dag(e) @ e

    def rescaled(self, c: float) -> "MetricTrajectory":
        eta = replace(self.eta, values=c * self.eta.values)
        return MetricTrajectory(eta, (c * c) * self.W, self.scale * c)

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.W)))


def _metric_from_eta(eta: Trajectory) -> MetricTrajectory:
    W = dag(eta.values) @ eta.values
    W = 0.5 * (W + dag(W))
    return MetricTrajectory(eta, W)


def build_metric(schedule: HamiltonianSchedule, eta0=None, steps: int | None = None,
                 **kwargs) -> MetricTrajectory:
    """Propagate ``eta`` from ``eta0`` (identity by default) and form ``W = eta^+ eta``.

    Extra keyword arguments go to :func:`ptmetric.dynamics.propagate_eta`.
    """
    return _metric_from_eta(propagate_eta(schedule, eta0, steps, **kwargs))


def metric_derivative(Hnh: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``dW/dt = -i (Hnh^+ W - W Hnh)``."""
    return -1j * (dag(Hnh) @ W - W @ Hnh)


def split_at(Hnh, W, cond_bound: float = COND_BOUND) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H, K)`` for one instant."""
    Hnh = as_matrix(Hnh)
    W = as_matrix(W)
    c = np.linalg.cond(W)
    if not np.isfinite(c) or c > cond_bound:
        raise IllConditionedMetric(f"cond(W) = {c:.3e} exceeds {cond_bound:.1e}")
    K = 0.5j * np.linalg.solve(W, dag(Hnh) @ W - W @ Hnh)
    return Hnh - 1j * K, K


@dataclass(frozen=True)
class HamiltonianSplit:
    times: np.ndarray
    Hnh: np.ndarray
    W: np.ndarray
    H: np.ndarray
    K: np.ndarray

    def reconstruction_error(self) -> float:
        return float(np.max(np.abs(self.H + 1j * self.K - self.Hnh)))

    def hermiticity_residuals(self, scale: str = "self") -> tuple[np.ndarray, np.ndarray]:
        """``||W X - X^+ W||`` for ``X = H`` and ``X = K`` per grid point.

        ``scale="self"`` divides by ``||W X||``; ``scale="hamiltonian"`` by
        ``||W|| ||Hnh||``, which stays meaningful when ``X`` vanishes.
        """
        out = []
        for X in (self.H, self.K):
            WX = self.W @ X
            num = np.linalg.norm(WX - dag(X) @ self.W, ord=2, axis=(1, 2))
            if scale == "self":
                den = np.linalg.norm(WX, ord=2, axis=(1, 2))
            elif scale == "hamiltonian":
                den = (np.linalg.norm(self.W, ord=2, axis=(1, 2))
                       * np.linalg.norm(self.Hnh, ord=2, axis=(1, 2)))
            else:
                raise ValueError(f"unknown scale {scale!r}")
            out.append(np.divide(num, den, out=np.zeros_like(num), where=den > 0))
        return out[0], out[1]

    def energy_spectra(self) -> np.ndarray:
        """Eigenvalues of ``H(t_k)``, sorted by real part."""
        ev = np.linalg.eigvals(self.H)
        return np.take_along_axis(ev, np.argsort(ev.real, axis=1), axis=1)

    def max_imag_energy(self) -> float:
        return float(np.max(np.abs(self.energy_spectra().imag)))


def split_hamiltonian(schedule: HamiltonianSchedule, metric: MetricTrajectory,
                      cond_bound: float = COND_BOUND) -> HamiltonianSplit:
    times = metric.times
    Hnh = schedule.samples(times)
    H = np.empty_like(Hnh)
    K = np.empty_like(Hnh)
    for k in range(len(times)):
        H[k], K[k] = split_at(Hnh[k], metric.W[k], cond_bound)
    return HamiltonianSplit(times, Hnh, metric.W, H, K)


def flow_residual(schedule: HamiltonianSchedule, metric: MetricTrajectory) -> float:
    """Max relative residual of ``dW/dt + i(Hnh^+ W - W Hnh) = 0`` using second-order
    finite differences of the cached ``W``."""
    W = metric.W
    dW = np.gradient(W, metric.times, axis=0, edge_order=2)
    Hnh = schedule.samples(metric.times)
    exact = -1j * (dag(Hnh) @ W - W @ Hnh)
    scale = max(float(np.max(np.linalg.norm(exact, ord=2, axis=(1, 2)))),
                float(np.max(np.linalg.norm(W, ord=2, axis=(1, 2)))) / schedule.duration)
    return float(np.max(np.linalg.norm(dW - exact, ord=2, axis=(1, 2))) / scale)


def periodicity_defect(metric: MetricTrajectory) -> float:
    """``||W(tau) - W(0)|| / ||W(0)||``."""
    return float(np.linalg.norm(metric.W[-1] - metric.W[0], 2) / np.linalg.norm(metric.W[0], 2))


def biorthonormal_eta(H0, t: float = 0.0, tol: float = 1e-10) -> np.ndarray:
    """``eta(t) = sum_i exp(i w_i t) |i><left_i|`` for a constant diagonalizable ``H0``,
    using the balanced biorthonormal gauge."""
    system = eig_biorthonormal(H0, tol).balanced()
    return np.exp(1j * system.eigenvalues * t)[:, None] * dag(system.left)


@dataclass(frozen=True)
class ClosedFormSplit:
    """Analytic metric and split for a constant diagonalizable ``H0``."""

    system: BiorthonormalSystem
    H: np.ndarray
    K: np.ndarray

    def W(self, t: float) -> np.ndarray:
        L = self.system.left
        g = np.exp(-2.0 * self.system.eigenvalues.imag * t)
        return (L * g) @ dag(L)

    def eta(self, t: float) -> np.ndarray:
        return np.exp(1j * self.system.eigenvalues * t)[:, None] * dag(self.system.left)


def closed_form_split(H0, tol: float = 1e-10) -> ClosedFormSplit:
    system = eig_biorthonormal(H0, tol).balanced()
    w = system.eigenvalues
    return ClosedFormSplit(system, system.reconstruct(w.real), system.reconstruct(w.imag))


class Phase(enum.Enum):
    ALL_REAL = "AllReal"
    COMPLEX_PAIRS = "ComplexPairs"
    DEFECTIVE = "Defective"


def classify_phase(H0, tol: float = 1e-10) -> Phase:
    """Spectral phase of a constant ``H0``; ``tol`` is relative to ``max(1, ||H0||)``."""
    try:
        system = eig_biorthonormal(H0, tol)
    except NonDiagonalizable:
        return Phase.DEFECTIVE
    scale = max(1.0, float(np.linalg.norm(as_matrix(H0), 2)))
    if np.all(np.abs(system.eigenvalues.imag) <= tol * scale):
        return Phase.ALL_REAL
    return Phase.COMPLEX_PAIRS


def ensure_dilation_ready(metric: MetricTrajectory, margin: float = DILATION_MARGIN) -> MetricTrajectory:
    """Rescale ``eta -> c eta`` so that ``min_k lambda_min(W(t_k)) = 1 + margin``."""
    lam = metric.min_eigenvalue()
    return metric.rescaled(float(np.sqrt((1.0 + margin) / lam)))
