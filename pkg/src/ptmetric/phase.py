"""Total, dynamical and geometric phase of a cyclic run.

A run is cyclic when ``W(tau) = W(0)`` and ``psi(tau) = exp(i alpha) psi(0)``.
The geometric part is computed from a cyclic gauge
``phi(t) = exp(-i f(t)) psi(t)`` with ``f(tau) - f(0) = alpha``; its time
derivative is taken by fourth-order finite differences, so the
decomposition ``alpha = beta + gamma`` is a genuine numerical check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .dynamics import Trajectory
from .errors import NotCyclic
from .metric import HamiltonianSplit, MetricTrajectory

__all__ = [
    "CyclicRun",
    "wrap_phase",
    "detect_cyclic",
    "dynamical_phase",
    "geometric_phase",
    "fd_derivative",
    "k_identity_residual",
]

CYCLIC_TOL = 1e-6


def wrap_phase(x: float) -> float:
    """Map an angle into ``(-pi, pi]``."""
    y = float(np.mod(x + np.pi, 2.0 * np.pi) - np.pi)
    return np.pi if y == -np.pi else y


@dataclass(frozen=True)
class CyclicRun:
    trajectory: Trajectory
    metric: MetricTrajectory
    is_cyclic: bool
    alpha: float
    metric_defect: float
    overlap_defect: float

    def require(self):
        if not self.is_cyclic:
            raise NotCyclic(
                f"not cyclic: ||W(tau)-W(0)||/||W(0)|| = {self.metric_defect:.3e}, "
                f"|1-|<psi(0)|W|psi(tau)>|| = {self.overlap_defect:.3e}"
            )
        return self

    @property
    def norm(self) -> float:
        psi0 = self.trajectory.values[0]
        return float(np.vdot(psi0, self.metric.W[0] @ psi0).real)


def detect_cyclic(trajectory: Trajectory, metric: MetricTrajectory, tol: float = CYCLIC_TOL) -> CyclicRun:
    if len(trajectory) != len(metric.times) or not np.allclose(trajectory.times, metric.times):
        raise ValueError("trajectory and metric must share the time grid")
    W0, Wt = metric.W[0], metric.W[-1]
    psi0, psit = trajectory.values[0], trajectory.values[-1]
    mdef = float(np.linalg.norm(Wt - W0, 2) / np.linalg.norm(W0, 2))
    n0 = np.vdot(psi0, W0 @ psi0).real
    nt = np.vdot(psit, Wt @ psit).real
    overlap = np.vdot(psi0, W0 @ psit) / np.sqrt(n0 * nt)
    odef = float(abs(1.0 - abs(overlap)))
    cyclic = mdef < tol and odef < tol
    return CyclicRun(trajectory, metric, bool(cyclic), wrap_phase(np.angle(overlap)), mdef, odef)


def fd_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative along axis 0 (one-sided at the ends)."""
    y = np.asarray(values)
    n = y.shape[0]
    if n < 5:
        raise ValueError("need at least 5 samples for fourth-order differences")
    d = np.empty_like(y)
    d[2:-2] = (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * h)
    d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h)
    d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * h)
    d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * h)
    d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * h)
    return d


def _winding(run: CyclicRun) -> int:
    """Whole turns of the accumulated phase, so the default gauge removes them.

    The accumulated phase is the sum of step-to-step overlap angles, which is
    well defined even where ``<psi(0)|W|psi(t)>`` passes through zero.
    """
    psi, W = run.trajectory.values, run.metric.W
    steps = np.einsum("ki,kij,kj->k", psi[:-1].conj(), W[:-1], psi[1:])
    total = float(np.sum(np.angle(steps)))
    return int(np.round((total - run.alpha) / (2.0 * np.pi)))


def _cyclic_gauge(run: CyclicRun, f: Callable[[np.ndarray], np.ndarray] | None):
    t = run.trajectory.times
    tau = t[-1] - t[0]
    if f is None:
        ft = (run.alpha + 2.0 * np.pi * _winding(run)) * (t - t[0]) / tau
    else:
        ft = np.asarray(f(t), dtype=float)
        if abs(wrap_phase(ft[-1] - ft[0] - run.alpha)) > 1e-9:
            raise ValueError("gauge function must satisfy f(tau) - f(0) = alpha (mod 2 pi)")
    return np.exp(-1j * ft)[:, None] * run.trajectory.values / np.sqrt(run.norm)


def dynamical_phase(run: CyclicRun, split: HamiltonianSplit, wrap: bool = True) -> float:
    """``-int <phi|W H|phi> dt`` by composite Simpson quadrature."""
    run.require()
    psi = run.trajectory.values
    integrand = np.einsum("ki,kij,kj->k", psi.conj(), split.W @ split.H, psi).real / run.norm
    value = -float(simpson(integrand, x=run.trajectory.times))
    return wrap_phase(value) if wrap else value


def geometric_phase(run: CyclicRun, f=None, wrap: bool = True) -> float:
    """``-Im int <phi|W dphi/dt> dt`` in the cyclic gauge ``phi = exp(-i f) psi``.

    ``f`` maps the time grid to gauge angles; the default is linear in ``t``.
    """
    run.require()
    phi = _cyclic_gauge(run, f)
    dphi = fd_derivative(phi, run.trajectory.step)
    W = run.metric.W
    integrand = np.einsum("ki,kij,kj->k", phi.conj(), W, dphi).imag
    value = -float(simpson(integrand, x=run.trajectory.times))
    return wrap_phase(value) if wrap else value


def k_identity_residual(run: CyclicRun, split: HamiltonianSplit, f=None) -> float:
    """Max over the grid of ``|<phi|W K|phi> - Re <phi|W dphi/dt>|``.

    This is the relation that makes the geometric phase real.
    """
    phi = _cyclic_gauge(run, f)
    dphi = fd_derivative(phi, run.trajectory.step)
    lhs = np.einsum("ki,kij,kj->k", phi.conj(), split.W @ split.K, phi)
    rhs = np.einsum("ki,kij,kj->k", phi.conj(), split.W, dphi).real
    return float(np.max(np.abs(lhs - rhs)))
