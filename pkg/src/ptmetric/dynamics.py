"""Fixed-step RK4 propagation of states, the metric generator, densities and
the evolution operator for a (generally non-Hermitian) ``H(t)``.

All propagators share one scheme: the schedule is sampled once on the
half-step grid and handed to the stepping kernel in :mod:`ptmetric.kernels`.
The same samples, taken every other one, drive a coarse run at step ``2h``
whose endpoint difference gives the step-doubling error estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import SingularEta, StepTooCoarse
from .linalg import as_matrix

__all__ = [
    "HamiltonianSchedule",
    "Trajectory",
    "propagate_state",
    "propagate_eta",
    "propagate_density",
    "evolution_operator",
    "default_steps",
]

STEP_NORM = 0.025
ERROR_TOL = 1e-6
ETA_COND_BOUND = 1e8


@dataclass(frozen=True)
class HamiltonianSchedule:
    """A map ``t -> H(t)`` on ``[0, duration]``.

    Build instances with :meth:`constant`, :meth:`from_function` or
    :meth:`from_grid` rather than directly.
    """

    func: Callable[[float], np.ndarray]
    dim: int
    duration: float
    time_independent: bool = False
    label: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.func(t), dtype=complex)

    @classmethod
    def constant(cls, H, duration: float, label: str = "constant", **params):
        H = as_matrix(H).copy()
        H.setflags(write=False)
        return cls(lambda t: H, H.shape[0], float(duration), True, label, params)

    @classmethod
    def from_function(cls, func, duration: float, dim: int | None = None, label: str = "function", **params):
        if dim is None:
            dim = as_matrix(func(0.0)).shape[0]
        return cls(func, int(dim), float(duration), False, label, params)

    @classmethod
    def from_grid(cls, times, matrices, label: str = "grid"):
        """Piecewise-linear interpolation between samples ``(t_k, H_k)``."""
        times = np.asarray(times, dtype=float)
        mats = np.asarray(matrices, dtype=complex)
        if times.ndim != 1 or mats.shape[0] != times.size or mats.ndim != 3:
            raise ValueError("need one (d, d) matrix per time sample")
        if times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")
        if times[0] != 0.0:
            raise ValueError("grid must start at t = 0")
        if not np.all(np.isfinite(mats)):
            raise ValueError("grid matrices have non-finite entries")
        mats = mats.copy()
        mats.setflags(write=False)

        def interp(t):
            k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2))
            s = (t - times[k]) / (times[k + 1] - times[k])
            return (1.0 - s) * mats[k] + s * mats[k + 1]

        return cls(interp, mats.shape[1], float(times[-1]), False, label,
                   {"times": times, "matrices": mats})

    def samples(self, times) -> np.ndarray:
        return np.array([self(float(t)) for t in times], dtype=complex)

    def max_norm(self, n: int = 65) -> float:
        ts = np.linspace(0.0, self.duration, 1 if self.time_independent else n)
        if "times" in self.params:
            ts = self.params["times"]
        return max(float(np.linalg.norm(H, 2)) for H in self.samples(ts))


def default_steps(schedule: HamiltonianSchedule, step_norm: float = STEP_NORM) -> int:
    """Smallest ``N`` with ``h * max ||H(t)|| <= step_norm``."""
    return max(1, math.ceil(schedule.duration * schedule.max_norm() / step_norm))


@dataclass(frozen=True)
class Trajectory:
    """Values sampled on the uniform grid ``times``; ``values[k]`` belongs to ``times[k]``."""

    times: np.ndarray
    values: np.ndarray
    error_estimate: float = 0.0

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def __len__(self) -> int:
        return len(self.times)


def _integrate(schedule, y0, steps, left: bool, right: bool, error_tol, check) -> Trajectory:
    n = default_steps(schedule) if steps is None else int(steps)
    if n < 1:
        raise ValueError("steps must be >= 1")
    h = schedule.duration / n
    half_grid = np.linspace(0.0, schedule.duration, 2 * n + 1)
    if schedule.time_independent:
        H = schedule(0.0)
        samples = np.broadcast_to(H, (2 * n + 1,) + H.shape)
    else:
        samples = schedule.samples(half_grid)
    L = np.ascontiguousarray(-1j * samples) if left else None
    R = np.ascontiguousarray(1j * samples) if right else None

    values = kernels.rk4_linear(L, R, y0, h)
    err = 0.0
    if check and n >= 2:
        n2 = n - n % 2
        Lc = None if L is None else np.ascontiguousarray(L[: 2 * n2 + 1 : 2])
        Rc = None if R is None else np.ascontiguousarray(R[: 2 * n2 + 1 : 2])
        coarse = kernels.rk4_linear(Lc, Rc, y0, 2.0 * h)
        fine = values[n2]
        err = float(np.linalg.norm(coarse[-1] - fine) / 15.0 / max(np.linalg.norm(fine), 1e-300))
        if err > error_tol:
            raise StepTooCoarse(
                f"estimated relative error {err:.3e} exceeds {error_tol:.1e} with {n} steps"
            )
    times = np.linspace(0.0, schedule.duration, n + 1)
    return Trajectory(times, values, err)


def propagate_state(schedule: HamiltonianSchedule, psi0, steps: int | None = None,
                    error_tol: float = ERROR_TOL, check: bool = True) -> Trajectory:
    """Solve ``i d/dt psi = H(t) psi`` from ``psi(0) = psi0``."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (schedule.dim,) or not np.any(psi0):
        raise ValueError("psi0 must be a nonzero vector of the schedule's dimension")
    return _integrate(schedule, psi0, steps, True, False, error_tol, check)


def propagate_eta(schedule: HamiltonianSchedule, eta0=None, steps: int | None = None,
                  error_tol: float = ERROR_TOL, cond_bound: float = ETA_COND_BOUND,
                  check: bool = True) -> Trajectory:
    """Solve ``i d/dt eta = -eta H(t)``; ``eta0`` defaults to the identity."""
    eta0 = np.eye(schedule.dim, dtype=complex) if eta0 is None else as_matrix(eta0)
    if np.linalg.cond(eta0) > cond_bound:
        raise SingularEta("eta0 is singular or too ill-conditioned")
    traj = _integrate(schedule, eta0, steps, False, True, error_tol, check)
    conds = np.linalg.cond(traj.values)
    worst = int(np.argmax(conds))
    if not np.isfinite(conds[worst]) or conds[worst] > cond_bound:
        raise SingularEta(
            f"cond(eta) = {conds[worst]:.3e} at t = {traj.times[worst]:.6g} exceeds {cond_bound:.1e}"
        )
    return traj


def propagate_density(schedule: HamiltonianSchedule, rho0, steps: int | None = None,
                      error_tol: float = ERROR_TOL, check: bool = True) -> Trajectory:
    """Solve ``i d/dt rho = [H(t), rho]``."""
    rho0 = as_matrix(rho0)
    if abs(np.trace(rho0) - 1.0) > 1e-8:
        raise ValueError("rho0 must have unit trace")
    return _integrate(schedule, rho0, steps, True, True, error_tol, check)


def evolution_operator(schedule: HamiltonianSchedule, steps: int | None = None,
                       error_tol: float = ERROR_TOL, full: bool = False, check: bool = True):
    """Time-ordered propagator ``U(tau)``, obtained by propagating the identity.

    With ``full=True`` the whole trajectory ``U(t_k)`` is returned instead.
    """
    traj = _integrate(schedule, np.eye(schedule.dim, dtype=complex), steps, True, False,
                      error_tol, check)
    return traj if full else traj.final
