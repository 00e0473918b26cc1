"""Finite-dimensional non-Hermitian quantum dynamics with a time-dependent metric.

Modules
-------
linalg       biorthonormal eigensystems, metric-Hermiticity, matrix square roots
dynamics     RK4 propagation of states, ``eta`` and densities
metric       ``W = eta^+ eta``, the split ``H = H + iK``, closed forms
measurement  observables, density operators and probabilities under ``W``
dilation     Hermitian dilation on the doubled space
thermo       two-point work statistics, Jarzynski and Crooks checks
phase        total, dynamical and geometric phase of cyclic runs
cli          command-line drivers
"""
from importlib.metadata import PackageNotFoundError, version

from . import dilation, dynamics, families, linalg, measurement, metric, phase, thermo
from .dynamics import HamiltonianSchedule, Trajectory
from .errors import *  # noqa: F401,F403
from .kernels import BACKEND

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "BACKEND",
    "HamiltonianSchedule",
    "Trajectory",
    "dilation",
    "dynamics",
    "families",
    "linalg",
    "measurement",
    "metric",
    "phase",
    "thermo",
]
