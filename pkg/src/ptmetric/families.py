"""Built-in Hamiltonian families used by the CLI, the tests and the benchmarks."""
from __future__ import annotations

import numpy as np

from .dynamics import HamiltonianSchedule

__all__ = ["pt2x2_matrix", "pt2x2", "diagonal", "random_schedule", "random_hermitian"]


def pt2x2_matrix(kappa: float, alpha: float) -> np.ndarray:
    """``kappa * [[i alpha, -1], [-1, -i alpha]]``; exceptional point at ``alpha = 1``."""
    return kappa * np.array([[1j * alpha, -1.0], [-1.0, -1j * alpha]], dtype=complex)


def pt2x2(kappa: float, alpha: float, tau: float) -> HamiltonianSchedule:
    return HamiltonianSchedule.constant(pt2x2_matrix(kappa, alpha), tau, "pt2x2",
                                        kappa=kappa, alpha=alpha)


def diagonal(entries, tau: float) -> HamiltonianSchedule:
    entries = np.asarray(entries, dtype=complex)
    return HamiltonianSchedule.constant(np.diag(entries), tau, "diagonal")


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    """Hermitian part of a Ginibre matrix, scaled to unit spectral norm."""
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    X = 0.5 * (G + G.conj().T)
    return X / np.linalg.norm(X, 2)


def random_schedule(d: int, seed: int, tau: float = 1.0, norm: float = 1.0,
                    breaking: float = 0.5, drive: float = 0.5,
                    frequency: float = 2.0 * np.pi) -> HamiltonianSchedule:
    """Smooth random non-Hermitian ``H(t)``.

    ``H(t) = norm * (X0 + i*breaking*Y0 + drive*sin(frequency*t)*(X1 + i*breaking*Y1))``
    where the ``X``, ``Y`` are independent unit-norm random Hermitian matrices.
    ``breaking = 0`` gives a Hermitian schedule; ``drive = 0`` a constant one.
    """
    rng = np.random.default_rng(seed)
    X0, Y0, X1, Y1 = (random_hermitian(rng, d) for _ in range(4))
    A = norm * (X0 + 1j * breaking * Y0)
    B = norm * drive * (X1 + 1j * breaking * Y1)
    params = dict(seed=seed, norm=norm, breaking=breaking, drive=drive, frequency=frequency)
    if drive == 0.0:
        return HamiltonianSchedule.constant(A, tau, "random", **params)
    A.setflags(write=False)
    B.setflags(write=False)
    return HamiltonianSchedule.from_function(
        lambda t: A + np.sin(frequency * t) * B, tau, d, "random", **params
    )
