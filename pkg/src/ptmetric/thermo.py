"""Two-point energy measurement statistics, the Jarzynski equality and the
Crooks relation for the energy observable ``H(t)`` of a non-Hermitian schedule.

Every average is an exact finite sum over pairs of spectral projectors, so
the identities hold up to round-off and the integration error in ``U(tau)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import HamiltonianSchedule, evolution_operator, propagate_eta
from .errors import DegenerateSpectrumWarning
from .measurement import Observable, observable_from_operator
from .metric import MetricTrajectory, split_at

__all__ = [
    "TPMSetup",
    "WorkRecord",
    "prepare",
    "forward_process",
    "reversed_process",
    "work_record",
    "reversed_cyclic_trace",
    "work_distribution",
    "jarzynski_check",
    "crooks_check",
    "inverse_by_backward_propagation",
    "sample_work",
]

WORK_ATOL = 1e-9
PROB_FLOOR = 1e-12  # round-off resolution of the trace evaluations


@dataclass(frozen=True)
class TPMSetup:
    """Everything both measurement protocols need: energy levels and projectors
    at the two endpoints and the evolution operator with its inverse."""

    beta: float
    levels0: np.ndarray
    levels_tau: np.ndarray
    proj0: list
    proj_tau: list
    U: np.ndarray
    U_inv: np.ndarray
    obs0: Observable
    obs_tau: Observable

    @property
    def Z0(self) -> float:
        return _partition(self.beta, self.levels0, self.proj0)

    @property
    def Z_tau(self) -> float:
        return _partition(self.beta, self.levels_tau, self.proj_tau)

    @property
    def degenerate(self) -> bool:
        return len(self.levels0) < self.obs0.dim or len(self.levels_tau) < self.obs_tau.dim


def _partition(beta, levels, projectors) -> float:
    ranks = np.array([np.trace(P).real for P in projectors])
    return float(np.sum(ranks * np.exp(-beta * levels)))


def prepare(schedule: HamiltonianSchedule, metric: MetricTrajectory, beta: float,
            steps: int | None = None) -> TPMSetup:
    """Split ``H`` at both endpoints and compute ``U(tau)``.

    ``steps`` defaults to the metric's own grid so that ``U`` and ``W`` share
    the discretisation.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if steps is None:
        steps = len(metric.times) - 1
    W0, Wt = metric.W[0], metric.W[-1]
    H0, _ = split_at(schedule(0.0), W0)
    Ht, _ = split_at(schedule(schedule.duration), Wt)
    obs0 = observable_from_operator(H0, W0)
    obs_t = observable_from_operator(Ht, Wt)
    U = evolution_operator(schedule, steps)
    U_inv = np.linalg.solve(U, np.eye(schedule.dim))
    setup = TPMSetup(beta, obs0.levels(), obs_t.levels(), obs0.projectors(),
                     obs_t.projectors(), U, U_inv, obs0, obs_t)
    if setup.degenerate:
        warnings.warn("degenerate energy levels grouped into rank-k projectors",
                      DegenerateSpectrumWarning, stacklevel=2)
    return setup


@dataclass(frozen=True)
class WorkRecord:
    """Joint two-point probabilities.

    ``P[m, n]`` is the forward probability of ``eps_m(0)`` then ``eps_n(tau)``;
    ``P_tr[n, m]`` the reversed probability of ``eps_n(tau)`` then ``eps_m(0)``.
    ``work[m, n] = eps_n(tau) - eps_m(0)``.
    """

    levels0: np.ndarray
    levels_tau: np.ndarray
    work: np.ndarray
    beta: float
    delta_F: float
    Z0: float
    Z_tau: float
    P: np.ndarray | None = None
    P_tr: np.ndarray | None = None

    def merged(self, other: "WorkRecord") -> "WorkRecord":
        return WorkRecord(self.levels0, self.levels_tau, self.work, self.beta, self.delta_F,
                          self.Z0, self.Z_tau,
                          self.P if self.P is not None else other.P,
                          self.P_tr if self.P_tr is not None else other.P_tr)


def _record(setup: TPMSetup, P=None, P_tr=None) -> WorkRecord:
    work = setup.levels_tau[None, :] - setup.levels0[:, None]
    Z0, Zt = setup.Z0, setup.Z_tau
    if setup.beta > 0:
        dF = -(np.log(Zt) - np.log(Z0)) / setup.beta
    else:
        dF = 0.0
    return WorkRecord(setup.levels0, setup.levels_tau, work, setup.beta, float(dF), Z0, Zt, P, P_tr)


def _gibbs(beta, levels, projectors):
    e = np.asarray(levels)
    weights = np.exp(-beta * (e - e.min()))
    rho = sum(w * P for w, P in zip(weights, projectors))
    return rho / np.trace(rho).real


def forward_process(schedule=None, metric=None, beta=None, steps=None, *, setup: TPMSetup | None = None) -> WorkRecord:
    """Forward joint probabilities ``tr[Pi_n(tau) U Pi_m(0) rho0 Pi_m(0) U^-1]``."""
    if setup is None:
        setup = prepare(schedule, metric, beta, steps)
    rho0 = _gibbs(setup.beta, setup.levels0, setup.proj0)
    P = np.empty((len(setup.levels0), len(setup.levels_tau)))
    for m, Pm in enumerate(setup.proj0):
        evolved = setup.U @ Pm @ rho0 @ Pm @ setup.U_inv
        for n, Pn in enumerate(setup.proj_tau):
            P[m, n] = np.trace(Pn @ evolved).real
    return _record(setup, P=P)


def reversed_process(schedule=None, metric=None, beta=None, steps=None, *, setup: TPMSetup | None = None) -> WorkRecord:
    """Reversed joint probabilities ``tr[Pi_m(0) U^-1 Pi_n(tau) rho_tr Pi_n(tau) U]``."""
    if setup is None:
        setup = prepare(schedule, metric, beta, steps)
    rho_tr = _gibbs(setup.beta, setup.levels_tau, setup.proj_tau)
    P_tr = np.empty((len(setup.levels_tau), len(setup.levels0)))
    for n, Pn in enumerate(setup.proj_tau):
        evolved = setup.U_inv @ Pn @ rho_tr @ Pn @ setup.U
        for m, Pm in enumerate(setup.proj0):
            P_tr[n, m] = np.trace(Pm @ evolved).real
    return _record(setup, P_tr=P_tr)


def work_record(schedule: HamiltonianSchedule, metric: MetricTrajectory, beta: float,
                steps: int | None = None) -> tuple[WorkRecord, TPMSetup]:
    """Both halves of the protocol from one shared setup."""
    setup = prepare(schedule, metric, beta, steps)
    rec = forward_process(setup=setup).merged(reversed_process(setup=setup))
    return rec, setup


def reversed_cyclic_trace(setup: TPMSetup) -> np.ndarray:
    """Reversed probabilities rewritten with the trace cycled:
    ``exp(-beta eps_n(tau)) / Z(tau) * tr[Pi_n(tau) U Pi_m(0) U^-1]``.

    Agreement with :func:`reversed_process` checks the cyclic-trace step
    independently of the Gibbs-state construction.
    """
    e = setup.levels_tau
    w = np.exp(-setup.beta * (e - e.min()))
    ranks = np.array([np.trace(P).real for P in setup.proj_tau])
    w = w / np.sum(w * ranks)
    out = np.empty((len(setup.levels_tau), len(setup.levels0)))
    for n, Pn in enumerate(setup.proj_tau):
        for m, Pm in enumerate(setup.proj0):
            out[n, m] = w[n] * np.trace(Pn @ setup.U @ Pm @ setup.U_inv).real
    return out


def inverse_by_backward_propagation(schedule: HamiltonianSchedule, steps: int | None = None) -> np.ndarray:
    """``U(tau)^-1`` obtained independently: it is ``eta(tau)`` started from the identity."""
    return propagate_eta(schedule, None, steps).final


def work_distribution(record: WorkRecord, direction: str = "forward", atol: float = WORK_ATOL):
    """Aggregate joint probabilities onto distinct work values.

    Returns a list of ``(w, p)`` sorted by ``w``. In the reversed direction the
    work of the pair ``(n, m)`` is ``eps_m(0) - eps_n(tau)``.
    """
    if direction == "forward":
        if record.P is None:
            raise ValueError("record has no forward half")
        w, p = record.work.ravel(), record.P.ravel()
    elif direction == "reversed":
        if record.P_tr is None:
            raise ValueError("record has no reversed half")
        w, p = (-record.work.T).ravel(), record.P_tr.ravel()
    else:
        raise ValueError(f"unknown direction {direction!r}")
    order = np.argsort(w, kind="stable")
    atoms: list[list[float]] = []
    for i in order:
        if atoms and abs(w[i] - atoms[-1][0]) <= atol:
            atoms[-1][1] += p[i]
        else:
            atoms.append([float(w[i]), float(p[i])])
    return [(a, b) for a, b in atoms]


def sample_work(record: WorkRecord, n: int, seed: int = 0) -> np.ndarray:
    """Draw ``n`` forward work values from the joint probabilities.

    A demonstration of the protocol as an experiment would run it; the
    checks in this module use the exact sums instead.
    """
    if record.P is None:
        raise ValueError("record has no forward half")
    p = np.clip(record.P.ravel(), 0.0, None)
    rng = np.random.default_rng(seed)
    idx = rng.choice(p.size, size=n, p=p / p.sum())
    return record.work.ravel()[idx]


class JarzynskiResult(NamedTuple):
    lhs: float
    rhs: float
    residual: float


def jarzynski_check(record: WorkRecord) -> JarzynskiResult:
    """``<exp(-beta w)>`` against ``Z(tau)/Z(0)``, with relative residual."""
    if record.P is None:
        raise ValueError("record has no forward half")
    lhs = float(np.sum(record.P * np.exp(-record.beta * record.work)))
    rhs = record.Z_tau / record.Z0
    return JarzynskiResult(lhs, rhs, abs(lhs - rhs) / rhs)


class CrooksResult(NamedTuple):
    max_residual: float
    distribution_residual: float
    skipped: int


def crooks_check(record: WorkRecord, floor: float = PROB_FLOOR, atol: float = WORK_ATOL) -> CrooksResult:
    """Pointwise ``P[m,n] = P_tr[n,m] exp(beta (w - dF))`` and the same at the
    level of work distributions, ``p(w) = p_tr(-w) exp(beta (w - dF))``.

    Residuals are relative to ``max(P, floor)``; pairs where both sides fall
    below ``floor`` are skipped and counted.
    """
    if record.P is None or record.P_tr is None:
        raise ValueError("record needs both halves")
    b, dF = record.beta, record.delta_F
    factor = np.exp(b * (record.work - dF))
    pred = record.P_tr.T * factor
    worst, skipped = 0.0, 0
    for m, n in np.ndindex(record.P.shape):
        if record.P[m, n] < floor and record.P_tr[n, m] < floor:
            skipped += 1
            continue
        worst = max(worst, abs(record.P[m, n] - pred[m, n]) / max(record.P[m, n], floor))

    fwd = work_distribution(record, "forward", atol)
    rev = work_distribution(record, "reversed", atol)
    dist_worst = 0.0
    for w, p in fwd:
        ptr = sum(q for v, q in rev if abs(v + w) <= atol)
        if p < floor and ptr < floor:
            continue
        dist_worst = max(dist_worst, abs(p - ptr * np.exp(b * (w - dF))) / max(p, floor))
    return CrooksResult(worst, dist_worst, skipped)
