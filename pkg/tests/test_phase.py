import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from oracles import AA_GAMMA, AA_PARAMS, OMEGA_UNBROKEN, SX, precessing_field, rotating_frame_eigenstates
from ptmetric.dynamics import HamiltonianSchedule, propagate_state
from ptmetric.errors import NotCyclic
from ptmetric.families import diagonal, pt2x2, pt2x2_matrix, random_schedule
from ptmetric.metric import biorthonormal_eta, build_metric, split_hamiltonian
from ptmetric.phase import (
    detect_cyclic,
    dynamical_phase,
    fd_derivative,
    geometric_phase,
    k_identity_residual,
    wrap_phase,
)


def run_for(schedule, psi0, eta0=None, steps=None):
    m = build_metric(schedule, eta0, steps)
    traj = propagate_state(schedule, np.asarray(psi0, dtype=complex), len(m.times) - 1)
    return detect_cyclic(traj, m), split_hamiltonian(schedule, m)


def decomposition(run, split):
    return abs(wrap_phase(run.alpha - dynamical_phase(run, split) - geometric_phase(run)))


def rotating_pt(nu=1.3, alpha=0.5):
    """pt2x2 rotated about x at rate nu: cyclic, non-Hermitian and with K != 0."""
    A = pt2x2_matrix(1.0, alpha)
    Hrot = A - 0.5 * nu * SX
    s = HamiltonianSchedule.from_function(
        lambda t: sla.expm(-0.5j * nu * t * SX) @ A @ sla.expm(0.5j * nu * t * SX), 2 * np.pi / nu, 2)
    return s, Hrot


class TestWrap:
    @pytest.mark.parametrize("x,y", [(0.0, 0.0), (np.pi, np.pi), (-np.pi, np.pi),
                                     (3 * np.pi, np.pi), (2 * np.pi + 0.1, 0.1), (-0.1, -0.1)])
    def test_values(self, x, y):
        assert wrap_phase(x) == pytest.approx(y)

    @given(st.floats(-1e3, 1e3))
    def test_range(self, x):
        y = wrap_phase(x)
        assert -np.pi < y <= np.pi
        assert np.isclose(np.exp(1j * x), np.exp(1j * y))


def test_fd_derivative_is_fourth_order():
    errs = []
    for n in (40, 80):
        t = np.linspace(0, 1, n + 1)
        errs.append(np.max(np.abs(fd_derivative(np.sin(3 * t), t[1]) - 3 * np.cos(3 * t))))
    assert 12 < errs[0] / errs[1] < 40
    with pytest.raises(ValueError):
        fd_derivative(np.zeros(4), 0.1)


class TestDetection:
    def test_diagonal_full_period(self):
        run, split = run_for(diagonal([1.0, 2.0], 2 * np.pi), np.array([1.0, 1.0]) / np.sqrt(2))
        assert run.is_cyclic
        assert run.alpha == pytest.approx(0.0, abs=1e-7)
        assert decomposition(run, split) < 1e-6

    def test_non_cyclic_superposition(self):
        run, split = run_for(diagonal([1.0, 2.0], 1.0), np.array([1.0, 1.0]) / np.sqrt(2))
        assert not run.is_cyclic
        assert run.overlap_defect > 1e-3
        with pytest.raises(NotCyclic):
            dynamical_phase(run, split)
        with pytest.raises(NotCyclic):
            geometric_phase(run)

    def test_broken_metric_is_not_periodic(self):
        s = pt2x2(1.0, 2.0, 1.0)
        _, V = np.linalg.eig(s(0))
        run, _ = run_for(s, V[:, 0], biorthonormal_eta(s(0)))
        assert run.metric_defect > 1e-3 and not run.is_cyclic

    def test_grid_mismatch(self):
        s = diagonal([1.0, 2.0], 1.0)
        m = build_metric(s, None, 40)
        traj = propagate_state(s, np.array([1.0, 0.0]), 48)
        with pytest.raises(ValueError):
            detect_cyclic(traj, m)


class TestStationary:
    @pytest.mark.parametrize("tau", [0.7, 1.0, 5.0])
    @pytest.mark.parametrize("branch", [0, 1])
    def test_unbroken_eigenstates(self, tau, branch):
        s = pt2x2(1.0, 0.5, tau)
        w, V = np.linalg.eig(s(0))
        run, split = run_for(s, V[:, branch], biorthonormal_eta(s(0)))
        assert run.is_cyclic
        omega = np.sign(w[branch].real) * OMEGA_UNBROKEN
        assert abs(wrap_phase(run.alpha + omega * tau)) < 1e-8
        assert abs(geometric_phase(run)) < 1e-8
        assert decomposition(run, split) < 1e-8

    def test_hermitian_dynamical_phase_is_conventional(self):
        H = np.array([[1.0, 0.3], [0.3, -0.5]])
        s = HamiltonianSchedule.constant(H, 2.0)
        psi0 = np.linalg.eigh(H)[1][:, 1]
        run, split = run_for(s, psi0)
        assert dynamical_phase(run, split, wrap=False) == pytest.approx(-2.0 * np.linalg.eigvalsh(H)[1], abs=1e-9)

    def test_unbroken_beat_period(self):
        # a superposition of both branches returns after half a beat with alpha = pi
        tau = np.pi / OMEGA_UNBROKEN
        s = pt2x2(1.0, 0.5, tau)
        _, V = np.linalg.eig(s(0))
        run, split = run_for(s, V[:, 0] + 0.5 * V[:, 1], biorthonormal_eta(s(0)))
        assert run.is_cyclic
        assert abs(wrap_phase(run.alpha - np.pi)) < 1e-8
        assert decomposition(run, split) < 1e-6


class TestAharonovAnandan:
    @pytest.mark.parametrize("steps", [200, 400])
    @pytest.mark.parametrize("branch", ["lower", "upper"])
    def test_solid_angle(self, branch, steps):
        w0, w1, nu = AA_PARAMS
        s = HamiltonianSchedule.from_function(precessing_field(w0, w1, nu), 2 * np.pi / nu, 2)
        lower, upper = rotating_frame_eigenstates(w0, w1, nu)
        run, split = run_for(s, lower if branch == "lower" else upper, steps=steps)
        assert run.is_cyclic
        assert abs(wrap_phase(geometric_phase(run) - AA_GAMMA[branch])) < 1e-4
        assert decomposition(run, split) < 1e-6

    def test_gauge_choice(self):
        w0, w1, nu = AA_PARAMS
        s = HamiltonianSchedule.from_function(precessing_field(w0, w1, nu), 2 * np.pi / nu, 2)
        run, _ = run_for(s, rotating_frame_eigenstates(w0, w1, nu)[0], steps=400)
        tau = run.trajectory.times[-1]
        f = lambda t: run.alpha * t / tau + 0.8 * np.sin(2 * np.pi * t / tau) + 0.3 * (t / tau) ** 2 * (1 - t / tau)
        assert abs(wrap_phase(geometric_phase(run, f) - geometric_phase(run))) < 1e-7

    def test_gauge_must_close(self):
        w0, w1, nu = AA_PARAMS
        s = HamiltonianSchedule.from_function(precessing_field(w0, w1, nu), 2 * np.pi / nu, 2)
        run, _ = run_for(s, rotating_frame_eigenstates(w0, w1, nu)[0])
        with pytest.raises(ValueError):
            geometric_phase(run, lambda t: 0.0 * t + 0.1 * t)


class TestNonHermitianCyclic:
    @pytest.mark.parametrize("branch", [0, 1])
    def test_rotating_frame_oracle(self, branch):
        s, Hrot = rotating_pt()
        eta0 = biorthonormal_eta(Hrot)
        W_rot = eta0.conj().T @ eta0
        _, V = sla.eig(Hrot)
        v = V[:, branch] / np.sqrt(np.vdot(V[:, branch], W_rot @ V[:, branch]).real)
        run, split = run_for(s, v, eta0)
        assert run.is_cyclic
        assert np.max(np.abs(split.K)) > 0.1
        # psi = R(t) exp(-iEt) v with R(tau) = -1
        gamma = wrap_phase(np.pi * (1 + np.vdot(v, W_rot @ SX @ v).real))
        assert abs(wrap_phase(geometric_phase(run) - gamma)) < 1e-6
        assert decomposition(run, split) < 1e-6
        assert k_identity_residual(run, split) < 1e-6

    def test_refinement(self):
        s, Hrot = rotating_pt()
        eta0 = biorthonormal_eta(Hrot)
        v = sla.eig(Hrot)[1][:, 0]
        coarse = decomposition(*run_for(s, v, eta0, 300))
        fine = decomposition(*run_for(s, v, eta0, 600))
        assert fine < coarse / 8


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_cyclic_flag_matches_defects(seed):
    s = random_schedule(3, seed)
    run, _ = run_for(s, np.array([1.0, 0.0, 0.0]))
    assert run.is_cyclic == (run.metric_defect < 1e-6 and run.overlap_defect < 1e-6)
    assert -np.pi < run.alpha <= np.pi
