import numpy as np
import pytest
from scipy.linalg import expm

from ditrotter.errors import InvalidParameter, NoConvergence
from ditrotter.evolution import (
    ReferencePropagator,
    Trajectory,
    digitized_evolve,
    exact_propagate,
    midpoint_step_unitaries,
    reverse,
    trotter_step,
    trotter_unitaries,
)
from ditrotter.invariant import rotating_spin_hrot
from ditrotter.linalg import SIGMA_X, SIGMA_Y, SIGMA_Z, commutator, dagger, fs_angles, unitary_exp
from ditrotter.schedules import (
    HamiltonianSchedule,
    landau_zener,
    linear_combination,
    naive_split,
    rotating_spin,
    split_by_terms,
    tfim_chain,
)

PSI = np.array([1, 1j]) / np.sqrt(2)


def test_constant_hamiltonian(backend):
    H = HamiltonianSchedule.constant(0.3 * SIGMA_X + 0.8 * SIGMA_Z, 2.0)
    traj, U = exact_propagate(H, 1, PSI)
    np.testing.assert_allclose(U[0], unitary_exp(H(0.0), 2.0), atol=1e-10)
    assert traj.kind == "exact" and traj.states.shape == (2, 2)


def test_rotating_closed_form(backend):
    B, w, T = 1.3, 2.0, 3.0
    traj, _ = exact_propagate(rotating_spin(B, w, T), 16, PSI)
    for t, psi in zip(traj.times, traj.states):
        R = expm(-1j * w * t / 2 * SIGMA_Y)
        exact = R @ expm(-1j * rotating_spin_hrot(B, w) * t) @ PSI
        assert np.abs(psi - exact).max() <= 1e-8


def test_midpoint_second_order():
    H = landau_zener(1.0)
    ref = ReferencePropagator(H, 8).base
    errs = []
    for S in (8, 16, 32):
        errs.append(np.abs(midpoint_step_unitaries(H, 8, S) - ref).max())
    for a, b in zip(errs, errs[1:]):
        assert 3.5 < a / b < 4.5


def test_no_convergence():
    with pytest.raises(NoConvergence):
        ReferencePropagator(landau_zener(1.0), 2, s_max=4)
    with pytest.raises(InvalidParameter):
        exact_propagate(landau_zener(1.0), 0, PSI)


def test_reference_serves_divisors():
    ref = ReferencePropagator(landau_zener(1.0), 64)
    U8 = ref.step_unitaries(8)
    direct = ReferencePropagator(landau_zener(1.0), 8, substeps=ref.substeps * 8)
    np.testing.assert_allclose(U8, direct.base, atol=1e-9)
    with pytest.raises(InvalidParameter):
        ref.step_unitaries(48)


def test_trotter_step_single_term():
    H = landau_zener(1.0)
    split = split_by_terms(H, [H])
    np.testing.assert_allclose(trotter_step(split, 0.3, 0.1, PSI), unitary_exp(H(0.3), 0.1) @ PSI, atol=1e-14)


def test_trotter_step_commuting_terms():
    a = linear_combination([lambda ts: 1 + ts], [SIGMA_Z], 1.0, "a")
    b = linear_combination([lambda ts: 2 - ts], [np.diag([0.5, -2.0])], 1.0, "b")
    split = split_by_terms(a + b, [a, b])
    out = trotter_step(split, 0.4, 0.37, PSI)
    assert np.abs(out - unitary_exp((a + b)(0.4), 0.37) @ PSI).max() <= 1e-10


def test_trotter_order_and_commutator_size():
    H = landau_zener(1.0)
    split = naive_split(H)
    t, dt = 0.2, 0.1
    H1, H2 = (p(t) for p in H.parts)
    Ud = unitary_exp(H2, dt) @ unitary_exp(H1, dt)
    cols = np.stack([trotter_step(split, t, dt, e) for e in np.eye(2)], axis=1)
    np.testing.assert_allclose(cols, Ud, atol=1e-14)
    diff = np.linalg.norm(Ud - unitary_exp(H(t), dt), 2)
    expected = dt**2 / 2 * np.linalg.norm(commutator(H1, H2), 2)
    assert abs(diff / expected - 1) < 0.1


def test_digitized_converges_and_is_unitary(backend):
    H = landau_zener(1.0)
    split = naive_split(H)
    ref = ReferencePropagator(H, 1024)
    errs = []
    for M in (64, 256, 1024):
        traj, Ud = digitized_evolve(split, M, PSI)
        assert traj.kind == "digitized"
        assert traj.norm_drift() <= 1e-9 * M
        exact = ref.trajectory(M, PSI)[0]
        errs.append(fs_angles(exact.final[None], traj.final[None])[0])
    assert errs[0] > errs[1] > errs[2]


def test_single_term_split_is_right_endpoint_rule():
    H = landau_zener(1.0)
    traj, Ud = digitized_evolve(split_by_terms(H, [H]), 32, PSI)
    ts = np.arange(1, 33) / 32
    np.testing.assert_allclose(Ud, unitary_exp(H.evaluate_many(ts), 1 / 32), atol=1e-14)


def test_exact_is_split_independent():
    H = tfim_chain(2, 1.0, lambda ts: 0.2 + 0.5 * np.asarray(ts))
    psi0 = np.ones(4) / 2
    a = exact_propagate(naive_split(H).whole, 16, psi0)[0]
    b = exact_propagate(split_by_terms(H, [H]).whole, 16, psi0)[0]
    np.testing.assert_array_equal(a.states, b.states)


def test_reversal(backend):
    H = landau_zener(1.0)
    traj, U = exact_propagate(H, 32, PSI)
    assert np.abs(reverse(U, traj.final) - PSI).max() <= 1e-9
    dtraj, Ud = digitized_evolve(naive_split(H), 32, PSI)
    assert np.abs(reverse(Ud, dtraj.final) - PSI).max() <= 1e-9


def test_per_step_unitaries_are_unitary():
    H = tfim_chain(3, 1.0, lambda ts: 0.2 + 0.6 * np.asarray(ts))
    U = ReferencePropagator(H, 32).step_unitaries(32)
    Ud = trotter_unitaries(naive_split(H), 32)
    for X in (U, Ud):
        assert np.abs(dagger(X) @ X - np.eye(8)).max() <= 1e-10


def test_trajectory_csv(tmp_path):
    traj = Trajectory(np.array([0.0, 0.5]), np.array([[1, 0], [0.6, 0.8j]]), "exact")
    traj.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,re_0,im_0,re_1,im_1"
    assert lines[2] == "0.5,0.6,0.0,0.0,0.8"
