import numpy as np
import pytest
from scipy.linalg import expm

from ditrotter.counterdiabatic import build_cd
from ditrotter.errors import (
    BoundaryPoint,
    DegenerateSpectrum,
    GridMismatch,
    LevelCrossing,
    NonRealIntegrand,
    NotNormalized,
)
from ditrotter.evolution import ReferencePropagator
from ditrotter.invariant import (
    InvariantFrame,
    eigenbasis_frame,
    grid_times,
    lr_phase,
    lr_state,
    lr_states,
    max_von_neumann_residual,
    propagated_frame,
    rotating_spin_frame,
    rotating_spin_hrot,
    smooth_gauge,
    split_diag_offdiag,
    von_neumann_residual,
)
from ditrotter.linalg import SIGMA_X, SIGMA_Z, dagger, fs_angles, random_hermitian
from ditrotter.schedules import HamiltonianSchedule, landau_zener, rotating_spin


def constant_frame(d=3, J=8):
    return smooth_gauge(grid_times(1.0, J), np.broadcast_to(np.eye(d, dtype=complex), (J + 1, d, d)))


def test_constant_basis_unchanged():
    f = constant_frame()
    np.testing.assert_array_equal(f.basis, np.broadcast_to(np.eye(3), f.basis.shape))
    np.testing.assert_array_equal(f.eigenvalues, [0, 1, 2])


def test_sign_flip_removed():
    raw = np.broadcast_to(np.eye(2, dtype=complex), (11, 2, 2)).copy()
    raw[5, :, 1] *= -1
    f = smooth_gauge(grid_times(1.0, 10), raw)
    ov = np.einsum("jin,jin->jn", f.basis[:-1].conj(), f.basis[1:])
    assert np.all(ov.real > 0)


def test_random_phases_smoothed(rng):
    J = 10_000
    K = random_hermitian(4, rng)
    w, W = np.linalg.eigh(K)
    ts = grid_times(1.0, J)
    V0 = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
    # smooth family exp(-i t K) V0 with random phases per sample
    smooth = (W * np.exp(-1j * np.outer(ts, w))[:, None, :]) @ dagger(W) @ V0
    raw = smooth * np.exp(2j * np.pi * rng.random((J + 1, 1, 4)))
    f = smooth_gauge(ts, raw)
    assert f.gauge_defect() <= 1e-6
    assert f.orthonormality_defect() <= 1e-10


def test_degenerate_spectrum_reported():
    H = HamiltonianSchedule.constant(np.diag([1.0, 1.0, 2.0]), 1.0)
    with pytest.raises(DegenerateSpectrum) as exc:
        eigenbasis_frame(H, 16)
    assert exc.value.time == 0.0


def test_level_crossing_refused():
    ts = grid_times(1.0, 4)
    raw = np.broadcast_to(np.eye(2, dtype=complex), (5, 2, 2)).copy()
    raw[2:] = np.array([[0.8, -0.6], [0.6, 0.8]])  # best overlap 0.8: tracked
    smooth_gauge(ts, raw)
    dft = np.fft.fft(np.eye(5)) / np.sqrt(5)  # every overlap 1/sqrt(5) < 0.5
    spread = np.broadcast_to(np.eye(5, dtype=complex), (5, 5, 5)).copy()
    spread[2:] = dft
    with pytest.raises(LevelCrossing, match="best overlap"):
        smooth_gauge(ts, spread)
    c = np.sqrt(0.5)
    raw[2:] = np.array([[c, -c], [c, c]])  # exact tie: no unique matching
    with pytest.raises(LevelCrossing, match="same eigenvector"):
        smooth_gauge(ts, raw)


def test_split_examples():
    f = constant_frame(2, 4)
    H = HamiltonianSchedule.constant(np.diag([0.3, -1.0]), 1.0)
    Hd, Hnd = split_diag_offdiag(H, f, 0.25)
    np.testing.assert_allclose(Hnd, 0, atol=1e-15)
    Hd, Hnd = split_diag_offdiag(HamiltonianSchedule.constant(SIGMA_X, 1.0), f, 0.5)
    np.testing.assert_allclose(Hd, 0, atol=1e-15)
    np.testing.assert_allclose(Hnd, SIGMA_X)
    with pytest.raises(GridMismatch):
        split_diag_offdiag(H, f, 0.3)


def test_split_of_cd_total_recovers_parts():
    sys_ = build_cd(landau_zener(1.0), 512)
    hcd = sys_.hcd_grid()
    for j in (0, 100, 256, 511, 512):
        t = sys_.frame.times[j]
        Hd, Hnd = split_diag_offdiag(sys_.total, sys_.frame, t)
        np.testing.assert_allclose(Hd, sys_.href(t), atol=1e-8)
        np.testing.assert_allclose(Hnd, hcd[j], atol=1e-8)
        diag = np.einsum("mn,mk,kn->n", sys_.frame.basis[j].conj(), Hnd, sys_.frame.basis[j])
        assert np.abs(diag).max() <= 1e-10


def test_residual_constant_hamiltonian():
    H = HamiltonianSchedule.constant(np.diag([0.0, 1.0, 3.0]) + 0.2 * np.ones((3, 3)), 1.0)
    f = eigenbasis_frame(H, 32)
    assert max_von_neumann_residual(f, H) <= 1e-8
    with pytest.raises(BoundaryPoint):
        von_neumann_residual(f, H, 0.0)
    with pytest.raises(BoundaryPoint):
        von_neumann_residual(f, H, 1.0)


def test_residual_second_order_under_cd():
    href = landau_zener(1.0)
    res = []
    for J in (256, 512, 1024):
        sys_ = build_cd(href, J)
        res.append(von_neumann_residual(sys_.frame, sys_.total, 0.25))
    ratios = [res[i] / res[i + 1] for i in range(2)]
    assert all(3.5 < r < 4.5 for r in ratios), ratios


def test_residual_negative_control():
    href = landau_zener(1.0)
    res = [max_von_neumann_residual(eigenbasis_frame(href, J), href) for J in (256, 1024, 4096)]
    assert min(res) > 1.0
    assert abs(res[-1] - res[0]) < 0.01 * res[0]


def test_offdiagonal_relation_converges():
    H = landau_zener(1.0)
    errs = []
    for J in (256, 512):
        f = propagated_frame(H, ReferencePropagator(H, J).base)
        Hs = H.evaluate_many(f.times[1:-1])
        lhs = dagger(f.basis[1:-1]) @ Hs @ f.basis[1:-1]
        rhs = 1j * f.connection[1:-1]
        off = ~np.eye(2, dtype=bool)
        errs.append(np.abs((lhs - rhs)[:, off]).max())
    C = errs[0] * 256**2
    print(f"off-diagonal constant C = {C:.3f}")
    assert errs[1] <= C / 512**2 * 1.1


def test_lr_phase_constant():
    E = np.array([-0.7, 0.2, 1.5])
    H = HamiltonianSchedule.constant(np.diag(E), 2.0)
    f = eigenbasis_frame(H, 64)
    ph = lr_phase(f, H)
    np.testing.assert_allclose(ph.kappa, -np.outer(f.times, E), atol=1e-12)
    assert np.all(ph.kappa[0] == 0)


def test_lr_phase_lz_is_dynamical():
    H = landau_zener(1.0)
    f = eigenbasis_frame(H, 4096)
    ph = lr_phase(f, H)
    # int_0^t sqrt(1 + eps^2)/2 with eps = 4 (2t - 1); antiderivative in eps
    eps = 4 * (2 * f.times - 1)
    F = lambda e: 0.5 * (e * np.sqrt(1 + e**2) + np.arcsinh(e))  # noqa: E731
    area = (F(eps) - F(-4.0)) / 8 / 2
    np.testing.assert_allclose(ph.kappa[:, 0], area, atol=1e-6)
    np.testing.assert_allclose(ph.kappa[:, 1], -area, atol=1e-6)


def test_lr_phase_rotating_refinement():
    B, w, T = 1.0, 2.0, 1.0
    H = rotating_spin(B, w, T)
    coarse = lr_phase(rotating_spin_frame(B, w, T, 1024), H)
    fine = lr_phase(rotating_spin_frame(B, w, T, 4096), H)
    np.testing.assert_allclose(coarse.kappa, fine.kappa[::4], atol=1e-7)


def test_lr_state_rotating_closed_form():
    B, w, T = 1.0, 2.0, 1.0
    H = rotating_spin(B, w, T)
    f = rotating_spin_frame(B, w, T, 2048)
    ph = lr_phase(f, H)
    c0 = np.array([0.6, 0.8j])
    psi0 = f.basis[0] @ c0
    hrot = rotating_spin_hrot(B, w)
    for j in (0, 512, 2048):
        t = f.times[j]
        R = expm(-1j * w * t / 2 * np.array([[0, -1j], [1j, 0]]))
        exact = R @ expm(-1j * hrot * t) @ psi0
        assert fs_angles(exact[None], lr_state(f, ph, c0, t)[None])[0] <= 1e-6


def test_lr_state_examples():
    H = landau_zener(1.0)
    f = eigenbasis_frame(H, 1024)
    ph = lr_phase(f, H)
    c0 = np.array([0.6, 0.8])
    np.testing.assert_allclose(lr_state(f, ph, c0, 0.0), f.basis[0] @ c0)
    psi = lr_state(f, ph, np.array([0, 1.0]), f.times[10])
    assert fs_angles(psi[None], f.basis[10][:, 1][None])[0] <= 1e-12
    with pytest.raises(NotNormalized):
        lr_state(f, ph, np.array([1.0, 1.0]), 0.0)


def test_lr_state_matches_exact_cd_lz():
    sys_ = build_cd(landau_zener(1.0), 4096)
    ph = lr_phase(sys_.frame, sys_.total)
    ref = ReferencePropagator(sys_.total, 64)
    c0 = np.array([1.0, 0.0])
    traj, _ = ref.trajectory(64, sys_.frame.basis[0] @ c0)
    lr = lr_states(sys_.frame, ph, c0)[::64]
    infid = np.sin(fs_angles(traj.states, lr)) ** 2
    assert infid.max() <= 1e-8


def test_non_real_integrand_detected():
    H = landau_zener(1.0)
    f = eigenbasis_frame(H, 256)
    scale = 1 + 0.05 * np.sin(3 * f.times)[:, None, None]
    bad = InvariantFrame(f.times, f.basis * scale, f.eigenvalues)
    with pytest.raises(NonRealIntegrand):
        lr_phase(bad, H)


def test_propagated_frame_is_invariant():
    H = landau_zener(1.0)
    ref = ReferencePropagator(H, 512)
    f = propagated_frame(H, ref.base)
    assert f.orthonormality_defect() <= 1e-10
    assert f.gauge_defect() <= 1e-12
    assert max_von_neumann_residual(f, H) <= 1e-3
    r2 = max_von_neumann_residual(propagated_frame(H, ReferencePropagator(H, 1024).base), H)
    assert 3.5 < max_von_neumann_residual(f, H) / r2 < 4.5


def test_json_round_trip(tmp_path):
    f = rotating_spin_frame(1.0, 1.0, 1.0, 16)
    f.to_json(tmp_path / "frame.json")
    g = InvariantFrame.from_json(tmp_path / "frame.json")
    np.testing.assert_array_equal(g.basis, f.basis)
    np.testing.assert_array_equal(g.times, f.times)
    np.testing.assert_array_equal(g.eigenvalues, f.eigenvalues)
    d = f.to_dict()
    assert set(d) == {"grid", "f_n", "vectors"}
    assert d["vectors"][3][1] == [[c.real, c.imag] for c in f.basis[3][:, 1]]


def test_global_phase_does_not_change_infidelity():
    from ditrotter.models import build_model

    m = build_model("lz", resolution=1024)
    base = m.run("di", 64)[0]
    m.__dict__["frame"] = m.frame.with_phases([0.4, -2.1])
    moved = m.run("di", 64)[0]
    assert abs(moved.infidelity_sqrt - base.infidelity_sqrt) <= 1e-9
    assert abs(moved.bound_sum - base.bound_sum) <= 1e-9


def test_sigma_z_frame_diagonal():
    H = HamiltonianSchedule.constant(SIGMA_Z, 1.0)
    f = eigenbasis_frame(H, 8)
    Hd, Hnd = split_diag_offdiag(H, f, 0.5)
    np.testing.assert_allclose(Hd, SIGMA_Z, atol=1e-15)
