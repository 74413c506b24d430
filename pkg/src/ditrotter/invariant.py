"""Dynamical invariants sampled on a time grid.

An :class:`InvariantFrame` stores the eigenvectors |phi_n(t_j)> of an
invariant F(t) = sum_n f_n |phi_n><phi_n| at t_j = j T / J_s, with the
phases smoothed so that consecutive overlaps are real and positive.  Time
derivatives are central differences on that grid (second-order one-sided
at the two endpoints).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import kernels
from .errors import (
    BoundaryPoint,
    DegenerateSpectrum,
    DimensionMismatch,
    GridMismatch,
    InvalidParameter,
    LevelCrossing,
    NonRealIntegrand,
    NotNormalized,
)
from .linalg import NORM_TOL, dagger
from .schedules import HamiltonianSchedule, SplitSchedule

DEFAULT_RESOLUTION = 4096
DEGENERACY_RTOL = 1e-8
TRACKING_THRESHOLD = 0.5
# bound on |Re <phi|d_t phi>| * h, i.e. the non-real part of the integrand
# accumulated over one grid step
PHASE_STEP_TOL = 1e-6
GRID_RTOL = 1e-9


def grid_times(horizon, resolution):
    return np.linspace(0.0, horizon, resolution + 1)


def fd_derivative(values, h):
    """d/dt of samples on a uniform grid along axis 0.

    Central differences inside, second-order one-sided at both ends.
    """
    values = np.asarray(values)
    if values.shape[0] < 3:
        raise InvalidParameter("finite differences need at least 3 grid points")
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2 * h)
    out[0] = (-3 * values[0] + 4 * values[1] - values[2]) / (2 * h)
    out[-1] = (3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * h)
    return out


@dataclass(frozen=True, eq=False)
class InvariantFrame:
    """Gauge-smoothed invariant eigenbasis on the grid t_j = j T / J_s.

    Attributes
    ----------
    times : (J_s + 1,) array
    basis : (J_s + 1, d, d) complex array; ``basis[j][:, n]`` is |phi_n(t_j)>
    eigenvalues : (d,) array of the constants f_n
    """

    times: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        if self.basis.ndim != 3 or self.basis.shape[1] != self.basis.shape[2]:
            raise DimensionMismatch(f"basis must have shape (J+1, d, d), got {self.basis.shape}")
        if self.basis.shape[0] != self.times.shape[0]:
            raise DimensionMismatch("basis and time grid lengths differ")
        if self.eigenvalues.shape != (self.dim,):
            raise DimensionMismatch("need one invariant eigenvalue per level")

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def resolution(self) -> int:
        return self.times.shape[0] - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def step(self) -> float:
        return self.horizon / self.resolution

    def index(self, t) -> int:
        """Grid index of ``t``; raises :class:`GridMismatch` if off-grid."""
        x = float(t) / self.step
        j = int(round(x))
        if not 0 <= j <= self.resolution or abs(x - j) > GRID_RTOL * max(1.0, abs(x)):
            raise GridMismatch(f"t = {t!r} is not on the J_s = {self.resolution} grid")
        return j

    def indices(self, ts) -> np.ndarray:
        x = np.asarray(ts, dtype=float) / self.step
        j = np.rint(x).astype(int)
        bad = (j < 0) | (j > self.resolution) | (np.abs(x - j) > GRID_RTOL * np.maximum(1.0, np.abs(x)))
        if np.any(bad):
            raise GridMismatch(
                f"t = {np.asarray(ts)[bad][0]!r} is not on the J_s = {self.resolution} grid"
            )
        return j

    def vectors(self, t) -> np.ndarray:
        return self.basis[self.index(t)]

    @cached_property
    def derivative(self) -> np.ndarray:
        """d/dt of every basis vector on the grid, shape like ``basis``."""
        return fd_derivative(self.basis, self.step)

    @cached_property
    def connection(self) -> np.ndarray:
        """<phi_m|d_t phi_n> on the grid, shape (J_s + 1, d, d)."""
        return dagger(self.basis) @ self.derivative

    def invariant_matrices(self) -> np.ndarray:
        """F(t_j) = sum_n f_n |phi_n><phi_n| for all j."""
        return (self.basis * self.eigenvalues) @ dagger(self.basis)

    def with_phases(self, phases) -> InvariantFrame:
        """Same frame with column n multiplied by the constant exp(i phases[n])."""
        return InvariantFrame(self.times, self.basis * np.exp(1j * np.asarray(phases)), self.eigenvalues)

    def orthonormality_defect(self) -> float:
        gram = dagger(self.basis) @ self.basis
        return float(np.max(np.abs(gram - np.eye(self.dim))))

    def gauge_defect(self) -> float:
        """max over j, n of |Im <phi_n(t_j)|phi_n(t_{j+1})>|."""
        ov = np.einsum("jin,jin->jn", np.conj(self.basis[:-1]), self.basis[1:])
        return float(np.max(np.abs(ov.imag), initial=0.0))

    # --- serialization: {"grid", "f_n", "vectors"[j][n] = [[re, im], ...]}
    def to_dict(self) -> dict:
        vecs = np.swapaxes(self.basis, 1, 2)  # vecs[j, n] = |phi_n(t_j)>
        return {
            "grid": self.times.tolist(),
            "f_n": self.eigenvalues.tolist(),
            "vectors": np.stack([vecs.real, vecs.imag], axis=-1).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> InvariantFrame:
        v = np.asarray(data["vectors"], dtype=float)
        vecs = v[..., 0] + 1j * v[..., 1]
        return cls(
            np.asarray(data["grid"], dtype=float),
            np.ascontiguousarray(np.swapaxes(vecs, 1, 2)),
            np.asarray(data["f_n"], dtype=float),
        )

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_json(cls, path) -> InvariantFrame:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def check_spectra(times, spectra, degeneracy_rtol=DEGENERACY_RTOL):
    """Raise :class:`DegenerateSpectrum` if any sampled spectrum has a near-zero gap."""
    spectra = np.sort(np.asarray(spectra, dtype=float), axis=1)
    if spectra.shape[1] < 2:
        return
    gaps = np.diff(spectra, axis=1).min(axis=1)
    span = spectra[:, -1] - spectra[:, 0]
    tol = degeneracy_rtol * np.maximum(span, np.finfo(float).tiny)
    bad = np.flatnonzero(gaps <= tol)
    if bad.size:
        j = bad[0]
        raise DegenerateSpectrum(float(times[j]), float(gaps[j]))


def smooth_gauge(times, raw_basis, eigenvalues=None, spectra=None, degeneracy_rtol=DEGENERACY_RTOL):
    """Fix ordering and phases of per-time eigenvector sets.

    Parameters
    ----------
    times : (J + 1,) grid
    raw_basis : (J + 1, d, d) orthonormal columns with arbitrary phases
    eigenvalues : invariant eigenvalues f_n; defaults to 0, 1, ..., d - 1
    spectra : optional (J + 1, d) instantaneous eigenvalues, used only for
        the degeneracy check

    The column order at t_0 is kept.  At each later time, column n is the
    raw vector with maximal overlap with column n of the previous time;
    its phase is then chosen to make that overlap real and positive.
    """
    times = np.asarray(times, dtype=float)
    raw = np.asarray(raw_basis, dtype=np.complex128)
    J1, d, _ = raw.shape
    if spectra is not None:
        check_spectra(times, spectra, degeneracy_rtol)
    f = np.arange(d, dtype=float) if eigenvalues is None else np.asarray(eigenvalues, dtype=float)

    # overlaps of raw neighbours: ov[j, a, b] = <raw_a(t_j)|raw_b(t_{j+1})>
    ov = dagger(raw[:-1]) @ raw[1:]
    best = np.argmax(np.abs(ov), axis=2)
    best_val = np.take_along_axis(np.abs(ov), best[:, :, None], axis=2)[:, :, 0]

    # compose permutations: perm[j][n] = raw column carrying level n at t_j
    perm = np.empty((J1, d), dtype=int)
    perm[0] = np.arange(d)
    for j in range(J1 - 1):
        prev = perm[j]
        perm[j + 1] = best[j, prev]
        if best_val[j, prev].min() < TRACKING_THRESHOLD:
            n = int(np.argmin(best_val[j, prev]))
            raise LevelCrossing(float(times[j + 1]), float(best_val[j, prev][n]))
        if np.unique(perm[j + 1]).size != d:
            raise LevelCrossing(
                float(times[j + 1]), float(best_val[j, prev].min()),
                "two levels matched the same eigenvector",
            )

    basis = np.take_along_axis(raw, perm[:, None, :], axis=2)
    link = np.einsum("jin,jin->jn", np.conj(basis[:-1]), basis[1:])
    # phase of column n at t_j relative to t_0; cumulative angles avoid
    # drift from repeated complex products
    theta = np.zeros((J1, d))
    theta[1:] = np.cumsum(-np.angle(link), axis=0)
    basis = basis * np.exp(1j * theta)[:, None, :]
    return InvariantFrame(times, np.ascontiguousarray(basis), f)


def eigenbasis_frame(H: HamiltonianSchedule, resolution=DEFAULT_RESOLUTION, degeneracy_rtol=DEGENERACY_RTOL):
    """Frame from the instantaneous eigenvectors of H, levels ordered at t = 0."""
    times = grid_times(H.horizon, resolution)
    w, V = np.linalg.eigh(H.evaluate_many(times))
    return smooth_gauge(times, V, spectra=w, degeneracy_rtol=degeneracy_rtol)


def propagated_frame(H: HamiltonianSchedule, base_unitaries, initial_basis=None):
    """Invariant U(t, 0) F(0) U(t, 0)^dag from converged step propagators.

    ``base_unitaries`` holds the J_s exact propagators of consecutive grid
    intervals.  By default F(0) is diagonal in the eigenbasis of H(0), so
    the invariant coincides with H at t = 0.
    """
    U = np.asarray(base_unitaries)
    times = grid_times(H.horizon, U.shape[0])
    if initial_basis is None:
        w, initial_basis = np.linalg.eigh(H.evaluate(0.0))
        check_spectra(times[:1], w[None])
    raw = kernels.propagate(U, initial_basis)
    return smooth_gauge(times, raw)


def rotating_spin_frame(field, omega, horizon, resolution=DEFAULT_RESOLUTION):
    """Analytic invariant of the rotating-field spin.

    With R(t) = exp(-i w t sigma_y / 2), H(t) = R H(0) R^dag, and the
    co-rotating generator H_rot = (B/2) sigma_z - (w/2) sigma_y is constant.
    Its eigenvectors v_n give the invariant eigenvectors R(t) v_n.
    """
    times = grid_times(horizon, resolution)
    _, v = np.linalg.eigh(rotating_spin_hrot(field, omega))
    c, s = np.cos(omega * times / 2), np.sin(omega * times / 2)
    R = np.zeros((times.size, 2, 2), dtype=np.complex128)
    R[:, 0, 0] = c
    R[:, 0, 1] = -s
    R[:, 1, 0] = s
    R[:, 1, 1] = c
    return smooth_gauge(times, R @ v)


def rotating_spin_hrot(field, omega):
    """(B/2) sigma_z - (w/2) sigma_y."""
    return np.array([[field / 2, 1j * omega / 2], [-1j * omega / 2, -field / 2]])


# --- diagonal / off-diagonal split ---------------------------------------------


def split_diag_offdiag(H: HamiltonianSchedule, frame: InvariantFrame, t):
    """(H_d, H_nd) at grid time t, diagonal/off-diagonal in the frame basis."""
    j = frame.index(t)
    Hd, Hnd = split_diag_offdiag_many(H.evaluate(frame.times[j])[None], frame.basis[j][None])
    return Hd[0], Hnd[0]


def split_diag_offdiag_many(Hs, bases):
    Hs = np.asarray(Hs, dtype=np.complex128)
    diag = np.einsum("jmn,jmk,jkn->jn", np.conj(bases), Hs, bases).real
    Hd = (bases * diag[:, None, :]) @ dagger(bases)
    Hd = 0.5 * (Hd + dagger(Hd))
    return Hd, Hs - Hd


def di_split(H: HamiltonianSchedule, frame: InvariantFrame) -> SplitSchedule:
    """Two-term split {H_d, H_nd}; both terms are defined on the frame grid only."""
    if not np.isclose(frame.horizon, H.horizon, rtol=1e-12, atol=0):
        raise GridMismatch("frame and schedule horizons differ")

    def part(which):
        def many(ts):
            j = frame.indices(ts)
            return split_diag_offdiag_many(H.evaluate_many(frame.times[j]), frame.basis[j])[which]

        return many

    Hd = HamiltonianSchedule(H.dim, H.horizon, part(0), "H_d")
    Hnd = HamiltonianSchedule(H.dim, H.horizon, part(1), "H_nd")
    return SplitSchedule(H, (Hd, Hnd), "di")


# --- validation and Lewis-Riesenfeld phases --------------------------------------


def von_neumann_residual(frame: InvariantFrame, H: HamiltonianSchedule, t) -> float:
    """Spectral norm of i dF/dt - [H, F] at an interior grid time."""
    j = frame.index(t)
    if j == 0 or j == frame.resolution:
        raise BoundaryPoint(f"t = {t!r} is a grid endpoint; central difference unavailable")
    Fm, F0, Fp = ((frame.basis[k] * frame.eigenvalues) @ dagger(frame.basis[k]) for k in (j - 1, j, j + 1))
    dF = (Fp - Fm) / (2 * frame.step)
    Hj = H.evaluate(frame.times[j])
    return float(np.linalg.norm(1j * dF - (Hj @ F0 - F0 @ Hj), ord=2))


def max_von_neumann_residual(frame: InvariantFrame, H: HamiltonianSchedule, stride=1) -> float:
    """Largest residual over interior grid points (every ``stride``-th one)."""
    js = np.arange(1, frame.resolution, stride)
    F = frame.invariant_matrices()
    dF = (F[js + 1] - F[js - 1]) / (2 * frame.step)
    Hs = H.evaluate_many(frame.times[js])
    R = 1j * dF - (Hs @ F[js] - F[js] @ Hs)
    return float(np.max(np.linalg.norm(R, ord=2, axis=(1, 2))))


@dataclass(frozen=True, eq=False)
class LRPhaseTable:
    """kappa_n(t_j) in radians; ``kappa[j, n]``."""

    times: np.ndarray
    kappa: np.ndarray

    def at(self, j) -> np.ndarray:
        return self.kappa[j]


def berry_defect(frame: InvariantFrame) -> float:
    """max |Re <phi_n|d_t phi_n>| * h; zero for an exactly normalized smooth family."""
    diag = np.einsum("jnn->jn", frame.connection)
    return float(np.max(np.abs(diag.real))) * frame.step


def lr_phase(frame: InvariantFrame, H: HamiltonianSchedule, phase_tol=PHASE_STEP_TOL) -> LRPhaseTable:
    """Trapezoidal quadrature of i<phi_n|d_t phi_n> - <phi_n|H|phi_n>.

    Raises :class:`NonRealIntegrand` when the per-step non-real part
    |Re <phi|d_t phi>| h exceeds ``phase_tol``.
    """
    defect = berry_defect(frame)
    if defect > phase_tol:
        raise NonRealIntegrand(
            f"integrand has non-real part {defect:.3e} per grid step (tol {phase_tol:.1e})"
        )
    geo = -np.einsum("jnn->jn", frame.connection).imag  # Re(i <phi|d phi>)
    Hs = H.evaluate_many(frame.times)
    energy = np.einsum("jmn,jmk,jkn->jn", np.conj(frame.basis), Hs, frame.basis).real
    kappa = cumulative_trapezoid(geo - energy, frame.times, axis=0, initial=0.0)
    return LRPhaseTable(frame.times, kappa)


def lr_state(frame: InvariantFrame, phases: LRPhaseTable, c0, t, norm_tol=NORM_TOL) -> np.ndarray:
    """sum_n c_n(0) exp(i kappa_n(t)) |phi_n(t)> at a grid time."""
    c0 = np.asarray(c0, dtype=np.complex128)
    if c0.shape != (frame.dim,):
        raise DimensionMismatch(f"need {frame.dim} coefficients, got shape {c0.shape}")
    err = abs(np.linalg.norm(c0) - 1.0)
    if err > norm_tol:
        raise NotNormalized(f"initial coefficients have norm deviating from 1 by {err:.3e}")
    j = frame.index(t)
    return frame.basis[j] @ (c0 * np.exp(1j * phases.kappa[j]))


def lr_states(frame: InvariantFrame, phases: LRPhaseTable, c0) -> np.ndarray:
    """lr_state at every grid time, shape (J_s + 1, d)."""
    c0 = np.asarray(c0, dtype=np.complex128)
    return np.einsum("jmn,jn->jm", frame.basis, c0 * np.exp(1j * phases.kappa))
