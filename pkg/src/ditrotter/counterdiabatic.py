"""Counterdiabatic driving on top of a reference schedule.

H_cd(t) = i sum_{m != n} |m><m|d_t n><n| with |n(t)> the gauge-smoothed
eigenvectors of H_ref.  Off the frame grid (the reference propagator samples
midpoints) the derivative is taken from a local three-point stencil with
the frame's step h, which reproduces the frame's own finite differences at
grid points.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonImaginaryBerryTerm, NotNormalized
from .invariant import (
    DEFAULT_RESOLUTION,
    InvariantFrame,
    LRPhaseTable,
    eigenbasis_frame,
)
from .linalg import NORM_TOL, dagger
from .schedules import HamiltonianSchedule, SplitSchedule, split_by_terms
from scipy.integrate import cumulative_trapezoid

# per-step bound on |Re <n|d_t n>| * h
BERRY_STEP_TOL = 1e-6


def _align(ref, V):
    """Reorder and rephase columns of V to follow ref (max overlap, real positive)."""
    ov = dagger(ref) @ V  # (n, d, d)
    perm = np.argmax(np.abs(ov), axis=2)
    V = np.take_along_axis(V, perm[:, None, :], axis=2)
    link = np.einsum("jin,jin->jn", np.conj(ref), V)
    return V * np.exp(-1j * np.angle(link))[:, None, :]


def cd_from_basis(basis, dbasis):
    """i sum_{m != n} |m><m|d n><n| given vectors and their derivatives (stacks)."""
    G = dagger(basis) @ dbasis
    d = G.shape[-1]
    G[..., np.arange(d), np.arange(d)] = 0.0
    H = 1j * basis @ G @ dagger(basis)
    return 0.5 * (H + dagger(H))


def local_cd(href: HamiltonianSchedule, ts, h):
    """H_cd at arbitrary times from eigenvectors at t and t +- h.

    One-sided second-order stencils are used within h of either end of
    [0, T], so href is never evaluated outside its horizon.
    """
    ts = np.asarray(ts, dtype=float)
    T = href.horizon
    tol = 1e-12 * T
    shift = np.where(ts - h < -tol, h, np.where(ts + h > T + tol, -h, 0.0))
    # stencil points s0 < s1 < s2 around the centre c = ts + shift
    c = ts + shift
    _, V0 = np.linalg.eigh(href.evaluate_many(ts))
    _, Vm = np.linalg.eigh(href.evaluate_many(c - h))
    _, Vc = np.linalg.eigh(href.evaluate_many(c))
    _, Vp = np.linalg.eigh(href.evaluate_many(c + h))
    Vm, Vc, Vp = (_align(V0, V) for V in (Vm, Vc, Vp))
    s = (shift / h)[:, None, None]
    # derivative at ts of the quadratic through (c-h, c, c+h): x = -s in units of h
    x = -s
    dV = ((x - 0.5) * Vm - 2 * x * Vc + (x + 0.5) * Vp) / h
    return cd_from_basis(V0, dV)


@dataclass(frozen=True, eq=False)
class CDSystem:
    """Reference schedule, its eigenbasis frame and the counterdiabatic term."""

    href: HamiltonianSchedule
    frame: InvariantFrame
    hcd: HamiltonianSchedule
    total: HamiltonianSchedule

    def hcd_grid(self) -> np.ndarray:
        """H_cd at every frame grid time, from the frame's own derivatives."""
        return cd_from_basis(self.frame.basis, self.frame.derivative.copy())

    def split(self) -> SplitSchedule:
        """{H_ref, H_cd} with H_ref applied first."""
        return split_by_terms(self.total, (self.href, self.hcd), label="cd")

    def energies(self) -> np.ndarray:
        """E_n(t_j) = <n|H_ref|n>, shape (J_s + 1, d)."""
        Hs = self.href.evaluate_many(self.frame.times)
        B = self.frame.basis
        return np.einsum("jmn,jmk,jkn->jn", np.conj(B), Hs, B).real

    def to_dict(self) -> dict:
        data = self.frame.to_dict()
        hcd = self.hcd_grid()
        data["hcd"] = np.stack([hcd.real, hcd.imag], axis=-1).tolist()
        return data

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def build_cd(href: HamiltonianSchedule, resolution=DEFAULT_RESOLUTION) -> CDSystem:
    """Counterdiabatic system for ``href`` with the frame sampled at J_s = resolution.

    Raises :class:`DegenerateSpectrum` or :class:`LevelCrossing` from the
    frame construction.
    """
    frame = eigenbasis_frame(href, resolution)
    h = frame.step
    hcd = HamiltonianSchedule(href.dim, href.horizon, lambda ts: local_cd(href, ts, h), "H_cd")
    total = HamiltonianSchedule(
        href.dim,
        href.horizon,
        lambda ts: href.evaluate_many(ts) + local_cd(href, ts, h),
        f"{href.label} + H_cd",
        parts=tuple(href.parts) + (hcd,),
    )
    return CDSystem(href, frame, hcd, total)


def adiabatic_phases(sys: CDSystem, berry_tol=BERRY_STEP_TOL) -> LRPhaseTable:
    """Accumulated phases -int E_n + i int i<n|d n> on the grid.

    The geometric exponent -int <n|d_t n> must be a pure phase; a real part
    of <n|d_t n> above ``berry_tol`` per grid step raises
    :class:`NonImaginaryBerryTerm`.
    """
    frame = sys.frame
    berry = np.einsum("jnn->jn", frame.connection)
    defect = float(np.max(np.abs(berry.real))) * frame.step
    if defect > berry_tol:
        raise NonImaginaryBerryTerm(
            f"<n|d_t n> has real part {defect:.3e} per grid step (tol {berry_tol:.1e})"
        )
    # exp(-int <n|dn>) with <n|dn> = i b  ->  phase -int b
    integrand = -sys.energies() - berry.imag
    return LRPhaseTable(frame.times, cumulative_trapezoid(integrand, frame.times, axis=0, initial=0.0))


def adiabatic_state(sys: CDSystem, c0, t, phases: LRPhaseTable | None = None, norm_tol=NORM_TOL):
    """sum_n c_n(0) exp(-i int E_n) exp(-int <n|d_t n>) |n(t)> at grid time t."""
    c0 = np.asarray(c0, dtype=np.complex128)
    if c0.shape != (sys.frame.dim,):
        raise DimensionMismatch(f"need {sys.frame.dim} coefficients, got shape {c0.shape}")
    err = abs(np.linalg.norm(c0) - 1.0)
    if err > norm_tol:
        raise NotNormalized(f"initial coefficients have norm deviating from 1 by {err:.3e}")
    if phases is None:
        phases = adiabatic_phases(sys)
    j = sys.frame.index(t)
    return sys.frame.basis[j] @ (c0 * np.exp(1j * phases.kappa[j]))


def perturbative_cd(href: HamiltonianSchedule, ts, step=None):
    """i sum_{m != n} |m><m|d_t H|n><n| / (E_n - E_m); a cross-check for :func:`local_cd`."""
    ts = np.asarray(ts, dtype=float)
    w, V = np.linalg.eigh(href.evaluate_many(ts))
    dH = dagger(V) @ href.derivative(ts, step) @ V
    gap = w[:, None, :] - w[:, :, None]  # E_n - E_m at [m, n]
    d = w.shape[1]
    off = ~np.eye(d, dtype=bool)
    G = np.zeros_like(dH)
    G[:, off] = dH[:, off] / gap[:, off]
    return 1j * V @ G @ dagger(V)
