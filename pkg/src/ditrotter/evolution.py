"""Reference propagation and first-order Trotter digitization.

The reference propagator for a coarse step [t_{n-1}, t_n] is the ordered
product of S midpoint exponentials exp(-i (dt/S) H(t_mid)); S is doubled
until the probe trajectory moves by at most ``exact_tol``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, InvalidParameter, NoConvergence
from .linalg import NORM_TOL, check_normalized, dagger
from .schedules import HamiltonianSchedule, SplitSchedule

EXACT_TOL = 1e-10
S_MAX = 2**20
# fine steps handled per batch while streaming the midpoint products
CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States at t_m = m T / M for m = 0..M; ``kind`` is 'exact' or 'digitized'."""

    times: np.ndarray
    states: np.ndarray
    kind: str

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))

    def to_csv(self, path) -> None:
        """Rows t, re_0, im_0, re_1, im_1, ..."""
        d = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"{p}_{i}" for i in range(d) for p in ("re", "im")])
            for t, psi in zip(self.times, self.states):
                row = [repr(float(t))]
                for a in psi:
                    row += [repr(float(a.real)), repr(float(a.imag))]
                w.writerow(row)


@dataclass(frozen=True, eq=False)
class PropagatorPair:
    """Per-step reference and digitized unitaries, shape (M, d, d) each."""

    exact: np.ndarray
    digitized: np.ndarray

    @property
    def M(self) -> int:
        return self.exact.shape[0]


def midpoint_step_unitaries(H: HamiltonianSchedule, n_steps: int, substeps: int) -> np.ndarray:
    """Products of ``substeps`` midpoint exponentials for each of ``n_steps`` steps."""
    T = H.horizon
    n_fine = n_steps * substeps
    dt = T / n_fine
    out = np.empty((n_steps, H.dim, H.dim), dtype=np.complex128)
    steps_per_chunk = max(1, CHUNK // substeps)
    for start in range(0, n_steps, steps_per_chunk):
        stop = min(n_steps, start + steps_per_chunk)
        k = np.arange(start * substeps, stop * substeps)
        mids = (k + 0.5) * dt
        fine = kernels.expm_herm_stack(H.evaluate_many(mids), dt)
        out[start:stop] = kernels.group_products(fine, substeps)
    return out


def _probe(d):
    return np.eye(d, dtype=np.complex128)[:, : min(d, 8)]


class ReferencePropagator:
    """Converged step propagators of H on a base grid of ``base_steps`` intervals.

    Any M dividing ``base_steps`` is served by multiplying consecutive base
    steps, so one converged reference is shared by a whole sweep.
    """

    def __init__(self, H: HamiltonianSchedule, base_steps: int, substeps: int = 1,
                 exact_tol: float = EXACT_TOL, s_max: int = S_MAX):
        if base_steps < 1 or substeps < 1:
            raise InvalidParameter("base_steps and substeps must be positive")
        self.H = H
        self.base_steps = int(base_steps)
        self.exact_tol = exact_tol
        S = int(substeps)
        U = midpoint_step_unitaries(H, self.base_steps, S)
        probe = _probe(H.dim)
        X = kernels.propagate(U, probe)
        history = []
        while True:
            if 2 * S > s_max:
                raise NoConvergence(
                    f"reference propagator did not reach tol {exact_tol:.1e} with S <= {s_max}"
                    f" (last change {history[-1] if history else float('nan'):.3e})"
                )
            U2 = midpoint_step_unitaries(H, self.base_steps, 2 * S)
            X2 = kernels.propagate(U2, probe)
            change = float(np.max(np.abs(X2 - X)))
            history.append(change)
            U, X, S = U2, X2, 2 * S
            if change <= exact_tol:
                break
        self.substeps = S
        self.history = history
        self.base = U

    @property
    def horizon(self) -> float:
        return self.H.horizon

    def step_unitaries(self, M: int) -> np.ndarray:
        if M < 1 or self.base_steps % M:
            raise InvalidParameter(f"M = {M} does not divide the base grid of {self.base_steps} steps")
        return kernels.group_products(self.base, self.base_steps // M)

    def trajectory(self, M: int, psi0) -> tuple[Trajectory, np.ndarray]:
        psi0 = np.asarray(psi0, dtype=np.complex128)
        check_normalized(psi0)
        if psi0.shape != (self.H.dim,):
            raise DimensionMismatch(f"state has shape {psi0.shape}, expected ({self.H.dim},)")
        U = self.step_unitaries(M)
        states = kernels.propagate(U, psi0)
        return Trajectory(np.linspace(0.0, self.horizon, M + 1), states, "exact"), U


def exact_propagate(H: HamiltonianSchedule, M: int, psi0, substeps: int = 1,
                    exact_tol: float = EXACT_TOL, s_max: int = S_MAX):
    """Reference trajectory on t_m = m T / M and the per-step unitaries.

    S starts at ``substeps`` and is doubled until converged; raises
    :class:`NoConvergence` beyond ``s_max``.
    """
    if M < 1:
        raise InvalidParameter(f"M must be positive, got {M}")
    ref = ReferencePropagator(H, M, substeps, exact_tol, s_max)
    return ref.trajectory(M, psi0)


def trotter_unitaries(split: SplitSchedule, M: int) -> np.ndarray:
    """U_d for every step n = 1..M: prod_k exp(-i dt H_k(n T / M)), k = 1 first."""
    if M < 1:
        raise InvalidParameter(f"M must be positive, got {M}")
    T = split.horizon
    dt = T / M
    ts = np.arange(1, M + 1) * dt
    terms = split.term_stack(ts)  # (K, M, d, d)
    U = kernels.expm_herm_stack(terms[0], dt)
    for k in range(1, split.K):
        U = np.matmul(kernels.expm_herm_stack(terms[k], dt), U)
    return U


def trotter_step(split: SplitSchedule, t_eval: float, dt: float, psi) -> np.ndarray:
    """Apply exp(-i dt H_K(t_eval)) ... exp(-i dt H_1(t_eval)) to psi."""
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape != (split.dim,):
        raise DimensionMismatch(f"state has shape {psi.shape}, expected ({split.dim},)")
    terms = split.term_stack([t_eval])[:, 0]
    for U in kernels.expm_herm_stack(terms, dt):
        psi = U @ psi
    return psi


def digitized_evolve(split: SplitSchedule, M: int, psi0) -> tuple[Trajectory, np.ndarray]:
    """Chain of first-order Trotter steps; returns the trajectory and the U_d stack."""
    psi0 = np.asarray(psi0, dtype=np.complex128)
    check_normalized(psi0, NORM_TOL)
    if psi0.shape != (split.dim,):
        raise DimensionMismatch(f"state has shape {psi0.shape}, expected ({split.dim},)")
    Ud = trotter_unitaries(split, M)
    states = kernels.propagate(Ud, psi0)
    return Trajectory(np.linspace(0.0, split.horizon, M + 1), states, "digitized"), Ud


def reverse(U, psi_final) -> np.ndarray:
    """Undo a trajectory by applying U_n^dag for n = M..1."""
    return kernels.propagate(dagger(np.asarray(U)[::-1]), psi_final)[-1]
