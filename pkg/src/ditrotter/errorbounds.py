"""State-dependent Fubini-Study bounds on digitization error.

For step n the angle L_n between |Psi(t_n)> and U_d U^dag |Psi(t_n)>
bounds how far one Trotter step pushes the digitized state off the exact
one; the final overlap obeys |<Psi(T)|Psi_d(T)>| >= cos(sum L_n) while the
sum stays below pi/2.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidBound, LengthMismatch
from .linalg import commutator, dagger, fs_angles
from .schedules import SplitSchedule

HALF_PI = 0.5 * np.pi
# split labels whose two terms are (diagonal, off-diagonal) in an invariant basis
DIAGONAL_SPLITS = ("di", "cd")


def step_angles(U_exact, U_digitized, exact_states) -> np.ndarray:
    """L_n = arccos|<Psi(t_n)|U_d,n U_n^dag|Psi(t_n)>| for n = 1..M.

    ``exact_states`` is the exact trajectory with M + 1 entries; the state
    at the end of step n is used.
    """
    U = np.asarray(U_exact)
    Ud = np.asarray(U_digitized)
    psi = np.asarray(exact_states)
    if U.shape != Ud.shape:
        raise LengthMismatch(f"exact and digitized sequences differ: {U.shape} vs {Ud.shape}")
    if psi.shape[0] != U.shape[0] + 1:
        raise LengthMismatch(
            f"trajectory has {psi.shape[0]} states, expected {U.shape[0] + 1}"
        )
    end = psi[1:]
    back = np.einsum("nji,nj->ni", np.conj(U), end)  # U^dag psi
    moved = np.einsum("nij,nj->ni", Ud, back)
    return np.clip(fs_angles(end, moved), 0.0, HALF_PI)


def overlap_bound(angles):
    """(cos(sum L_n), sum L_n <= pi/2)."""
    s = float(np.sum(angles))
    return float(np.cos(s)), s <= HALF_PI


def infidelity_bound(angles):
    """(sin(sum L_n), sum L_n); bounds sqrt(1 - |overlap|^2).

    Raises :class:`InvalidBound` when sum L_n > pi/2.
    """
    s = float(np.sum(angles))
    if s > HALF_PI:
        raise InvalidBound(f"sum of step angles {s:.6g} exceeds pi/2")
    return float(np.sin(s)), s


def _expect(op, psi):
    return np.einsum("...i,...ij,...j->...", np.conj(psi), op, psi)


def commutator_sum(terms):
    """sum_{k<l} [H_k, H_l] for a (K, ..., d, d) stack of terms."""
    terms = np.asarray(terms)
    A = np.zeros_like(terms[0])
    for k in range(terms.shape[0]):
        for l in range(k + 1, terms.shape[0]):
            A = A + commutator(terms[k], terms[l])
    return A


def dominant_error_A(split: SplitSchedule, psi, T, M, n=None, t=None) -> float:
    """(T^2 / 2M^2) |<Psi| sum_{k<l} [H_k, H_l] |Psi>| with H_k at t = n T / M."""
    if t is None:
        t = n * T / M
    terms = split.term_stack([t])[:, 0]
    return float(T**2 / (2 * M**2) * abs(_expect(commutator_sum(terms), np.asarray(psi))))


def dominant_error_B(H_d, H_nd, phi, T, M) -> float:
    """(T^3 / 6M^3) |<phi| [H_nd, [H_nd, H_d]] |phi>|."""
    B = commutator(H_nd, commutator(H_nd, H_d))
    return float(T**3 / (6 * M**3) * abs(_expect(B, np.asarray(phi))))


def predicted_A_steps(split: SplitSchedule, states, T, M) -> np.ndarray:
    """Estimate A for every step, with the exact state at the step's right end."""
    ts = np.arange(1, M + 1) * (T / M)
    A = commutator_sum(split.term_stack(ts))
    return T**2 / (2 * M**2) * np.abs(_expect(A, np.asarray(states)[1:]))


def predicted_B_steps(split: SplitSchedule, states, T, M) -> np.ndarray:
    """Estimate B for every step of a diagonal/off-diagonal split.

    terms[0] is taken as H_d and terms[1] as H_nd; for other splits the
    estimate is undefined and NaN is returned.
    """
    if split.K != 2 or split.label not in DIAGONAL_SPLITS:
        return np.full(M, np.nan)
    ts = np.arange(1, M + 1) * (T / M)
    Hd, Hnd = split.term_stack(ts)
    B = commutator(Hnd, commutator(Hnd, Hd))
    return T**3 / (6 * M**3) * np.abs(_expect(B, np.asarray(states)[1:]))


def leading_order_steps(split: SplitSchedule, states, T, M, step=None) -> np.ndarray:
    """Leading small-dt angle (dt^2 / 2) * spread of C in the exact state.

    C = sum_{k<l} [H_k, H_l] - i dH/dt combines the splitting commutators
    with the change of H across the step (the right-endpoint evaluation).
    The angle depends on the spread sqrt(<C^dag C> - |<C>|^2), so it stays
    nonzero when <C> vanishes but C still moves the state.
    """
    dt = T / M
    ts = np.arange(1, M + 1) * dt
    C = commutator_sum(split.term_stack(ts)) - 1j * split.whole.derivative(ts, step)
    psi = np.asarray(states)[1:]
    Cpsi = np.einsum("nij,nj->ni", C, psi)
    mean = np.einsum("ni,ni->n", np.conj(psi), Cpsi)
    spread = np.sqrt(np.maximum(np.sum(np.abs(Cpsi) ** 2, axis=1) - np.abs(mean) ** 2, 0.0))
    return 0.5 * dt**2 * spread


@dataclass
class ErrorReport:
    M: int
    angles: np.ndarray = field(repr=False)
    bound_sum: float
    overlap_exact: float
    infidelity: float
    infidelity_sqrt: float
    bound_valid: bool
    overlap_lower: float
    bound_sin: float
    predicted_A: np.ndarray = field(repr=False)
    predicted_B: np.ndarray = field(repr=False)
    leading_order: np.ndarray = field(repr=False)

    @property
    def predicted_A_sum(self) -> float:
        return float(np.sum(self.predicted_A))

    @property
    def predicted_B_sum(self) -> float:
        return float(np.sum(self.predicted_B))

    def bound_holds(self, slack=1e-9) -> bool:
        """Overlap bound check; vacuous when the validity flag is unset."""
        return (not self.bound_valid) or self.overlap_exact >= self.overlap_lower - slack

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("angles", "predicted_A", "predicted_B", "leading_order"):
            out[key] = np.asarray(out[key]).tolist()
        out["predicted_A_sum"] = self.predicted_A_sum
        out["predicted_B_sum"] = self.predicted_B_sum
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def error_report(split: SplitSchedule, U_exact, U_digitized, exact_states, digitized_final) -> ErrorReport:
    """Angles, bounds, final overlap and dominant-error estimates for one run."""
    M = len(U_exact)
    T = split.horizon
    L = step_angles(U_exact, U_digitized, exact_states)
    lower, valid = overlap_bound(L)
    s = float(np.sum(L))
    ov = float(min(1.0, abs(np.vdot(exact_states[-1], digitized_final))))
    # 1 - |ov|^2 loses precision near 1; use the perpendicular component instead
    psi, phi = np.asarray(exact_states[-1]), np.asarray(digitized_final)
    sqrt_inf = float(np.sin(fs_angles(psi[None], phi[None])[0]))
    return ErrorReport(
        M=M,
        angles=L,
        bound_sum=s,
        overlap_exact=ov,
        infidelity=sqrt_inf**2,
        infidelity_sqrt=sqrt_inf,
        bound_valid=valid,
        overlap_lower=lower,
        bound_sin=float(np.sin(min(s, HALF_PI))),
        predicted_A=predicted_A_steps(split, exact_states, T, M),
        predicted_B=predicted_B_steps(split, exact_states, T, M),
        leading_order=leading_order_steps(split, exact_states, T, M),
    )
