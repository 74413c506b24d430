"""Time-dependent Hamiltonian schedules and the model systems used in sweeps.

A :class:`HamiltonianSchedule` wraps a vectorized map ``ts -> H(ts)``
returning a stack of shape ``(len(ts), d, d)``.  Model constructors also
record their natural Pauli-term decomposition in ``parts`` so that the
naive split is available without re-deriving it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParameter, SumMismatch
from .linalg import SIGMA_X, SIGMA_Y, SIGMA_Z, hermiticity_defect

SPLIT_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class HamiltonianSchedule:
    """H(t) on [0, horizon] with ``dim x dim`` Hermitian values."""

    dim: int
    horizon: float
    evaluate_many: Callable[[np.ndarray], np.ndarray]
    label: str = ""
    parts: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidParameter(f"dim must be positive, got {self.dim}")
        if not self.horizon > 0:
            raise InvalidParameter(f"horizon must be positive, got {self.horizon}")

    def evaluate(self, t: float) -> np.ndarray:
        return self.evaluate_many(np.array([float(t)]))[0]

    __call__ = evaluate

    def __add__(self, other: HamiltonianSchedule) -> HamiltonianSchedule:
        _check_compatible([self, other])
        return HamiltonianSchedule(
            self.dim,
            self.horizon,
            lambda ts: self.evaluate_many(ts) + other.evaluate_many(ts),
            label=f"{self.label} + {other.label}",
        )

    def sample_times(self, n: int = 1000) -> np.ndarray:
        return np.linspace(0.0, self.horizon, n)

    def max_hermiticity_defect(self, n: int = 1000) -> float:
        return hermiticity_defect(self.evaluate_many(self.sample_times(n)))

    def derivative(self, ts, step=None):
        """Central-difference dH/dt at the given times."""
        ts = np.asarray(ts, dtype=float)
        h = self.horizon * 1e-5 if step is None else step
        return (self.evaluate_many(ts + h) - self.evaluate_many(ts - h)) / (2 * h)

    @classmethod
    def from_function(cls, func, dim, horizon, label=""):
        """Wrap a scalar ``t -> H(t)`` callable (evaluated in a loop)."""

        def many(ts):
            return np.stack([np.asarray(func(float(t)), dtype=np.complex128) for t in ts])

        return cls(dim, horizon, many, label)

    @classmethod
    def constant(cls, H, horizon, label="constant"):
        H = np.asarray(H, dtype=np.complex128)
        return cls(
            H.shape[0], horizon, lambda ts: np.broadcast_to(H, (len(ts),) + H.shape).copy(), label
        )


def linear_combination(coeffs: Sequence[Callable], ops: Sequence[np.ndarray], horizon, label=""):
    """Schedule sum_i c_i(t) O_i with vectorized coefficient functions."""
    ops = np.stack([np.asarray(o, dtype=np.complex128) for o in ops])

    def many(ts):
        ts = np.asarray(ts, dtype=float)
        c = np.stack([np.broadcast_to(np.asarray(f(ts), dtype=float), ts.shape) for f in coeffs])
        return np.einsum("kn,kij->nij", c, ops)

    return HamiltonianSchedule(ops.shape[1], horizon, many, label)


def _check_compatible(schedules):
    d, T = schedules[0].dim, schedules[0].horizon
    for s in schedules[1:]:
        if s.dim != d or not np.isclose(s.horizon, T, rtol=1e-12, atol=0):
            raise InvalidParameter(
                f"schedules disagree on dim/horizon: ({d}, {T}) vs ({s.dim}, {s.horizon})"
            )


@dataclass(frozen=True, eq=False)
class SplitSchedule:
    """Ordered terms H_1 ... H_K whose sum is ``whole``; H_1 is applied first."""

    whole: HamiltonianSchedule
    terms: tuple
    label: str = ""

    @property
    def K(self) -> int:
        return len(self.terms)

    @property
    def dim(self) -> int:
        return self.whole.dim

    @property
    def horizon(self) -> float:
        return self.whole.horizon

    def term_stack(self, ts) -> np.ndarray:
        """Shape (K, len(ts), d, d)."""
        return np.stack([term.evaluate_many(np.asarray(ts, dtype=float)) for term in self.terms])


def split_by_terms(whole: HamiltonianSchedule, parts, sample_times=None, label="") -> SplitSchedule:
    """Validate that ``parts`` sum to ``whole`` and package them as a split.

    The check runs at ``sample_times`` (default: 101 uniform points on
    [0, T]) and raises :class:`SumMismatch` with the worst deviation.
    """
    parts = tuple(parts)
    if not parts:
        raise InvalidParameter("a split needs at least one term")
    _check_compatible([whole, *parts])
    ts = np.linspace(0.0, whole.horizon, 101) if sample_times is None else np.asarray(sample_times)
    target = whole.evaluate_many(ts)
    total = sum(p.evaluate_many(ts) for p in parts)
    dev = np.max(np.abs(total - target), axis=(1, 2))
    scale = max(1.0, float(np.max(np.abs(target))))
    worst = int(np.argmax(dev))
    if dev[worst] > SPLIT_ATOL * scale:
        raise SumMismatch(float(dev[worst]), float(ts[worst]))
    return SplitSchedule(whole, parts, label or " | ".join(p.label for p in parts))


def naive_split(whole: HamiltonianSchedule) -> SplitSchedule:
    """Split a model schedule into its recorded Pauli-term parts."""
    if not whole.parts:
        raise InvalidParameter(f"schedule {whole.label!r} has no recorded parts")
    return split_by_terms(whole, whole.parts, label="naive")


# --- model systems ------------------------------------------------------------


def linear_sweep(eps0, horizon):
    """eps(t) = eps0 (2 t / T - 1)."""
    return lambda ts: eps0 * (2.0 * np.asarray(ts, dtype=float) / horizon - 1.0)


def landau_zener(gap: float, sweep=None, horizon: float = 1.0, eps0=None) -> HamiltonianSchedule:
    """H(t) = (gap/2) sigma_x + (eps(t)/2) sigma_z.

    ``sweep`` is a vectorized ``t -> eps(t)``; by default the linear sweep
    from -eps0 to +eps0 with eps0 = 4 * gap.
    """
    if not gap > 0:
        raise InvalidParameter(f"Landau-Zener gap must be positive, got {gap}")
    if not horizon > 0:
        raise InvalidParameter(f"horizon must be positive, got {horizon}")
    if sweep is None:
        sweep = linear_sweep(4.0 * gap if eps0 is None else eps0, horizon)
    x_part = linear_combination([lambda ts: 0.5 * gap], [SIGMA_X], horizon, "gap*sx/2")
    z_part = linear_combination([lambda ts: 0.5 * sweep(ts)], [SIGMA_Z], horizon, "eps*sz/2")
    whole = linear_combination(
        [lambda ts: 0.5 * gap, lambda ts: 0.5 * sweep(ts)], [SIGMA_X, SIGMA_Z], horizon, "LZ"
    )
    return HamiltonianSchedule(2, horizon, whole.evaluate_many, "LZ", parts=(x_part, z_part))


def site_operator(op, site: int, n_sites: int) -> np.ndarray:
    eye = np.eye(2, dtype=np.complex128)
    return reduce(np.kron, [op if k == site else eye for k in range(n_sites)])


def tfim_operators(n_sites: int):
    """(sum_i X_i, sum_i Z_i Z_{i+1}) with open boundaries."""
    x_sum = sum(site_operator(SIGMA_X, i, n_sites) for i in range(n_sites))
    zz_sum = sum(
        site_operator(SIGMA_Z, i, n_sites) @ site_operator(SIGMA_Z, i + 1, n_sites)
        for i in range(n_sites - 1)
    )
    return x_sum, zz_sum


def tfim_chain(n_sites: int, coupling: float = 1.0, schedule=None, horizon: float = 1.0):
    """H(t) = -(1 - lam(t)) sum X_i - lam(t) J sum Z_i Z_{i+1}, open chain.

    ``schedule`` maps times to lam in [0, 1] (vectorized); default lam = t/T.
    """
    if not 2 <= n_sites <= 6:
        raise InvalidParameter(f"n_sites must be in [2, 6], got {n_sites}")
    if not horizon > 0:
        raise InvalidParameter(f"horizon must be positive, got {horizon}")
    if schedule is None:
        schedule = lambda ts: np.asarray(ts, dtype=float) / horizon  # noqa: E731
    x_sum, zz_sum = tfim_operators(n_sites)
    x_part = linear_combination([lambda ts: -(1.0 - schedule(ts))], [x_sum], horizon, "field")
    zz_part = linear_combination([lambda ts: -coupling * schedule(ts)], [zz_sum], horizon, "coupling")
    whole = linear_combination(
        [lambda ts: -(1.0 - schedule(ts)), lambda ts: -coupling * schedule(ts)],
        [x_sum, zz_sum],
        horizon,
    )
    return HamiltonianSchedule(
        2**n_sites, horizon, whole.evaluate_many, f"TFIM(N={n_sites})", parts=(x_part, zz_part)
    )


def rotating_spin(field: float, omega: float, horizon: float = 1.0) -> HamiltonianSchedule:
    """H(t) = (B/2)(cos(wt) sigma_z + sin(wt) sigma_x)."""
    if not field > 0:
        raise InvalidParameter(f"field magnitude must be positive, got {field}")
    if not horizon > 0:
        raise InvalidParameter(f"horizon must be positive, got {horizon}")
    z_part = linear_combination(
        [lambda ts: 0.5 * field * np.cos(omega * np.asarray(ts))], [SIGMA_Z], horizon, "Bz"
    )
    x_part = linear_combination(
        [lambda ts: 0.5 * field * np.sin(omega * np.asarray(ts))], [SIGMA_X], horizon, "Bx"
    )
    whole = linear_combination(
        [
            lambda ts: 0.5 * field * np.cos(omega * np.asarray(ts)),
            lambda ts: 0.5 * field * np.sin(omega * np.asarray(ts)),
        ],
        [SIGMA_Z, SIGMA_X],
        horizon,
    )
    return HamiltonianSchedule(2, horizon, whole.evaluate_many, "rotating", parts=(z_part, x_part))


__all__ = [
    "HamiltonianSchedule",
    "SplitSchedule",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "landau_zener",
    "linear_combination",
    "linear_sweep",
    "naive_split",
    "rotating_spin",
    "site_operator",
    "split_by_terms",
    "tfim_chain",
    "tfim_operators",
]
