"""Dense complex linear algebra for small Hermitian generators.

Units are hbar = 1 throughout: ``unitary_exp(H, dt)`` is exp(-i dt H).
"""
import numpy as np
from scipy.stats import unitary_group

from . import kernels
from .errors import DimensionMismatch, NotHermitian, NotNormalized

HERMITIAN_RTOL = 1e-10
NORM_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
IDENTITY_2 = np.eye(2, dtype=np.complex128)


def dagger(A):
    return np.conj(np.swapaxes(A, -1, -2))


def commutator(A, B):
    return A @ B - B @ A


def hermiticity_defect(H):
    return float(np.max(np.abs(H - dagger(H)), initial=0.0))


def check_hermitian(H, hermitian_tol=None):
    """Raise :class:`NotHermitian` unless max|H - H^dag| <= tol.

    The default tolerance is ``1e-10 * max|H|`` (per matrix for stacks).
    """
    H = np.asarray(H)
    defect = hermiticity_defect(H)
    if hermitian_tol is None:
        hermitian_tol = HERMITIAN_RTOL * float(np.max(np.abs(H), initial=0.0))
    if defect > hermitian_tol:
        raise NotHermitian(defect, hermitian_tol)


def herm_eig(H, hermitian_tol=None):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, V)`` with eigenvalues ascending and the
    eigenvectors as orthonormal columns of ``V``.  Column phases are
    whatever LAPACK returns; gauge fixing happens in :mod:`.invariant`.
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {H.shape}")
    check_hermitian(H, hermitian_tol)
    return np.linalg.eigh(H)


def unitary_exp(H, dt, hermitian_tol=None):
    """exp(-i dt H) via the spectral decomposition.

    ``H`` may be a single (d, d) matrix or a stack (n, d, d); ``dt`` a
    scalar or one duration per matrix.  Zero and negative durations are
    fine.
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.shape[-1] != H.shape[-2]:
        raise DimensionMismatch(f"expected square matrices, got shape {H.shape}")
    check_hermitian(H, hermitian_tol)
    if H.ndim == 2:
        return kernels.expm_herm_stack(H[None], dt)[0]
    return kernels.expm_herm_stack(H, dt)


def normalize(psi):
    psi = np.asarray(psi, dtype=np.complex128)
    return psi / np.linalg.norm(psi)


def check_normalized(psi, tol=NORM_TOL):
    err = abs(np.linalg.norm(psi) - 1.0)
    if err > tol:
        raise NotNormalized(f"state norm deviates from 1 by {err:.3e}")


def fubini_study_angle(psi, phi, norm_tol=NORM_TOL):
    """Fubini-Study angle arccos|<psi|phi>| in [0, pi/2].

    Evaluated as atan2(|perpendicular part|, |overlap|), which equals the
    arccos form for normalized states but keeps full relative precision
    for angles below ~1e-8 where arccos(1 - eps) saturates.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    if psi.shape != phi.shape or psi.ndim != 1:
        raise DimensionMismatch(f"state shapes differ: {psi.shape} vs {phi.shape}")
    check_normalized(psi, norm_tol)
    check_normalized(phi, norm_tol)
    return float(fs_angles(psi[None], phi[None])[0])


def fs_angles(psis, phis):
    """Row-wise Fubini-Study angles for stacks of normalized states (no checks)."""
    ov = np.einsum("ni,ni->n", np.conj(psis), phis)
    perp_a = np.linalg.norm(phis - ov[:, None] * psis, axis=1)
    perp_b = np.linalg.norm(psis - np.conj(ov)[:, None] * phis, axis=1)
    # averaging both projections makes the result exactly symmetric
    return np.arctan2(0.5 * (perp_a + perp_b), np.abs(ov))


def random_state(d, rng):
    z = rng.normal(size=d) + 1j * rng.normal(size=d)
    return z / np.linalg.norm(z)


def random_hermitian(d, rng, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + dagger(a))


def random_unitary(d, rng):
    return unitary_group.rvs(d, random_state=rng)
