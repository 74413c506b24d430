"""Pure numpy implementations of the propagation kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Arrays are C-contiguous complex128 stacks of shape (n, d, d).
"""
import numpy as np


def expm_herm_stack(H, dt):
    """exp(-i dt_k H_k) for a stack of Hermitian matrices, spectrally."""
    H = np.ascontiguousarray(H, dtype=np.complex128)
    dt = np.broadcast_to(np.asarray(dt, dtype=np.float64), H.shape[:1])
    w, V = np.linalg.eigh(H)
    phases = np.exp(-1j * dt[:, None] * w)
    return np.matmul(V * phases[:, None, :], np.conj(np.swapaxes(V, -1, -2)))


def group_products(U, group):
    """Ordered products of consecutive groups: out[i] = U[ig+g-1] ... U[ig]."""
    U = np.ascontiguousarray(U, dtype=np.complex128)
    n, d, _ = U.shape
    if group < 1 or n % group:
        raise ValueError(f"stack of {n} matrices cannot be grouped by {group}")
    if group == 1:
        return U.copy()
    blocks = U.reshape(n // group, group, d, d)
    # pairwise tree when possible: log2(group) batched matmuls
    if group & (group - 1) == 0:
        while blocks.shape[1] > 1:
            blocks = np.matmul(blocks[:, 1::2], blocks[:, 0::2])
        return np.ascontiguousarray(blocks[:, 0])
    acc = blocks[:, 0]
    for k in range(1, group):
        acc = np.matmul(blocks[:, k], acc)
    return np.ascontiguousarray(acc)


def propagate(U, X0):
    """Apply U[0], U[1], ... in turn to X0 (shape (d,) or (d, k)); keep every stage."""
    U = np.ascontiguousarray(U, dtype=np.complex128)
    X0 = np.asarray(X0, dtype=np.complex128)
    out = np.empty((U.shape[0] + 1,) + X0.shape, dtype=np.complex128)
    out[0] = X0
    for n in range(U.shape[0]):
        out[n + 1] = U[n] @ out[n]
    return out
