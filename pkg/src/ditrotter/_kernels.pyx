# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernels (LAPACK zheevd + BLAS zgemm, GIL released).

Row-major (C) arrays are handed to column-major BLAS/LAPACK as their
transposes; see the comments at each call for how that is undone.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport cos, sin, sqrt, fabs
from scipy.linalg.cython_lapack cimport zheevd
from scipy.linalg.cython_blas cimport zgemm, zcopy

cnp.import_array()

ctypedef double complex z


cdef inline void _matmul(z* A, z* B, z* C, int d) noexcept nogil:
    # row-major C = A @ B  <=>  column-major C^T = B^T A^T
    cdef z one = 1.0
    cdef z zero = 0.0
    cdef char tr = b'N'
    zgemm(&tr, &tr, &d, &d, &d, &one, B, &d, A, &d, &zero, C, &d)


cdef inline void _matvec_block(z* A, z* X, z* Y, int d, int k) noexcept nogil:
    # row-major Y (d,k) = A (d,d) @ X (d,k)  <=>  column-major Y^T = X^T A^T
    cdef z one = 1.0
    cdef z zero = 0.0
    cdef char tr = b'N'
    zgemm(&tr, &tr, &k, &d, &d, &one, X, &k, A, &d, &zero, Y, &k)


cdef void _expm_2x2(z* H, double dt, z* U) noexcept nogil:
    # eigenvalues a0 +- r; exp(-i dt H) = e^{-i dt a0} (cos(dt r) I - i sin(dt r)/r (H - a0 I))
    cdef double a0 = 0.5 * (H[0].real + H[3].real)
    cdef double bz = 0.5 * (H[0].real - H[3].real)
    cdef z h01 = 0.5 * (H[1] + H[2].conjugate())
    cdef double r = sqrt(bz * bz + h01.real * h01.real + h01.imag * h01.imag)
    cdef double x = dt * r
    cdef double c = cos(x)
    cdef double s
    if fabs(x) < 1e-6:
        s = dt * (1.0 - x * x / 6.0)
    else:
        s = sin(x) / r
    cdef z g = cos(dt * a0) - 1j * sin(dt * a0)
    U[0] = g * (c - 1j * s * bz)
    U[3] = g * (c + 1j * s * bz)
    U[1] = g * (-1j * s * h01)
    U[2] = g * (-1j * s * h01.conjugate())


def expm_herm_stack(H, dt):
    """exp(-i dt_k H_k) for a stack of Hermitian matrices, spectrally.

    2x2 generators use the closed-form spectral formula; larger ones go
    through zheevd.
    """
    cdef cnp.ndarray[z, ndim=3, mode="c"] Hc = np.ascontiguousarray(H, dtype=np.complex128)
    cdef Py_ssize_t n = Hc.shape[0]
    cdef int d = <int>Hc.shape[1]
    cdef cnp.ndarray[double, ndim=1, mode="c"] dts = np.ascontiguousarray(
        np.broadcast_to(np.asarray(dt, dtype=np.float64), (n,)))
    cdef cnp.ndarray[z, ndim=3, mode="c"] out = np.empty((n, d, d), dtype=np.complex128)
    if n == 0:
        return out
    cdef Py_ssize_t i2
    if d == 2:
        with nogil:
            for i2 in range(n):
                _expm_2x2(&Hc[i2, 0, 0], dts[i2], &out[i2, 0, 0])
        return out

    cdef int lwork = 2 * d + d * d
    cdef int lrwork = 1 + 5 * d + 2 * d * d
    cdef int liwork = 3 + 5 * d
    cdef int info = 0
    cdef int dd = d * d
    cdef int inc = 1
    cdef char jobz = b'V'
    cdef char uplo = b'L'
    cdef char ntr = b'N'
    cdef char ctr = b'C'
    cdef z one = 1.0
    cdef z zero = 0.0
    cdef z* A = <z*>malloc(dd * sizeof(z))
    cdef z* Y = <z*>malloc(dd * sizeof(z))
    cdef z* work = <z*>malloc(lwork * sizeof(z))
    cdef double* w = <double*>malloc(d * sizeof(double))
    cdef double* rwork = <double*>malloc(lrwork * sizeof(double))
    cdef int* iwork = <int*>malloc(liwork * sizeof(int))
    cdef Py_ssize_t m
    cdef int c, b
    cdef double ph
    cdef z e
    cdef int failed = 0
    try:
        with nogil:
            for m in range(n):
                zcopy(&dd, &Hc[m, 0, 0], &inc, A, &inc)
                # column-major view of A is conj(H): same eigenvalues,
                # conjugated eigenvectors, stored as rows Q[c, :] afterwards
                zheevd(&jobz, &uplo, &d, A, &d, w, work, &lwork,
                       rwork, &lrwork, iwork, &liwork, &info)
                if info != 0:
                    failed = info
                    break
                for c in range(d):
                    ph = -dts[m] * w[c]
                    e = cos(ph) + 1j * sin(ph)
                    for b in range(d):
                        Y[c * d + b] = e * A[c * d + b]
                # U[a, b] = sum_c conj(Q[c, a]) Y[c, b]; column-major: U^T = Y^T Q^T^H
                zgemm(&ntr, &ctr, &d, &d, &d, &one, Y, &d, A, &d, &zero,
                      &out[m, 0, 0], &d)
    finally:
        free(A)
        free(Y)
        free(work)
        free(w)
        free(rwork)
        free(iwork)
    if failed:
        raise np.linalg.LinAlgError(f"zheevd failed with info={failed}")
    return out


def group_products(U, group):
    """Ordered products of consecutive groups: out[i] = U[ig+g-1] ... U[ig]."""
    cdef cnp.ndarray[z, ndim=3, mode="c"] Uc = np.ascontiguousarray(U, dtype=np.complex128)
    cdef Py_ssize_t n = Uc.shape[0]
    cdef int d = <int>Uc.shape[1]
    cdef Py_ssize_t g = group
    if g < 1 or n % g:
        raise ValueError(f"stack of {n} matrices cannot be grouped by {g}")
    cdef Py_ssize_t ng = n // g
    cdef cnp.ndarray[z, ndim=3, mode="c"] out = np.empty((ng, d, d), dtype=np.complex128)
    if ng == 0:
        return out
    cdef int dd = d * d
    cdef int inc = 1
    cdef z* tmp = <z*>malloc(dd * sizeof(z))
    cdef Py_ssize_t i, k
    try:
        with nogil:
            for i in range(ng):
                zcopy(&dd, &Uc[i * g, 0, 0], &inc, &out[i, 0, 0], &inc)
                for k in range(1, g):
                    _matmul(&Uc[i * g + k, 0, 0], &out[i, 0, 0], tmp, d)
                    zcopy(&dd, tmp, &inc, &out[i, 0, 0], &inc)
    finally:
        free(tmp)
    return out


def propagate(U, X0):
    """Apply U[0], U[1], ... in turn to X0 (shape (d,) or (d, k)); keep every stage."""
    cdef cnp.ndarray[z, ndim=3, mode="c"] Uc = np.ascontiguousarray(U, dtype=np.complex128)
    X0 = np.asarray(X0, dtype=np.complex128)
    vector = X0.ndim == 1
    cdef cnp.ndarray[z, ndim=2, mode="c"] X = np.ascontiguousarray(
        X0.reshape(X0.shape[0], -1))
    cdef Py_ssize_t n = Uc.shape[0]
    cdef int d = <int>Uc.shape[1]
    cdef int k = <int>X.shape[1]
    cdef cnp.ndarray[z, ndim=3, mode="c"] out = np.empty((n + 1, d, k), dtype=np.complex128)
    out[0] = X
    cdef Py_ssize_t m
    with nogil:
        for m in range(n):
            _matvec_block(&Uc[m, 0, 0], &out[m, 0, 0], &out[m + 1, 0, 0], d, k)
    if vector:
        return out[:, :, 0].copy()
    return out
