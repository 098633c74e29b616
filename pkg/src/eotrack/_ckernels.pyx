# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_kernels_py``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()


cdef int _spd_inverse(double *a, double *out, double *work, Py_ssize_t d) noexcept nogil:
    # Cholesky a = L L^T into work (lower), then out = L^{-T} L^{-1}.
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(d):
        for j in range(i + 1):
            s = a[i * d + j]
            for k in range(j):
                s -= work[i * d + k] * work[j * d + k]
            if i == j:
                if s <= 0.0:
                    return -1
                work[i * d + i] = sqrt(s)
            else:
                work[i * d + j] = s / work[j * d + j]
    # Invert L in place (lower triangular), stored in out temporarily as Linv.
    for i in range(d):
        for j in range(d):
            out[i * d + j] = 0.0
    for i in range(d):
        out[i * d + i] = 1.0 / work[i * d + i]
        for j in range(i):
            s = 0.0
            for k in range(j, i):
                s -= work[i * d + k] * out[k * d + j]
            out[i * d + j] = s / work[i * d + i]
    # work <- Linv^T Linv
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(i if i > j else j, d):
                s += out[k * d + i] * out[k * d + j]
            work[i * d + j] = s
    for i in range(d * d):
        out[i] = work[i]
    return 0


def latent_sums(Y, offsets, A, B, hm, ref, bint no_noise=False):
    cdef double[:, ::1] y = np.ascontiguousarray(Y, dtype=np.float64).reshape(-1, np.shape(hm)[1])
    cdef cnp.int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef double[:, :, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, :, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(hm, dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(ref, dtype=np.float64)
    cdef Py_ssize_t n_nodes = off.shape[0] - 1
    cdef Py_ssize_t d = c.shape[1]

    sum_z_arr = np.zeros((n_nodes, d))
    sum_zz_arr = np.zeros((n_nodes, d, d))
    sum_res_arr = np.zeros((n_nodes, d, d))
    sigma_arr = np.zeros((n_nodes, d, d))
    cdef double[:, ::1] sz = sum_z_arr
    cdef double[:, :, ::1] szz = sum_zz_arr
    cdef double[:, :, ::1] sres = sum_res_arr
    cdef double[:, :, ::1] sig = sigma_arr

    cdef double *prec = <double *> malloc(d * d * sizeof(double))
    cdef double *work = <double *> malloc(d * d * sizeof(double))
    cdef double *bc = <double *> malloc(d * sizeof(double))
    cdef double *rhs = <double *> malloc(d * sizeof(double))
    cdef double *mu = <double *> malloc(d * sizeof(double))
    cdef double *dz = <double *> malloc(d * sizeof(double))
    cdef double *e = <double *> malloc(d * sizeof(double))
    cdef Py_ssize_t k, m, i, j
    cdef double s, cnt
    cdef int status = 0
    try:
        with nogil:
            for k in range(n_nodes):
                cnt = <double> (off[k + 1] - off[k])
                if not no_noise:
                    for i in range(d):
                        for j in range(d):
                            prec[i * d + j] = a[k, i, j] + b[k, i, j]
                    if _spd_inverse(prec, &sig[k, 0, 0], work, d) != 0:
                        status = -1
                        break
                    for i in range(d):
                        s = 0.0
                        for j in range(d):
                            s += b[k, i, j] * c[k, j]
                        bc[i] = s
                for m in range(off[k], off[k + 1]):
                    if no_noise:
                        for i in range(d):
                            mu[i] = y[m, i]
                    else:
                        for i in range(d):
                            s = bc[i]
                            for j in range(d):
                                s += a[k, i, j] * y[m, j]
                            rhs[i] = s
                        for i in range(d):
                            s = 0.0
                            for j in range(d):
                                s += sig[k, i, j] * rhs[j]
                            mu[i] = s
                    for i in range(d):
                        dz[i] = mu[i] - r[k, i]
                        e[i] = y[m, i] - mu[i]
                        sz[k, i] += dz[i]
                    for i in range(d):
                        for j in range(d):
                            szz[k, i, j] += dz[i] * dz[j]
                            sres[k, i, j] += e[i] * e[j]
                for i in range(d):
                    for j in range(d):
                        szz[k, i, j] += cnt * sig[k, i, j]
                        sres[k, i, j] += cnt * sig[k, i, j]
    finally:
        free(prec)
        free(work)
        free(bc)
        free(rhs)
        free(mu)
        free(dz)
        free(e)
    if status != 0:
        # Defer to the numpy path, which applies the jitter policy.
        from ._kernels_py import latent_sums as _py_latent_sums
        return _py_latent_sums(Y, offsets, A, B, hm, ref, no_noise)
    return sum_z_arr, sum_zz_arr, sum_res_arr, sigma_arr


def admm_consensus(omega, indptr, indices, double rho, rounds, phi=None, lam=None):
    cdef double[:, ::1] w = np.ascontiguousarray(omega, dtype=np.float64)
    cdef cnp.int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t p = w.shape[1]
    cdef Py_ssize_t n_rounds = int(rounds)

    phi_arr = np.array(omega if phi is None else phi, dtype=np.float64, order="C", copy=True)
    lam_arr = np.zeros((n, p)) if lam is None else np.array(lam, dtype=np.float64, order="C", copy=True)
    nxt_arr = np.empty((n, p))
    cdef double[:, ::1] cur = phi_arr
    cdef double[:, ::1] nxt = nxt_arr
    cdef double[:, ::1] lm = lam_arr
    cdef double[:, ::1] tmp
    cdef Py_ssize_t l, k, q, jj, j
    cdef double deg, acc
    with nogil:
        for l in range(n_rounds):
            for k in range(n):
                deg = <double> (ptr[k + 1] - ptr[k])
                for q in range(p):
                    acc = deg * cur[k, q]
                    for jj in range(ptr[k], ptr[k + 1]):
                        acc += cur[idx[jj], q]
                    nxt[k, q] = (w[k, q] - 2.0 * lm[k, q] + rho * acc) / (1.0 + 2.0 * rho * deg)
            for k in range(n):
                deg = <double> (ptr[k + 1] - ptr[k])
                for q in range(p):
                    acc = deg * nxt[k, q]
                    for jj in range(ptr[k], ptr[k + 1]):
                        acc -= nxt[idx[jj], q]
                    lm[k, q] += 0.5 * rho * acc
            tmp = cur
            cur = nxt
            nxt = tmp
    return np.asarray(cur).copy(), lam_arr
