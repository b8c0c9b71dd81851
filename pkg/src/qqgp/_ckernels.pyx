# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: correlation assembly and nugget-grid likelihood.

Mirrors ``_pykernels`` function for function. LAPACK and BLAS come from
scipy's Cython bindings so no extra link step is needed.
"""

import numpy as np

from libc.math cimport exp, log, INFINITY
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport ddot, dtrsv
from scipy.linalg.cython_lapack cimport dormtr, dpotrf, dstebz, dsyevr, dsytrd

NAME = "compiled"

ctypedef long long i64


cdef inline double _pair(const double[:, ::1] U1, const i64[:, ::1] V1, Py_ssize_t i,
                         const double[:, ::1] U2, const i64[:, ::1] V2, Py_ssize_t k,
                         const double[::1] phi, const double[:, :, ::1] tables,
                         bint additive, const double[::1] w) noexcept nogil:
    cdef Py_ssize_t d, j
    cdef Py_ssize_t nq = U1.shape[1]
    cdef Py_ssize_t J = tables.shape[0]
    cdef double s = 0.0, t, q
    for d in range(nq):
        t = U1[i, d] - U2[k, d]
        s += t * t * phi[d]
    if J == 0:
        q = 1.0
    elif additive:
        q = 0.0
        for j in range(J):
            q += w[j] * tables[j, V1[i, j], V2[k, j]]
    else:
        q = 1.0
        for j in range(J):
            q *= tables[j, V1[i, j], V2[k, j]]
    return exp(-s) * q


def corr_cross(const double[:, ::1] U1, const i64[:, ::1] V1,
               const double[:, ::1] U2, const i64[:, ::1] V2,
               const double[::1] phi, const double[:, :, ::1] tables,
               bint additive, const double[::1] w):
    """Correlation matrix between two point sets (levels 0-based)."""
    cdef Py_ssize_t n1 = U1.shape[0], n2 = U2.shape[0], i, k
    out = np.empty((n1, n2))
    cdef double[:, ::1] R = out
    with nogil:
        for i in range(n1):
            for k in range(n2):
                R[i, k] = _pair(U1, V1, i, U2, V2, k, phi, tables, additive, w)
    return out


def corr_train(const double[:, ::1] U, const i64[:, ::1] V,
               const double[::1] phi, const double[:, :, ::1] tables,
               bint additive, const double[::1] w):
    """Symmetric training correlation matrix with unit diagonal."""
    cdef Py_ssize_t n = U.shape[0], i, k
    cdef double val
    out = np.empty((n, n))
    cdef double[:, ::1] R = out
    with nogil:
        for i in range(n):
            R[i, i] = 1.0
            for k in range(i + 1, n):
                val = _pair(U, V, i, U, V, k, phi, tables, additive, w)
                R[i, k] = val
                R[k, i] = val
    return out


def min_eigenvalue(const double[:, ::1] R):
    """Smallest eigenvalue of a symmetric matrix (LAPACK dsyevr)."""
    cdef int n = <int>R.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    A = np.array(R, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] a = A
    cdef double vl = 0.0, vu = 0.0, abstol = 0.0, wq
    cdef int il = 1, iu = 1, m = 0, ldz = 1, info = 0, lwork = -1, liwork = -1, iwq
    cdef double[::1] wv = np.empty(n)
    cdef double[::1] z = np.empty(1)
    cdef int[::1] isuppz = np.empty(2 * n, dtype=np.intc)
    cdef char jobz = b'N', rng = b'I', uplo = b'L'
    dsyevr(&jobz, &rng, &uplo, &n, &a[0, 0], &n, &vl, &vu, &il, &iu, &abstol,
           &m, &wv[0], &z[0], &ldz, &isuppz[0], &wq, &lwork, &iwq, &liwork, &info)
    lwork = <int>wq
    liwork = iwq
    cdef double[::1] work = np.empty(max(lwork, 1))
    cdef int[::1] iwork = np.empty(max(liwork, 1), dtype=np.intc)
    dsyevr(&jobz, &rng, &uplo, &n, &a[0, 0], &n, &vl, &vu, &il, &iu, &abstol,
           &m, &wv[0], &z[0], &ldz, &isuppz[0], &work[0], &lwork, &iwork[0], &liwork, &info)
    if info != 0 or m < 1:
        raise np.linalg.LinAlgError(f"dsyevr failed with info={info}")
    return wv[0]


def grid_profile_nll(const double[:, ::1] R, const double[::1] y, double lam_min,
                     const double[::1] grid):
    """Profile negative log-likelihood for each nugget level in ``grid``.

    Same contract as the pure-Python version: ``inf`` marks a failed
    factorisation or a non-positive variance estimate.
    """
    cdef int n = <int>R.shape[0], info = 0, inc = 1
    cdef Py_ssize_t G = grid.shape[0], g, h, k
    out = np.empty(G)
    cdef double[::1] res = out
    cdef double[::1] deltas = np.empty(G)
    cdef double[:, ::1] work = np.empty((n, n))
    cdef double[::1] s1 = np.empty(n)
    cdef double[::1] sy = np.empty(n)
    cdef double delta, val, logdet, a11, a1y, ayy, sig2
    cdef char uplo = b'L', trans = b'N', diag = b'N'
    cdef bint found
    with nogil:
        for g in range(G):
            delta = grid[g] - lam_min
            if delta < 0.0:
                delta = 0.0
            deltas[g] = delta
            found = False
            for h in range(g):
                if deltas[h] == delta:
                    res[g] = res[h]
                    found = True
                    break
            if found:
                continue
            memcpy(&work[0, 0], &R[0, 0], n * n * sizeof(double))
            for k in range(n):
                work[k, k] += delta
            dpotrf(&uplo, &n, &work[0, 0], &n, &info)
            val = INFINITY
            if info == 0:
                logdet = 0.0
                for k in range(n):
                    logdet += log(work[k, k])
                    s1[k] = 1.0
                    sy[k] = y[k]
                logdet *= 2.0
                dtrsv(&uplo, &trans, &diag, &n, &work[0, 0], &n, &s1[0], &inc)
                dtrsv(&uplo, &trans, &diag, &n, &work[0, 0], &n, &sy[0], &inc)
                a11 = ddot(&n, &s1[0], &inc, &s1[0], &inc)
                a1y = ddot(&n, &s1[0], &inc, &sy[0], &inc)
                ayy = ddot(&n, &sy[0], &inc, &sy[0], &inc)
                sig2 = (ayy - a1y * a1y / a11) / n
                if sig2 > 0.0 and sig2 < INFINITY:
                    val = 0.5 * (n * log(sig2) + logdet)
            res[g] = val
    return out


def nugget_scan(const double[:, ::1] R, const double[::1] y, const double[::1] grid):
    """Smallest eigenvalue of ``R`` and the profile NLL for every nugget level.

    ``R`` is reduced once to tridiagonal form ``T = Q' R Q``; each nugget level
    then costs O(n): an LDL' factorisation of ``T + delta I`` gives the
    log-determinant, and forward substitution on ``Q' 1`` and ``Q' y`` gives
    the quadratic forms. Returns ``(lam_min, nll)``, with ``inf`` where the
    factorisation has a non-positive pivot or the variance estimate is not
    positive.
    """
    cdef int n = <int>R.shape[0], info = 0, lwork = -1, two = 2, one = 1
    cdef Py_ssize_t G = grid.shape[0], g, h, k
    if n == 0:
        raise ValueError("empty matrix")
    A = np.array(R, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] a = A
    cdef double[::1] d = np.empty(n)
    cdef double[::1] e = np.empty(max(n - 1, 1))
    cdef double[::1] tau = np.empty(max(n - 1, 1))
    cdef char uplo = b'L', side = b'L', trans = b'T'
    cdef double wq
    dsytrd(&uplo, &n, &a[0, 0], &n, &d[0], &e[0], &tau[0], &wq, &lwork, &info)
    lwork = max(<int>wq, 2 * 64)
    cdef double[::1] work = np.empty(lwork)
    dsytrd(&uplo, &n, &a[0, 0], &n, &d[0], &e[0], &tau[0], &work[0], &lwork, &info)
    if info != 0:
        raise np.linalg.LinAlgError(f"dsytrd failed with info={info}")
    # columns of C (Fortran order): ones and y, rotated into the tridiagonal basis
    C = np.empty((2, n))
    cdef double[:, ::1] c = C
    for k in range(n):
        c[0, k] = 1.0
        c[1, k] = y[k]
    cdef int lw2 = -1
    dormtr(&side, &uplo, &trans, &n, &two, &a[0, 0], &n, &tau[0], &c[0, 0], &n, &wq, &lw2, &info)
    lw2 = max(<int>wq, 1)
    if lw2 > lwork:
        work = np.empty(lw2)
    dormtr(&side, &uplo, &trans, &n, &two, &a[0, 0], &n, &tau[0], &c[0, 0], &n, &work[0], &lw2, &info)
    if info != 0:
        raise np.linalg.LinAlgError(f"dormtr failed with info={info}")
    # smallest eigenvalue of T by bisection
    cdef char rng = b'I', order = b'E'
    cdef double vl = 0.0, vu = 0.0, abstol = 0.0
    cdef int il = 1, iu = 1, m = 0, nsplit = 0
    cdef double[::1] w = np.empty(n)
    cdef int[::1] iblock = np.empty(n, dtype=np.intc)
    cdef int[::1] isplit = np.empty(n, dtype=np.intc)
    cdef double[::1] swork = np.empty(4 * n)
    cdef int[::1] siwork = np.empty(3 * n, dtype=np.intc)
    dstebz(&rng, &order, &n, &vl, &vu, &il, &iu, &abstol, &d[0], &e[0], &m, &nsplit,
           &w[0], &iblock[0], &isplit[0], &swork[0], &siwork[0], &info)
    if info != 0 or m < 1:
        raise np.linalg.LinAlgError(f"dstebz failed with info={info}")
    cdef double lam = w[0]
    out = np.empty(G)
    cdef double[::1] res = out
    cdef double[::1] deltas = np.empty(G)
    cdef double delta, piv, l1, w1, wy, a11, a1y, ayy, logdet, sig2, val
    cdef bint found, bad
    with nogil:
        for g in range(G):
            delta = grid[g] - lam
            if delta < 0.0:
                delta = 0.0
            deltas[g] = delta
            found = False
            for h in range(g):
                if deltas[h] == delta:
                    res[g] = res[h]
                    found = True
                    break
            if found:
                continue
            bad = False
            piv = d[0] + delta
            w1 = c[0, 0]
            wy = c[1, 0]
            logdet = 0.0
            a11 = 0.0
            a1y = 0.0
            ayy = 0.0
            for k in range(n):
                if k > 0:
                    l1 = e[k - 1] / piv
                    piv = d[k] + delta - l1 * e[k - 1]
                    w1 = c[0, k] - l1 * w1
                    wy = c[1, k] - l1 * wy
                if not piv > 0.0:
                    bad = True
                    break
                logdet += log(piv)
                a11 += w1 * w1 / piv
                a1y += w1 * wy / piv
                ayy += wy * wy / piv
            val = INFINITY
            if not bad:
                sig2 = (ayy - a1y * a1y / a11) / n
                if sig2 > 0.0 and sig2 < INFINITY:
                    val = 0.5 * (n * log(sig2) + logdet)
            res[g] = val
    return lam, out
