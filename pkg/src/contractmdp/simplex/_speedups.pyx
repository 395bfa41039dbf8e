# cython: language_level=3
"""Compiled simplex pivot kernels; semantics mirror ``_pure``.

A is expected Fortran-contiguous so column walks are sequential.  The Bland
entering scan prices columns lazily and exits at the first improving one,
which is where most of the speedup over the numpy fallback comes from.
"""

import numpy as np

cimport cython
from libc.math cimport fabs, INFINITY

OPTIMAL = 0
NO_DIRECTION = 1
ITER_LIMIT = 2
NUMERIC = 3

cdef int C_OPTIMAL = 0
cdef int C_NO_DIRECTION = 1
cdef int C_ITER_LIMIT = 2
cdef int C_NUMERIC = 3

DEF DRIFT_TOL = 1e-7


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _pivot(double[:, ::1] binv, double[::1] d, Py_ssize_t rr) noexcept nogil:
    cdef Py_ssize_t m = binv.shape[0]
    cdef Py_ssize_t i, k
    cdef double piv = d[rr]
    cdef double f
    for k in range(m):
        binv[rr, k] /= piv
    for i in range(m):
        if i == rr:
            continue
        f = d[i]
        if f == 0.0:
            continue
        for k in range(m):
            binv[i, k] -= f * binv[rr, k]


@cython.boundscheck(False)
@cython.wraparound(False)
cdef int _primal(double[::1, :] A, double[::1] b, double[::1] c,
                 long long[::1] basis, double[:, ::1] binv,
                 unsigned char[::1] enter_ok,
                 double feas_tol, double opt_tol, double piv_tol,
                 long long max_iter,
                 double[::1] xb, double[::1] y, double[::1] d,
                 unsigned char[::1] is_basic, long long* iters) noexcept nogil:
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef Py_ssize_t it = 0, i, k, j, jj, rr
    cdef double acc, red, theta, ratio, tol_theta, xbi
    cdef long long best_label

    while it < max_iter:
        iters[0] = it
        for i in range(m):
            acc = 0.0
            for k in range(m):
                acc += binv[i, k] * b[k]
            xb[i] = acc
        for i in range(m):
            if xb[i] < -DRIFT_TOL:
                return C_NUMERIC
        for i in range(m):
            acc = 0.0
            for k in range(m):
                acc += c[basis[k]] * binv[k, i]
            y[i] = acc
        for i in range(n):
            is_basic[i] = 0
        for i in range(m):
            is_basic[basis[i]] = 1
        j = -1
        for jj in range(n):
            if not enter_ok[jj] or is_basic[jj]:
                continue
            acc = 0.0
            for k in range(m):
                acc += y[k] * A[k, jj]
            red = c[jj] - acc
            if red > opt_tol:
                j = jj
                break
        if j < 0:
            return C_OPTIMAL
        for i in range(m):
            acc = 0.0
            for k in range(m):
                acc += binv[i, k] * A[k, j]
            d[i] = acc
        theta = INFINITY
        for i in range(m):
            if d[i] > piv_tol:
                xbi = xb[i]
                if xbi < 0.0:
                    xbi = 0.0
                ratio = xbi / d[i]
                if ratio < theta:
                    theta = ratio
        if theta == INFINITY:
            return C_NO_DIRECTION
        tol_theta = theta + 1e-12 + 1e-9 * theta
        rr = -1
        best_label = 0
        for i in range(m):
            if d[i] > piv_tol:
                xbi = xb[i]
                if xbi < 0.0:
                    xbi = 0.0
                if xbi / d[i] <= tol_theta:
                    if rr < 0 or basis[i] < best_label:
                        rr = i
                        best_label = basis[i]
        _pivot(binv, d, rr)
        basis[rr] = j
        it += 1
        iters[0] = it
    return C_ITER_LIMIT


@cython.boundscheck(False)
@cython.wraparound(False)
cdef int _dual(double[::1, :] A, double[::1] b, double[::1] c,
               long long[::1] basis, double[:, ::1] binv,
               unsigned char[::1] enter_ok,
               double feas_tol, double opt_tol, double piv_tol,
               long long max_iter,
               double[::1] xb, double[::1] y, double[::1] d,
               unsigned char[::1] is_basic, long long* iters) noexcept nogil:
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef Py_ssize_t it = 0, i, k, j, jj, rr
    cdef double acc, wj, red, theta, ratio, tol_theta
    cdef long long best_label

    while it < max_iter:
        iters[0] = it
        for i in range(m):
            acc = 0.0
            for k in range(m):
                acc += binv[i, k] * b[k]
            xb[i] = acc
        rr = -1
        best_label = 0
        for i in range(m):
            if xb[i] < -feas_tol:
                if rr < 0 or basis[i] < best_label:
                    rr = i
                    best_label = basis[i]
        if rr < 0:
            return C_OPTIMAL
        for i in range(m):
            acc = 0.0
            for k in range(m):
                acc += c[basis[k]] * binv[k, i]
            y[i] = acc
        for i in range(n):
            is_basic[i] = 0
        for i in range(m):
            is_basic[basis[i]] = 1
        theta = INFINITY
        for jj in range(n):
            if not enter_ok[jj] or is_basic[jj]:
                continue
            acc = 0.0
            for k in range(m):
                acc += binv[rr, k] * A[k, jj]
            wj = acc
            if wj < -piv_tol:
                acc = 0.0
                for k in range(m):
                    acc += y[k] * A[k, jj]
                red = c[jj] - acc
                ratio = red / wj
                if ratio < theta:
                    theta = ratio
        if theta == INFINITY:
            return C_NO_DIRECTION
        tol_theta = theta + 1e-12 + 1e-9 * fabs(theta)
        j = -1
        for jj in range(n):
            if not enter_ok[jj] or is_basic[jj]:
                continue
            acc = 0.0
            for k in range(m):
                acc += binv[rr, k] * A[k, jj]
            wj = acc
            if wj < -piv_tol:
                acc = 0.0
                for k in range(m):
                    acc += y[k] * A[k, jj]
                red = c[jj] - acc
                if red / wj <= tol_theta:
                    j = jj
                    break
        if j < 0:
            return C_NO_DIRECTION
        for i in range(m):
            acc = 0.0
            for k in range(m):
                acc += binv[i, k] * A[k, j]
            d[i] = acc
        if fabs(d[rr]) < 1e-12:
            return C_NUMERIC
        _pivot(binv, d, rr)
        basis[rr] = j
        it += 1
        iters[0] = it
    return C_ITER_LIMIT


def primal_loop(A, b, c, basis, binv, enter_ok,
                double feas_tol, double opt_tol, double piv_tol, max_iter):
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    xb = np.empty(m)
    y = np.empty(m)
    d = np.empty(m)
    is_basic = np.zeros(n, dtype=np.uint8)
    cdef long long iters = 0
    cdef double[::1] xb_v = xb, y_v = y, d_v = d
    cdef unsigned char[::1] ib_v = is_basic
    cdef double[::1, :] A_v = A
    cdef double[::1] b_v = b
    cdef double[::1] c_v = c
    cdef long long[::1] basis_v = basis
    cdef double[:, ::1] binv_v = binv
    cdef unsigned char[::1] ok_v = enter_ok
    cdef long long cap = max_iter
    status = _primal(A_v, b_v, c_v, basis_v, binv_v, ok_v,
                     feas_tol, opt_tol, piv_tol, cap,
                     xb_v, y_v, d_v, ib_v, &iters)
    return status, int(iters)


def dual_loop(A, b, c, basis, binv, enter_ok,
              double feas_tol, double opt_tol, double piv_tol, max_iter):
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    xb = np.empty(m)
    y = np.empty(m)
    d = np.empty(m)
    is_basic = np.zeros(n, dtype=np.uint8)
    cdef long long iters = 0
    cdef double[::1] xb_v = xb, y_v = y, d_v = d
    cdef unsigned char[::1] ib_v = is_basic
    cdef double[::1, :] A_v = A
    cdef double[::1] b_v = b
    cdef double[::1] c_v = c
    cdef long long[::1] basis_v = basis
    cdef double[:, ::1] binv_v = binv
    cdef unsigned char[::1] ok_v = enter_ok
    cdef long long cap = max_iter
    status = _dual(A_v, b_v, c_v, basis_v, binv_v, ok_v,
                   feas_tol, opt_tol, piv_tol, cap,
                   xb_v, y_v, d_v, ib_v, &iters)
    return status, int(iters)
