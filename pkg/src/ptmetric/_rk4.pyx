# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 stepping kernel; same contract as ``_rk4_py.rk4_linear``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


cdef inline void _deriv(const cplx[:, :, ::1] L, const cplx[:, :, ::1] R,
                        bint has_l, bint has_r, Py_ssize_t j,
                        const cplx[:, ::1] v, cplx[:, ::1] out,
                        Py_ssize_t d, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, k, p
    cdef cplx acc
    for i in range(d):
        for p in range(m):
            acc = 0
            if has_l:
                for k in range(d):
                    acc = acc + L[j, i, k] * v[k, p]
            if has_r:
                for k in range(d):
                    acc = acc + v[i, k] * R[j, k, p]
            out[i, p] = acc


def rk4_linear(left, right, y0, double h):
    cdef bint has_l = left is not None
    cdef bint has_r = right is not None
    samples = left if has_l else right
    cdef cplx[:, :, ::1] L = np.ascontiguousarray(left if has_l else samples, dtype=complex)
    cdef cplx[:, :, ::1] R = np.ascontiguousarray(right if has_r else samples, dtype=complex)
    y_arr = np.array(y0, dtype=complex, order="C")
    squeeze = y_arr.ndim == 1
    if squeeze:
        y_arr = y_arr[:, None].copy()
    cdef Py_ssize_t d = y_arr.shape[0]
    cdef Py_ssize_t m = y_arr.shape[1]
    cdef Py_ssize_t n = (L.shape[0] - 1) // 2
    if has_r and m != d:
        raise ValueError("right multiplication needs a square state")

    out_arr = np.empty((n + 1, d, m), dtype=complex)
    cdef cplx[:, :, ::1] out = out_arr
    cdef cplx[:, ::1] y = y_arr
    cdef cplx[:, ::1] tmp = np.empty((d, m), dtype=complex)
    cdef cplx[:, ::1] k1 = np.empty((d, m), dtype=complex)
    cdef cplx[:, ::1] k2 = np.empty((d, m), dtype=complex)
    cdef cplx[:, ::1] k3 = np.empty((d, m), dtype=complex)
    cdef cplx[:, ::1] k4 = np.empty((d, m), dtype=complex)
    cdef Py_ssize_t s, a, i, p
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0

    with nogil:
        for i in range(d):
            for p in range(m):
                out[0, i, p] = y[i, p]
        for s in range(n):
            a = 2 * s
            _deriv(L, R, has_l, has_r, a, y, k1, d, m)
            for i in range(d):
                for p in range(m):
                    tmp[i, p] = y[i, p] + half * k1[i, p]
            _deriv(L, R, has_l, has_r, a + 1, tmp, k2, d, m)
            for i in range(d):
                for p in range(m):
                    tmp[i, p] = y[i, p] + half * k2[i, p]
            _deriv(L, R, has_l, has_r, a + 1, tmp, k3, d, m)
            for i in range(d):
                for p in range(m):
                    tmp[i, p] = y[i, p] + h * k3[i, p]
            _deriv(L, R, has_l, has_r, a + 2, tmp, k4, d, m)
            for i in range(d):
                for p in range(m):
                    y[i, p] = y[i, p] + sixth * (k1[i, p] + 2.0 * k2[i, p]
                                                 + 2.0 * k3[i, p] + k4[i, p])
                    out[s + 1, i, p] = y[i, p]
    if squeeze:
        return out_arr[:, :, 0]
    return out_arr
