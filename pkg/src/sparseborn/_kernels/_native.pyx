# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled accumulation kernels for the prediction rule.

Both kernels walk the observed feature columns in the given order and the
stored rows of each column in storage order, so the floating-point
summation order is fixed and identical to the pure-Python backend.
"""
from libc.math cimport cos, sin


def accum_real(const long long[::1] col_ptr, const int[::1] rows,
               const double[::1] amp, const long long[::1] qcols,
               const double[::1] qvals, double[::1] acc):
    """acc[i] += sum over observed columns c of amp[i,c] * qvals[c]."""
    cdef Py_ssize_t nq = qcols.shape[0]
    cdef Py_ssize_t q, k
    cdef long long c
    cdef double v
    with nogil:
        for q in range(nq):
            c = qcols[q]
            v = qvals[q]
            for k in range(col_ptr[c], col_ptr[c + 1]):
                acc[rows[k]] += amp[k] * v


def accum_complex(const long long[::1] col_ptr, const int[::1] rows,
                  const double[::1] amp, const double[::1] phi,
                  const long long[::1] qcols, const double[::1] qvals,
                  const double[::1] qtheta,
                  double[::1] acc_re, double[::1] acc_im):
    """Phase-aware accumulation: each addend amp*qval rotated by theta-phi."""
    cdef Py_ssize_t nq = qcols.shape[0]
    cdef Py_ssize_t q, k
    cdef long long c
    cdef double v, th, a, ang
    with nogil:
        for q in range(nq):
            c = qcols[q]
            v = qvals[q]
            th = qtheta[q]
            for k in range(col_ptr[c], col_ptr[c + 1]):
                a = amp[k] * v
                ang = th - phi[k]
                acc_re[rows[k]] += a * cos(ang)
                acc_im[rows[k]] += a * sin(ang)
