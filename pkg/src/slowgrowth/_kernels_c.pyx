# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for the Q1 finite-element assembly and grid convolution.

Every function mirrors a function of the same name in ``_kernels_py`` and is
expected to agree with it to rounding.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double G0 = 0.21132486540518713  # (1 - 1/sqrt(3)) / 2
cdef double G1 = 0.78867513459481287  # (1 + 1/sqrt(3)) / 2


cdef inline void _bmat(double s, double t, double h, double[:, ::1] b) noexcept nogil:
    # rows: d/dx, d/dy; columns: nodes (i,j), (i+1,j), (i,j+1), (i+1,j+1)
    b[0, 0] = -(1.0 - t) / h
    b[0, 1] = (1.0 - t) / h
    b[0, 2] = -t / h
    b[0, 3] = t / h
    b[1, 0] = -(1.0 - s) / h
    b[1, 1] = -s / h
    b[1, 2] = (1.0 - s) / h
    b[1, 3] = s / h


def _all_bmats(double h):
    cdef double[:, :, ::1] out = np.empty((4, 2, 4))
    cdef double[4] ss = [G0, G1, G0, G1]
    cdef double[4] ts = [G0, G0, G1, G1]
    cdef int q
    for q in range(4):
        _bmat(ss[q], ts[q], h, out[q])
    return np.asarray(out)


def cell_gradients(const double[:, ::1] u, double h):
    cdef Py_ssize_t n = u.shape[0] - 1
    cdef double[:, :, ::1] b = _all_bmats(h)
    out_arr = np.empty((n, n, 4, 2))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef int q, d
    cdef double u00, u10, u01, u11
    with nogil:
        for i in range(n):
            for j in range(n):
                u00 = u[i, j]
                u10 = u[i + 1, j]
                u01 = u[i, j + 1]
                u11 = u[i + 1, j + 1]
                for q in range(4):
                    for d in range(2):
                        out[i, j, q, d] = (b[q, d, 0] * u00 + b[q, d, 1] * u10
                                           + b[q, d, 2] * u01 + b[q, d, 3] * u11)
    return out_arr


def scatter_flux(const double[:, :, :, ::1] flux, double h):
    cdef Py_ssize_t n = flux.shape[0]
    cdef double[:, :, ::1] b = _all_bmats(h)
    cdef double w = h * h / 4.0
    out_arr = np.zeros((n + 1, n + 1))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef int q, k
    cdef double acc[4]
    with nogil:
        for i in range(n):
            for j in range(n):
                for k in range(4):
                    acc[k] = 0.0
                for q in range(4):
                    for k in range(4):
                        acc[k] += b[q, 0, k] * flux[i, j, q, 0] + b[q, 1, k] * flux[i, j, q, 1]
                out[i, j] += w * acc[0]
                out[i + 1, j] += w * acc[1]
                out[i, j + 1] += w * acc[2]
                out[i + 1, j + 1] += w * acc[3]
    return out_arr


def cell_stiffness(const double[:, :, :, :, ::1] hq, double h):
    cdef Py_ssize_t n = hq.shape[0]
    cdef double[:, :, ::1] b = _all_bmats(h)
    cdef double w = h * h / 4.0
    out_arr = np.zeros((n, n, 4, 4))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef int q, k, l
    cdef double hb0, hb1
    with nogil:
        for i in range(n):
            for j in range(n):
                for q in range(4):
                    for l in range(4):
                        hb0 = hq[i, j, q, 0, 0] * b[q, 0, l] + hq[i, j, q, 0, 1] * b[q, 1, l]
                        hb1 = hq[i, j, q, 1, 0] * b[q, 0, l] + hq[i, j, q, 1, 1] * b[q, 1, l]
                        for k in range(4):
                            out[i, j, k, l] += w * (b[q, 0, k] * hb0 + b[q, 1, k] * hb1)
    return out_arr


def correlate_valid(const double[:, ::1] a, const double[:, ::1] k):
    cdef Py_ssize_t m1 = a.shape[0], m2 = a.shape[1]
    cdef Py_ssize_t k1 = k.shape[0], k2 = k.shape[1]
    if k1 > m1 or k2 > m2:
        raise ValueError("kernel larger than array")
    cdef Py_ssize_t o1 = m1 - k1 + 1, o2 = m2 - k2 + 1
    out_arr = np.zeros((o1, o2))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, p, q
    cdef double kv
    with nogil:
        # same accumulation order as the numpy fallback: one kernel tap at a time
        for p in range(k1):
            for q in range(k2):
                kv = k[p, q]
                if kv == 0.0:
                    continue
                for i in range(o1):
                    for j in range(o2):
                        out[i, j] += kv * a[i + p, j + q]
    return out_arr
