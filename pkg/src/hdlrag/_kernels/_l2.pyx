# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled squared-L2 scan: double-precision distances of one query
against every stored float32 row."""


def l2sq_scan(const float[:, ::1] matrix, const double[::1] query, double[::1] out):
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t d = matrix.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, diff
    if query.shape[0] != d or out.shape[0] != n:
        raise ValueError("shape mismatch")
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = <double> matrix[i, j] - query[j]
                acc += diff * diff
            out[i] = acc
