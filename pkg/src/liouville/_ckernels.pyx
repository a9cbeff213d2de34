# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled direct-summation kernel for displacement-table convolutions."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def convolve_table(double[:, ::1] table, double[:, ::1] rho):
    """out[i, j] = sum_{k, l} table[i - k + ny - 1, j - l + nx - 1] * rho[k, l]

    ``table`` has shape (2*ny - 1, 2*nx - 1), ``rho`` has shape (ny, nx).
    """
    cdef Py_ssize_t ny = rho.shape[0]
    cdef Py_ssize_t nx = rho.shape[1]
    if table.shape[0] != 2 * ny - 1 or table.shape[1] != 2 * nx - 1:
        raise ValueError("table shape does not match the density grid")
    out_arr = np.zeros((ny, nx))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k, l, oy, ox
    cdef double acc, r
    for k in range(ny):
        oy = ny - 1 - k
        for l in range(nx):
            r = rho[k, l]
            if r == 0.0:
                continue
            ox = nx - 1 - l
            for i in range(ny):
                for j in range(nx):
                    out[i, j] += table[i + oy, j + ox] * r
    return out_arr
