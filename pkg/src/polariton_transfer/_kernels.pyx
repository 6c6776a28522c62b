# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the eigenbasis measurement loops.

Same contracts as ``_kernels_py``; see that module for the maths.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def measure_rounds(const double[:, ::1] V, const double[::1] w, c_in, Py_ssize_t r,
                   const double[::1] dts, double target, double cumulative0):
    cdef Py_ssize_t n = V.shape[0]
    cdef Py_ssize_t nr = dts.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] c_arr = np.array(c_in, dtype=np.complex128)
    cdef double complex[::1] c = c_arr
    cdef const double[::1] vr = np.ascontiguousarray(V[r, :])
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] f_r = np.zeros(nr, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p_cond = np.zeros(nr)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cum = np.zeros(nr)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] left = np.zeros(nr)
    cdef double total = cumulative0
    cdef double rem = 0.0
    cdef double pa, ph, re, im
    cdef double complex f, z
    cdef Py_ssize_t k, j, done = 0

    for j in range(n):
        rem += c[j].real * c[j].real + c[j].imag * c[j].imag

    for k in range(nr):
        if rem <= 1e-24:
            break
        f = 0.0
        for j in range(n):
            ph = w[j] * dts[k]
            z = cos(ph) - 1j * sin(ph)
            c[j] = c[j] * z
            f = f + vr[j] * c[j]
        pa = f.real * f.real + f.imag * f.imag
        f_r[k] = f
        p_cond[k] = pa / rem if pa < rem else 1.0
        total += pa
        cum[k] = total
        rem = 0.0
        for j in range(n):
            c[j] = c[j] - f * vr[j]
            re = c[j].real
            im = c[j].imag
            rem += re * re + im * im
        left[k] = rem
        done = k + 1
        if total >= target:
            break
    return f_r[:done], p_cond[:done], cum[:done], left[:done], c_arr, done


def receiver_profile(const double[::1] vr, c_in, const double[::1] w, double step, Py_ssize_t m):
    cdef Py_ssize_t n = vr.shape[0]
    cdef double complex[::1] c = np.ascontiguousarray(c_in, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(m)
    cdef double[::1] o = out
    cdef double complex[::1] z = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] u = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] u0 = np.empty(n, dtype=np.complex128)
    cdef double complex amp
    cdef double ph, t
    cdef Py_ssize_t j, i
    # phase recurrence, re-seeded from exact phases every 256 steps
    for j in range(n):
        ph = w[j] * step
        z[j] = cos(ph) - 1j * sin(ph)
        u0[j] = vr[j] * c[j]
    for i in range(m):
        if i % 256 == 0:
            t = step * (i + 1)
            for j in range(n):
                ph = w[j] * t
                u[j] = u0[j] * (cos(ph) - 1j * sin(ph))
        else:
            for j in range(n):
                u[j] = u[j] * z[j]
        amp = 0.0
        for j in range(n):
            amp = amp + u[j]
        o[i] = amp.real * amp.real + amp.imag * amp.imag
    return out
