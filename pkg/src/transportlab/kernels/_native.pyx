# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integrator kernels for the catalog models.

Mirrors kernels._python.integrate loop for loop: classical fixed-step
4th-order integration of (x, tau) with optional coupled transport
matrix, using closed-form connection actions per catalog kind.  The
arithmetic is arranged to track the numpy twin to rounding noise.
"""

import numpy as np

from libc.math cimport M_PI, cos, isfinite, sin, tan

DEF NMAX = 8

cdef inline bint _inside(int kind, double* x) nogil:
    if kind == 1:
        return x[0] > 0.0
    elif kind == 2:
        return 0.0 < x[0] < M_PI
    elif kind == 3:
        return x[1] > 0.0
    return True


cdef inline void _action(int kind, double* x, double* tau, int n, double* A) nogil:
    # A[m*n + l] = Gamma^m_{s l} tau^s
    cdef int i
    cdef double inv, st, ct, cot
    for i in range(n * n):
        A[i] = 0.0
    if kind == 1:  # polar chart of the flat plane, coords (r, phi)
        inv = 1.0 / x[0]
        A[1] = (-x[0]) * tau[1]
        A[2] = inv * tau[1]
        A[3] = inv * tau[0]
    elif kind == 2:  # round sphere, coords (theta, phi)
        st = sin(x[0])
        ct = cos(x[0])
        cot = 1.0 / tan(x[0])
        A[1] = (-st * ct) * tau[1]
        A[2] = cot * tau[1]
        A[3] = cot * tau[0]
    elif kind == 3:  # hyperbolic half-plane, coords (x, y)
        inv = -1.0 / x[1]
        A[0] = inv * tau[1]
        A[1] = inv * tau[0]
        A[2] = (1.0 / x[1]) * tau[0]
        A[3] = inv * tau[1]


cdef inline void _rhs(int kind, double* base, double* disp, double* tau,
                      double* M, int n, bint with_m,
                      double* outx, double* outt, double* outm) nogil:
    cdef double A[NMAX * NMAX]
    cdef double x[NMAX]
    cdef int m, l, c
    cdef double acc
    for m in range(n):
        x[m] = base[m] + disp[m]
    _action(kind, x, tau, n, A)
    for m in range(n):
        outx[m] = tau[m]
        acc = 0.0
        for l in range(n):
            acc += A[m * n + l] * tau[l]
        outt[m] = -acc
    if with_m:
        for m in range(n):
            for c in range(n):
                acc = 0.0
                for l in range(n):
                    acc += A[m * n + l] * M[l * n + c]
                outm[m * n + c] = -acc


def integrate(int kind, params, x0, tau0, double T, int steps, bint with_transport):
    """Single-trajectory integration; same contract as the Python twin."""
    cdef int n = len(x0)
    if n > NMAX:
        raise ValueError(f"native kernel supports dimension <= {NMAX}")
    xs_arr = np.empty((steps + 1, n))
    taus_arr = np.empty((steps + 1, n))
    M_arr = np.eye(n) if with_transport else None
    cdef double[:, ::1] xs = xs_arr
    cdef double[:, ::1] taus = taus_arr
    cdef double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef double[::1] t0v = np.ascontiguousarray(tau0, dtype=np.float64)

    cdef double base[NMAX]
    cdef double disp[NMAX]
    cdef double x[NMAX]
    cdef double tau[NMAX]
    cdef double M[NMAX * NMAX]
    cdef double sx[NMAX]
    cdef double stau[NMAX]
    cdef double sM[NMAX * NMAX]
    cdef double k1x[NMAX]
    cdef double k1t[NMAX]
    cdef double k1m[NMAX * NMAX]
    cdef double k2x[NMAX]
    cdef double k2t[NMAX]
    cdef double k2m[NMAX * NMAX]
    cdef double k3x[NMAX]
    cdef double k3t[NMAX]
    cdef double k3m[NMAX * NMAX]
    cdef double k4x[NMAX]
    cdef double k4t[NMAX]
    cdef double k4m[NMAX * NMAX]

    cdef double h = T / steps
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef int i, j, m, nn = n * n
    cdef int n_valid
    cdef bint ok

    for j in range(n):
        base[j] = x0v[j]
        disp[j] = 0.0
        tau[j] = t0v[j]
        xs[0, j] = base[j]
        taus[0, j] = tau[j]
    if with_transport:
        for j in range(nn):
            M[j] = 1.0 if j % (n + 1) == 0 else 0.0

    if not _inside(kind, base):
        return xs_arr, taus_arr, M_arr, 0

    n_valid = steps + 1
    with nogil:
        for i in range(steps):
            _rhs(kind, base, disp, tau, M, n, with_transport, k1x, k1t, k1m)
            for j in range(n):
                sx[j] = disp[j] + half * k1x[j]
                stau[j] = tau[j] + half * k1t[j]
            if with_transport:
                for j in range(nn):
                    sM[j] = M[j] + half * k1m[j]
            _rhs(kind, base, sx, stau, sM, n, with_transport, k2x, k2t, k2m)
            for j in range(n):
                sx[j] = disp[j] + half * k2x[j]
                stau[j] = tau[j] + half * k2t[j]
            if with_transport:
                for j in range(nn):
                    sM[j] = M[j] + half * k2m[j]
            _rhs(kind, base, sx, stau, sM, n, with_transport, k3x, k3t, k3m)
            for j in range(n):
                sx[j] = disp[j] + h * k3x[j]
                stau[j] = tau[j] + h * k3t[j]
            if with_transport:
                for j in range(nn):
                    sM[j] = M[j] + h * k3m[j]
            _rhs(kind, base, sx, stau, sM, n, with_transport, k4x, k4t, k4m)
            for j in range(n):
                disp[j] = disp[j] + sixth * (k1x[j] + 2.0 * k2x[j] + 2.0 * k3x[j] + k4x[j])
                tau[j] = tau[j] + sixth * (k1t[j] + 2.0 * k2t[j] + 2.0 * k3t[j] + k4t[j])
            if with_transport:
                for j in range(nn):
                    M[j] = M[j] + sixth * (k1m[j] + 2.0 * k2m[j] + 2.0 * k3m[j] + k4m[j])
            ok = True
            for j in range(n):
                x[j] = base[j] + disp[j]
                if not (isfinite(x[j]) and isfinite(tau[j])):
                    ok = False
            if not ok:
                n_valid = i + 1
                break
            for j in range(n):
                xs[i + 1, j] = x[j]
                taus[i + 1, j] = tau[j]
            if not _inside(kind, x):
                n_valid = i + 1
                break

    if with_transport:
        for m in range(n):
            for j in range(n):
                M_arr[m, j] = M[m * n + j]
    return xs_arr, taus_arr, M_arr, n_valid
