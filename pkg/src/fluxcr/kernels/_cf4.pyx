# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled CF4 Magnus propagator for H(t) = diag + f(t) V.

Mirrors kernels/py_reference.py step for step; see that module for the
scheme.  Matrix exponentials use zheevd, products use zgemm on the
transposed (C-order) view.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, fabs, sqrt
from libc.stdlib cimport malloc, free
from scipy.linalg.cython_blas cimport zgemm
from scipy.linalg.cython_lapack cimport zheevd

cnp.import_array()

cdef double SQ3 = sqrt(3.0)
cdef double C1 = 0.5 - SQ3 / 6.0
cdef double C2 = 0.5 + SQ3 / 6.0
cdef double A1 = 0.25 + SQ3 / 6.0
cdef double A2 = 0.25 - SQ3 / 6.0

# Yoshida triple-jump fractions turning the self-adjoint CF4 step into a
# 6th-order scheme.
cdef double W1 = 1.0 / (2.0 - 2.0 ** 0.2)
cdef double W0 = 1.0 - 2.0 * W1


cdef double planck_env(double t, double t_pulse, double t_ramp) nogil:
    cdef double at = fabs(t)
    cdef double half = 0.5 * t_pulse
    cdef double x, s
    if at >= half:
        return 0.0
    if at <= half - t_ramp:
        return 1.0
    x = at - (half - t_ramp)
    s = t_ramp / (t_ramp - x) - t_ramp / x
    if s > 700.0:
        return 0.0
    if s < -700.0:
        return 1.0
    return 1.0 / (1.0 + exp(s))


cdef double drive_value(double t, double omega_d, double amp, int drive_kind,
                        int has_env, double t_pulse, double t_ramp) nogil:
    cdef double carrier
    if drive_kind == 1:
        carrier = cos(omega_d * t)
    else:
        carrier = sin(omega_d * t)
    if has_env:
        return amp * planck_env(t, t_pulse, t_ramp) * carrier
    return amp * carrier


cdef void zgemm_c(int n, double complex *a, double complex *b,
                  double complex *c) nogil:
    """C-order product c = a @ b via zgemm on the transposed view."""
    cdef double complex one = 1.0, zero = 0.0
    # (a@b)^T = b^T a^T; C-order buffers are the transposed view for BLAS.
    zgemm("N", "N", &n, &n, &n, &one, b, &n, a, &n, &zero, c, &n)


cdef int apply_expm(int n, double h, double complex *w, double complex *u,
                    double complex *zwork, int lzwork, double *rwork,
                    int lrwork, int *iwork, int liwork, double *lam,
                    double complex *t1, double complex *t2) nogil:
    """u <- exp(-i h w) @ u for Hermitian w (both C-order, w destroyed)."""
    cdef int info = 0, a, b
    cdef double complex ph
    # LAPACK sees w^T = conj(w); its eigenvectors are conj of those of w.
    zheevd("V", "U", &n, w, &n, lam, zwork, &lzwork, rwork, &lrwork,
           iwork, &liwork, &info)
    if info != 0:
        return info
    # w now holds Z (column-major) = conj(Q) with Q eigvecs of the true w.
    # exp(-i h w) = Q e^{-i h lam} Q^dag; in C-order: T1[a,b] = conj(Z[b*n+a]) * ph_b,
    # then X = T1 @ Z_c with Z_c the C-order reinterpretation of the buffer.
    for b in range(n):
        ph = cos(h * lam[b]) - 1j * sin(h * lam[b])
        for a in range(n):
            t1[a * n + b] = w[b * n + a].conjugate() * ph
    zgemm_c(n, t1, w, t2)
    zgemm_c(n, t2, u, t1)
    for a in range(n * n):
        u[a] = t1[a]
    return 0


def cf4_propagate(cnp.ndarray[double, ndim=1] diag,
                  cnp.ndarray[double complex, ndim=2] v,
                  double omega_d, double amp, int drive_kind, env,
                  double t0, double t1, int nsteps, int checkpoints=0,
                  int order=4):
    """Compiled counterpart of py_reference.cf4_propagate."""
    cdef int n = diag.shape[0]
    cdef int has_env = 0
    cdef double t_pulse = 0.0, t_ramp = 0.0
    if env is not None:
        has_env = 1
        t_pulse, t_ramp = env
    cdef double h = (t1 - t0) / nsteps
    cdef int per = 0
    if checkpoints:
        if nsteps % checkpoints:
            raise ValueError("nsteps must be a multiple of checkpoints")
        per = nsteps // checkpoints

    cdef cnp.ndarray[double complex, ndim=2] u_arr = np.eye(n, dtype=complex)
    cdef cnp.ndarray[double complex, ndim=3] checks_arr = (
        np.empty((checkpoints, n, n), dtype=complex) if checkpoints
        else np.empty((0, n, n), dtype=complex))
    cdef cnp.ndarray[double, ndim=1] d_arr = np.ascontiguousarray(diag)
    cdef cnp.ndarray[double complex, ndim=2] v_arr = np.ascontiguousarray(v)

    cdef double complex *u = <double complex *> u_arr.data
    cdef double complex *vp = <double complex *> v_arr.data
    cdef double *d = <double *> d_arr.data

    cdef int lzwork = 2 * n + n * n + 16
    cdef int lrwork = 1 + 5 * n + 2 * n * n + 16
    cdef int liwork = 3 + 5 * n + 16
    cdef double complex *zwork = <double complex *> malloc(lzwork * sizeof(double complex))
    cdef double *rwork = <double *> malloc(lrwork * sizeof(double))
    cdef int *iwork = <int *> malloc(liwork * sizeof(int))
    cdef double *lam = <double *> malloc(n * sizeof(double))
    cdef double complex *w1 = <double complex *> malloc(n * n * sizeof(double complex))
    cdef double complex *w2 = <double complex *> malloc(n * n * sizeof(double complex))
    cdef double complex *t1m = <double complex *> malloc(n * n * sizeof(double complex))
    cdef double complex *t2m = <double complex *> malloc(n * n * sizeof(double complex))
    cdef double complex *ph1 = <double complex *> malloc(n * sizeof(double complex))
    cdef double complex *ph2 = <double complex *> malloc(n * sizeof(double complex))

    cdef int step, a, b, info = 0, idx, sub, nsub
    cdef double t, ts, hs, tn1, tn2, f1, f2, tc
    cdef double complex e1, e2, phl, phr
    cdef double fracs[3]
    if order == 6:
        nsub = 3
        fracs[0] = W1; fracs[1] = W0; fracs[2] = W1
    else:
        nsub = 1
        fracs[0] = 1.0

    try:
        with nogil:
            for step in range(nsteps):
                t = t0 + step * h
                ts = t
                for sub in range(nsub):
                    hs = fracs[sub] * h
                    tn1 = ts + C1 * hs
                    tn2 = ts + C2 * hs
                    f1 = drive_value(tn1, omega_d, amp, drive_kind, has_env,
                                     t_pulse, t_ramp)
                    f2 = drive_value(tn2, omega_d, amp, drive_kind, has_env,
                                     t_pulse, t_ramp)
                    for a in range(n):
                        ph1[a] = cos(d[a] * tn1) + 1j * sin(d[a] * tn1)
                        ph2[a] = cos(d[a] * tn2) + 1j * sin(d[a] * tn2)
                    for a in range(n):
                        for b in range(n):
                            idx = a * n + b
                            e1 = f1 * ph1[a] * ph1[b].conjugate() * vp[idx]
                            e2 = f2 * ph2[a] * ph2[b].conjugate() * vp[idx]
                            w1[idx] = A1 * e1 + A2 * e2
                            w2[idx] = A2 * e1 + A1 * e2
                    info = apply_expm(n, hs, w1, u, zwork, lzwork, rwork,
                                      lrwork, iwork, liwork, lam, t1m, t2m)
                    if info != 0:
                        break
                    info = apply_expm(n, hs, w2, u, zwork, lzwork, rwork,
                                      lrwork, iwork, liwork, lam, t1m, t2m)
                    if info != 0:
                        break
                    ts += hs
                if info != 0:
                    break
                if per != 0 and (step + 1) % per == 0:
                    tc = t0 + (step + 1) * h
                    for a in range(n):
                        phl = cos(d[a] * tc) - 1j * sin(d[a] * tc)
                        for b in range(n):
                            phr = cos(d[b] * t0) + 1j * sin(d[b] * t0)
                            checks_arr[(step + 1) // per - 1, a, b] = (
                                phl * u[a * n + b] * phr)
        if info != 0:
            raise RuntimeError(f"zheevd failed with info={info}")
        # final lab-frame conversion
        for a in range(n):
            phl = cos(d[a] * t1) - 1j * sin(d[a] * t1)
            for b in range(n):
                phr = cos(d[b] * t0) + 1j * sin(d[b] * t0)
                u_arr[a, b] = phl * u[a * n + b] * phr
    finally:
        free(zwork); free(rwork); free(iwork); free(lam)
        free(w1); free(w2); free(t1m); free(t2m); free(ph1); free(ph2)

    return u_arr, (checks_arr if checkpoints else None)
