# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernel for constrained systems with constant coefficients.

Covers systems whose velocity Hessian and bracket coefficients are constant
and whose chart-coordinate map falls into one of three frame codes:
identity, a planar rotation by q[2] on the first two coordinates, or the
Heisenberg chart.  Everything else runs through the pure-Python integrator.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, isfinite, sin

cnp.import_array()

DEF MAXDIM = 8

FRAME_IDENTITY = 0
FRAME_PLANAR = 1
FRAME_HEISENBERG = 2


cdef inline void _rhs(int frame_code, int n, int k,
                      const double[:, ::1] D, const double[:, :, ::1] c,
                      const double[:, ::1] M, const double[:, ::1] Minv,
                      const double* q, const double* vd,
                      double* qdot, double* vddot) noexcept nogil:
    cdef double v[MAXDIM]
    cdef double Lv[MAXDIM]
    cdef double ad[MAXDIM]
    cdef double r[MAXDIM]
    cdef int a, b, d, e, f, i, j
    cdef double s, cs, sn

    for a in range(n):
        s = 0.0
        for i in range(k):
            s += D[a, i] * vd[i]
        v[a] = s
    for a in range(n):
        s = 0.0
        for b in range(n):
            s += M[a, b] * v[b]
        Lv[a] = s
    # ad[d] = sum_{e,f} c[e, f, d] v[f] Lv[e]
    for d in range(n):
        s = 0.0
        for e in range(n):
            for f in range(n):
                s += c[e, f, d] * v[f] * Lv[e]
        ad[d] = s
    for i in range(k):
        s = 0.0
        for d in range(n):
            s += D[d, i] * ad[d]
        r[i] = s
    for i in range(k):
        s = 0.0
        for j in range(k):
            s += Minv[i, j] * r[j]
        vddot[i] = s

    if frame_code == 1:
        cs = cos(q[2])
        sn = sin(q[2])
        qdot[0] = cs * v[0] - sn * v[1]
        qdot[1] = sn * v[0] + cs * v[1]
        for a in range(2, n):
            qdot[a] = v[a]
    elif frame_code == 2:
        qdot[0] = v[0]
        qdot[1] = v[1]
        qdot[2] = q[1] * v[0] - q[0] * v[1] + v[2]
    else:
        for a in range(n):
            qdot[a] = v[a]


def integrate_nh(int frame_code,
                 cnp.ndarray[double, ndim=2] d_basis,
                 cnp.ndarray[double, ndim=3] c_arr,
                 cnp.ndarray[double, ndim=2] mass,
                 cnp.ndarray[double, ndim=2] mass_dd_inv,
                 cnp.ndarray[double, ndim=1] q0,
                 cnp.ndarray[double, ndim=1] vd0,
                 int n_steps, double h):
    """RK4 on (q, v_d); returns (q, vd) sample arrays of length n_steps + 1."""
    cdef int n = q0.shape[0]
    cdef int k = vd0.shape[0]
    if n > MAXDIM:
        raise ValueError("compiled kernel supports at most dimension %d" % MAXDIM)

    cdef const double[:, ::1] D = np.ascontiguousarray(d_basis)
    cdef const double[:, :, ::1] c = np.ascontiguousarray(c_arr)
    cdef const double[:, ::1] M = np.ascontiguousarray(mass)
    cdef const double[:, ::1] Minv = np.ascontiguousarray(mass_dd_inv)

    q_out = np.empty((n_steps + 1, n), dtype=np.float64)
    vd_out = np.empty((n_steps + 1, k), dtype=np.float64)
    cdef double[:, ::1] qo = q_out
    cdef double[:, ::1] vo = vd_out

    cdef double qi[MAXDIM]
    cdef double vi[MAXDIM]
    cdef double qt[MAXDIM]
    cdef double vt[MAXDIM]
    cdef double k1q[MAXDIM]
    cdef double k1v[MAXDIM]
    cdef double k2q[MAXDIM]
    cdef double k2v[MAXDIM]
    cdef double k3q[MAXDIM]
    cdef double k3v[MAXDIM]
    cdef double k4q[MAXDIM]
    cdef double k4v[MAXDIM]
    cdef int i, a, step
    cdef bint ok = True
    cdef int bad_step = -1

    for a in range(n):
        qi[a] = q0[a]
        qo[0, a] = q0[a]
    for i in range(k):
        vi[i] = vd0[i]
        vo[0, i] = vd0[i]

    with nogil:
        for step in range(n_steps):
            _rhs(frame_code, n, k, D, c, M, Minv, qi, vi, k1q, k1v)
            for a in range(n):
                qt[a] = qi[a] + 0.5 * h * k1q[a]
            for i in range(k):
                vt[i] = vi[i] + 0.5 * h * k1v[i]
            _rhs(frame_code, n, k, D, c, M, Minv, qt, vt, k2q, k2v)
            for a in range(n):
                qt[a] = qi[a] + 0.5 * h * k2q[a]
            for i in range(k):
                vt[i] = vi[i] + 0.5 * h * k2v[i]
            _rhs(frame_code, n, k, D, c, M, Minv, qt, vt, k3q, k3v)
            for a in range(n):
                qt[a] = qi[a] + h * k3q[a]
            for i in range(k):
                vt[i] = vi[i] + h * k3v[i]
            _rhs(frame_code, n, k, D, c, M, Minv, qt, vt, k4q, k4v)
            for a in range(n):
                qi[a] = qi[a] + (h / 6.0) * (k1q[a] + 2.0 * k2q[a] + 2.0 * k3q[a] + k4q[a])
                if not isfinite(qi[a]):
                    ok = False
            for i in range(k):
                vi[i] = vi[i] + (h / 6.0) * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
                if not isfinite(vi[i]):
                    ok = False
            if not ok:
                bad_step = step + 1
                break
            for a in range(n):
                qo[step + 1, a] = qi[a]
            for i in range(k):
                vo[step + 1, i] = vi[i]

    if not ok:
        raise ArithmeticError("integration diverged at t=%.6g" % (bad_step * h))
    return q_out, vd_out
