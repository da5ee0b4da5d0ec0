# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fixed-step RK4 for polynomial mechanical systems.

Same contract as :func:`resonance_lab._rk4_py.rk4_integrate`.
"""
from libc.math cimport sin
from libc.stdlib cimport malloc, free


cdef inline double ipow(double x, long p) noexcept nogil:
    cdef double r = 1.0
    while p > 0:
        if p & 1:
            r *= x
        x *= x
        p >>= 1
    return r


cdef struct System:
    long n
    long n_terms
    const double* minv
    const double* C
    const double* K
    const long* nl_target
    const long* nl_source
    const long* nl_exp
    const double* nl_coef
    const double* fvec


cdef inline void accel(const System* sys, double s, const double* x, const double* v,
                       double* out, double* work) noexcept nogil:
    # s is sin(omega t) at the stage time
    cdef long i, j, m
    cdef long n = sys.n
    cdef double acc
    for i in range(n):
        acc = sys.fvec[i] * s
        for j in range(n):
            acc -= sys.C[i * n + j] * v[j] + sys.K[i * n + j] * x[j]
        work[i] = acc
    for m in range(sys.n_terms):
        work[sys.nl_target[m]] -= sys.nl_coef[m] * ipow(x[sys.nl_source[m]], sys.nl_exp[m])
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += sys.minv[i * n + j] * work[j]
        out[i] = acc


def rk4_integrate(double[:, ::1] x, double[:, ::1] v, double t0, double dt,
                  long n_steps, long record_every,
                  const double[:, ::1] minv, const double[:, ::1] C, const double[:, ::1] K,
                  const long[::1] nl_target, const long[::1] nl_source,
                  const long[::1] nl_exp, const double[::1] nl_coef,
                  const double[::1] fvec, double omega,
                  double[:, :, ::1] out_x, double[:, :, ::1] out_v):
    cdef long batch = x.shape[0]
    cdef long n = x.shape[1]
    cdef long b, step, i, rec
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    cdef double s0, sh, s1
    cdef System sys
    sys.n = n
    sys.n_terms = nl_coef.shape[0]
    sys.minv = &minv[0, 0]
    sys.C = &C[0, 0]
    sys.K = &K[0, 0]
    sys.nl_target = &nl_target[0] if sys.n_terms else NULL
    sys.nl_source = &nl_source[0] if sys.n_terms else NULL
    sys.nl_exp = &nl_exp[0] if sys.n_terms else NULL
    sys.nl_coef = &nl_coef[0] if sys.n_terms else NULL
    sys.fvec = &fvec[0]
    cdef double* buf = <double*> malloc(11 * n * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* xc = buf
    cdef double* vc = buf + n
    cdef double* xt = buf + 2 * n
    cdef double* a1 = buf + 3 * n
    cdef double* a2 = buf + 4 * n
    cdef double* a3 = buf + 5 * n
    cdef double* a4 = buf + 6 * n
    cdef double* v2 = buf + 7 * n
    cdef double* v3 = buf + 8 * n
    cdef double* v4 = buf + 9 * n
    cdef double* work = buf + 10 * n
    try:
        with nogil:
            for b in range(batch):
                for i in range(n):
                    xc[i] = x[b, i]
                    vc[i] = v[b, i]
                rec = 0
                s1 = sin(omega * t0)
                for step in range(n_steps):
                    if step % record_every == 0:
                        for i in range(n):
                            out_x[rec, b, i] = xc[i]
                            out_v[rec, b, i] = vc[i]
                        rec += 1
                    s0 = s1
                    sh = sin(omega * (t0 + (step + 0.5) * dt))
                    s1 = sin(omega * (t0 + (step + 1) * dt))
                    accel(&sys, s0, xc, vc, a1, work)
                    for i in range(n):
                        xt[i] = xc[i] + h2 * vc[i]
                        v2[i] = vc[i] + h2 * a1[i]
                    accel(&sys, sh, xt, v2, a2, work)
                    for i in range(n):
                        xt[i] = xc[i] + h2 * v2[i]
                        v3[i] = vc[i] + h2 * a2[i]
                    accel(&sys, sh, xt, v3, a3, work)
                    for i in range(n):
                        xt[i] = xc[i] + dt * v3[i]
                        v4[i] = vc[i] + dt * a3[i]
                    accel(&sys, s1, xt, v4, a4, work)
                    for i in range(n):
                        xc[i] += h6 * (vc[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])
                        vc[i] += h6 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])
                for i in range(n):
                    x[b, i] = xc[i]
                    v[b, i] = vc[i]
    finally:
        free(buf)
