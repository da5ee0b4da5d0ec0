"""NumPy reference implementation of the batched RK4 kernel."""
import numpy as np


def rk4_integrate(x, v, t0, dt, n_steps, record_every, minv, C, K,
                  nl_target, nl_source, nl_exp, nl_coef, fvec, omega,
                  out_x, out_v):
    """Advance a batch of states with classical fixed-step RK4.

    ``x`` and ``v`` have shape ``(batch, n)`` and are overwritten with the
    final state. Before every step whose index is a multiple of
    ``record_every`` the current state is written to ``out_x[rec]`` and
    ``out_v[rec]`` (shape ``(n_records, batch, n)``). Step ``i`` starts at
    ``t0 + i * dt``.
    """
    minv_t, C_t, K_t = minv.T, C.T, K.T

    def accel(t, xs, vs):
        rhs = np.outer(np.full(xs.shape[0], np.sin(omega * t)), fvec)
        rhs -= vs @ C_t + xs @ K_t
        for tgt, src, p, a in zip(nl_target, nl_source, nl_exp, nl_coef):
            rhs[:, tgt] -= a * xs[:, src] ** p
        return rhs @ minv_t

    xc = np.array(x, dtype=float)
    vc = np.array(v, dtype=float)
    h2 = 0.5 * dt
    rec = 0
    for step in range(n_steps):
        if step % record_every == 0:
            out_x[rec] = xc
            out_v[rec] = vc
            rec += 1
        t = t0 + step * dt
        a1 = accel(t, xc, vc)
        v2 = vc + h2 * a1
        a2 = accel(t + h2, xc + h2 * vc, v2)
        v3 = vc + h2 * a2
        a3 = accel(t + h2, xc + h2 * v2, v3)
        v4 = vc + dt * a3
        a4 = accel(t + dt, xc + dt * v3, v4)
        xc += dt / 6.0 * (vc + 2 * v2 + 2 * v3 + v4)
        vc += dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    x[...] = xc
    v[...] = vc
