"""Backend selection for the RK4 kernel.

The compiled extension is used when it imports; ``RESONANCE_LAB_BACKEND=python``
forces the NumPy implementation.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _rk4_py

try:
    from . import _rk4 as _compiled
except ImportError:  # extension not built
    _compiled = None

KERNELS = {"python": _rk4_py.rk4_integrate}
if _compiled is not None:
    KERNELS["cython"] = _compiled.rk4_integrate

DEFAULT_BACKEND = os.environ.get(
    "RESONANCE_LAB_BACKEND", "cython" if _compiled is not None else "python")


def available_backends():
    return sorted(KERNELS)


def get_kernel(backend=None):
    name = backend or DEFAULT_BACKEND
    if name not in KERNELS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    return KERNELS[name]


def worker_count() -> int:
    env = os.environ.get("RESONANCE_LAB_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, cap)


def run_rk4(model_arrays, x, v, t0, dt, n_steps, record_every, omega, backend=None):
    """Advance ``(batch, n)`` states in place; returns recorded ``(xs, vs)``.

    Batches are split across worker threads for the compiled backend, which
    releases the GIL.
    """
    kernel = get_kernel(backend)
    n_rec = -(-n_steps // record_every)
    batch, n = x.shape
    out_x = np.empty((n_rec, batch, n))
    out_v = np.empty((n_rec, batch, n))
    workers = min(worker_count(), batch)
    if workers <= 1 or kernel is _rk4_py.rk4_integrate:
        kernel(x, v, t0, dt, n_steps, record_every, *model_arrays, omega, out_x, out_v)
        return out_x, out_v
    bounds = np.linspace(0, batch, workers + 1).astype(int)

    def job(lo, hi):
        xs, vs = np.ascontiguousarray(x[lo:hi]), np.ascontiguousarray(v[lo:hi])
        ox = np.empty((n_rec, hi - lo, n))
        ov = np.empty((n_rec, hi - lo, n))
        kernel(xs, vs, t0, dt, n_steps, record_every, *model_arrays, omega, ox, ov)
        return lo, hi, xs, vs, ox, ov

    with ThreadPoolExecutor(workers) as pool:
        for lo, hi, xs, vs, ox, ov in pool.map(lambda b: job(*b), zip(bounds[:-1], bounds[1:])):
            x[lo:hi], v[lo:hi] = xs, vs
            out_x[:, lo:hi], out_v[:, lo:hi] = ox, ov
    return out_x, out_v
