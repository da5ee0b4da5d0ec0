"""Time-domain ground truth for harmonic balance results.

Fixed-step RK4 integration of the forced equations of motion, extraction of
steady-state Fourier coefficients, verification of branch points and
grid-sweep seeding of isolated (subharmonic) branches.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .hbm import (HarmonicGrid, HarmonicVector, harmonic_amplitude_phase,
                  project_samples, synthesize_time_series, synthesize_velocity,
                  time_shift)
from .kernels import run_rk4
from .model import SystemModel

log = logging.getLogger(__name__)

MIN_STEPS_PER_PERIOD = 200
DEFAULT_STEPS_PER_PERIOD = 500


class DivergenceError(RuntimeError):
    pass


class NotSteadyError(RuntimeError):
    pass


class NoAttractorError(RuntimeError):
    pass


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    omega: float
    f: float
    steps_per_period: int

    @property
    def dt(self) -> float:
        return self.t[1] - self.t[0]


@dataclass
class SteadyStateEstimate:
    X_est: HarmonicVector
    periodicity_residual: float
    periods: int = 0
    classification: str = "period-T"
    initial_state: tuple | None = field(default=None, repr=False)


def model_arrays(model: SystemModel, f: float):
    tgt, src, exp, coef = model.nonlinear_arrays()
    return (np.ascontiguousarray(np.linalg.inv(model.M)),
            np.ascontiguousarray(model.C), np.ascontiguousarray(model.K),
            tgt.astype(np.int64), src.astype(np.int64), exp.astype(np.int64),
            coef, model.forcing_vector(f))


def _check_spp(steps_per_period):
    if steps_per_period < MIN_STEPS_PER_PERIOD:
        raise ValueError(
            f"steps_per_period must be >= {MIN_STEPS_PER_PERIOD}, got {steps_per_period}")


def integrate(model: SystemModel, f: float, omega: float, x0, v0, n_periods: int,
              steps_per_period: int = DEFAULT_STEPS_PER_PERIOD, backend=None) -> Trajectory:
    """Integrate ``M x'' = f e_l sin(wt) - C v - K x - f_nl`` from ``t = 0``.

    Every step is recorded; the returned trajectory has
    ``n_periods * steps_per_period + 1`` samples.
    """
    _check_spp(steps_per_period)
    n = model.n
    x = np.array(x0, dtype=float).reshape(1, n)
    v = np.array(v0, dtype=float).reshape(1, n)
    dt = 2 * np.pi / omega / steps_per_period
    n_steps = int(n_periods) * steps_per_period
    xs, vs = run_rk4(model_arrays(model, f), x, v, 0.0, dt, n_steps, 1, omega, backend)
    xs = np.concatenate([xs[:, 0], x])
    vs = np.concatenate([vs[:, 0], v])
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(vs))):
        raise DivergenceError("integration produced non-finite states")
    return Trajectory(np.arange(n_steps + 1) * dt, xs, vs, omega, f, steps_per_period)


def integrate_to_steady_state(model: SystemModel, f: float, omega: float, x0, v0, nu: int = 1,
                              steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                              max_periods: int = 5000, rel_tol: float = 1e-6,
                              backend=None):
    """Integrate a batch of initial states until ``nu T``-periodic.

    A member is steady when the max pointwise deviation between its last two
    ``nu T`` windows is below ``rel_tol`` times its peak amplitude.

    Returns
    -------
    windows : ndarray, shape (nu * steps_per_period, batch, n)
        Samples of the final window, starting at a multiple of ``T``.
    residual : ndarray, shape (batch,)
        Periodicity residual of each member.
    converged : ndarray of bool
    periods : ndarray of int
        Forcing periods integrated per member.
    """
    _check_spp(steps_per_period)
    n = model.n
    x = np.array(x0, dtype=float).reshape(-1, n)
    v = np.array(v0, dtype=float).reshape(-1, n)
    batch = x.shape[0]
    arrays = model_arrays(model, f)
    dt = 2 * np.pi / omega / steps_per_period
    n_win = nu * steps_per_period
    windows = np.full((n_win, batch, n), np.nan)
    residual = np.full(batch, np.inf)
    converged = np.zeros(batch, dtype=bool)
    periods = np.zeros(batch, dtype=int)
    prev = None
    active = np.arange(batch)
    done = 0
    while active.size and done < max_periods:
        xa, va = x[active], v[active]
        # windows start at multiples of T, so local time restarts at zero
        wx, _ = run_rk4(arrays, xa, va, 0.0, dt, n_win, 1, omega, backend)
        x[active], v[active] = xa, va
        done += nu
        periods[active] = done
        finite = np.all(np.isfinite(wx), axis=(0, 2)) & np.all(np.isfinite(xa), axis=1)
        if prev is not None:
            dev = np.abs(wx - prev).max(axis=(0, 2))
            peak = np.abs(wx).max(axis=(0, 2))
            res = dev / np.maximum(peak, 1e-300)
            residual[active] = np.where(peak > 0, res, dev)
            ok = finite & ((dev <= rel_tol * peak) | (peak == 0))
        else:
            ok = np.zeros(active.size, dtype=bool)
        windows[:, active] = wx
        converged[active[ok]] = True
        keep = ~ok & finite
        if np.any(~finite):
            log.debug("%d trajectories diverged", np.count_nonzero(~finite))
        active = active[keep]
        prev = wx[:, keep]
    return windows, residual, converged, periods


def _window_estimate(window, omega, nu, n_harmonics, residual, periods, initial=None):
    grid = HarmonicGrid(n_harmonics, nu, omega)
    n = window.shape[-1]
    X = HarmonicVector(project_samples(window, n_harmonics), grid, n)
    return SteadyStateEstimate(X, float(residual), int(periods), initial_state=initial)


def steady_state_fourier(traj: Trajectory, nu: int, n_harmonics: int,
                         threshold: float | None = 1e-6) -> SteadyStateEstimate:
    """Fourier coefficients of the last ``nu T`` window of a trajectory.

    The trajectory must start at ``t = 0`` (or a multiple of ``T``). The
    periodicity residual compares the last two windows relative to the peak
    amplitude; ``threshold=None`` skips the steadiness check.
    """
    spp = traj.steps_per_period
    n_win = nu * spp
    n_samples = traj.x.shape[0] - 1
    if n_samples < 2 * n_win:
        raise NotSteadyError("trajectory shorter than two grid periods")
    end = (n_samples // spp) * spp
    last = traj.x[end - n_win:end]
    prev = traj.x[end - 2 * n_win:end - n_win]
    peak = np.abs(last).max()
    res = np.abs(last - prev).max() / peak if peak > 0 else 0.0
    if threshold is not None and res > threshold:
        raise NotSteadyError(f"periodicity residual {res:.3e} exceeds {threshold:.1e}")
    return _window_estimate(last, traj.omega, nu, n_harmonics, res, end // spp)


def subharmonic_fraction(X: HarmonicVector) -> float:
    """Share of the oscillating amplitude carried by harmonics off the ``T`` grid."""
    nu = X.grid.nu
    if nu == 1:
        return 0.0
    m = X.as_matrix()[1:]
    amp = np.hypot(m[0::2], m[1::2])  # (Nh, n)
    j = np.arange(1, X.grid.n_harmonics + 1)
    off = amp[j % nu != 0].max(initial=0.0)
    total = amp.max(initial=0.0)
    return float(off / total) if total > 0 else 0.0


def same_orbit(X1: HarmonicVector, X2: HarmonicVector, rel_tol: float = 1e-3) -> bool:
    """Equality up to the ``nu`` admissible shifts by whole forcing periods."""
    scale = max(np.abs(X1.coefficients).max(), np.abs(X2.coefficients).max(), 1e-300)
    for m in range(X1.grid.nu):
        shifted = time_shift(X2, m * X2.grid.period)
        if np.abs(shifted.coefficients - X1.coefficients).max() <= rel_tol * scale:
            return True
    return False


def rectangular_ic_grid(x_range, v_range, points, n: int = 1, dof: int = 0):
    """Initial states on a ``points x points`` grid over ``(x0, v0)`` of one DOF.

    Returns ``(x0, v0)`` arrays of shape ``(points**2, n)``; other DOFs start
    at rest.
    """
    xs = np.linspace(*x_range, points)
    vs = np.linspace(*v_range, points)
    gx, gv = np.meshgrid(xs, vs, indexing="ij")
    x0 = np.zeros((gx.size, n))
    v0 = np.zeros((gx.size, n))
    x0[:, dof] = gx.ravel()
    v0[:, dof] = gv.ravel()
    return x0, v0


@dataclass
class SeedResult:
    attractors: list
    labels: np.ndarray
    estimates: list


def find_attractors(model: SystemModel, f: float, omega: float, nu: int, ic_grid,
                    n_harmonics: int | None = None, cluster_tol: float = 1e-3,
                    **steady_kw):
    """Distinct steady ``nu T``-periodic states reached from ``ic_grid``.

    Returns ``(attractors, labels, estimates)``: clustered estimates, the
    attractor index per initial state (-1 if not steady) and the raw
    per-state estimates.
    """
    n_harmonics = 8 * nu if n_harmonics is None else n_harmonics
    x0, v0 = (np.asarray(a, dtype=float).reshape(-1, model.n) for a in ic_grid)
    windows, residual, converged, periods = integrate_to_steady_state(
        model, f, omega, x0.copy(), v0.copy(), nu, **steady_kw)
    attractors, estimates = [], []
    labels = np.full(x0.shape[0], -1)
    for i in range(x0.shape[0]):
        if not converged[i]:
            estimates.append(None)
            continue
        est = _window_estimate(windows[:, i], omega, nu, n_harmonics, residual[i],
                               periods[i], (x0[i], v0[i]))
        estimates.append(est)
        for a, known in enumerate(attractors):
            if same_orbit(known.X_est, est.X_est, cluster_tol):
                labels[i] = a
                break
        else:
            attractors.append(est)
            labels[i] = len(attractors) - 1
    return attractors, labels, estimates


def seed_isola(model: SystemModel, f: float, omega: float, nu: int, ic_grid,
               n_harmonics: int | None = None, subharmonic_threshold: float = 1e-2,
               cluster_tol: float = 1e-3, return_basins: bool = False, **steady_kw):
    """Distinct period-``nu T`` attractors reached from a grid of initial states.

    Parameters
    ----------
    ic_grid : (x0, v0)
        Arrays of shape ``(batch, n)``, e.g. from :func:`rectangular_ic_grid`.
    subharmonic_threshold : float
        Minimum share of amplitude off the ``T`` grid for an attractor to
        count as subharmonic.

    Returns
    -------
    list of SteadyStateEstimate
        Distinct subharmonic attractors in grid order. With
        ``return_basins`` a :class:`SeedResult` carrying the per-IC
        attractor labels (-1 for non-steady, 0 for period-T, ``i + 1`` for
        subharmonic attractor ``i``) is returned instead.

    Raises
    ------
    NoAttractorError
        If no subharmonic attractor is found (only without ``return_basins``).
    """
    found, raw_labels, estimates = find_attractors(
        model, f, omega, nu, ic_grid, n_harmonics, cluster_tol, **steady_kw)
    attractors = []
    remap = {}
    for a, est in enumerate(found):
        if nu > 1 and subharmonic_fraction(est.X_est) >= subharmonic_threshold:
            est.classification = f"period-{nu}T"
            attractors.append(est)
            remap[a] = len(attractors)
        else:
            est.classification = "period-T"
            remap[a] = 0
    labels = np.array([remap.get(a, -1) for a in raw_labels])
    for est, lab in zip(estimates, raw_labels):
        if est is not None:
            est.classification = found[lab].classification
    if return_basins:
        return SeedResult(attractors, labels, estimates)
    if not attractors:
        raise NoAttractorError(
            f"no period-{nu}T attractor at f={f}, omega={omega}")
    return attractors


@dataclass
class VerificationReport:
    status: str
    rms_error: float
    amplitude_error: np.ndarray
    phase_error: np.ndarray
    growth: float


def verify_point(model: SystemModel, point, f: float | None = None, n_periods: int = 50,
                 steps_per_period: int = DEFAULT_STEPS_PER_PERIOD, rms_tol: float = 1e-2,
                 growth_tol: float = 10.0, backend=None) -> VerificationReport:
    """Integrate from a branch point's own initial state and compare.

    ``rms_error`` is the RMS displacement error relative to the RMS of the
    harmonic balance orbit. The truncation error of the orbit acts as a
    perturbation: if the deviation grows by more than ``growth_tol`` between
    the first and last grid period the point is reported ``unstable``
    (unverifiable by integration) instead of being compared.
    """
    X = point.X if hasattr(point, "X") else point
    f = model.forcing_amplitude if f is None else f
    grid = X.grid
    x0 = synthesize_time_series(X, 0.0)[0]
    v0 = synthesize_velocity(X, 0.0)[0]
    nu = grid.nu
    n_periods = int(np.ceil(n_periods / nu) * nu)
    try:
        traj = integrate(model, f, grid.omega, x0, v0, n_periods, steps_per_period, backend)
    except DivergenceError:
        return VerificationReport("unstable", np.inf, np.full(grid.n_harmonics, np.inf),
                                  np.full(grid.n_harmonics, np.inf), np.inf)
    ref = synthesize_time_series(X, traj.t)
    err = traj.x - ref
    rms = float(np.sqrt(np.mean(err ** 2)) / max(np.sqrt(np.mean(ref ** 2)), 1e-300))
    n_win = nu * steps_per_period
    first = np.abs(err[:n_win]).max()
    last = np.abs(err[-n_win:]).max()
    growth = float(last / first) if first > 0 else (0.0 if last == 0 else np.inf)
    est = _window_estimate(traj.x[-n_win - 1:-1], grid.omega, nu, grid.n_harmonics, 0.0,
                           n_periods)
    dof = model.forcing_dof
    amp_err, ph_err = [], []
    for j in range(1, grid.n_harmonics + 1):
        a = harmonic_amplitude_phase(X, dof, j)
        b = harmonic_amplitude_phase(est.X_est, dof, j)
        amp_err.append(abs(a.amplitude - b.amplitude))
        d = np.angle(np.exp(1j * (a.phase - b.phase)))
        ph_err.append(abs(d) if not (a.degenerate or b.degenerate) else 0.0)
    if growth > growth_tol and last > 1e-7 * np.abs(ref).max():
        status = "unstable"
    elif rms < rms_tol:
        status = "verified"
    else:
        status = "failed"
    return VerificationReport(status, rms, np.array(amp_err), np.array(ph_err), growth)
