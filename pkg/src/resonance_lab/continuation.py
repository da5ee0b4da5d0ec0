"""Newton correction, pseudo-arclength continuation and event location.

A continuation problem is an :class:`ExtendedSystem`: ``N`` equations in
``N + 1`` unknowns ``u`` whose last entry is the excitation frequency. The
tracer closes the system with the orthogonal arclength row
``t^T (u - u_pred) = 0``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

from .hbm import (HarmonicGrid, HarmonicVector, build_dynamic_stiffness,
                  forcing_coefficients, harmonic_amplitude_phase,
                  hbm_residual_forced, peak_amplitude, wrap_difference)
from .model import SystemModel

log = logging.getLogger(__name__)


class ContinuationError(RuntimeError):
    pass


class NoConvergenceError(ContinuationError):
    pass


class SingularJacobianError(ContinuationError):
    pass


@dataclass(frozen=True)
class ContinuationSettings:
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    ds_init: float = 1e-2
    ds_min: float = 1e-8
    ds_max: float = 0.1
    max_points: int = 2000
    direction: int = 1
    target_iter: int = 4
    # step rejected when consecutive tangents turn more than this allows
    min_tangent_dot: float = 0.9

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds_init <= self.ds_max:
            raise ValueError("need 0 < ds_min <= ds_init <= ds_max")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")

    def replace(self, **changes) -> "ContinuationSettings":
        return replace(self, **changes)


class NewtonResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual_norm: float


def newton_correct(residual_fn, guess, settings=ContinuationSettings()) -> NewtonResult:
    """Solve ``r(u) = 0`` for square systems by Newton's method.

    ``residual_fn(u)`` returns ``(r, J)``. Convergence is declared when the
    infinity norm of the residual drops below ``settings.newton_tol``.
    """
    u = np.array(guess, dtype=float, ndmin=1)
    r, J = residual_fn(u)
    norm = np.max(np.abs(r)) if np.size(r) else 0.0
    first = norm
    for it in range(settings.newton_max_iter + 1):
        if not np.isfinite(norm):
            raise NoConvergenceError("residual became non-finite")
        if norm <= settings.newton_tol:
            return NewtonResult(u, it, float(norm))
        if it == settings.newton_max_iter or norm > 1e6 * max(first, 1.0):
            break
        J = np.atleast_2d(J)
        try:
            with warnings.catch_warnings():
                # singular pivots are detected explicitly below
                warnings.simplefilter("ignore", la.LinAlgWarning)
                lu = la.lu_factor(J, check_finite=False)
        except (la.LinAlgError, ValueError) as exc:
            raise SingularJacobianError(str(exc)) from exc
        if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * np.max(np.abs(np.diag(lu[0]))):
            raise SingularJacobianError("Jacobian is numerically singular")
        u = u - la.lu_solve(lu, np.atleast_1d(r), check_finite=False)
        r, J = residual_fn(u)
        norm = np.max(np.abs(r))
    raise NoConvergenceError(
        f"no convergence after {settings.newton_max_iter} iterations "
        f"(residual {norm:.3e})")


@dataclass
class BranchPoint:
    """One converged solution on a branch."""

    X: HarmonicVector
    omega: float
    aux: float | None
    tangent: np.ndarray
    u: np.ndarray = field(repr=False)
    arclength: float = 0.0
    amplitudes: np.ndarray = field(default=None, repr=False)
    phases: np.ndarray = field(default=None, repr=False)
    peak: np.ndarray = field(default=None, repr=False)
    residual_norm: float = 0.0


@dataclass
class Event:
    kind: str
    point: BranchPoint
    segment: int
    refined: bool
    monitor: float
    label: str = ""


@dataclass
class Branch:
    points: list = field(default_factory=list)
    events: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    status: str = "max_points"

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])

    def amplitude(self, k: int) -> np.ndarray:
        return np.array([p.amplitudes[k - 1] for p in self.points])

    def phase(self, k: int) -> np.ndarray:
        return np.array([p.phases[k - 1] for p in self.points])

    def events_of(self, kind: str) -> list:
        return [e for e in self.events if e.kind == kind]


class ExtendedSystem:
    """Underdetermined system with the frequency as last unknown.

    Subclasses provide :meth:`residual`, :meth:`harmonic_vector` and the
    point factory; everything else is shared.
    """

    model: SystemModel
    grid: HarmonicGrid

    @property
    def n_coefficients(self) -> int:
        return self.grid.size * self.model.n

    def residual(self, u):
        raise NotImplementedError

    def harmonic_vector(self, u) -> HarmonicVector:
        return HarmonicVector(u[:self.n_coefficients],
                              self.grid.with_omega(u[-1]), self.model.n)

    def aux(self, u):
        return None

    def phase_lag(self, u, k: int, dof: int) -> float:
        return harmonic_amplitude_phase(self.harmonic_vector(u), dof, k).phase

    def make_point(self, u, tangent, arclength=0.0) -> BranchPoint:
        X = self.harmonic_vector(u)
        dof = self.model.forcing_dof
        hp = [harmonic_amplitude_phase(X, dof, j) for j in range(1, X.grid.n_harmonics + 1)]
        r, _ = self.residual(u)
        return BranchPoint(
            X=X, omega=float(u[-1]), aux=self.aux(u), tangent=np.array(tangent),
            u=np.array(u), arclength=arclength,
            amplitudes=np.array([h.amplitude for h in hp]),
            phases=np.array([h.phase for h in hp]),
            peak=peak_amplitude(X), residual_norm=float(np.max(np.abs(r))))

    def tangent(self, u, reference=None):
        """Unit tangent at ``u``, oriented along ``reference`` when given."""
        _, J = self.residual(u)
        return tangent_vector(J, reference)

    # monitors -------------------------------------------------------------
    def amplitude_rate(self, u, t, k: int, dof: int) -> float:
        """Derivative of the harmonic-``k`` amplitude along direction ``t``."""
        n = self.model.n
        i_s = (2 * k - 1) * n + dof
        i_c = 2 * k * n + dof
        s, c = u[i_s], u[i_c]
        a = math.hypot(s, c)
        if a == 0:
            return 0.0
        return (s * t[i_s] + c * t[i_c]) / a


def tangent_vector(J, reference=None, direction: int = 1) -> np.ndarray:
    """Null vector of the ``N x (N + 1)`` Jacobian ``J``, unit length."""
    J = np.atleast_2d(J)
    m = J.shape[1]
    t = None
    if reference is not None:
        bordered = np.vstack([J, reference])
        rhs = np.zeros(m)
        rhs[-1] = 1.0
        try:
            t = la.solve(bordered, rhs, check_finite=False)
            if not np.all(np.isfinite(t)):
                t = None
        except la.LinAlgError:
            t = None
    if t is None:
        # full QR of J^T: the last column spans the null space
        q, _ = la.qr(J.T)
        t = q[:, -1]
        if reference is not None:
            sign = np.sign(t @ reference)
        else:
            sign = np.sign(t[-1]) * direction if abs(t[-1]) > 1e-12 else 1.0
        t = t * (sign if sign != 0 else 1.0)
    t = t / np.linalg.norm(t)
    if reference is not None and t @ reference < 0:
        t = -t
    return t


def correct_on_hyperplane(system: ExtendedSystem, u_pred, t, settings) -> NewtonResult:
    """Newton correction constrained to ``t^T (u - u_pred) = 0``."""
    def fn(u):
        if u[-1] <= 0.0:  # iterate left the physical range; let the caller shrink the step
            raise NoConvergenceError(f"Newton iterate reached omega={u[-1]:.3g}")
        r, J = system.residual(u)
        return np.append(r, t @ (u - u_pred)), np.vstack([J, t])
    return newton_correct(fn, u_pred, settings)


def _segment_distance(p, a, b) -> float:
    ab = b - a
    denom = ab @ ab
    s = 0.0 if denom == 0 else np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + s * ab)))


def continue_branch(system: ExtendedSystem, start, settings=ContinuationSettings(),
                    omega_bounds=(0.0, np.inf),
                    stop: Callable[[BranchPoint], bool] | None = None,
                    detect_closure: bool = True) -> Branch:
    """Trace a solution branch by pseudo-arclength continuation.

    Parameters
    ----------
    system : ExtendedSystem
        Residual with one more unknown than equations.
    start : BranchPoint or array_like
        Converged starting point (or its unknown vector).
    omega_bounds : (float, float)
        Frequency window; tracing stops at the first point outside it.
    stop : callable, optional
        Extra termination test evaluated on every accepted point.
    detect_closure : bool
        Stop when the branch returns to its starting point (isolas).

    Returns
    -------
    Branch
        ``status`` is one of ``max_points``, ``bounds``, ``closed``,
        ``stopped`` or ``stall``.
    """
    u0 = np.array(start.u if isinstance(start, BranchPoint) else start, dtype=float)
    r0, J0 = system.residual(u0)
    if np.max(np.abs(r0)) > 10 * settings.newton_tol:
        raise NoConvergenceError(
            f"start point not converged (residual {np.max(np.abs(r0)):.3e})")
    ref = start.tangent if isinstance(start, BranchPoint) and start.tangent is not None \
        and np.size(start.tangent) == u0.size else None
    if ref is not None:
        t0 = tangent_vector(J0, settings.direction * ref)
    else:
        t0 = tangent_vector(J0, None, settings.direction)
    branch = Branch(metadata={"settings": settings})
    branch.points.append(system.make_point(u0, t0, 0.0))
    u, t, s = u0, t0, 0.0
    ds = settings.ds_init
    while len(branch.points) < settings.max_points:
        u_pred = u + ds * t
        try:
            res = correct_on_hyperplane(system, u_pred, t, settings)
            t_new = system.tangent(res.x, t)
            step = np.linalg.norm(res.x - u)
            ok = (t_new @ t >= settings.min_tangent_dot and step <= 2.0 * ds)
        except ContinuationError:
            ok = False
        if not ok:
            ds *= 0.5
            if ds < settings.ds_min:
                branch.status = "stall"
                log.warning("continuation stalled at omega=%.6g", u[-1])
                break
            continue
        s += step
        point = system.make_point(res.x, t_new, s)
        branch.points.append(point)
        closed = (detect_closure and len(branch.points) > 10 and s > 4 * step
                  and t_new @ t0 > 0.5
                  and _segment_distance(u0, u, res.x) < 0.25 * step)
        u, t = res.x, t_new
        if res.iterations < settings.target_iter:
            ds = min(ds * 1.3, settings.ds_max)
        if closed:
            branch.status = "closed"
            break
        if not omega_bounds[0] <= u[-1] <= omega_bounds[1]:
            branch.status = "bounds"
            break
        if stop is not None and stop(point):
            branch.status = "stopped"
            break
    return branch


# ---------------------------------------------------------------------------
# events

@dataclass(frozen=True)
class EventSpec:
    """Scalar monitor definition.

    ``kind`` is ``phase_target`` (phase lag of harmonic ``harmonic`` minus
    ``target``, wrapped), ``amplitude_max`` (rate of the harmonic amplitude,
    maxima only), ``fold`` (d omega / ds) or ``forcing_turn`` (rate of the
    equivalent forcing on PRNM branches).
    """

    kind: str
    harmonic: int = 1
    target: float = math.pi / 2
    dof: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("phase_target", "amplitude_max", "fold", "forcing_turn"):
            raise ValueError(f"unknown event kind {self.kind!r}")


def monitor_value(system: ExtendedSystem, spec: EventSpec, u, t) -> float:
    dof = system.model.forcing_dof if spec.dof is None else spec.dof
    if spec.kind == "phase_target":
        return float(wrap_difference(system.phase_lag(u, spec.harmonic, dof) - spec.target))
    if spec.kind == "amplitude_max":
        return system.amplitude_rate(u, t, spec.harmonic, dof)
    if spec.kind == "fold":
        return float(t[-1])
    return system.forcing_rate(u, t)


def _harmonic_alive(system, spec, u, floor=1e-9) -> bool:
    dof = system.model.forcing_dof if spec.dof is None else spec.dof
    n = system.model.n
    k = spec.harmonic
    return math.hypot(u[(2 * k - 1) * n + dof], u[2 * k * n + dof]) > floor


def _is_crossing(spec, m0, m1) -> bool:
    if spec.kind == "phase_target":
        # a jump across the +-pi seam is not a crossing
        if abs(m0) > math.pi / 2 or abs(m1) > math.pi / 2:
            return False
    if spec.kind == "amplitude_max":
        return m0 > 0 >= m1
    return (m0 > 0 >= m1) or (m0 < 0 <= m1)


def refine_event(system, spec, p0: BranchPoint, p1: BranchPoint, settings,
                 tol: float = 1e-8):
    """Locate a monitor root between two consecutive branch points.

    The root is bracketed in the arclength offset ``sigma`` along the tangent
    of ``p0``; every trial point is re-corrected onto the branch.
    Returns ``(BranchPoint, monitor, refined)``.
    """
    t0 = p0.tangent
    sigma_end = float(t0 @ (p1.u - p0.u))
    cache = {}

    def g(sigma):
        if sigma == 0.0:
            u, t = p0.u, p0.tangent
        else:
            res = correct_on_hyperplane(system, p0.u + sigma * t0, t0, settings)
            u = res.x
            t = system.tangent(u, t0)
        val = monitor_value(system, spec, u, t)
        cache[sigma] = (u, t, val)
        return val

    g_end = monitor_value(system, spec, p1.u, p1.tangent)
    cache[sigma_end] = (p1.u, p1.tangent, g_end)
    try:
        g0 = g(0.0)
        if g0 == 0.0:
            sigma = 0.0
        elif g_end == 0.0:
            sigma = sigma_end
        else:
            sigma = brentq(g, 0.0, sigma_end, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=200)
            if sigma not in cache:
                g(sigma)
        u, t, val = cache[sigma]
        refined = abs(val) < tol
        if not refined:
            # fall back to the best trial point seen by the root finder
            best = min(cache.items(), key=lambda kv: abs(kv[1][2]))
            u, t, val = best[1]
            refined = abs(val) < tol
    except (ContinuationError, ValueError) as exc:
        log.debug("event refinement failed: %s", exc)
        u, t = p0.u, p0.tangent
        val = monitor_value(system, spec, u, t)
        refined = False
    s = p0.arclength + float(np.linalg.norm(u - p0.u))
    return system.make_point(u, t, s), float(val), refined


def detect_events(system: ExtendedSystem, branch: Branch, specs,
                  settings=ContinuationSettings(), refine: bool = True) -> list:
    """Find and refine monitor sign changes along ``branch``.

    Events are appended to ``branch.events`` (ordered by arclength) and
    returned.
    """
    found = []
    pts = branch.points
    for spec in specs:
        values = [monitor_value(system, spec, p.u, p.tangent) for p in pts]
        for i in range(len(pts) - 1):
            if not _is_crossing(spec, values[i], values[i + 1]):
                continue
            if spec.kind == "phase_target" and not (
                    _harmonic_alive(system, spec, pts[i].u)
                    and _harmonic_alive(system, spec, pts[i + 1].u)):
                continue
            if refine:
                point, val, ok = refine_event(system, spec, pts[i], pts[i + 1], settings)
            else:
                point, val, ok = pts[i], values[i], False
            found.append(Event(spec.kind, point, i, ok, val, spec.label))
    found.sort(key=lambda e: (e.segment, e.point.arclength))
    branch.events.extend(found)
    branch.events.sort(key=lambda e: (e.segment, e.point.arclength))
    return found


# ---------------------------------------------------------------------------
# forced response (NFRC) problem

class ForcedResponseSystem(ExtendedSystem):
    """``A(omega) X + F_nl(X) - F_ext = 0`` with unknowns ``(X, omega)``."""

    def __init__(self, model: SystemModel, grid: HarmonicGrid, f=None, n_time=None):
        self.model = model
        self.grid = grid
        self.f = model.forcing_amplitude if f is None else float(f)
        self.n_time = n_time

    def residual(self, u):
        X = self.harmonic_vector(u)
        rep = hbm_residual_forced(self.model, X, self.f, self.n_time)
        return rep.residual, np.column_stack([rep.jacobian_X, rep.jacobian_param])

    def vector(self, X: HarmonicVector) -> np.ndarray:
        return np.append(X.coefficients, X.grid.omega)

    def solve_at(self, omega, guess=None, settings=ContinuationSettings(),
                 ramp_steps: int = 16) -> NewtonResult:
        """Newton solve at fixed frequency.

        Without a guess the linear response is used; if Newton fails from
        there the forcing is ramped up from zero in ``ramp_steps`` stages,
        which follows the solution connected to the linear one.
        """
        N = self.n_coefficients
        if guess is not None:
            X0 = np.asarray(
                guess.coefficients if isinstance(guess, HarmonicVector) else guess, float)
            return newton_correct(self._fixed_omega(omega, self.f), X0, settings)
        try:
            return newton_correct(self._fixed_omega(omega, self.f),
                                  self._linear_response(omega, self.f), settings)
        except ContinuationError:
            if ramp_steps < 2:
                raise
        x = np.zeros(N)
        for level in np.linspace(self.f / ramp_steps, self.f, ramp_steps):
            res = newton_correct(self._fixed_omega(omega, level), x, settings)
            x = res.x
        return res

    def _linear_response(self, omega, f):
        grid = self.grid.with_omega(omega)
        try:
            return np.linalg.solve(build_dynamic_stiffness(self.model, grid),
                                   forcing_coefficients(self.model, grid, f))
        except np.linalg.LinAlgError:  # undamped linear resonance
            return np.zeros(self.n_coefficients)

    def _fixed_omega(self, omega, f):
        grid = self.grid.with_omega(omega)
        model, n_time = self.model, self.n_time

        def fn(x):
            rep = hbm_residual_forced(model, HarmonicVector(x, grid, model.n), f, n_time)
            return rep.residual, rep.jacobian_X
        return fn

    def start_point(self, omega, guess=None, settings=ContinuationSettings()) -> BranchPoint:
        """Converged point at ``omega`` with its tangent oriented towards increasing omega."""
        res = self.solve_at(omega, guess, settings)
        u = np.append(res.x, omega)
        return self.make_point(u, tangent_vector(self.residual(u)[1]))


def multistart_seed(model: SystemModel, omega: float, k: int, nu: int = 1, f=None,
                    amplitudes=(0.5, 1.0, 2.0), n_phases: int = 8,
                    n_harmonics: int | None = None, min_amplitude: float = 1e-2,
                    settings=ContinuationSettings(newton_max_iter=40)) -> HarmonicVector:
    """Periodic orbit with harmonic-``k`` content at a fixed frequency.

    Newton is restarted from the ``T``-periodic response plus a harmonic-``k``
    perturbation of each amplitude and ``n_phases`` phases, optionally with a
    constant offset or a perturbation of the partner harmonic ``2 nu - k``
    (which couples parametrically to ``k`` through the forcing). The first
    converged orbit with ``A_k > min_amplitude`` is returned.

    Raises
    ------
    NoConvergenceError
        If no start converges to such an orbit.
    """
    n_harmonics = 8 * nu if n_harmonics is None else n_harmonics
    grid = HarmonicGrid(n_harmonics, nu, omega)
    system = ForcedResponseSystem(model, grid, f)
    n = model.n
    dof = model.forcing_dof
    try:
        base = system.solve_at(omega, None, settings).x
    except ContinuationError:
        base = np.zeros(system.n_coefficients)
    partner = 2 * nu - k
    for a in amplitudes:
        for theta in np.linspace(0.0, 2 * np.pi, n_phases, endpoint=False):
            for variant in ("plain", "offset", "partner"):
                if variant == "partner" and not (0 < partner <= n_harmonics and partner != k):
                    continue
                x = base.copy()
                x[(2 * k - 1) * n + dof] += a * math.cos(theta)
                x[2 * k * n + dof] += a * math.sin(theta)
                if variant == "offset":
                    x[dof] += 0.5 * a
                elif variant == "partner":
                    x[(2 * partner - 1) * n + dof] += 0.5 * a * math.sin(theta)
                    x[2 * partner * n + dof] += 0.5 * a * math.cos(theta)
                try:
                    res = system.solve_at(omega, x, settings)
                except ContinuationError:
                    continue
                X = HarmonicVector(res.x, grid, n)
                if harmonic_amplitude_phase(X, dof, k).amplitude > min_amplitude:
                    return X
    raise NoConvergenceError(
        f"no orbit with harmonic {k} content found at omega={omega}")


def default_nfrc_events(k: int = 1, nu: int = 1, target: float | None = None) -> list:
    if target is None:
        target = math.pi / 2 if (k % 2 and nu % 2) else 3 * math.pi / (4 * nu)
    return [EventSpec("phase_target", k, target),
            EventSpec("amplitude_max", k),
            EventSpec("fold")]


def trace_nfrc(model: SystemModel, omega_range, f=None, nu: int = 1,
               n_harmonics: int | None = None, settings=ContinuationSettings(),
               events=None, start_guess=None, n_time=None, omega_start=None) -> Branch:
    """Frequency response curve from ``omega_range[0]`` to ``omega_range[1]``.

    The branch starts from the Newton solution at the lower bound (zero
    guess, or ``start_guess``) unless ``omega_start`` is given.
    """
    n_harmonics = 8 * nu if n_harmonics is None else n_harmonics
    lo, hi = omega_range
    w0 = lo if omega_start is None else omega_start
    grid = HarmonicGrid(n_harmonics, nu, w0)
    system = ForcedResponseSystem(model, grid, f, n_time)
    start = system.start_point(w0, start_guess, settings)
    branch = continue_branch(system, start, settings, (lo, hi))
    branch.metadata.update(forcing=system.f, nu=nu, n_harmonics=n_harmonics, system=system)
    if events is None:
        events = default_nfrc_events(1, nu)
    detect_events(system, branch, events, settings)
    return branch
