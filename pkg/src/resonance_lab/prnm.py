"""Phase resonance nonlinear modes (PRNMs).

The harmonic forcing is replaced by a velocity feedback built from the
``k``-th grid harmonic of the velocity at the forced DOF. The feedback is
filtered to harmonic ``k``, moved to the forcing frequency slot ``j = nu`` and
delayed by ``alpha`` when ``k`` or ``nu`` is even. Solving

    A(omega) X + F_nl(X) - mu B(omega) X = 0,   s_k(dof l) = 0

for ``(X, mu)`` along omega yields the locus of phase resonance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from math import gcd

import numpy as np

from .continuation import (Branch, BranchPoint, ContinuationSettings,
                           EventSpec, ExtendedSystem, continue_branch,
                           detect_events, newton_correct, tangent_vector)
from .hbm import (HarmonicGrid, HarmonicVector, aft_nonlinear_terms,
                  build_dynamic_stiffness, build_grad_operator,
                  dynamic_stiffness_domega, harmonic_amplitude_phase,
                  period_shift, time_shift, wrap_difference, wrap_phase)
from .model import SystemModel


class DegenerateSeedError(ValueError):
    """The seed has no content in the resonant harmonic."""


@dataclass(frozen=True)
class ResonanceSpec:
    """A ``k:nu`` resonance driven at DOF ``forcing_dof``."""

    k: int
    nu: int = 1
    forcing_dof: int = 0

    def __post_init__(self):
        if self.k < 1 or self.nu < 1:
            raise ValueError("k and nu must be positive")
        if gcd(self.k, self.nu) != 1:
            raise ValueError(f"k={self.k} and nu={self.nu} must be relatively prime")

    @property
    def odd(self) -> bool:
        return self.k % 2 == 1 and self.nu % 2 == 1

    @property
    def target_phase(self) -> float:
        return math.pi / 2 if self.odd else 3 * math.pi / (4 * self.nu)

    @property
    def rotation_angle(self) -> float:
        """Delay angle ``alpha * omega``, independent of omega."""
        if self.odd:
            return 0.0
        return self.nu / self.k * (math.pi / 2 - 3 * math.pi / (4 * self.nu))

    def label(self) -> str:
        return f"{self.k}:{self.nu}"

    @classmethod
    def parse(cls, text: str, forcing_dof: int = 0) -> "ResonanceSpec":
        k, nu = (int(v) for v in text.split(":"))
        return cls(k, nu, forcing_dof)


def resonance_delay(spec: ResonanceSpec, omega: float) -> float:
    """Feedback delay ``alpha = (pi/2 - 3 pi/(4 nu)) / omega_k`` (0 for odd/odd)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if spec.odd:
        return 0.0
    omega_k = spec.k * omega / spec.nu
    return (math.pi / 2 - 3 * math.pi / (4 * spec.nu)) / omega_k


def filter_matrix(spec: ResonanceSpec, grid: HarmonicGrid) -> np.ndarray:
    T = np.zeros((grid.size, grid.size))
    T[2 * spec.k - 1, 2 * spec.k - 1] = T[2 * spec.k, 2 * spec.k] = 1.0
    return T


def period_transfer_matrix(spec: ResonanceSpec, grid: HarmonicGrid) -> np.ndarray:
    """Moves the harmonic-``k`` block into the forcing slot ``j = nu``."""
    T = np.zeros((grid.size, grid.size))
    T[2 * spec.nu - 1, 2 * spec.k - 1] = T[2 * spec.nu, 2 * spec.k] = 1.0
    return T


def delay_rotation_matrix(spec: ResonanceSpec, grid: HarmonicGrid) -> np.ndarray:
    """Rotation by ``alpha omega`` of the forcing slot, identity elsewhere."""
    a = spec.rotation_angle
    R = np.eye(grid.size)
    s, c = 2 * spec.nu - 1, 2 * spec.nu
    R[s, s], R[s, c] = math.cos(a), math.sin(a)
    R[c, s], R[c, c] = -math.sin(a), math.cos(a)
    return R


def feedback_block(spec: ResonanceSpec, grid: HarmonicGrid) -> np.ndarray:
    """Single-DOF feedback map ``R_alpha T_T T_f nabla(omega)``."""
    if spec.k > grid.n_harmonics or spec.nu > grid.n_harmonics:
        raise ValueError(
            f"resonance {spec.label()} needs harmonics up to "
            f"{max(spec.k, spec.nu)}, grid has {grid.n_harmonics}")
    if spec.nu != grid.nu:
        raise ValueError(f"grid nu={grid.nu} does not match resonance nu={spec.nu}")
    return (delay_rotation_matrix(spec, grid) @ period_transfer_matrix(spec, grid)
            @ filter_matrix(spec, grid) @ build_grad_operator(grid))


def build_feedback_operator(spec: ResonanceSpec, grid: HarmonicGrid, n: int) -> np.ndarray:
    """Full feedback operator ``(R_alpha T_T T_f nabla) (x) I_l`` on ``n`` DOFs."""
    selector = np.zeros((n, n))
    selector[spec.forcing_dof, spec.forcing_dof] = 1.0
    return np.kron(feedback_block(spec, grid), selector)


def prnm_residual(model: SystemModel, X: HarmonicVector, mu: float,
                  spec: ResonanceSpec, n_time=None):
    """Balance equations plus the phase-condition row ``s_k(l) = 0``.

    Returns ``(r, J_X, J_mu, J_omega)``.
    """
    grid = X.grid
    n = X.n
    A = build_dynamic_stiffness(model, grid)
    B = build_feedback_operator(spec, grid, n)
    F_nl, dF = aft_nonlinear_terms(model, X, n_time)
    x = X.coefficients
    Bx = B @ x
    phase_row = np.zeros(x.size)
    phase_row[(2 * spec.k - 1) * n + spec.forcing_dof] = 1.0
    r = np.append(A @ x + F_nl - mu * Bx, phase_row @ x)
    J_X = np.vstack([A + dF - mu * B, phase_row])
    J_mu = np.append(-Bx, 0.0)
    # B is linear in omega through nabla; R_alpha has a constant angle
    J_w = np.append(dynamic_stiffness_domega(model, grid) @ x - mu * Bx / grid.omega, 0.0)
    return r, J_X, J_mu, J_w


@dataclass
class PrnmPoint(BranchPoint):
    f_eq: float = 0.0
    phase_lag: float = 0.0

    @property
    def mu(self) -> float:
        return self.aux


class PrnmSystem(ExtendedSystem):
    """Unknowns ``u = (X, mu, omega)``."""

    def __init__(self, model: SystemModel, spec: ResonanceSpec,
                 n_harmonics: int | None = None, n_time=None, omega: float = 1.0):
        if spec.forcing_dof != model.forcing_dof:
            spec = ResonanceSpec(spec.k, spec.nu, model.forcing_dof)
        self.model = model
        self.spec = spec
        n_harmonics = 8 * spec.nu if n_harmonics is None else n_harmonics
        self.grid = HarmonicGrid(n_harmonics, spec.nu, omega)
        self.n_time = n_time

    def residual(self, u):
        X = self.harmonic_vector(u)
        r, J_X, J_mu, J_w = prnm_residual(self.model, X, u[-2], self.spec, self.n_time)
        return r, np.column_stack([J_X, J_mu, J_w])

    def vector(self, X: HarmonicVector, mu: float) -> np.ndarray:
        return np.concatenate([X.coefficients, [mu, X.grid.omega]])

    def aux(self, u):
        return float(u[-2])

    def phase_lag(self, u, k, dof):
        X = self.harmonic_vector(u)
        if k == self.spec.k and dof == self.spec.forcing_dof:
            return retrieve_phase_lag(X, self.spec)
        return harmonic_amplitude_phase(X, dof, k).phase

    def forcing_level(self, u) -> float:
        X = self.harmonic_vector(u)
        a = harmonic_amplitude_phase(X, self.spec.forcing_dof, self.spec.k).amplitude
        return u[-2] * X.grid.frequency(self.spec.k) * a

    def forcing_rate(self, u, t) -> float:
        """Derivative of ``f_eq = mu omega_k A_k`` along ``t``."""
        k, nu = self.spec.k, self.spec.nu
        X = self.harmonic_vector(u)
        a = harmonic_amplitude_phase(X, self.spec.forcing_dof, k).amplitude
        da = self.amplitude_rate(u, t, k, self.spec.forcing_dof)
        mu, w = u[-2], u[-1]
        return k / nu * (t[-2] * w * a + mu * t[-1] * a + mu * w * da)

    def make_point(self, u, tangent, arclength=0.0) -> PrnmPoint:
        base = super().make_point(u, tangent, arclength)
        fields = {name: getattr(base, name) for name in BranchPoint.__dataclass_fields__}
        return PrnmPoint(**fields, f_eq=self.forcing_level(u),
                         phase_lag=retrieve_phase_lag(base.X, self.spec))

    def solve_at(self, omega, X0: HarmonicVector, mu0: float,
                 settings=ContinuationSettings()):
        """Newton on ``(X, mu)`` at fixed omega."""
        N = self.n_coefficients

        def fn(z):
            r, J = self.residual(np.append(z, omega))
            return r, J[:, :N + 1]
        return newton_correct(fn, np.append(X0.coefficients, mu0), settings)


def retrieve_phase_lag(X: HarmonicVector, spec: ResonanceSpec) -> float:
    """Phase lag of harmonic ``k`` w.r.t. the equivalent forcing, in ``[0, 2 pi)``."""
    hp = harmonic_amplitude_phase(X, spec.forcing_dof, spec.k)
    if hp.degenerate:
        raise DegenerateSeedError(f"harmonic {spec.k} vanishes at DOF {spec.forcing_dof}")
    raw = math.atan2(-X.cosine(spec.k, spec.forcing_dof), X.sine(spec.k, spec.forcing_dof))
    omega = X.grid.omega
    omega_k = X.grid.frequency(spec.k)
    alpha = resonance_delay(spec, omega)
    return wrap_phase(raw - omega_k * alpha - omega_k / omega * (raw - math.pi / 2))


def align_copy(X: HarmonicVector, spec: ResonanceSpec,
               companions: bool = True) -> HarmonicVector:
    """Equivalent orbit whose ``phi_k`` is closest to the target phase.

    Candidates are the forcing-period shifts of ``X`` and, with
    ``companions`` (odd nonlinearities only), of its companion. All of them
    solve the same forced equation.
    """
    target = spec.target_phase
    bases = [X, companion_solution(X)] if companions else [X]
    candidates = [period_shift(B, m) for B in bases for m in range(X.grid.nu)]

    def distance(Y):
        hp = harmonic_amplitude_phase(Y, spec.forcing_dof, spec.k)
        return abs(wrap_difference(hp.phase - target))
    return min(candidates, key=distance)


def init_from_nfrc_point(point, f: float, spec: ResonanceSpec):
    """Seed ``(X0, mu0)`` from a forced-response point.

    The orbit is shifted in time until harmonic ``k`` at the forced DOF has
    ``s_k = 0`` and ``c_k < 0``; ``mu0 = -f / (omega_k c_k)`` makes the
    feedback amplitude equal to ``f``.
    """
    X = point.X if isinstance(point, BranchPoint) else point
    hp = harmonic_amplitude_phase(X, spec.forcing_dof, spec.k)
    if hp.degenerate or hp.amplitude < 1e-14:
        raise DegenerateSeedError(f"harmonic {spec.k} vanishes in the seed point")
    delta = (hp.phase - math.pi / 2) / X.grid.frequency(spec.k)
    X0 = time_shift(X, delta)
    i_s = (2 * spec.k - 1) * X.n + spec.forcing_dof
    coefficients = X0.coefficients.copy()
    coefficients[i_s] = 0.0  # exact zero instead of rounding residue
    X0 = X0.with_coefficients(coefficients)
    c_k = X0.cosine(spec.k, spec.forcing_dof)
    return X0, -f / (X.grid.frequency(spec.k) * c_k)


def continue_prnm(model: SystemModel, spec: ResonanceSpec, init,
                  settings=ContinuationSettings(), omega_bounds=(0.0, np.inf),
                  n_harmonics=None, both_directions: bool = False,
                  stop=None, events=None, n_time=None,
                  amplitude_floor: float = 1e-6) -> Branch:
    """Trace a PRNM branch starting from ``init = (X0, mu0)``.

    The seed is first corrected at its own frequency. With
    ``both_directions`` the branch is traced both ways and stitched so that
    omega increases along the initial tangent. Tracing in a direction stops
    (status ``stopped``) once ``|c_k|`` drops below ``amplitude_floor`` or
    ``mu`` changes sign; the offending point is discarded.
    """
    X0, mu0 = init
    grid_nh = X0.grid.n_harmonics if n_harmonics is None else n_harmonics
    system = PrnmSystem(model, spec, grid_nh, n_time, X0.grid.omega)
    omega0 = X0.grid.omega
    res = system.solve_at(omega0, X0, mu0, settings)
    u0 = np.append(res.x, omega0)
    if u0[-2] < 0:
        raise DegenerateSeedError("seed converged to a negative feedback gain")
    t0 = tangent_vector(system.residual(u0)[1])
    start = system.make_point(u0, t0)
    i_c = 2 * spec.k * model.n + system.spec.forcing_dof

    def admissible(p):
        # c_k < 0 and mu > 0; the branch mirrors through X = 0 otherwise
        return p.u[i_c] < -amplitude_floor and p.aux > 0

    def halt(p):
        return not admissible(p) or (stop is not None and stop(p))

    def trace(direction):
        br = continue_branch(system, start, settings.replace(direction=direction),
                             omega_bounds, halt)
        if len(br.points) > 1 and not admissible(br.points[-1]):
            br.points.pop()
        return br

    fwd = trace(1)
    if both_directions:
        bwd = trace(-1)
        if fwd.status == "closed":
            branch = fwd
        else:
            pts = bwd.points[:0:-1] + fwd.points
            for p in bwd.points[1:]:
                p.tangent = -p.tangent
                p.arclength = -p.arclength
            s0 = pts[0].arclength
            for p in pts:
                p.arclength -= s0
            branch = Branch(points=pts, metadata=fwd.metadata,
                            status=f"{bwd.status}/{fwd.status}")
    else:
        branch = fwd
    branch.metadata.update(spec=spec, system=system, init_iterations=res.iterations)
    if events is None:
        events = [EventSpec("forcing_turn", spec.k), EventSpec("fold")]
    detect_events(system, branch, events, settings)
    return branch


def equivalent_forcing(point, spec: ResonanceSpec) -> float:
    """Forcing amplitude ``mu omega_k A_k`` reproduced by the feedback."""
    mu = point.aux if isinstance(point, BranchPoint) else point[1]
    X = point.X if isinstance(point, BranchPoint) else point[0]
    a = harmonic_amplitude_phase(X, spec.forcing_dof, spec.k).amplitude
    return mu * X.grid.frequency(spec.k) * a


def forcing_frame(X: HarmonicVector, mu: float, spec: ResonanceSpec):
    """Orbit of the forced system equivalent to a PRNM.

    The feedback signal ``a sin(wt) + b cos(wt)`` equals ``F sin(w t')`` with
    ``t' = t + psi / w``; returns ``(X(t' - psi / w), F)`` so that the forced
    residual with ``f = F`` vanishes.
    """
    B = feedback_block(spec, X.grid)
    v = B @ X.as_matrix()[:, spec.forcing_dof]
    a, b = mu * v[2 * spec.nu - 1], mu * v[2 * spec.nu]
    amplitude = math.hypot(a, b)
    psi = math.atan2(b, a)
    return time_shift(X, -psi / X.grid.omega), amplitude


def companion_solution(X: HarmonicVector, spec: ResonanceSpec | None = None) -> HarmonicVector:
    """Mirror orbit ``-x(t + T/2)``.

    For odd nonlinearities this is again a solution at the same forcing;
    harmonic ``j`` is rotated by ``j pi / nu`` and negated, so the phase lag
    of harmonic ``k`` moves by ``pi - k pi / nu``. ``spec`` is only checked
    against the grid.
    """
    if spec is not None and spec.nu != X.grid.nu:
        raise ValueError(f"grid nu={X.grid.nu} does not match resonance nu={spec.nu}")
    shifted = time_shift(X, X.grid.period / 2)
    return shifted.with_coefficients(-shifted.coefficients)


def forcing_level_crossings(branch: Branch, level: float) -> list:
    """Arclength-ordered interpolated crossings of ``f_eq = level``."""
    f = np.array([p.f_eq for p in branch.points])
    w = np.array([p.omega for p in branch.points])
    out = []
    for i in range(len(f) - 1):
        d0, d1 = f[i] - level, f[i + 1] - level
        if d0 == 0 or d0 * d1 < 0:
            s = 0.0 if d0 == 0 else d0 / (d0 - d1)
            out.append((i, w[i] + s * (w[i + 1] - w[i])))
    return out
