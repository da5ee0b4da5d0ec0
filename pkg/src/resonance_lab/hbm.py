"""Harmonic balance on a subharmonic Fourier grid.

Displacements are expanded on the basis

    Q(t) = [1/sqrt(2), sin w_1 t, cos w_1 t, ..., sin w_Nh t, cos w_Nh t]

with ``w_j = j * omega / nu``. Coefficient vectors are basis-major, i.e. the
flat index of basis function ``b`` and DOF ``d`` is ``b * n + d``, which is
the layout produced by ``Q(t) (x) I_n``.

Nonlinear forces are evaluated by alternating frequency/time (AFT) on a
uniform sampling of one grid period ``nu * T``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .model import SystemModel

SQRT2 = np.sqrt(2.0)
DEFAULT_N_TIME = 1024


class AliasingError(ValueError):
    """Raised when the AFT sample count cannot resolve the nonlinearity."""


@dataclass(frozen=True)
class HarmonicGrid:
    """Harmonic truncation ``n_harmonics`` on the grid ``w_j = j omega / nu``."""

    n_harmonics: int
    nu: int = 1
    omega: float = 1.0

    def __post_init__(self):
        if self.nu < 1 or int(self.nu) != self.nu:
            raise ValueError(f"nu must be a positive integer, got {self.nu}")
        if self.n_harmonics < self.nu:
            raise ValueError(
                f"n_harmonics={self.n_harmonics} cannot represent the forcing "
                f"harmonic j=nu={self.nu}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @classmethod
    def default(cls, nu=1, omega=1.0):
        return cls(8 * nu, nu, omega)

    @property
    def size(self) -> int:
        return 2 * self.n_harmonics + 1

    @property
    def period(self) -> float:
        """Forcing period ``T``."""
        return 2 * np.pi / self.omega

    @property
    def grid_period(self) -> float:
        """Least common period ``nu T`` of all grid harmonics."""
        return self.nu * self.period

    def frequency(self, j) -> float:
        return j * self.omega / self.nu

    def frequencies(self) -> np.ndarray:
        return np.arange(1, self.n_harmonics + 1) * self.omega / self.nu

    def with_omega(self, omega: float) -> "HarmonicGrid":
        return HarmonicGrid(self.n_harmonics, self.nu, float(omega))

    @staticmethod
    def sin_index(j: int) -> int:
        return 2 * j - 1

    @staticmethod
    def cos_index(j: int) -> int:
        return 2 * j


@dataclass
class HarmonicVector:
    """Fourier coefficients of all DOFs on a harmonic grid."""

    coefficients: np.ndarray
    grid: HarmonicGrid
    n: int

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float).ravel()
        if self.coefficients.size != self.grid.size * self.n:
            raise ValueError(
                f"expected {self.grid.size * self.n} coefficients, "
                f"got {self.coefficients.size}")

    @classmethod
    def zeros(cls, grid: HarmonicGrid, n: int) -> "HarmonicVector":
        return cls(np.zeros(grid.size * n), grid, n)

    def as_matrix(self) -> np.ndarray:
        """View with shape ``(2 Nh + 1, n)``."""
        return self.coefficients.reshape(self.grid.size, self.n)

    def sine(self, j: int, dof: int) -> float:
        return self.coefficients[HarmonicGrid.sin_index(j) * self.n + dof]

    def cosine(self, j: int, dof: int) -> float:
        return self.coefficients[HarmonicGrid.cos_index(j) * self.n + dof]

    def copy(self) -> "HarmonicVector":
        return HarmonicVector(self.coefficients.copy(), self.grid, self.n)

    def with_coefficients(self, coefficients) -> "HarmonicVector":
        return HarmonicVector(coefficients, self.grid, self.n)


@dataclass
class ResidualReport:
    residual: np.ndarray
    jacobian_X: np.ndarray
    jacobian_param: np.ndarray


class HarmonicPhase(NamedTuple):
    amplitude: float
    phase: float
    degenerate: bool


def coefficient_index(j: int, part: str, dof: int, n: int) -> int:
    """Flat index of the sine (``part='s'``) or cosine coefficient."""
    b = HarmonicGrid.sin_index(j) if part == "s" else HarmonicGrid.cos_index(j)
    return b * n + dof


@lru_cache(maxsize=64)
def basis_matrix(n_harmonics: int, n_time: int) -> np.ndarray:
    """Samples of Q on ``n_time`` uniform phases over one grid period.

    Row ``i`` is Q evaluated at grid phase ``tau_i = 2 pi i / n_time``; the
    result is independent of omega and cached read-only.
    """
    tau = 2 * np.pi * np.arange(n_time) / n_time
    j = np.arange(1, n_harmonics + 1)
    gamma = np.empty((n_time, 2 * n_harmonics + 1))
    gamma[:, 0] = 1 / SQRT2
    gamma[:, 1::2] = np.sin(np.outer(tau, j))
    gamma[:, 2::2] = np.cos(np.outer(tau, j))
    gamma.setflags(write=False)
    return gamma


def alias_bound(model: SystemModel, n_harmonics: int) -> int:
    return 2 * model.max_exponent * n_harmonics + 1


def resolve_n_time(model: SystemModel, n_harmonics: int, n_time=None) -> int:
    """Validate an explicit sample count or choose the default one."""
    bound = alias_bound(model, n_harmonics)
    if n_time is None:
        n_time = DEFAULT_N_TIME
        while n_time < bound:
            n_time *= 2
        return n_time
    if n_time < bound:
        raise AliasingError(
            f"n_time={n_time} below alias-free bound {bound} for exponent "
            f"{model.max_exponent} and {n_harmonics} harmonics")
    return int(n_time)


def build_grad_operator(grid: HarmonicGrid) -> np.ndarray:
    """Time-derivative operator acting on coefficients of one DOF."""
    nabla = np.zeros((grid.size, grid.size))
    w = grid.frequencies()
    s = np.arange(1, grid.size, 2)
    nabla[s, s + 1] = -w
    nabla[s + 1, s] = w
    return nabla


def build_dynamic_stiffness(model: SystemModel, grid: HarmonicGrid) -> np.ndarray:
    """``nabla^2 (x) M + nabla (x) C + I (x) K``."""
    nabla = build_grad_operator(grid)
    return (np.kron(nabla @ nabla, model.M) + np.kron(nabla, model.C)
            + np.kron(np.eye(grid.size), model.K))


def dynamic_stiffness_domega(model: SystemModel, grid: HarmonicGrid) -> np.ndarray:
    """Derivative of the dynamic stiffness w.r.t. omega (uses d nabla/d omega = nabla/omega)."""
    nabla = build_grad_operator(grid)
    return (np.kron(2 * nabla @ nabla, model.M) + np.kron(nabla, model.C)) / grid.omega


def synthesize_samples(model_n: int, coefficients, n_harmonics: int, n_time: int):
    """Displacement samples ``(n_time, n)`` on the uniform grid-period sampling."""
    gamma = basis_matrix(n_harmonics, n_time)
    return gamma @ np.asarray(coefficients).reshape(2 * n_harmonics + 1, model_n)


def project_samples(samples, n_harmonics: int) -> np.ndarray:
    """Galerkin projection of uniform samples ``(n_time, n)`` onto Q.

    Inverse of :func:`synthesize_samples` for band-limited signals when
    ``n_time > 2 n_harmonics``. Returns the flat basis-major vector.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n_time = samples.shape[0]
    gamma = basis_matrix(n_harmonics, n_time)
    return (2.0 / n_time * gamma.T @ samples).ravel()


def aft_nonlinear_terms(model: SystemModel, X: HarmonicVector, n_time=None):
    """Fourier coefficients of the nonlinear forces and their Jacobian.

    Returns
    -------
    F_nl : ndarray
        Flat coefficient vector, same layout as ``X.coefficients``.
    dF_dX : ndarray
        Square Jacobian ``d F_nl / d X``.
    """
    n, nh = X.n, X.grid.n_harmonics
    size = X.coefficients.size
    if not model.nonlinear_terms:
        return np.zeros(size), np.zeros((size, size))
    n_time = resolve_n_time(model, nh, n_time)
    gamma = basis_matrix(nh, n_time)
    x = gamma @ X.as_matrix()
    forces = np.zeros_like(x)
    jac = np.zeros((X.grid.size, n, X.grid.size, n))
    scale = 2.0 / n_time
    for term in model.nonlinear_terms:
        xs = x[:, term.source_dof]
        p = term.exponent
        forces[:, term.target_dof] += term.coefficient * xs ** p
        w = term.coefficient * p * xs ** (p - 1)
        jac[:, term.target_dof, :, term.source_dof] += scale * (gamma.T @ (w[:, None] * gamma))
    F = (scale * gamma.T @ forces).ravel()
    return F, jac.reshape(size, size)


def forcing_coefficients(model: SystemModel, grid: HarmonicGrid, f=None) -> np.ndarray:
    """Coefficient vector of ``f sin(omega t)`` applied at the forcing DOF."""
    F = np.zeros(grid.size * model.n)
    F[coefficient_index(grid.nu, "s", model.forcing_dof, model.n)] = (
        model.forcing_amplitude if f is None else f)
    return F


def hbm_residual_forced(model: SystemModel, X: HarmonicVector, f=None,
                        n_time=None) -> ResidualReport:
    """Residual ``A(omega) X + F_nl(X) - F_ext`` with analytic Jacobians.

    The forcing amplitude defaults to ``model.forcing_amplitude``; the
    parameter Jacobian is taken w.r.t. omega.
    """
    grid = X.grid
    A = build_dynamic_stiffness(model, grid)
    F_nl, dF = aft_nonlinear_terms(model, X, n_time)
    r = A @ X.coefficients + F_nl - forcing_coefficients(model, grid, f)
    dr_dw = dynamic_stiffness_domega(model, grid) @ X.coefficients
    return ResidualReport(r, A + dF, dr_dw)


def synthesize_time_series(X: HarmonicVector, t) -> np.ndarray:
    """Evaluate ``x(t) = (Q(t) (x) I_n) X``; returns shape ``(len(t), n)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w = X.grid.frequencies()
    q = np.empty((t.size, X.grid.size))
    q[:, 0] = 1 / SQRT2
    q[:, 1::2] = np.sin(np.outer(t, w))
    q[:, 2::2] = np.cos(np.outer(t, w))
    return q @ X.as_matrix()


def synthesize_velocity(X: HarmonicVector, t) -> np.ndarray:
    nabla = build_grad_operator(X.grid)
    V = X.with_coefficients(np.kron(nabla, np.eye(X.n)) @ X.coefficients)
    return synthesize_time_series(V, t)


def harmonic_amplitude_phase(X: HarmonicVector, dof: int, k: int,
                             atol: float = 0.0) -> HarmonicPhase:
    """Amplitude and phase lag of harmonic ``k`` for ``x_k = A sin(w_k t - phi)``.

    The phase is mapped to ``[0, 2 pi)``. A vanishing amplitude (``<= atol``)
    returns phase 0 with ``degenerate=True``.
    """
    if not 1 <= k <= X.grid.n_harmonics:
        raise ValueError(f"harmonic {k} outside 1..{X.grid.n_harmonics}")
    s, c = X.sine(k, dof), X.cosine(k, dof)
    amplitude = float(np.hypot(s, c))
    if amplitude <= atol:
        return HarmonicPhase(amplitude, 0.0, True)
    return HarmonicPhase(amplitude, wrap_phase(np.arctan2(-c, s)), False)


def wrap_phase(phi):
    """Map angles into ``[0, 2 pi)``."""
    out = np.mod(phi, 2 * np.pi)
    # mod can round up to exactly 2 pi for tiny negative inputs
    return np.where(out >= 2 * np.pi, 0.0, out) if np.ndim(out) else (
        0.0 if out >= 2 * np.pi else float(out))


def wrap_difference(delta):
    """Map angle differences into ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(delta), 2 * np.pi)


def time_shift_matrix(grid: HarmonicGrid, delta: float) -> np.ndarray:
    """Coefficient map of ``x(t) -> x(t + delta)`` for one DOF."""
    R = np.zeros((grid.size, grid.size))
    R[0, 0] = 1.0
    for j, wj in enumerate(grid.frequencies(), start=1):
        a = wj * delta
        s, c = 2 * j - 1, 2 * j
        R[s, s], R[s, c] = np.cos(a), -np.sin(a)
        R[c, s], R[c, c] = np.sin(a), np.cos(a)
    return R


def time_shift(X: HarmonicVector, delta: float) -> HarmonicVector:
    """Orbit shifted in time, ``x(t + delta)``."""
    R = time_shift_matrix(X.grid, delta)
    return X.with_coefficients((R @ X.as_matrix()).ravel())


def period_shift(X: HarmonicVector, m: int) -> HarmonicVector:
    """Copy of a ``nu T`` orbit shifted by ``m`` forcing periods.

    Harmonic ``j`` rotates by ``2 pi j m / nu``; for ``nu > 1`` this gives the
    ``nu`` distinct copies of a subharmonic orbit at the same forcing.
    """
    return time_shift(X, m * X.grid.period)


def peak_amplitude(X: HarmonicVector, n_samples: int = 512) -> np.ndarray:
    """``max_t |x(t)|`` per DOF from a dense uniform sampling.

    The sample count is rounded up to a multiple of ``2 nu`` so that the
    sample set is invariant under half-period shifts.
    """
    n_samples = max(n_samples, 8 * X.grid.n_harmonics + 1)
    step = 2 * X.grid.nu
    n_samples = -(-n_samples // step) * step
    x = synthesize_samples(X.n, X.coefficients, X.grid.n_harmonics, n_samples)
    return np.abs(x).max(axis=0)
