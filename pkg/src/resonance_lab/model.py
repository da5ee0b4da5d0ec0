"""Mechanical system models with polynomial stiffness nonlinearities.

The equations of motion are

    M x'' + C x' + K x + f_nl(x) = f e_l sin(omega t)

where ``f_nl`` is a sum of monomials ``a * x[source]**p`` acting on DOF
``target`` and ``e_l`` selects the forced DOF.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg as la


class InvalidModelError(ValueError):
    """Raised when a model definition violates its structural constraints."""


@dataclass(frozen=True)
class PolynomialTerm:
    """Monomial force ``coefficient * x[source_dof]**exponent`` on ``target_dof``."""

    target_dof: int
    source_dof: int
    exponent: int
    coefficient: float

    def __post_init__(self):
        if int(self.exponent) != self.exponent or self.exponent < 2:
            raise InvalidModelError(
                f"exponent must be an integer >= 2, got {self.exponent}")


@dataclass(frozen=True)
class SystemModel:
    """Discrete mechanical system with polynomial nonlinear stiffness.

    Parameters
    ----------
    M, C, K : (n, n) array_like
        Mass, damping and linear stiffness matrices.
    nonlinear_terms : tuple of PolynomialTerm
        Nonlinear restoring force contributions.
    forcing_dof : int
        Index of the DOF carrying the harmonic force.
    forcing_amplitude : float
        Amplitude ``f`` of ``f sin(omega t)``.
    """

    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    nonlinear_terms: tuple = ()
    forcing_dof: int = 0
    forcing_amplitude: float = 0.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        M = np.array(self.M, dtype=float, ndmin=2)
        C = np.array(self.C, dtype=float, ndmin=2)
        K = np.array(self.K, dtype=float, ndmin=2)
        n = M.shape[0]
        for label, mat in (("M", M), ("C", C), ("K", K)):
            if mat.shape != (n, n):
                raise InvalidModelError(
                    f"{label} must be {n}x{n}, got shape {mat.shape}")
            mat.setflags(write=False)
        if not np.all(np.isfinite(M)) or abs(np.linalg.det(M)) < 1e-300:
            raise InvalidModelError("mass matrix must be invertible")
        if not 0 <= self.forcing_dof < n:
            raise InvalidModelError(
                f"forcing_dof {self.forcing_dof} out of range for n={n}")
        if self.forcing_amplitude < 0:
            raise InvalidModelError("forcing amplitude must be non-negative")
        terms = tuple(self.nonlinear_terms)
        for term in terms:
            if not (0 <= term.target_dof < n and 0 <= term.source_dof < n):
                raise InvalidModelError(f"term {term} indexes a missing DOF")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "nonlinear_terms", terms)
        object.__setattr__(self, "forcing_amplitude",
                           float(self.forcing_amplitude))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def max_exponent(self) -> int:
        return max((t.exponent for t in self.nonlinear_terms), default=1)

    @property
    def is_odd(self) -> bool:
        """True when every nonlinear term is odd in the displacement."""
        return all(t.exponent % 2 == 1 for t in self.nonlinear_terms)

    def forcing_vector(self, f: float | None = None) -> np.ndarray:
        vec = np.zeros(self.n)
        vec[self.forcing_dof] = self.forcing_amplitude if f is None else f
        return vec

    def with_forcing(self, f: float) -> "SystemModel":
        return replace(self, forcing_amplitude=f)

    def nonlinear_arrays(self):
        """Term table as parallel arrays ``(target, source, exponent, coef)``."""
        terms = self.nonlinear_terms
        return (np.array([t.target_dof for t in terms], dtype=np.intp),
                np.array([t.source_dof for t in terms], dtype=np.intp),
                np.array([t.exponent for t in terms], dtype=np.intp),
                np.array([t.coefficient for t in terms], dtype=float))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "M": self.M.tolist(),
            "C": self.C.tolist(),
            "K": self.K.tolist(),
            "nonlinear": [
                {"target": t.target_dof, "source": t.source_dof,
                 "exponent": t.exponent, "coefficient": t.coefficient}
                for t in self.nonlinear_terms],
            "forcing_dof": self.forcing_dof,
            "forcing_amplitude": self.forcing_amplitude,
        }

    @classmethod
    def from_dict(cls, data: dict, name: str = "custom") -> "SystemModel":
        try:
            terms = tuple(
                PolynomialTerm(int(t["target"]), int(t["source"]),
                               int(t["exponent"]), float(t["coefficient"]))
                for t in data.get("nonlinear", []))
            model = cls(M=data["M"], C=data["C"], K=data["K"],
                        nonlinear_terms=terms,
                        forcing_dof=int(data.get("forcing_dof", 0)),
                        forcing_amplitude=float(
                            data.get("forcing_amplitude", 0.0)),
                        name=name)
        except KeyError as exc:
            raise InvalidModelError(f"model file missing key {exc}") from None
        if "n" in data and int(data["n"]) != model.n:
            raise InvalidModelError(
                f"declared n={data['n']} does not match matrices ({model.n})")
        return model


def build_duffing(m=1.0, c=0.01, k=1.0, k_nl=1.0, f=0.0) -> SystemModel:
    """Single-DOF Duffing oscillator ``m x'' + c x' + k x + k_nl x^3``."""
    if m <= 0 or k <= 0:
        raise InvalidModelError("Duffing mass and stiffness must be positive")
    terms = (PolynomialTerm(0, 0, 3, float(k_nl)),) if k_nl != 0 else ()
    return SystemModel(M=[[m]], C=[[c]], K=[[k]], nonlinear_terms=terms,
                       forcing_dof=0, forcing_amplitude=f, name="duffing")


def build_two_dof(f=0.0) -> SystemModel:
    """Two-DOF chain with a unit cubic spring on the first mass."""
    if f < 0:
        raise InvalidModelError("forcing amplitude must be non-negative")
    return SystemModel(
        M=np.eye(2),
        C=[[0.02, -0.01], [-0.01, 0.11]],
        K=[[2.0, -1.0], [-1.0, 2.0]],
        nonlinear_terms=(PolynomialTerm(0, 0, 3, 1.0),),
        forcing_dof=0, forcing_amplitude=f, name="two_dof")


BUILTIN_MODELS = {"duffing": build_duffing, "two_dof": build_two_dof}


def load_model(source: str, **overrides) -> SystemModel:
    """Built-in model by name (with keyword overrides) or a JSON model file."""
    if source in BUILTIN_MODELS:
        return BUILTIN_MODELS[source](**overrides)
    path = Path(source)
    if not path.exists():
        raise InvalidModelError(
            f"unknown model {source!r}: not a built-in "
            f"({', '.join(BUILTIN_MODELS)}) nor an existing file")
    model = SystemModel.from_dict(json.loads(path.read_text()),
                                  name=path.stem)
    if "f" in overrides:
        model = model.with_forcing(overrides.pop("f"))
    if overrides:
        raise InvalidModelError(
            f"overrides {sorted(overrides)} only apply to built-in models")
    return model


def evaluate_nonlinear_force(model: SystemModel, x, v=None) -> np.ndarray:
    """Nonlinear restoring force at displacement ``x``.

    ``x`` may carry extra leading axes (samples); the DOF axis is last.
    The velocity argument is accepted for interface symmetry only.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n:
        raise ValueError(f"expected {model.n} DOFs, got shape {x.shape}")
    if v is not None and np.shape(v) != x.shape:
        raise ValueError("velocity shape does not match displacement")
    out = np.zeros_like(x)
    for term in model.nonlinear_terms:
        out[..., term.target_dof] += (
            term.coefficient * x[..., term.source_dof] ** term.exponent)
    return out


def nonlinear_potential(model: SystemModel, x) -> np.ndarray:
    """Potential energy of the nonlinear terms.

    Only defined for self-coupled terms (``target == source``), which is the
    case for every shipped benchmark.
    """
    x = np.asarray(x, dtype=float)
    energy = np.zeros(x.shape[:-1])
    for term in model.nonlinear_terms:
        if term.target_dof != term.source_dof:
            raise ValueError("potential undefined for cross-coupled terms")
        p = term.exponent
        energy = energy + term.coefficient * x[..., term.source_dof] ** (p + 1) / (p + 1)
    return energy


def linear_natural_frequencies(model: SystemModel) -> np.ndarray:
    """Undamped linear natural frequencies (rad/s), ascending."""
    return linear_modes(model)[0]


def linear_modes(model: SystemModel):
    """Natural frequencies and mass-normalised mode shapes (columns)."""
    try:
        lam, vecs = la.eigh(model.K, model.M)
    except la.LinAlgError as exc:
        raise InvalidModelError(f"eigen-solver failure: {exc}") from exc
    order = np.argsort(lam)
    lam = lam[order]
    if np.any(lam < -1e-12 * max(1.0, abs(lam).max())):
        raise InvalidModelError("stiffness matrix is not positive semidefinite")
    return np.sqrt(np.clip(lam, 0.0, None)), vecs[:, order]
