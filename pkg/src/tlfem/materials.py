"""Constitutive laws: parameter containers and pointwise stress/tangent evaluations.

Two hyperelastic backbones are provided, optionally augmented with a
finite-strain Kelvin-Voigt viscous stress that is linear in the
Green-Lagrange strain rate:

* SVK:  Psi = lambda/2 tr(E)^2 + mu tr(E^2);  S = lambda tr(E) I + 2 mu E.
* Mooney-Rivlin (compressible): Psi = mu10 (I1bar - 3) + mu01 (I2bar - 3)
  + k/2 (J - 1)^2, with isochoric invariants I1bar = J^{-2/3} I1,
  I2bar = J^{-4/3} I2.  Requires det F > 0; J at or below ``kernels.J_FLOOR``
  raises :class:`InvertedElementError`.

The heavy lifting lives in :mod:`tlfem.kernels`; the wrappers here add
parameter validation and error reporting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvertedElementError

SVK_MODEL = 0
MOONEY_RIVLIN_MODEL = 1


@dataclass(frozen=True)
class SvkParams:
    lam: float
    mu: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"shear modulus must be positive, got {self.mu}")
        if self.lam < 0:
            raise ValueError(f"first Lame constant must be nonnegative, got {self.lam}")


@dataclass(frozen=True)
class MooneyRivlinParams:
    mu10: float
    mu01: float
    k: float

    def __post_init__(self):
        if self.mu10 < 0 or self.mu01 < 0:
            raise ValueError("mu10 and mu01 must be nonnegative")
        if self.mu10 + self.mu01 <= 0:
            raise ValueError("mu10 + mu01 must be positive")
        if self.k <= 0:
            raise ValueError(f"bulk modulus must be positive, got {self.k}")


@dataclass(frozen=True)
class KelvinVoigtParams:
    eta: float
    lambda_v: float

    def __post_init__(self):
        # nonnegativity is what makes the dissipation density a PSD quadratic form
        if self.eta < 0 or self.lambda_v < 0:
            raise ValueError("viscosity parameters must be nonnegative")


@dataclass(frozen=True)
class Material:
    """Elastic backbone plus optional viscous augmentation."""

    elastic: SvkParams | MooneyRivlinParams
    viscous: KelvinVoigtParams | None = None

    @property
    def model_code(self) -> int:
        return SVK_MODEL if isinstance(self.elastic, SvkParams) else MOONEY_RIVLIN_MODEL

    @property
    def elastic_params(self):
        e = self.elastic
        if isinstance(e, SvkParams):
            return e.lam, e.mu, 0.0
        return e.mu10, e.mu01, e.k

    @property
    def viscous_params(self):
        if self.viscous is None:
            return 0.0, 0.0
        return self.viscous.eta, self.viscous.lambda_v

    @property
    def has_viscosity(self) -> bool:
        eta, lam_v = self.viscous_params
        return eta > 0.0 or lam_v > 0.0


def lame_from_young_poisson(E, nu):
    """Standard (E, nu) -> (lambda, mu) conversion."""
    if E <= 0:
        raise ValueError(f"Young's modulus must be positive, got {E}")
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def _as_f(F):
    return np.ascontiguousarray(F, dtype=float)


def svk_energy(F, params: SvkParams) -> float:
    return float(kernels.svk_energy(_as_f(F), params.lam, params.mu))


def svk_stress(F, params: SvkParams):
    """First Piola-Kirchhoff stress P = F S."""
    return kernels.svk_piola(_as_f(F), params.lam, params.mu)


def svk_tangent_block(F, h_i, h_j, params: SvkParams):
    """Pointwise 3x3 integrand of d f_i / d e_j for the SVK law."""
    return kernels.svk_tangent_block(
        _as_f(F), np.ascontiguousarray(h_i, dtype=float), np.ascontiguousarray(h_j, dtype=float),
        params.lam, params.mu,
    )


def _check_j(F, context):
    J = float(kernels.det3(F))
    if J <= kernels.J_FLOOR:
        raise InvertedElementError(f"det F = {J:.3e} at or below floor in {context}")
    return J


def mr_energy(F, params: MooneyRivlinParams) -> float:
    F = _as_f(F)
    _check_j(F, "mr_energy")
    return float(kernels.mr_energy(F, params.mu10, params.mu01, params.k))


def mr_stress(F, params: MooneyRivlinParams):
    F = _as_f(F)
    _check_j(F, "mr_stress")
    return kernels.mr_piola(F, params.mu10, params.mu01, params.k)


def mr_tangent_block(F, h_i, h_j, params: MooneyRivlinParams):
    F = _as_f(F)
    _check_j(F, "mr_tangent_block")
    return kernels.mr_tangent_block(
        F, np.ascontiguousarray(h_i, dtype=float), np.ascontiguousarray(h_j, dtype=float),
        params.mu10, params.mu01, params.k,
    )


def stress(F, material: Material):
    if material.model_code == SVK_MODEL:
        return svk_stress(F, material.elastic)
    return mr_stress(F, material.elastic)


def energy_density(F, material: Material) -> float:
    if material.model_code == SVK_MODEL:
        return svk_energy(F, material.elastic)
    return mr_energy(F, material.elastic)


def kv_stress(F, E_dot, params: KelvinVoigtParams):
    """Viscous first Piola-Kirchhoff stress P_vis = F (2 eta E_dot + lambda_v tr(E_dot) I)."""
    return kernels.kv_piola(
        _as_f(F), np.ascontiguousarray(E_dot, dtype=float), params.eta, params.lambda_v
    )


def dissipation_density(E_dot, params: KelvinVoigtParams) -> float:
    """2 eta E_dot:E_dot + lambda_v tr(E_dot)^2, nonnegative for admissible params."""
    return float(
        kernels.dissipation_density(
            np.ascontiguousarray(E_dot, dtype=float), params.eta, params.lambda_v
        )
    )


def viscous_velocity_block(F, h_i, h_j, params: KelvinVoigtParams):
    """Analytic d(P_vis h_i)/d(e_dot_j) block used in the Newton matrix."""
    return kernels.viscous_velocity_block(
        _as_f(F), np.ascontiguousarray(h_i, dtype=float), np.ascontiguousarray(h_j, dtype=float),
        params.eta, params.lambda_v,
    )
