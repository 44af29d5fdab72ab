"""Deformation measures at material points: F, J, C, E, F_dot, E_dot.

All functions are pure; `ElementState` is the per-element view of the global
unknowns (columns of N are the vector unknowns e_i, in basis order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass
class ElementState:
    """Nodal unknowns N (3 x n_u), velocities N_dot, and the global DOF map."""

    N: np.ndarray
    N_dot: np.ndarray
    dof_map: np.ndarray

    def __post_init__(self):
        self.N = np.ascontiguousarray(self.N, dtype=float)
        self.N_dot = np.ascontiguousarray(self.N_dot, dtype=float)
        self.dof_map = np.asarray(self.dof_map, dtype=np.int64)
        n_u = self.N.shape[1]
        if self.N.shape[0] != 3 or self.N_dot.shape != self.N.shape:
            raise ValueError("N and N_dot must both be 3 x n_u")
        if self.dof_map.shape != (n_u,) or len(set(self.dof_map.tolist())) != n_u:
            raise ValueError("dof_map must hold n_u unique global block indices")


@dataclass
class DeformationPoint:
    F: np.ndarray
    J: float
    C: np.ndarray
    E: np.ndarray
    F_dot: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    E_dot: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))


def deformation_gradient(N, H):
    """F = N H (sum of e_i h_i^T)."""
    return np.asarray(N) @ np.asarray(H)


def velocity_gradient(N_dot, H):
    """F_dot = N_dot H."""
    return np.asarray(N_dot) @ np.asarray(H)


def strain_measures(F):
    """Return (C, E, J) with C = F^T F, E = (C - I)/2, J = det F."""
    F = np.ascontiguousarray(F, dtype=float)
    C = F.T @ F
    E = 0.5 * (C - np.eye(3))
    return C, E, float(kernels.det3(F))


def strain_rate(F, F_dot):
    """E_dot = (F_dot^T F + F^T F_dot)/2; symmetric by construction."""
    A = np.asarray(F_dot).T @ np.asarray(F)
    return 0.5 * (A + A.T)


def deformation_point(state: ElementState, H) -> DeformationPoint:
    """Evaluate all deformation measures at one quadrature point."""
    F = deformation_gradient(state.N, H)
    C, E, J = strain_measures(F)
    F_dot = velocity_gradient(state.N_dot, H)
    E_dot = strain_rate(F, F_dot)
    return DeformationPoint(F=F, J=J, C=C, E=E, F_dot=F_dot, E_dot=E_dot)
