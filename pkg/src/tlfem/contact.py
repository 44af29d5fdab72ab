"""Penalty contact: damped Hertz normal law plus Mindlin tangential friction.

The normal law is compressive-only, F_n = max(0, k_n delta - gamma_n v_n) n,
with stiffness and damping derived from effective elastic properties and the
restitution coefficient.  Friction integrates a tangential spring displacement
delta_t, re-projected onto the current tangent plane each step, with a Coulomb
stick/slip cap; on slip the history is rewound so the spring force stays
consistent with the capped force.

Forces are evaluated explicitly at the start-of-step state and applied as
external point loads in action-reaction form; the implicit solve never sees
the nonsmooth branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConstructionError
from .constraints import AttachmentPoint


# -- geometry descriptors ----------------------------------------------------

@dataclass(frozen=True)
class SphereSphere:
    R_A: float
    R_B: float

    def __post_init__(self):
        if self.R_A <= 0 or self.R_B <= 0:
            raise ConstructionError("sphere radii must be positive")

    @property
    def R_eff(self):
        return 1.0 / (1.0 / self.R_A + 1.0 / self.R_B)


@dataclass(frozen=True)
class SpherePlane:
    R: float

    def __post_init__(self):
        if self.R <= 0:
            raise ConstructionError("sphere radius must be positive")

    @property
    def R_eff(self):
        return self.R


@dataclass(frozen=True)
class Patch:
    """Flat-on-flat style contact with a prescribed patch area."""

    A_patch: float

    def __post_init__(self):
        if self.A_patch <= 0:
            raise ConstructionError("patch area must be positive")


@dataclass(frozen=True)
class ContactParams:
    E_A: float
    E_B: float
    nu_A: float
    nu_B: float
    e: float
    mu: float
    geometry: SphereSphere | SpherePlane | Patch

    def __post_init__(self):
        if self.E_A <= 0 or self.E_B <= 0:
            raise ConstructionError("contact moduli must be positive")
        if not 0.0 < self.e <= 1.0:
            raise ConstructionError(f"restitution must lie in (0, 1], got {self.e}")
        if self.mu < 0:
            raise ConstructionError("friction coefficient must be nonnegative")
        # derived effective moduli must come out positive
        if self.E_eff <= 0 or self.G_eff <= 0:
            raise ConstructionError("effective moduli must be positive")

    @property
    def E_eff(self):
        return 1.0 / ((1.0 - self.nu_A ** 2) / self.E_A + (1.0 - self.nu_B ** 2) / self.E_B)

    @property
    def G_eff(self):
        G_A = self.E_A / (2.0 * (1.0 + self.nu_A))
        G_B = self.E_B / (2.0 * (1.0 + self.nu_B))
        return 1.0 / ((2.0 - self.nu_A) / G_A + (2.0 - self.nu_B) / G_B)

    @property
    def beta(self):
        ln_e = math.log(self.e)
        return ln_e / math.sqrt(ln_e * ln_e + math.pi * math.pi)


@dataclass
class ContactPairState:
    delta_t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    active: bool = False


@dataclass
class ContactKinematics:
    n: np.ndarray          # unit normal, B -> A
    delta: float           # penetration depth, > 0 in contact
    v_rel: np.ndarray      # v_A - v_B at the contact point
    v_n: float             # v_rel . n (negative on approach)
    v_t: np.ndarray        # tangential relative velocity
    m_eff: float
    x_c: np.ndarray


def make_kinematics(n, delta, v_rel, m_eff, x_c):
    n = np.asarray(n, dtype=float)
    v_rel = np.asarray(v_rel, dtype=float)
    v_n = float(n @ v_rel)
    v_t = v_rel - v_n * n
    return ContactKinematics(n=n, delta=float(delta), v_rel=v_rel, v_n=v_n, v_t=v_t,
                             m_eff=float(m_eff), x_c=np.asarray(x_c, dtype=float))


class DerivedProps(NamedTuple):
    E_eff: float
    G_eff: float
    a: float
    S_n: float
    k_n: float
    k_t: float
    beta: float
    gamma_n: float
    gamma_t: float


def effective_properties(params: ContactParams, kin: ContactKinematics) -> DerivedProps:
    """Stiffness/damping coefficients from materials, geometry, and penetration."""
    geom = params.geometry
    if isinstance(geom, Patch):
        a = math.sqrt(geom.A_patch / math.pi)
    else:
        if kin.delta <= 0.0:
            a = 0.0
        else:
            a = math.sqrt(geom.R_eff * kin.delta)
    E_eff = params.E_eff
    G_eff = params.G_eff
    S_n = 2.0 * E_eff * a
    k_n = (4.0 / 3.0) * E_eff * a
    k_t = 8.0 * G_eff * a
    beta = params.beta
    root = math.sqrt(5.0 / 6.0)
    gamma_n = -2.0 * root * beta * math.sqrt(S_n * kin.m_eff)
    gamma_t = -2.0 * root * beta * math.sqrt(kin.m_eff * k_t)
    return DerivedProps(E_eff, G_eff, a, S_n, k_n, k_t, beta, gamma_n, gamma_t)


def normal_force(kin: ContactKinematics, derived: DerivedProps):
    if kin.delta <= 0.0:
        return np.zeros(3)
    mag = derived.k_n * kin.delta - derived.gamma_n * kin.v_n
    return max(0.0, mag) * kin.n


def tangential_force(kin: ContactKinematics, derived: DerivedProps,
                     state: ContactPairState, dt, F_n, mu):
    """Mindlin spring force with Coulomb cap and history rewind; mutates state."""
    n = kin.n
    proj = np.eye(3) - np.outer(n, n)
    delta_t = proj @ (state.delta_t + dt * kin.v_t)
    if derived.k_t == 0.0:
        state.delta_t = np.zeros(3)
        state.active = True
        return np.zeros(3)
    trial = -derived.k_t * delta_t - derived.gamma_t * kin.v_t
    cap = mu * float(np.linalg.norm(F_n))
    norm_trial = float(np.linalg.norm(trial))
    if norm_trial <= cap or norm_trial == 0.0:
        F_t = trial
    else:
        F_t = (cap / norm_trial) * trial
        delta_t = -(F_t + derived.gamma_t * kin.v_t) / derived.k_t
    state.delta_t = delta_t
    state.active = True
    return F_t


def reset_on_separation(state: ContactPairState):
    state.delta_t = np.zeros(3)
    state.active = False
    return state


def smooth_max(x, epsilon):
    """Differentiable stand-in for max(0, x)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return 0.5 * (x + math.sqrt(x * x + epsilon * epsilon))


# -- pairs: narrow phase + force accumulation --------------------------------

def _attached_mass(system, att: AttachmentPoint, body_id):
    """Shape-weighted nodal mass at the contact point, with a total-mass
    fallback when the weighted value is not usable."""
    lumped = system.lumped_block_mass()
    m = float(att.s @ lumped[att.dof_map])
    if m > 0.0:
        return m
    return system.body_mass(system.body_by_id[body_id])


class Plane:
    """Static half-space obstacle: points with (x - p0) . n < 0 are inside."""

    def __init__(self, point, normal):
        self.p0 = np.asarray(point, dtype=float)
        n = np.asarray(normal, dtype=float)
        nn = np.linalg.norm(n)
        if nn == 0:
            raise ConstructionError("plane normal must be nonzero")
        self.n = n / nn


class SpherePlanePair:
    """A sphere rigidly carried by a body material point against a static plane.

    A radius of zero gives the bare node-vs-plane narrow phase (use a Patch
    geometry in that case so the contact area stays defined).
    """

    def __init__(self, system, body_id, element_index, u, radius, plane: Plane,
                 params: ContactParams):
        if radius < 0:
            raise ConstructionError("radius must be nonnegative")
        if radius == 0 and not isinstance(params.geometry, Patch):
            raise ConstructionError("zero-radius contact needs a Patch geometry")
        self.att = AttachmentPoint(body_id, element_index, u, system=system)
        self.body_id = body_id
        self.radius = float(radius)
        self.plane = plane
        self.params = params
        self.state = ContactPairState()

    def kinematics(self, system, q, v):
        qb = q.reshape(-1, 3)
        vb = v.reshape(-1, 3)
        x = self.att.eval(qb)
        gap = float((x - self.plane.p0) @ self.plane.n)
        delta = self.radius - gap
        if delta <= 0.0:
            return None
        v_rel = self.att.s @ vb[self.att.dof_map]
        m_eff = _attached_mass(system, self.att, self.body_id)
        x_c = x - self.radius * self.plane.n
        return make_kinematics(self.plane.n, delta, v_rel, m_eff, x_c)

    def accumulate(self, system, q, v, dt, out, counters=None):
        kin = self.kinematics(system, q, v)
        if kin is None:
            reset_on_separation(self.state)
            return None
        derived = effective_properties(self.params, kin)
        F_n = normal_force(kin, derived)
        F_t = tangential_force(kin, derived, self.state, dt, F_n, self.params.mu)
        F = F_n + F_t
        system.point_load(self.body_id, self.att.element_index, self.att.u, F, out=out)
        return kin, F_n, F_t


class SphereSpherePair:
    """Two spheres, each carried by a material point of a (possibly different) body."""

    def __init__(self, system, side_a, side_b, params: ContactParams):
        # side = (body_id, element_index, u, radius)
        if not isinstance(params.geometry, SphereSphere):
            raise ConstructionError("sphere-sphere pair needs SphereSphere geometry")
        self.body_a, ea, ua, self.R_A = side_a
        self.body_b, eb, ub, self.R_B = side_b
        self.att_a = AttachmentPoint(self.body_a, ea, ua, system=system)
        self.att_b = AttachmentPoint(self.body_b, eb, ub, system=system)
        self.params = params
        self.state = ContactPairState()

    def kinematics(self, system, q, v):
        qb = q.reshape(-1, 3)
        vb = v.reshape(-1, 3)
        x_a = self.att_a.eval(qb)
        x_b = self.att_b.eval(qb)
        d = x_a - x_b
        dist = float(np.linalg.norm(d))
        delta = self.R_A + self.R_B - dist
        if delta <= 0.0 or dist == 0.0:
            return None
        n = d / dist
        v_rel = self.att_a.s @ vb[self.att_a.dof_map] - self.att_b.s @ vb[self.att_b.dof_map]
        m_a = _attached_mass(system, self.att_a, self.body_a)
        m_b = _attached_mass(system, self.att_b, self.body_b)
        m_eff = 1.0 / (1.0 / m_a + 1.0 / m_b)
        x_c = x_b + (self.R_B - 0.5 * delta) * n
        return make_kinematics(n, delta, v_rel, m_eff, x_c)

    def accumulate(self, system, q, v, dt, out, counters=None):
        kin = self.kinematics(system, q, v)
        if kin is None:
            reset_on_separation(self.state)
            return None
        derived = effective_properties(self.params, kin)
        F_n = normal_force(kin, derived)
        F_t = tangential_force(kin, derived, self.state, dt, F_n, self.params.mu)
        F = F_n + F_t
        system.point_load(self.body_a, self.att_a.element_index, self.att_a.u, F, out=out)
        system.point_load(self.body_b, self.att_b.element_index, self.att_b.u, -F, out=out)
        return kin, F_n, F_t


def contact_forces(system, pairs, q, v, dt):
    """Evaluate all pairs serially (deterministic order) into one load vector."""
    out = np.zeros(system.n_dof)
    for pair in pairs:
        pair.accumulate(system, q, v, dt, out)
    return out
