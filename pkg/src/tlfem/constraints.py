"""Bilateral constraints: scalar primitives, Jacobian block scatter, joints, ALM state.

Every primitive is a scalar composition of *point evaluations*
``r = N s(u_P)``: differences of two evaluated points give directions or
separations, and the residual is a dot product (DP1, DP2, CD) or a squared
distance (DIST).  Because r is linear in the unknowns, each primitive's
Jacobian has one nonzero 1x3n_u row per attachment, of the form
``+/- w^T (s^T kron I3)`` with w one of the current difference vectors.

The set never forms C_q for the solver path; the augmented-Lagrangian term
C_q^T (lambda + rho c) is scattered block by block.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import ConstructionError
from .assembly import System


class PrimitiveKind(Enum):
    DP1 = "dp1"
    DP2 = "dp2"
    DIST = "dist"
    CD = "cd"


_CD_AXES = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}


class AttachmentPoint:
    """A material point on a body's element, or a fixed world point.

    Body attachments cache the shape vector s(u_P) and the element's global
    DOF map; world points have no DOFs and evaluate to a constant.
    """

    def __init__(self, body_id=None, element_index=None, u=None, world=None,
                 system: System | None = None):
        if world is not None:
            self.world = np.asarray(world, dtype=float).copy()
            self.body_id = None
            self.s = None
            self.dof_map = None
            return
        if system is None:
            raise ConstructionError("body attachments need the owning system")
        self.world = None
        self.body_id = body_id
        self.element_index = int(element_index)
        body = system.body_by_id[body_id]
        el = body.elements[self.element_index]
        self.u = np.asarray(u, dtype=float)
        self.s = el.basis.shape(self.u)  # raises DomainError outside the element
        self.dof_map = el.dof_map

    @property
    def is_world(self):
        return self.world is not None

    def eval(self, q_blocks):
        if self.world is not None:
            return self.world
        return self.s @ q_blocks[self.dof_map]


def attach(system, body_id, element_index, u):
    return AttachmentPoint(body_id, element_index, u, system=system)


def world_point(r):
    return AttachmentPoint(world=r)


def eval_point(q, attachment):
    return attachment.eval(np.asarray(q).reshape(-1, 3))


def _as_time_fn(f):
    if callable(f):
        return f
    val = float(f)
    return lambda t: val


class ConstraintPrimitive:
    """One scalar constraint row.

    points layout by kind:
      DP1/DP2: [P, Q, R, T]  with a = r_Q - r_P, b = r_T - r_R, c = a.b - f(t)
      DIST:    [P, Q]        with a = r_Q - r_P, c = (a.a - f(t)^2)/2
      CD:      [P, Q]        with a = r_Q - r_P, c = d.a - f(t), d a unit axis
    """

    def __init__(self, kind, points, f=0.0, axis=None):
        self.kind = PrimitiveKind(kind)
        self.points = list(points)
        self.f = _as_time_fn(f)
        n_expected = 2 if self.kind in (PrimitiveKind.DIST, PrimitiveKind.CD) else 4
        if len(self.points) != n_expected:
            raise ConstructionError(
                f"{self.kind.value} expects {n_expected} attachment points, got {len(self.points)}"
            )
        if self.kind is PrimitiveKind.CD:
            if isinstance(axis, str):
                if axis not in _CD_AXES:
                    raise ConstructionError(f"CD axis must be one of x, y, z, got {axis!r}")
                self.axis = _CD_AXES[axis]
            else:
                a = np.asarray(axis, dtype=float)
                matches = [k for k, v in _CD_AXES.items() if np.array_equal(a, v)]
                if not matches:
                    raise ConstructionError("CD axis must be a Cartesian unit vector")
                self.axis = a
        else:
            self.axis = None
        if self.kind is PrimitiveKind.DIST:
            # the squared form loses Jacobian rank when the points coincide,
            # so a zero target distance is rejected up front
            if not callable(f) and float(f) <= 0.0:
                raise ConstructionError("DIST requires a positive target distance")
            if callable(f) and self.f(0.0) <= 0.0:
                raise ConstructionError("DIST target distance must start positive")

    def _vectors(self, qb):
        P, Q = self.points[0], self.points[1]
        a = Q.eval(qb) - P.eval(qb)
        if self.kind in (PrimitiveKind.DP1, PrimitiveKind.DP2):
            R, T = self.points[2], self.points[3]
            b = T.eval(qb) - R.eval(qb)
            return a, b
        return a, None

    def residual(self, q_blocks, t):
        a, b = self._vectors(q_blocks)
        if self.kind in (PrimitiveKind.DP1, PrimitiveKind.DP2):
            return float(a @ b) - self.f(t)
        if self.kind is PrimitiveKind.DIST:
            ft = self.f(t)
            return 0.5 * (float(a @ a) - ft * ft)
        return float(self.axis @ a) - self.f(t)

    def jacobian_blocks(self, q_blocks, t):
        """List of (dof_map, s, sign, w): the row restricted to one attachment
        is sign * w^T (s^T kron I3).  World points contribute nothing."""
        a, b = self._vectors(q_blocks)
        if self.kind in (PrimitiveKind.DP1, PrimitiveKind.DP2):
            weights = [(-1.0, b), (1.0, b), (-1.0, a), (1.0, a)]
        elif self.kind is PrimitiveKind.DIST:
            weights = [(-1.0, a), (1.0, a)]
        else:
            weights = [(-1.0, self.axis), (1.0, self.axis)]
        out = []
        for point, (sign, w) in zip(self.points, weights):
            if point.is_world:
                continue
            out.append((point.dof_map, point.s, sign, w))
        return out


def dp1(P, Q, R, T, f=0.0):
    return ConstraintPrimitive(PrimitiveKind.DP1, [P, Q, R, T], f=f)


def dp2(P, Q, R, T, f=0.0):
    return ConstraintPrimitive(PrimitiveKind.DP2, [P, Q, R, T], f=f)


def dist(P, Q, f):
    return ConstraintPrimitive(PrimitiveKind.DIST, [P, Q], f=f)


def cd(axis, P, Q, f=0.0):
    return ConstraintPrimitive(PrimitiveKind.CD, [P, Q], f=f, axis=axis)


class ConstraintSet:
    """Ordered primitives plus ALM state (multipliers and penalty)."""

    def __init__(self, primitives, n_dof, rho=1.0):
        self.primitives = list(primitives)
        self.n_dof = int(n_dof)
        self.m = len(self.primitives)
        self.lam = np.zeros(self.m)
        rho_arr = np.asarray(rho, dtype=float)
        if rho_arr.ndim == 0:
            rho_arr = np.full(self.m, float(rho_arr))
        if rho_arr.shape != (self.m,) or np.any(rho_arr <= 0):
            raise ConstructionError("penalty rho must be positive (scalar or length m)")
        self.rho = rho_arr
        self.rho0 = rho_arr.copy()

    def residuals(self, q, t):
        qb = np.asarray(q).reshape(-1, 3)
        return np.array([p.residual(qb, t) for p in self.primitives])

    def jacobian(self, q, t):
        """Explicit C_q as CSR (m x n_dof); diagnostic path, not used in stepping."""
        qb = np.asarray(q).reshape(-1, 3)
        rows, cols, vals = [], [], []
        for i, p in enumerate(self.primitives):
            for dof_map, s, sign, w in p.jacobian_blocks(qb, t):
                block_cols = (dof_map[:, None] * 3 + np.arange(3)[None, :]).ravel()
                block_vals = sign * np.outer(s, w).ravel()
                rows.append(np.full(block_cols.size, i))
                cols.append(block_cols)
                vals.append(block_vals)
        if not rows:
            return sp.csr_matrix((self.m, self.n_dof))
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.m, self.n_dof),
        ).tocsr()

    def apply_constraint_term(self, q, t, out, scale=1.0, mults=None):
        """Scatter scale * C_q^T mults into out, matrix-free.

        mults defaults to the augmented multiplier lambda + rho * c(q, t).
        """
        qb = np.asarray(q).reshape(-1, 3)
        out_b = out.reshape(-1, 3)
        if mults is None:
            mults = self.lam + self.rho * self.residuals(q, t)
        for p, mu in zip(self.primitives, mults):
            coeff = scale * mu
            if coeff == 0.0:
                continue
            for dof_map, s, sign, w in p.jacobian_blocks(qb, t):
                out_b[dof_map] += (coeff * sign) * np.outer(s, w)
        return out

    def update_multipliers(self, c_values):
        self.lam = self.lam + self.rho * np.asarray(c_values)
        return self.lam

    def scale_penalty(self, factor, cap=None):
        self.rho = self.rho * factor
        if cap is not None:
            np.minimum(self.rho, cap * self.rho0, out=self.rho)

    def reset_multipliers(self):
        self.lam = np.zeros(self.m)


def _direction_at(pair, q_blocks):
    tail, head = pair
    return head.eval(q_blocks) - tail.eval(q_blocks)


def make_joint(kind, P, Q, axis_pairs=None, q_ref=None):
    """Compose a joint from attachment points.

    kind: 'spherical' (3 CD), 'revolute' (3 CD + 2 DP1), 'fixed' (3 CD + 3 DP1).
    P, Q: the coincident point pair (f = 0 on each Cartesian component).
    axis_pairs: list of ((tailA, headA), (tailB, headB)) direction pairs for the
    DP1 orientation conditions; 2 for revolute, 3 for fixed.  Each DP1 target is
    the dot product evaluated in the reference state q_ref, so the joint locks
    in the initial relative orientation.
    """
    prims = [cd("x", P, Q), cd("y", P, Q), cd("z", P, Q)]
    if kind == "spherical":
        if axis_pairs:
            raise ConstructionError("spherical joint takes no axis pairs")
        return prims
    n_axes = {"revolute": 2, "fixed": 3}.get(kind)
    if n_axes is None:
        raise ConstructionError(f"unknown joint kind {kind!r}")
    if axis_pairs is None or len(axis_pairs) != n_axes:
        raise ConstructionError(f"{kind} joint needs {n_axes} DP1 axis pairs")
    if q_ref is None:
        raise ConstructionError("revolute/fixed joints need the reference state q_ref")
    qb = np.asarray(q_ref).reshape(-1, 3)
    for pair_a, pair_b in axis_pairs:
        da = _direction_at(pair_a, qb)
        db = _direction_at(pair_b, qb)
        if np.linalg.norm(da) < 1e-12 or np.linalg.norm(db) < 1e-12:
            raise ConstructionError("joint axis pair has zero length in the reference state")
        f0 = float(da @ db)
        prims.append(dp1(pair_a[0], pair_a[1], pair_b[0], pair_b[1], f=f0))
    return prims
