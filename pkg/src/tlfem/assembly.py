"""Meshes, global DOF bookkeeping, and element-loop assembly.

Global layout: the unknown vector ``q`` stacks 3-vector *blocks* (a block is
either a nodal position or an ANCF slope), so ``n_dof = 3 * n_blocks`` and
block ``b`` occupies ``q[3b:3b+3]``.  Bodies own contiguous block ranges;
each element carries a ``dof_map`` of global block indices matching its basis
column order.

Assembly is deterministic: element contributions are reduced serially in
element-index order, so repeated runs are bitwise identical.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import kernels
from .elements import (
    ElementKind,
    QuadraturePurpose,
    Tet10Basis,
    build_basis_beam3243,
    build_basis_shell3443,
    tet10_nodes_from_corners,
)
from .errors import InvertedElementError, ScenarioError
from .materials import Material, SVK_MODEL


def gather_blocks(q, dof_map):
    """Element view N (3 x n_u) of the global vector."""
    return np.ascontiguousarray(q.reshape(-1, 3)[dof_map].T)


def scatter_add_blocks(out, dof_map, local):
    """Additively scatter a 3 x n_u block back; dof_map entries are unique per element."""
    out.reshape(-1, 3)[dof_map] += local.T


class Element:
    """Per-element precomputed data: basis, DOF map, quadrature tables."""

    def __init__(self, basis, dof_map):
        self.basis = basis
        self.dof_map = np.asarray(dof_map, dtype=np.int64)
        if len(set(self.dof_map.tolist())) != basis.n_u:
            raise ScenarioError("element dof_map entries must be unique")
        rule = basis.quadrature()
        n_q = len(rule)
        self.H = np.empty((n_q, basis.n_u, 3))
        self.s = np.empty((n_q, basis.n_u))
        self.wJ = np.empty(n_q)
        for q, (pt, w) in enumerate(zip(rule.points, rule.weights)):
            self.H[q] = basis.ref_gradients(pt)
            self.s[q] = basis.shape(pt)
            self.wJ[q] = w * basis.geometric_jacobian(pt)
        # the mass integrand s_i s_j may need a higher-degree rule than forces
        mass_rule = basis.quadrature(QuadraturePurpose.MASS)
        if mass_rule is rule:
            self.s_m, self.wJ_m = self.s, self.wJ
        else:
            n_m = len(mass_rule)
            self.s_m = np.empty((n_m, basis.n_u))
            self.wJ_m = np.empty(n_m)
            for q, (pt, w) in enumerate(zip(mass_rule.points, mass_rule.weights)):
                self.s_m[q] = basis.shape(pt)
                self.wJ_m[q] = w * basis.geometric_jacobian(pt)
        # flat DOF indices for matrix assembly
        idx = (self.dof_map[:, None] * 3 + np.arange(3)[None, :]).ravel()
        self._flat_idx = idx
        self._rows = np.repeat(idx, idx.size)
        self._cols = np.tile(idx, idx.size)


class Body:
    """A deformable body: one element kind, one material, one density."""

    def __init__(self, body_id, kind, material, density, elements, reference_blocks,
                 position_blocks, viz_cells=None):
        if density <= 0:
            raise ScenarioError(f"body {body_id!r}: density must be positive, got {density}")
        if not isinstance(material, Material):
            raise ScenarioError(f"body {body_id!r}: material must be a Material")
        self.id = body_id
        self.kind = kind
        self.material = material
        self.density = float(density)
        self.elements = elements
        self.reference_blocks = np.asarray(reference_blocks, dtype=float)
        self.n_blocks = self.reference_blocks.shape[0]
        # local indices of blocks holding positions (as opposed to slopes)
        self.position_blocks = np.asarray(position_blocks, dtype=np.int64)
        self.block_offset = 0  # set by System
        self.viz_cells = viz_cells or []

    def globalize(self, offset):
        self.block_offset = offset
        for el in self.elements:
            el.dof_map = el.dof_map + offset
            idx = (el.dof_map[:, None] * 3 + np.arange(3)[None, :]).ravel()
            el._flat_idx = idx
            el._rows = np.repeat(idx, idx.size)
            el._cols = np.tile(idx, idx.size)

    @property
    def global_position_blocks(self):
        return self.position_blocks + self.block_offset


def _rotation(axis=None, rotation=None):
    if rotation is not None:
        R = np.asarray(rotation, dtype=float)
        if R.shape != (3, 3) or abs(np.linalg.det(R) - 1.0) > 1e-8:
            raise ScenarioError("rotation must be a proper 3x3 rotation matrix")
        return R
    if axis is None:
        return np.eye(3)
    a = np.asarray(axis, dtype=float)
    n = np.linalg.norm(a)
    if n == 0:
        raise ScenarioError("axis must be a nonzero vector")
    a = a / n
    # any frame whose first column is the axis
    helper = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
    b = np.cross(helper, a)
    b /= np.linalg.norm(b)
    c = np.cross(a, b)
    return np.column_stack([a, b, c])


def make_beam_body(body_id, material, density, length, width, height, n_elements=1,
                   origin=(0.0, 0.0, 0.0), axis=None, rotation=None):
    """Chain of beam elements along a straight reference line."""
    if n_elements < 1:
        raise ScenarioError("beam needs at least one element")
    L_el = float(length) / n_elements
    basis = build_basis_beam3243((L_el, width, height))
    R = _rotation(axis, rotation)
    origin = np.asarray(origin, dtype=float)
    n_nodes = n_elements + 1
    ref = np.empty((4 * n_nodes, 3))
    for a in range(n_nodes):
        ref[4 * a] = origin + R @ np.array([a * L_el, 0.0, 0.0])
        ref[4 * a + 1] = R[:, 0]
        ref[4 * a + 2] = R[:, 1]
        ref[4 * a + 3] = R[:, 2]
    elements = []
    for e in range(n_elements):
        dof = np.concatenate([np.arange(4 * e, 4 * e + 4), np.arange(4 * e + 4, 4 * e + 8)])
        elements.append(Element(basis, dof))
    position_blocks = np.arange(n_nodes) * 4
    viz = [("line", [4 * a, 4 * (a + 1)]) for a in range(n_elements)]
    return Body(body_id, ElementKind.BEAM3243, material, density, elements, ref,
                position_blocks, viz)


def make_shell_body(body_id, material, density, size, thickness, n_elements=(1, 1),
                    origin=(0.0, 0.0, 0.0), rotation=None):
    """Rectangular grid of shell elements; midsurface spans local (u, w), v is thickness."""
    Lu, Lw = (float(x) for x in size)
    nu, nw = (int(x) for x in n_elements)
    if nu < 1 or nw < 1:
        raise ScenarioError("shell grid needs at least one element per direction")
    basis = build_basis_shell3443((Lu / nu, thickness, Lw / nw))
    R = _rotation(rotation=rotation) if rotation is not None else np.eye(3)
    origin = np.asarray(origin, dtype=float)
    n_nodes = (nu + 1) * (nw + 1)

    def node(i, j):
        return i * (nw + 1) + j

    ref = np.empty((4 * n_nodes, 3))
    for i in range(nu + 1):
        for j in range(nw + 1):
            a = node(i, j)
            ref[4 * a] = origin + R @ np.array([i * Lu / nu, 0.0, j * Lw / nw])
            ref[4 * a + 1] = R[:, 0]
            ref[4 * a + 2] = R[:, 1]
            ref[4 * a + 3] = R[:, 2]
    elements = []
    viz = []
    for i in range(nu):
        for j in range(nw):
            corners = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]
            dof = np.concatenate([np.arange(4 * a, 4 * a + 4) for a in corners])
            elements.append(Element(basis, dof))
            viz.append(("quad", [4 * a for a in corners]))
    position_blocks = np.arange(n_nodes) * 4
    return Body(body_id, ElementKind.SHELL3443, material, density, elements, ref,
                position_blocks, viz)


def make_tet10_body(body_id, material, density, nodes, connectivity):
    """Tetrahedral body from explicit 10-node connectivity."""
    nodes = np.asarray(nodes, dtype=float)
    conn = np.asarray(connectivity, dtype=np.int64)
    if nodes.ndim != 2 or nodes.shape[1] != 3:
        raise ScenarioError("tet10 nodes must be an (n, 3) array")
    if conn.ndim != 2 or conn.shape[1] != 10:
        raise ScenarioError("tet10 connectivity rows must list 10 node ids")
    if conn.min(initial=0) < 0 or conn.max(initial=-1) >= len(nodes):
        raise ScenarioError("tet10 connectivity references a missing node")
    elements = []
    viz = []
    for row in conn:
        basis = Tet10Basis(nodes[row])
        elements.append(Element(basis, row))
        viz.append(("tet10", list(row)))
    position_blocks = np.arange(len(nodes))
    return Body(body_id, ElementKind.TET10, material, density, elements, nodes,
                position_blocks, viz)


def make_single_tet10_body(body_id, material, density, corners):
    nodes = tet10_nodes_from_corners(corners)
    return make_tet10_body(body_id, material, density, nodes, [list(range(10))])


class System:
    """All bodies of a scene plus assembled, cached global operators."""

    def __init__(self, bodies):
        if not bodies:
            raise ScenarioError("system needs at least one body")
        ids = [b.id for b in bodies]
        if len(set(ids)) != len(ids):
            raise ScenarioError(f"duplicate body ids: {ids}")
        self.bodies = list(bodies)
        self.body_by_id = {b.id: b for b in self.bodies}
        offset = 0
        for b in self.bodies:
            b.globalize(offset)
            offset += b.n_blocks
        self.n_blocks = offset
        self.n_dof = 3 * offset
        self._mass = None
        self._lumped = None
        self._ff_weights = None

    # -- reference state ---------------------------------------------------

    def reference_state(self):
        q0 = np.empty(self.n_dof)
        for b in self.bodies:
            q0.reshape(-1, 3)[b.block_offset:b.block_offset + b.n_blocks] = b.reference_blocks
        return q0

    # -- mass --------------------------------------------------------------

    def _assemble_mass(self):
        rows, cols, vals = [], [], []
        for b in self.bodies:
            for el in b.elements:
                n_u = el.basis.n_u
                m = np.zeros((n_u, n_u))
                for q in range(len(el.wJ_m)):
                    s = el.s_m[q]
                    m += (b.density * el.wJ_m[q]) * np.outer(s, s)
                rows.append(np.repeat(el.dof_map, n_u))
                cols.append(np.tile(el.dof_map, n_u))
                vals.append(m.ravel())
        Ms = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_blocks, self.n_blocks),
        ).tocsr()
        self._mass = sp.kron(Ms, sp.eye(3), format="csr")
        self._lumped = np.asarray(Ms.sum(axis=1)).ravel()

    def mass_matrix(self):
        """Constant consistent mass matrix (assembled once, reference data only)."""
        if self._mass is None:
            self._assemble_mass()
        return self._mass

    def lumped_block_mass(self):
        """Row-sum scalar mass per block (used for contact mass attribution)."""
        if self._lumped is None:
            self._assemble_mass()
        return self._lumped

    def body_mass(self, body):
        total = 0.0
        for el in body.elements:
            total += body.density * float(el.wJ.sum())
        return total

    # -- internal forces and tangents --------------------------------------

    def _element_inputs(self, body, el, q, v):
        N = gather_blocks(q, el.dof_map)
        N_dot = gather_blocks(v, el.dof_map) if v is not None else np.zeros_like(N)
        return N, N_dot

    def _check_inverted(self, body, e_idx, min_j):
        if body.material.model_code != SVK_MODEL and min_j <= kernels.J_FLOOR:
            raise InvertedElementError(
                f"body {body.id!r} element {e_idx}: det F = {min_j:.3e}",
                body_id=body.id, element_index=e_idx,
            )

    def internal_force(self, q, v=None):
        """Assembled elastic + viscous internal force (gradient of the stored energy
        plus the viscous contribution)."""
        out = np.zeros(self.n_dof)
        for b in self.bodies:
            p1, p2, p3 = b.material.elastic_params
            eta, lam_v = b.material.viscous_params
            model = b.material.model_code
            for e_idx, el in enumerate(b.elements):
                N, N_dot = self._element_inputs(b, el, q, v)
                f, min_j = kernels.element_internal_force(
                    N, N_dot, el.H, el.wJ, model, p1, p2, p3, eta, lam_v
                )
                self._check_inverted(b, e_idx, min_j)
                scatter_add_blocks(out, el.dof_map, f)
        return out

    def elastic_force(self, q):
        out = np.zeros(self.n_dof)
        for b in self.bodies:
            p1, p2, p3 = b.material.elastic_params
            model = b.material.model_code
            for e_idx, el in enumerate(b.elements):
                N = gather_blocks(q, el.dof_map)
                f, min_j = kernels.element_elastic_force(N, el.H, el.wJ, model, p1, p2, p3)
                self._check_inverted(b, e_idx, min_j)
                scatter_add_blocks(out, el.dof_map, f)
        return out

    def viscous_force(self, q, v):
        out = np.zeros(self.n_dof)
        for b in self.bodies:
            eta, lam_v = b.material.viscous_params
            if eta == 0.0 and lam_v == 0.0:
                continue
            for el in b.elements:
                N, N_dot = self._element_inputs(b, el, q, v)
                f = kernels.element_viscous_force(N, N_dot, el.H, el.wJ, eta, lam_v)
                scatter_add_blocks(out, el.dof_map, f)
        return out

    def tangent_matrices(self, q):
        """(K, D): elastic displacement tangent and viscous velocity tangent, CSR."""
        rows, cols, kvals, dvals = [], [], [], []
        any_visc = False
        for b in self.bodies:
            p1, p2, p3 = b.material.elastic_params
            eta, lam_v = b.material.viscous_params
            model = b.material.model_code
            for e_idx, el in enumerate(b.elements):
                N = gather_blocks(q, el.dof_map)
                K, min_j = kernels.element_tangent(N, el.H, el.wJ, model, p1, p2, p3)
                self._check_inverted(b, e_idx, min_j)
                rows.append(el._rows)
                cols.append(el._cols)
                kvals.append(K.ravel())
                if eta > 0.0 or lam_v > 0.0:
                    any_visc = True
                    D = kernels.element_viscous_velocity_tangent(N, el.H, el.wJ, eta, lam_v)
                    dvals.append(D.ravel())
                else:
                    dvals.append(np.zeros(K.size))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        shape = (self.n_dof, self.n_dof)
        K = sp.coo_matrix((np.concatenate(kvals), (rows, cols)), shape=shape).tocsr()
        if any_visc:
            D = sp.coo_matrix((np.concatenate(dvals), (rows, cols)), shape=shape).tocsr()
        else:
            D = sp.csr_matrix(shape)
        return K, D

    # -- energies -----------------------------------------------------------

    def elastic_energy(self, q):
        total = 0.0
        for b in self.bodies:
            p1, p2, p3 = b.material.elastic_params
            model = b.material.model_code
            for e_idx, el in enumerate(b.elements):
                N = gather_blocks(q, el.dof_map)
                w, min_j = kernels.element_energy(N, el.H, el.wJ, model, p1, p2, p3)
                self._check_inverted(b, e_idx, min_j)
                total += w
        return total

    def dissipation_rate(self, q, v):
        total = 0.0
        for b in self.bodies:
            eta, lam_v = b.material.viscous_params
            if eta == 0.0 and lam_v == 0.0:
                continue
            for el in b.elements:
                N, N_dot = self._element_inputs(b, el, q, v)
                total += kernels.element_dissipation_rate(N, N_dot, el.H, el.wJ, eta, lam_v)
        return total

    def kinetic_energy(self, v):
        return 0.5 * float(v @ (self.mass_matrix() @ v))

    # -- external loading ---------------------------------------------------

    def _force_field_weights(self):
        # w_i = integral of rho s_i over the element reference volume; uses the
        # mass rule so a uniform field b0 satisfies M^{-1} f = b0 exactly
        if self._ff_weights is None:
            w = np.zeros(self.n_blocks)
            for b in self.bodies:
                for el in b.elements:
                    vi = (el.s_m * el.wJ_m[:, None]).sum(axis=0) * b.density
                    np.add.at(w, el.dof_map, vi)
            self._ff_weights = w
        return self._ff_weights

    def uniform_force_field(self, b0):
        """Mass-distributed load for a spatially uniform field (e.g. gravity)."""
        w = self._force_field_weights()
        return (w[:, None] * np.asarray(b0, dtype=float)[None, :]).ravel()

    def force_field(self, q, t, field):
        """General mass-distributed field evaluated at current positions.

        ``field(r, t)`` maps an (m, 3) array of current positions to (m, 3)
        accelerations (force per unit mass).
        """
        out = np.zeros(self.n_dof)
        for b in self.bodies:
            for el in b.elements:
                N = gather_blocks(q, el.dof_map)
                r = el.s @ N.T  # (n_q, 3) current positions of quadrature points
                bvals = np.asarray(field(r, t), dtype=float)
                f = (b.density * el.wJ[:, None] * bvals).T @ el.s  # (3, n_u)
                scatter_add_blocks(out, el.dof_map, f)
        return out

    def point_load(self, body_id, element_index, u, force, out=None):
        """Distribute a concentrated load at material coords u to the nodal unknowns."""
        b = self.body_by_id[body_id]
        el = b.elements[element_index]
        s = el.basis.shape(u)
        if out is None:
            out = np.zeros(self.n_dof)
        local = np.outer(np.asarray(force, dtype=float), s)
        scatter_add_blocks(out, el.dof_map, local)
        return out

    # -- point evaluation ---------------------------------------------------

    def point_position(self, q, body_id, element_index, u):
        b = self.body_by_id[body_id]
        el = b.elements[element_index]
        return gather_blocks(q, el.dof_map) @ el.basis.shape(u)

    def point_velocity(self, v, body_id, element_index, u):
        return self.point_position(v, body_id, element_index, u)
