"""Shape-function bases, reference gradients, and quadrature rules.

Three element kinds are supported:

* ``Beam3243``  -- fully parameterized 2-node beam; 8 vector unknowns per
  element (position + u/v/w slopes at each node), monomial basis
  ``[1, u, v, w, uv, uw, u^2, u^3]``.
* ``Shell3443`` -- fully parameterized 4-node shell; 16 vector unknowns,
  16-monomial basis cubic in (u, w) and linear in v (thickness).
* ``Tet10``     -- quadratic 10-node tetrahedron with positions-only unknowns.

Beam/shell bases are built by inverting the node-evaluation matrix B (columns
``b, b_u, b_v, b_w`` at each node) so that ``s(u) = B^{-1} b(u)``; the inverse
is cached per basis.  Reference-box conventions (chosen here; not dictated by
the element family): beam nodes at u = 0 and u = L on the section center line,
cross-section v in [-W/2, W/2], w in [-H/2, H/2]; shell nodes at the corners
of (u, w) in [0, L_u] x [0, L_w] at v = 0, thickness v in [-T/2, T/2].
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import ConstructionError, DomainError

_COND_LIMIT = 1e12
_DOMAIN_TOL = 1e-9


class ElementKind(enum.Enum):
    BEAM3243 = "beam3243"
    SHELL3443 = "shell3443"
    TET10 = "tet10"


class QuadraturePurpose(enum.Enum):
    MASS = "mass"
    FORCE = "force"


class QuadratureRule:
    """Integration points (material coords) and weights.

    For the ANCF boxes the weights carry the affine box scaling, so they sum
    to the box volume; for the tetra parent domain they sum to 1/6 and the
    geometric Jacobian is applied separately.
    """

    def __init__(self, points, weights, degree):
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.degree = degree

    def __len__(self):
        return len(self.weights)


def _gauss_tensor_rule(bounds, orders):
    """Tensor-product Gauss-Legendre rule over a box; exact per axis to 2n-1."""
    axes = []
    for (lo, hi), n in zip(bounds, orders):
        x, w = np.polynomial.legendre.leggauss(n)
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        axes.append((mid + half * x, half * w))
    pts = []
    wts = []
    for xu, wu in zip(*axes[0]):
        for xv, wv in zip(*axes[1]):
            for xw, ww in zip(*axes[2]):
                pts.append((xu, xv, xw))
                wts.append(wu * wv * ww)
    degree = tuple(2 * n - 1 for n in orders)
    return QuadratureRule(np.array(pts), np.array(wts), degree)


def tet5_rule():
    """Five-point simplex rule, exact for total degree <= 3, weights sum to 1/6.

    Centroid point carries a negative weight (standard degree-3 variant).
    """
    a = 1.0 / 4.0
    b = 1.0 / 6.0
    c = 1.0 / 2.0
    pts = np.array(
        [
            [a, a, a],
            [b, b, b],
            [c, b, b],
            [b, c, b],
            [b, b, c],
        ]
    )
    wts = np.array([-4.0 / 5.0, 9.0 / 20.0, 9.0 / 20.0, 9.0 / 20.0, 9.0 / 20.0]) / 6.0
    return QuadratureRule(pts, wts, 3)


def tet_mass_rule():
    """Collapsed-coordinate Gauss rule on the parent tet, exact to total degree 7.

    Built from a 4x4x4 Gauss-Legendre grid on the unit cube through the Duffy
    map (xi, eta, zeta) = (x, y(1-x), z(1-x)(1-y)) whose Jacobian (1-x)^2(1-y)
    is absorbed into the weights.  Used for mass integrands s_i s_j (degree 4),
    where the 5-point force rule is inexact and would make the consistent mass
    rank-deficient.
    """
    x1, w1 = np.polynomial.legendre.leggauss(4)
    x1 = 0.5 * (x1 + 1.0)
    w1 = 0.5 * w1
    pts = []
    wts = []
    for xa, wa in zip(x1, w1):
        for xb, wb in zip(x1, w1):
            for xc, wc in zip(x1, w1):
                xi = xa
                eta = xb * (1.0 - xa)
                zeta = xc * (1.0 - xa) * (1.0 - xb)
                jac = (1.0 - xa) ** 2 * (1.0 - xb)
                pts.append((xi, eta, zeta))
                wts.append(wa * wb * wc * jac)
    return QuadratureRule(np.array(pts), np.array(wts), 7)


class ElementBasis:
    """Common interface: scalar basis s(u), reference gradients H(u), quadrature."""

    kind: ElementKind
    n_u: int

    def shape(self, u, strict=True):
        raise NotImplementedError

    def ref_gradients(self, u, strict=True):
        raise NotImplementedError

    def quadrature(self, purpose=QuadraturePurpose.FORCE):
        raise NotImplementedError

    def geometric_jacobian(self, u):
        raise NotImplementedError

    def contains(self, u):
        raise NotImplementedError

    def reference_nodal_matrix(self):
        """3 x n_u matrix of nodal unknowns that reproduces the reference map."""
        raise NotImplementedError

    def _check_domain(self, u, strict):
        if strict and not self.contains(u):
            raise DomainError(
                f"material coords {np.asarray(u)!r} outside {self.kind.value} reference domain"
            )


def _beam_monomials(u, v, w):
    return np.array([1.0, u, v, w, u * v, u * w, u * u, u ** 3])


def _beam_monomial_gradients(u, v, w):
    return np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [v, u, 0.0],
            [w, 0.0, u],
            [2.0 * u, 0.0, 0.0],
            [3.0 * u * u, 0.0, 0.0],
        ]
    )


def _shell_monomials(u, v, w):
    return np.array(
        [
            1.0,
            u,
            v,
            w,
            u * w,
            v * w,
            u * v,
            u * u,
            w * w,
            u ** 3,
            w ** 3,
            u * u * w,
            w * w * u,
            u * v * w,
            u ** 3 * w,
            u * w ** 3,
        ]
    )


def _shell_monomial_gradients(u, v, w):
    return np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [w, 0.0, u],
            [0.0, w, v],
            [v, u, 0.0],
            [2.0 * u, 0.0, 0.0],
            [0.0, 0.0, 2.0 * w],
            [3.0 * u * u, 0.0, 0.0],
            [0.0, 0.0, 3.0 * w * w],
            [2.0 * u * w, 0.0, u * u],
            [w * w, 0.0, 2.0 * u * w],
            [v * w, u * w, u * v],
            [3.0 * u * u * w, 0.0, u ** 3],
            [w ** 3, 0.0, 3.0 * u * w * w],
        ]
    )


class _AncfBasis(ElementBasis):
    """Shared machinery for the interpolation-matrix-based beam/shell bases."""

    def __init__(self, kind, nodes, box, monomials, monomial_gradients, rule_orders):
        self.kind = kind
        self._nodes = np.asarray(nodes, dtype=float)
        self._box = [(float(lo), float(hi)) for lo, hi in box]
        self._monomials = monomials
        self._monomial_gradients = monomial_gradients
        self._rule_orders = rule_orders
        self._rule_cache = None
        self.n_u = 4 * len(self._nodes)

        cols = []
        for p in self._nodes:
            cols.append(monomials(*p))
            cols.extend(monomial_gradients(*p).T)
        B = np.column_stack(cols)
        cond = np.linalg.cond(B)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise ConstructionError(
                f"singular interpolation matrix for {kind.value}: condition number {cond:.3e}"
            )
        self.B = B
        self.B_inverse = np.linalg.inv(B)
        self.condition_number = cond

    @property
    def nodes(self):
        return self._nodes

    @property
    def box(self):
        return self._box

    def contains(self, u):
        u = np.asarray(u, dtype=float)
        for x, (lo, hi) in zip(u, self._box):
            span = max(hi - lo, 1.0e-300)
            if x < lo - _DOMAIN_TOL * span or x > hi + _DOMAIN_TOL * span:
                return False
        return True

    def shape(self, u, strict=True):
        self._check_domain(u, strict)
        return self.B_inverse @ self._monomials(*u)

    def ref_gradients(self, u, strict=True):
        self._check_domain(u, strict)
        return self.B_inverse @ self._monomial_gradients(*u)

    def quadrature(self, purpose=QuadraturePurpose.FORCE):
        # one rule serves both purposes: exact for the mass integrand already
        if self._rule_cache is None:
            self._rule_cache = _gauss_tensor_rule(self._box, self._rule_orders)
        return self._rule_cache

    def geometric_jacobian(self, u):
        # weights already carry the box measure
        return 1.0

    def reference_nodal_matrix(self):
        N = np.empty((3, self.n_u))
        for a, p in enumerate(self._nodes):
            N[:, 4 * a] = p
            N[:, 4 * a + 1] = (1.0, 0.0, 0.0)
            N[:, 4 * a + 2] = (0.0, 1.0, 0.0)
            N[:, 4 * a + 3] = (0.0, 0.0, 1.0)
        return N


def build_basis_beam3243(extents):
    """Beam basis for a reference box of extents (L, W, H)."""
    L, W, H = (float(x) for x in extents)
    if L <= 0 or W <= 0 or H <= 0:
        raise ConstructionError(f"beam extents must be positive, got {(L, W, H)}")
    nodes = [(0.0, 0.0, 0.0), (L, 0.0, 0.0)]
    box = [(0.0, L), (-W / 2.0, W / 2.0), (-H / 2.0, H / 2.0)]
    return _AncfBasis(
        ElementKind.BEAM3243, nodes, box, _beam_monomials, _beam_monomial_gradients, (4, 2, 2)
    )


def build_basis_shell3443(extents):
    """Shell basis for a reference box of extents (L_u, T, L_w); v is thickness."""
    Lu, T, Lw = (float(x) for x in extents)
    if Lu <= 0 or T <= 0 or Lw <= 0:
        raise ConstructionError(f"shell extents must be positive, got {(Lu, T, Lw)}")
    nodes = [
        (0.0, 0.0, 0.0),
        (Lu, 0.0, 0.0),
        (Lu, 0.0, Lw),
        (0.0, 0.0, Lw),
    ]
    box = [(0.0, Lu), (-T / 2.0, T / 2.0), (0.0, Lw)]
    return _AncfBasis(
        ElementKind.SHELL3443, nodes, box, _shell_monomials, _shell_monomial_gradients, (4, 2, 4)
    )


def tet10_shape_values(xi, eta, zeta):
    """Quadratic simplex shape functions in barycentric form."""
    L1 = 1.0 - xi - eta - zeta
    L2, L3, L4 = xi, eta, zeta
    return np.array(
        [
            L1 * (2.0 * L1 - 1.0),
            L2 * (2.0 * L2 - 1.0),
            L3 * (2.0 * L3 - 1.0),
            L4 * (2.0 * L4 - 1.0),
            4.0 * L1 * L2,
            4.0 * L2 * L3,
            4.0 * L3 * L1,
            4.0 * L1 * L4,
            4.0 * L2 * L4,
            4.0 * L3 * L4,
        ]
    )


def tet10_parent_gradients(xi, eta, zeta):
    """d N_a / d(xi, eta, zeta), shape (10, 3)."""
    L1 = 1.0 - xi - eta - zeta
    L2, L3, L4 = xi, eta, zeta
    dL1 = np.array([-1.0, -1.0, -1.0])
    dL2 = np.array([1.0, 0.0, 0.0])
    dL3 = np.array([0.0, 1.0, 0.0])
    dL4 = np.array([0.0, 0.0, 1.0])
    G = np.empty((10, 3))
    G[0] = (4.0 * L1 - 1.0) * dL1
    G[1] = (4.0 * L2 - 1.0) * dL2
    G[2] = (4.0 * L3 - 1.0) * dL3
    G[3] = (4.0 * L4 - 1.0) * dL4
    G[4] = 4.0 * (L2 * dL1 + L1 * dL2)
    G[5] = 4.0 * (L3 * dL2 + L2 * dL3)
    G[6] = 4.0 * (L1 * dL3 + L3 * dL1)
    G[7] = 4.0 * (L4 * dL1 + L1 * dL4)
    G[8] = 4.0 * (L4 * dL2 + L2 * dL4)
    G[9] = 4.0 * (L4 * dL3 + L3 * dL4)
    return G


_TET10_EDGES = [(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3)]

_TET10_PARENT_NODES = np.array(
    [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.0, 0.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.0],
        [0.0, 0.0, 0.5],
        [0.5, 0.0, 0.5],
        [0.0, 0.5, 0.5],
    ]
)


class Tet10Basis(ElementBasis):
    """Straight-sided quadratic tetrahedron defined by its 10 reference nodes.

    Nodes 0-3 are corners; nodes 4-9 sit at edge midpoints (enforced at
    construction, 1e-9 relative).  With midpoints exact, the geometry map is
    affine and the reference Jacobian dX/d(xi,eta,zeta) is constant.
    """

    def __init__(self, reference_nodes, midpoint_tol=1e-9):
        X = np.asarray(reference_nodes, dtype=float)
        if X.shape != (10, 3):
            raise ConstructionError(f"expected 10 reference nodes, got shape {X.shape}")
        Jx = np.column_stack([X[1] - X[0], X[2] - X[0], X[3] - X[0]])
        detJ = np.linalg.det(Jx)
        scale = max(np.linalg.norm(Jx, ord=np.inf), 1e-300)
        if detJ <= 1e-12 * scale ** 3:
            raise ConstructionError(
                f"degenerate reference tetrahedron: det(dX/dxi) = {detJ:.3e}"
            )
        for m, (a, b) in enumerate(_TET10_EDGES):
            mid = 0.5 * (X[a] + X[b])
            err = np.linalg.norm(X[4 + m] - mid)
            edge = np.linalg.norm(X[b] - X[a])
            if err > midpoint_tol * max(edge, 1e-300):
                raise ConstructionError(
                    f"mid-edge node {4 + m} is off the edge midpoint by {err:.3e}"
                )
        self.kind = ElementKind.TET10
        self.n_u = 10
        self.reference_nodes = X
        self._Jx = Jx
        self._Jx_inv = np.linalg.inv(Jx)
        self._detJ = detJ

    def contains(self, u):
        xi, eta, zeta = (float(x) for x in u)
        t = _DOMAIN_TOL
        return xi >= -t and eta >= -t and zeta >= -t and xi + eta + zeta <= 1.0 + t

    def shape(self, u, strict=True):
        self._check_domain(u, strict)
        return tet10_shape_values(*u)

    def parent_gradients(self, u, strict=True):
        self._check_domain(u, strict)
        return tet10_parent_gradients(*u)

    def ref_gradients(self, u, strict=True):
        # gradients w.r.t. physical reference coordinates
        return self.parent_gradients(u, strict) @ self._Jx_inv

    def quadrature(self, purpose=QuadraturePurpose.FORCE):
        # the degree-3 force rule cannot integrate the degree-4 mass integrand,
        # so mass uses the exact collapsed rule to keep M positive definite
        if purpose is QuadraturePurpose.MASS:
            return tet_mass_rule()
        return tet5_rule()

    def geometric_jacobian(self, u):
        return self._detJ

    def reference_nodal_matrix(self):
        return self.reference_nodes.T.copy()


def build_basis_tet10(reference_nodes):
    return Tet10Basis(reference_nodes)


def tet10_nodes_from_corners(corners):
    """Expand 4 corner coordinates to the 10-node layout with edge midpoints."""
    c = np.asarray(corners, dtype=float)
    if c.shape != (4, 3):
        raise ConstructionError(f"expected 4 corners, got shape {c.shape}")
    nodes = np.empty((10, 3))
    nodes[:4] = c
    for m, (a, b) in enumerate(_TET10_EDGES):
        nodes[4 + m] = 0.5 * (c[a] + c[b])
    return nodes


def eval_shape(basis, u, strict=True):
    return basis.shape(u, strict=strict)


def eval_ref_gradients(basis, u, strict=True):
    return basis.ref_gradients(u, strict=strict)


def quadrature_for(basis, purpose=QuadraturePurpose.FORCE):
    return basis.quadrature(purpose)
