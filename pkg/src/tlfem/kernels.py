"""Constitutive point evaluations and element-level accumulation loops.

Everything in this module is written against a small numpy subset so that the
same source compiles under numba's nopython mode.  The backend is chosen at
import time from the ``TLFEM_BACKEND`` environment variable:

* ``numba`` (default): every kernel is wrapped with ``numba.njit(cache=True)``.
* ``numpy``: the plain interpreted functions are used as-is.

If numba is unavailable the numpy path is selected silently.  ``BACKEND``
reports the active choice.

Conventions: ``F`` is the 3x3 deformation gradient; ``H`` arrays hold the
reference shape-function gradients with ``H[q]`` of shape ``(n_u, 3)`` whose
row ``i`` is ``h_i``; material parameters arrive as plain floats so a single
compiled loop serves both material models (``model`` 0 is the
quadratic-strain-energy law, 1 the invariant-based rubber law).

All 3x3 products are written out explicitly: numba's matmul rejects some
non-contiguous operands, and the fixed-size loops are faster anyway.  3x3
inverses use the adjugate-over-determinant closed form; ``J_FLOOR`` is the
admissibility floor below which det F is treated as inverted.
"""

import os

import numpy as np

J_FLOOR = 1e-8


def det3(F):
    return (
        F[0, 0] * (F[1, 1] * F[2, 2] - F[1, 2] * F[2, 1])
        - F[0, 1] * (F[1, 0] * F[2, 2] - F[1, 2] * F[2, 0])
        + F[0, 2] * (F[1, 0] * F[2, 1] - F[1, 1] * F[2, 0])
    )


def inv_transpose3(F, J):
    # F^{-T} = cofactor(F) / det(F)
    out = np.empty((3, 3))
    out[0, 0] = F[1, 1] * F[2, 2] - F[1, 2] * F[2, 1]
    out[0, 1] = F[1, 2] * F[2, 0] - F[1, 0] * F[2, 2]
    out[0, 2] = F[1, 0] * F[2, 1] - F[1, 1] * F[2, 0]
    out[1, 0] = F[0, 2] * F[2, 1] - F[0, 1] * F[2, 2]
    out[1, 1] = F[0, 0] * F[2, 2] - F[0, 2] * F[2, 0]
    out[1, 2] = F[0, 1] * F[2, 0] - F[0, 0] * F[2, 1]
    out[2, 0] = F[0, 1] * F[1, 2] - F[0, 2] * F[1, 1]
    out[2, 1] = F[0, 2] * F[1, 0] - F[0, 0] * F[1, 2]
    out[2, 2] = F[0, 0] * F[1, 1] - F[0, 1] * F[1, 0]
    return out / J


def mat3_mul(A, B):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return out


def mat3_tmul(A, B):
    # A^T B
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[0, i] * B[0, j] + A[1, i] * B[1, j] + A[2, i] * B[2, j]
    return out


def mat3_mult(A, B):
    # A B^T
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[i, 0] * B[j, 0] + A[i, 1] * B[j, 1] + A[i, 2] * B[j, 2]
    return out


def mat3_vec(A, x):
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i, 0] * x[0] + A[i, 1] * x[1] + A[i, 2] * x[2]
    return out


def outer3(a, b):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = a[i] * b[j]
    return out


def dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def trace3(A):
    return A[0, 0] + A[1, 1] + A[2, 2]


def frob3(A):
    total = 0.0
    for i in range(3):
        for j in range(3):
            total += A[i, j] * A[i, j]
    return total


def def_gradient(N, Hq):
    # F = N H, with N (3, n_u) and Hq (n_u, 3)
    n_u = Hq.shape[0]
    F = np.zeros((3, 3))
    for k in range(n_u):
        for i in range(3):
            Nik = N[i, k]
            F[i, 0] += Nik * Hq[k, 0]
            F[i, 1] += Nik * Hq[k, 1]
            F[i, 2] += Nik * Hq[k, 2]
    return F


def green_strain(F):
    C = mat3_tmul(F, F)
    E = 0.5 * C
    E[0, 0] -= 0.5
    E[1, 1] -= 0.5
    E[2, 2] -= 0.5
    return E


def strain_rate(F, F_dot):
    A = mat3_tmul(F_dot, F)
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = 0.5 * (A[i, j] + A[j, i])
    return out


def svk_energy(F, lam, mu):
    E = green_strain(F)
    trE = trace3(E)
    return 0.5 * lam * trE * trE + mu * frob3(E)


def svk_piola(F, lam, mu):
    E = green_strain(F)
    trE = trace3(E)
    S = 2.0 * mu * E
    S[0, 0] += lam * trE
    S[1, 1] += lam * trE
    S[2, 2] += lam * trE
    return mat3_mul(F, S)


def svk_tangent_block(F, h_i, h_j, lam, mu):
    Fhi = mat3_vec(F, h_i)
    Fhj = mat3_vec(F, h_j)
    hdot = dot3(h_i, h_j)
    trE = trace3(green_strain(F))
    block = lam * outer3(Fhi, Fhj)
    block += mu * outer3(Fhj, Fhi)
    block += (mu * hdot) * mat3_mult(F, F)
    diag = lam * trE * hdot + mu * dot3(Fhj, Fhi) - mu * hdot
    block[0, 0] += diag
    block[1, 1] += diag
    block[2, 2] += diag
    return block


def mr_invariants(F):
    C = mat3_tmul(F, F)
    I1 = trace3(C)
    I2 = 0.5 * (I1 * I1 - frob3(C))
    J = det3(F)
    return C, I1, I2, J


def mr_energy(F, mu10, mu01, k):
    _, I1, I2, J = mr_invariants(F)
    I1b = J ** (-2.0 / 3.0) * I1
    I2b = J ** (-4.0 / 3.0) * I2
    return mu10 * (I1b - 3.0) + mu01 * (I2b - 3.0) + 0.5 * k * (J - 1.0) ** 2


def mr_piola(F, mu10, mu01, k):
    C, I1, I2, J = mr_invariants(F)
    FiT = inv_transpose3(F, J)
    Jm23 = J ** (-2.0 / 3.0)
    Jm43 = J ** (-4.0 / 3.0)
    P = 2.0 * mu10 * Jm23 * (F - (I1 / 3.0) * FiT)
    P += 2.0 * mu01 * Jm43 * (I1 * F - mat3_mul(F, C) - (2.0 / 3.0) * I2 * FiT)
    P += k * (J - 1.0) * J * FiT
    return P


def mr_tangent_block(F, h_i, h_j, mu10, mu01, k):
    C, I1, I2, J = mr_invariants(F)
    FiT = inv_transpose3(F, J)
    Jm23 = J ** (-2.0 / 3.0)
    Jm43 = J ** (-4.0 / 3.0)
    Fhi = mat3_vec(F, h_i)
    Fhj = mat3_vec(F, h_j)
    gi = mat3_vec(FiT, h_i)
    gj = mat3_vec(FiT, h_j)
    hdot = dot3(h_i, h_j)
    B = mat3_mult(F, F)

    # dt1: 2 mu10 J^{-2/3} [ (hj.hi) I - (2/3)(F hi)(F^{-T} hj)^T ]
    t1 = -(2.0 / 3.0) * outer3(Fhi, gj)
    t1[0, 0] += hdot
    t1[1, 1] += hdot
    t1[2, 2] += hdot
    t1 *= 2.0 * mu10 * Jm23

    # dt2: (2 mu10/3) J^{-2/3} [ gi (2 F hj)^T - (2/3) I1 gi gj^T - I1 gj gi^T ]
    t2 = 2.0 * outer3(gi, Fhj)
    t2 -= (2.0 / 3.0) * I1 * outer3(gi, gj)
    t2 -= I1 * outer3(gj, gi)
    t2 *= (2.0 * mu10 / 3.0) * Jm23

    # dt3: 2 mu01 J^{-4/3} [ I1 (hj.hi) I + (F hi)(2 F hj)^T - (4/3) I1 (F hi) gj^T ]
    t3 = 2.0 * outer3(Fhi, Fhj)
    t3 -= (4.0 / 3.0) * I1 * outer3(Fhi, gj)
    diag3 = I1 * hdot
    t3[0, 0] += diag3
    t3[1, 1] += diag3
    t3[2, 2] += diag3
    t3 *= 2.0 * mu01 * Jm43

    # dt4: 2 mu01 J^{-4/3} [ (Fhj.Fhi) I + (Fhj)(Fhi)^T + (hj.hi) FF^T
    #                        - (4/3) FF^T (F hi) gj^T ]
    t4 = outer3(Fhj, Fhi)
    t4 += hdot * B
    t4 -= (4.0 / 3.0) * outer3(mat3_vec(B, Fhi), gj)
    diag4 = dot3(Fhj, Fhi)
    t4[0, 0] += diag4
    t4[1, 1] += diag4
    t4[2, 2] += diag4
    t4 *= 2.0 * mu01 * Jm43

    # dt5: (4 mu01/3) J^{-4/3} [ gi (2 (F hj)^T (I1 I - FF^T) - (4/3) I2 gj^T)
    #                            - I2 gj gi^T ]
    row = 2.0 * (I1 * Fhj - mat3_vec(B, Fhj)) - (4.0 / 3.0) * I2 * gj
    t5 = outer3(gi, row)
    t5 -= I2 * outer3(gj, gi)
    t5 *= (4.0 * mu01 / 3.0) * Jm43

    # dt6: k J [ (2J-1) gi gj^T - (J-1) gj gi^T ]
    t6 = (2.0 * J - 1.0) * outer3(gi, gj)
    t6 -= (J - 1.0) * outer3(gj, gi)
    t6 *= k * J

    return t1 - t2 + t3 - t4 - t5 + t6


def kv_second_piola(E_dot, eta, lam_v):
    S = 2.0 * eta * E_dot
    trEd = lam_v * trace3(E_dot)
    S[0, 0] += trEd
    S[1, 1] += trEd
    S[2, 2] += trEd
    return S


def kv_piola(F, E_dot, eta, lam_v):
    return mat3_mul(F, kv_second_piola(E_dot, eta, lam_v))


def dissipation_density(E_dot, eta, lam_v):
    trEd = trace3(E_dot)
    return 2.0 * eta * frob3(E_dot) + lam_v * trEd * trEd


def viscous_velocity_block(F, h_i, h_j, eta, lam_v):
    # d(P_vis h_i)/d(e_dot_j), chain rule through E_dot = sym(F_dot^T F)
    Fhi = mat3_vec(F, h_i)
    Fhj = mat3_vec(F, h_j)
    hdot = dot3(h_i, h_j)
    block = eta * outer3(Fhj, Fhi)
    block += (eta * hdot) * mat3_mult(F, F)
    block += lam_v * outer3(Fhi, Fhj)
    return block


def _add_piola_contrib(f, P, Hq, w):
    n_u = Hq.shape[0]
    for i in range(n_u):
        f[0, i] += w * (P[0, 0] * Hq[i, 0] + P[0, 1] * Hq[i, 1] + P[0, 2] * Hq[i, 2])
        f[1, i] += w * (P[1, 0] * Hq[i, 0] + P[1, 1] * Hq[i, 1] + P[1, 2] * Hq[i, 2])
        f[2, i] += w * (P[2, 0] * Hq[i, 0] + P[2, 1] * Hq[i, 1] + P[2, 2] * Hq[i, 2])


def element_internal_force(N, N_dot, H, wJ, model, p1, p2, p3, eta, lam_v):
    """Accumulate the elastic + viscous nodal force block over quadrature points.

    Returns (f, min_J) with f of shape (3, n_u); the caller is responsible for
    rejecting the state when min_J <= J_FLOOR and the material requires J > 0.
    """
    n_q = H.shape[0]
    n_u = H.shape[1]
    f = np.zeros((3, n_u))
    min_j = 1e300
    viscous = eta > 0.0 or lam_v > 0.0
    for q in range(n_q):
        Hq = H[q]
        F = def_gradient(N, Hq)
        J = det3(F)
        if J < min_j:
            min_j = J
        if model == 0:
            P = svk_piola(F, p1, p2)
        else:
            if J <= J_FLOOR:
                return f, min_j
            P = mr_piola(F, p1, p2, p3)
        if viscous:
            F_dot = def_gradient(N_dot, Hq)
            E_dot = strain_rate(F, F_dot)
            P = P + kv_piola(F, E_dot, eta, lam_v)
        _add_piola_contrib(f, P, Hq, wJ[q])
    return f, min_j


def element_elastic_force(N, H, wJ, model, p1, p2, p3):
    n_q = H.shape[0]
    n_u = H.shape[1]
    f = np.zeros((3, n_u))
    min_j = 1e300
    for q in range(n_q):
        Hq = H[q]
        F = def_gradient(N, Hq)
        J = det3(F)
        if J < min_j:
            min_j = J
        if model == 0:
            P = svk_piola(F, p1, p2)
        else:
            if J <= J_FLOOR:
                return f, min_j
            P = mr_piola(F, p1, p2, p3)
        _add_piola_contrib(f, P, Hq, wJ[q])
    return f, min_j


def element_viscous_force(N, N_dot, H, wJ, eta, lam_v):
    n_q = H.shape[0]
    n_u = H.shape[1]
    f = np.zeros((3, n_u))
    for q in range(n_q):
        Hq = H[q]
        F = def_gradient(N, Hq)
        F_dot = def_gradient(N_dot, Hq)
        E_dot = strain_rate(F, F_dot)
        P = kv_piola(F, E_dot, eta, lam_v)
        _add_piola_contrib(f, P, Hq, wJ[q])
    return f


def element_tangent(N, H, wJ, model, p1, p2, p3):
    """Elastic displacement tangent, shape (3*n_u, 3*n_u), 3x3 block (i,j) in (e_i, e_j)."""
    n_q = H.shape[0]
    n_u = H.shape[1]
    K = np.zeros((3 * n_u, 3 * n_u))
    min_j = 1e300
    for q in range(n_q):
        Hq = H[q]
        F = def_gradient(N, Hq)
        J = det3(F)
        if J < min_j:
            min_j = J
        if model != 0 and J <= J_FLOOR:
            return K, min_j
        w = wJ[q]
        for i in range(n_u):
            h_i = Hq[i]
            for j in range(n_u):
                h_j = Hq[j]
                if model == 0:
                    blk = svk_tangent_block(F, h_i, h_j, p1, p2)
                else:
                    blk = mr_tangent_block(F, h_i, h_j, p1, p2, p3)
                for a in range(3):
                    for b in range(3):
                        K[3 * i + a, 3 * j + b] += w * blk[a, b]
    return K, min_j


def element_viscous_velocity_tangent(N, H, wJ, eta, lam_v):
    n_q = H.shape[0]
    n_u = H.shape[1]
    D = np.zeros((3 * n_u, 3 * n_u))
    for q in range(n_q):
        Hq = H[q]
        F = def_gradient(N, Hq)
        w = wJ[q]
        for i in range(n_u):
            h_i = Hq[i]
            for j in range(n_u):
                blk = viscous_velocity_block(F, h_i, Hq[j], eta, lam_v)
                for a in range(3):
                    for b in range(3):
                        D[3 * i + a, 3 * j + b] += w * blk[a, b]
    return D


def element_energy(N, H, wJ, model, p1, p2, p3):
    n_q = H.shape[0]
    total = 0.0
    min_j = 1e300
    for q in range(n_q):
        F = def_gradient(N, H[q])
        J = det3(F)
        if J < min_j:
            min_j = J
        if model == 0:
            total += wJ[q] * svk_energy(F, p1, p2)
        else:
            if J <= J_FLOOR:
                return total, min_j
            total += wJ[q] * mr_energy(F, p1, p2, p3)
    return total, min_j


def element_dissipation_rate(N, N_dot, H, wJ, eta, lam_v):
    n_q = H.shape[0]
    total = 0.0
    for q in range(n_q):
        Hq = H[q]
        F = def_gradient(N, Hq)
        F_dot = def_gradient(N_dot, Hq)
        E_dot = strain_rate(F, F_dot)
        total += wJ[q] * dissipation_density(E_dot, eta, lam_v)
    return total


_KERNEL_NAMES = [
    "det3",
    "inv_transpose3",
    "mat3_mul",
    "mat3_tmul",
    "mat3_mult",
    "mat3_vec",
    "outer3",
    "dot3",
    "trace3",
    "frob3",
    "def_gradient",
    "green_strain",
    "strain_rate",
    "svk_energy",
    "svk_piola",
    "svk_tangent_block",
    "mr_invariants",
    "mr_energy",
    "mr_piola",
    "mr_tangent_block",
    "kv_second_piola",
    "kv_piola",
    "dissipation_density",
    "viscous_velocity_block",
    "_add_piola_contrib",
    "element_internal_force",
    "element_elastic_force",
    "element_viscous_force",
    "element_tangent",
    "element_viscous_velocity_tangent",
    "element_energy",
    "element_dissipation_rate",
]


def _select_backend():
    choice = os.environ.get("TLFEM_BACKEND", "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"TLFEM_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba":
        try:
            import numba  # noqa: F401
        except ImportError:
            return "numpy"
    return choice


BACKEND = _select_backend()

if BACKEND == "numba":
    import numba

    _jit = numba.njit(cache=True)
    for _name in _KERNEL_NAMES:
        globals()[_name] = _jit(globals()[_name])
    del _name
