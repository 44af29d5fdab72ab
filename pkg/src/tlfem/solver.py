"""Velocity-level backward-Euler stepping with augmented-Lagrangian constraints.

One step solves g(v, lambda) = 0 for the end-of-step velocity v, where

    g = (1/h) M (v - v_n) + f_int(q_n + h v, v) - f_ext - f_field
        + h C_q(q_n + h v)^T (lambda + rho c(q_n + h v))

then updates q_{n+1} = q_n + h v.  The inner Newton solve uses the matrix
M/h + h K + D + h^2 C_q^T diag(rho) C_q (Gauss-Newton: constraint curvature
dropped); the outer loop applies lambda <- lambda + rho c until ||c||_2 meets
the tolerance, escalating rho tenfold when the reduction stalls.

Contact forces are evaluated once per step attempt at the start-of-step state
and held fixed during the solve.  Rejected steps (Newton or ALM failure,
inverted element) halve h down to h_min.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .contact import contact_forces
from .errors import InvertedElementError, SolverError, StepRejected


@dataclass
class SolverConfig:
    h: float = 1e-3
    rho: float = 1e6
    newton_tol: float = 1e-9
    newton_max_iter: int = 30
    alm_tol: float = 1e-8
    alm_max_iter: int = 60
    line_search: bool = True
    ls_c1: float = 1e-4
    ls_shrink: float = 0.5
    ls_max_backtracks: int = 25
    h_min: float = 1e-7
    rho_growth: float = 10.0
    rho_cap_factor: float = 1e4
    stall_factor: float = 0.9

    def __post_init__(self):
        if self.h <= 0 or self.rho <= 0:
            raise ValueError("h and rho must be positive")
        if self.newton_tol <= 0 or self.alm_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class StepInfo:
    t: float
    h_used: float
    newton_iters: int
    alm_iters: int
    c_norm: float
    rejections: int
    energy: dict = field(default_factory=dict)


class Simulation:
    """Owns the time loop state: (t, q, v), multipliers, contact histories."""

    def __init__(self, system, config: SolverConfig, constraint_set=None,
                 contact_pairs=(), gravity=None, fields=(), point_loads=()):
        self.system = system
        self.config = config
        self.constraints = constraint_set
        self.contact_pairs = list(contact_pairs)
        self.fields = list(fields)
        # point_loads: (body_id, element_index, u, force) with force a 3-vector
        # or a callable t -> 3-vector
        self.point_loads = list(point_loads)
        self.t = 0.0
        self.q = system.reference_state()
        self.v = np.zeros(system.n_dof)
        self._gravity_vec = None
        if gravity is not None:
            self._gravity_vec = system.uniform_force_field(gravity)
        self.dissipated = 0.0
        self.steps_taken = 0
        if constraint_set is not None:
            constraint_set.rho[:] = config.rho
            constraint_set.rho0[:] = config.rho

    # -- loads --------------------------------------------------------------

    def external_force(self, q, t):
        """Everything outside internal forces, contact, and constraint terms."""
        f = np.zeros(self.system.n_dof)
        if self._gravity_vec is not None:
            f += self._gravity_vec
        for fld in self.fields:
            f += self.system.force_field(q, t, fld)
        for body_id, e_idx, u, force in self.point_loads:
            val = force(t) if callable(force) else force
            self.system.point_load(body_id, e_idx, u, val, out=f)
        return f

    # -- residual and merit --------------------------------------------------

    def residual(self, v, q_n, v_n, h, t_next, f_c):
        q = q_n + h * v
        g = self.system.mass_matrix() @ (v - v_n) / h
        g += self.system.internal_force(q, v)
        g -= self.external_force(q, t_next)
        g -= f_c
        if self.constraints is not None and self.constraints.m > 0:
            self.constraints.apply_constraint_term(q, t_next, g, scale=h)
        return g

    def merit(self, v, q_n, v_n, h, t_next, f_c):
        """Phi_rho: scalar whose v-gradient is the elastic-only residual.

        The viscous force has no declared potential; when viscosity is present
        the line search falls back to monitoring ||g|| instead.
        """
        q = q_n + h * v
        dv = v - v_n
        phi = 0.5 / h * float(dv @ (self.system.mass_matrix() @ dv))
        phi += self.system.elastic_energy(q) / h
        phi -= float((self.external_force(q, t_next) + f_c) @ v)
        if self.constraints is not None and self.constraints.m > 0:
            c = self.constraints.residuals(q, t_next)
            phi += float(self.constraints.lam @ c)
            phi += 0.5 * float(c @ (self.constraints.rho * c))
        return phi

    def _has_viscosity(self):
        return any(b.material.has_viscosity for b in self.system.bodies)

    def newton_matrix(self, v, q_n, h, t_next):
        q = q_n + h * v
        K, D = self.system.tangent_matrices(q)
        A = self.system.mass_matrix() / h + h * K + D
        if self.constraints is not None and self.constraints.m > 0:
            J = self.constraints.jacobian(q, t_next)
            A = A + (h * h) * (J.T @ sp.diags(self.constraints.rho) @ J)
        return A.tocsc()

    # -- inner Newton --------------------------------------------------------

    def _newton(self, v0, q_n, v_n, h, t_next, f_c):
        cfg = self.config
        v = v0.copy()
        g = self.residual(v, q_n, v_n, h, t_next, f_c)
        g0_norm = np.linalg.norm(g)
        target = cfg.newton_tol * max(1.0, g0_norm)
        use_merit = cfg.line_search and not self._has_viscosity()
        for it in range(cfg.newton_max_iter):
            gn = np.linalg.norm(g)
            if gn <= target:
                return v, it
            A = self.newton_matrix(v, q_n, h, t_next)
            dv = spla.spsolve(A, -g)
            if not np.all(np.isfinite(dv)):
                raise SolverError(
                    f"singular Newton matrix: shape {A.shape}, nnz {A.nnz}, "
                    f"|g| = {gn:.3e}"
                )
            alpha = 1.0
            if cfg.line_search:
                slope = float(g @ dv)
                # merit descent only makes sense when the step is a descent
                # direction for Phi_rho; an indefinite tangent can produce an
                # ascent direction that still solves the linearized residual,
                # so fall back to residual-norm backtracking in that case
                if use_merit and slope < 0.0:
                    phi0 = self.merit(v, q_n, v_n, h, t_next, f_c)
                    for _ in range(cfg.ls_max_backtracks):
                        try:
                            phi = self.merit(v + alpha * dv, q_n, v_n, h, t_next, f_c)
                        except InvertedElementError:
                            phi = np.inf
                        if phi <= phi0 + cfg.ls_c1 * alpha * slope:
                            break
                        alpha *= cfg.ls_shrink
                else:
                    best_alpha, best_norm = None, gn
                    for _ in range(cfg.ls_max_backtracks):
                        try:
                            g_try = self.residual(v + alpha * dv, q_n, v_n, h, t_next, f_c)
                        except InvertedElementError:
                            alpha *= cfg.ls_shrink
                            continue
                        g_try_norm = np.linalg.norm(g_try)
                        if g_try_norm <= (1.0 - cfg.ls_c1 * alpha) * gn:
                            best_alpha = alpha
                            break
                        if g_try_norm < best_norm:
                            best_alpha, best_norm = alpha, g_try_norm
                        alpha *= cfg.ls_shrink
                    if best_alpha is not None:
                        alpha = best_alpha
            v = v + alpha * dv
            g = self.residual(v, q_n, v_n, h, t_next, f_c)
        if np.linalg.norm(g) <= target:
            return v, cfg.newton_max_iter
        raise StepRejected(
            f"Newton did not converge: |g| = {np.linalg.norm(g):.3e}, target {target:.3e}"
        )

    # -- ALM outer loop ------------------------------------------------------

    def _alm(self, q_n, v_n, h, t_next, f_c):
        cfg = self.config
        cs = self.constraints
        v = v_n.copy()  # warm start from previous velocity
        total_newton = 0
        if cs is None or cs.m == 0:
            v, it = self._newton(v, q_n, v_n, h, t_next, f_c)
            return v, it, 1, 0.0
        prev_norm = np.inf
        c_trace = []
        for outer in range(1, cfg.alm_max_iter + 1):
            v, it = self._newton(v, q_n, v_n, h, t_next, f_c)
            total_newton += it
            c = cs.residuals(q_n + h * v, t_next)
            c_norm = float(np.linalg.norm(c))
            c_trace.append(c_norm)
            cs.update_multipliers(c)
            if c_norm <= cfg.alm_tol:
                return v, total_newton, outer, c_norm
            if c_norm > cfg.stall_factor * prev_norm:
                cs.scale_penalty(cfg.rho_growth, cap=cfg.rho_cap_factor)
            prev_norm = c_norm
        raise StepRejected(
            "ALM outer loop did not converge; ||c|| trace: "
            + ", ".join(f"{x:.3e}" for x in c_trace[-5:])
        )

    # -- stepping ------------------------------------------------------------

    def _snapshot(self):
        lam = self.constraints.lam.copy() if self.constraints is not None else None
        rho = self.constraints.rho.copy() if self.constraints is not None else None
        pair_states = [copy.deepcopy(p.state) for p in self.contact_pairs]
        return lam, rho, pair_states

    def _restore(self, snap):
        lam, rho, pair_states = snap
        if self.constraints is not None:
            self.constraints.lam = lam.copy()
            self.constraints.rho = rho.copy()
        for p, s in zip(self.contact_pairs, pair_states):
            p.state = copy.deepcopy(s)

    def step(self) -> StepInfo:
        cfg = self.config
        q_n, v_n = self.q, self.v
        h = cfg.h
        rejections = 0
        snap = self._snapshot()
        while True:
            t_next = self.t + h
            try:
                if self.contact_pairs:
                    f_c = contact_forces(self.system, self.contact_pairs, q_n, v_n, h)
                else:
                    f_c = np.zeros(self.system.n_dof)
                v, n_it, alm_it, c_norm = self._alm(q_n, v_n, h, t_next, f_c)
                break
            except (StepRejected, InvertedElementError) as err:
                rejections += 1
                self._restore(snap)
                h *= 0.5
                if h < cfg.h_min:
                    raise SolverError(f"step rejected below h_min: {err}") from err
        self.q = q_n + h * v
        self.v = v
        self.t = t_next
        self.steps_taken += 1
        d_rate = self.system.dissipation_rate(self.q, self.v)
        self.dissipated += h * d_rate
        info = StepInfo(t=self.t, h_used=h, newton_iters=n_it, alm_iters=alm_it,
                        c_norm=c_norm, rejections=rejections)
        info.energy = self.energy_ledger()
        return info

    def run(self, n_steps, callback=None):
        infos = []
        for _ in range(n_steps):
            info = self.step()
            infos.append(info)
            if callback is not None:
                callback(self, info)
        return infos

    # -- diagnostics ---------------------------------------------------------

    def constraint_impulse(self):
        """h C_q^T lambda at the current state (zero without constraints)."""
        out = np.zeros(self.system.n_dof)
        if self.constraints is None or self.constraints.m == 0:
            return out
        self.constraints.apply_constraint_term(
            self.q, self.t, out, scale=self.config.h, mults=self.constraints.lam
        )
        return out

    def energy_ledger(self):
        ke = self.system.kinetic_energy(self.v)
        pe = self.system.elastic_energy(self.q)
        return {
            "kinetic": ke,
            "elastic": pe,
            "dissipated": self.dissipated,
            "mechanical": ke + pe,
        }
