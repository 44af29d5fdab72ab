"""Scenario files, validation, simulation construction, and output writers.

A scenario is a single YAML document describing bodies, materials, joints,
contacts, loads, solver settings, and outputs.  Loading normalizes the data
(defaults filled in) and validates every cross-reference and physical bound,
so a successfully loaded scenario always builds a runnable simulation.

Outputs are an energy/diagnostics CSV, a probe CSV, and optional legacy-ASCII
unstructured-grid snapshots of the nodal positions.  Floats are written with
shortest round-trip formatting so reruns diff cleanly byte for byte.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path

import numpy as np
import yaml

from . import constraints as cn
from .assembly import System, make_beam_body, make_shell_body, make_tet10_body
from .contact import ContactParams, Patch, Plane, SpherePlane, SphereSphere, \
    SpherePlanePair, SphereSpherePair
from .errors import ScenarioError, SolverError
from .materials import (
    KelvinVoigtParams,
    Material,
    MooneyRivlinParams,
    SvkParams,
    lame_from_young_poisson,
)
from .solver import Simulation, SolverConfig

_SOLVER_DEFAULTS = {
    "h": 1e-3,
    "rho": 1e6,
    "newton_tol": 1e-9,
    "newton_max_iter": 30,
    "alm_tol": 1e-8,
    "alm_max_iter": 60,
    "line_search": True,
    "h_min": 1e-7,
}

_OUTPUT_DEFAULTS = {
    "cadence": 1,
    "snapshot_cadence": 0,
    "probes": [],
}


class Scenario:
    """Normalized, validated scenario data."""

    def __init__(self, data):
        self.data = data

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.data == other.data

    @property
    def name(self):
        return self.data.get("name", "scenario")


def _require(cond, path, msg):
    if not cond:
        raise ScenarioError(f"{path}: {msg}")


def normalize(data):
    """Fill defaults; idempotent so load -> serialize -> load round-trips."""
    out = copy.deepcopy(data)
    _require(isinstance(out, dict), "scenario", "top level must be a mapping")
    out.setdefault("name", "scenario")
    out.setdefault("steps", 100)
    out.setdefault("gravity", None)
    out.setdefault("joints", [])
    out.setdefault("constraints", [])
    out.setdefault("contacts", [])
    out.setdefault("loads", {})
    out["loads"].setdefault("point", [])
    out["loads"].setdefault("fields", [])
    solver = out.setdefault("solver", {})
    for k, v in _SOLVER_DEFAULTS.items():
        solver.setdefault(k, v)
    output = out.setdefault("output", {})
    for k, v in _OUTPUT_DEFAULTS.items():
        output.setdefault(k, copy.deepcopy(v))
    return out


def _body_ids(data):
    return [b.get("id") for b in data.get("bodies", [])]


def _check_attachment(att, path, ids):
    _require(isinstance(att, dict), path, "attachment must be a mapping")
    if "world" in att:
        _require(len(np.asarray(att["world"], dtype=float)) == 3, path,
                 "world point must be a 3-vector")
        return
    for key in ("body", "element", "u"):
        _require(key in att, path, f"attachment missing field {key!r}")
    _require(att["body"] in ids, path, f"unknown body id {att['body']!r}")


def validate(data):
    ids = _body_ids(data)
    _require(len(data.get("bodies", [])) >= 1, "bodies", "at least one body required")
    _require(len(set(ids)) == len(ids), "bodies", f"duplicate body ids in {ids}")
    for i, b in enumerate(data["bodies"]):
        p = f"bodies[{i}]"
        _require("id" in b, p, "body needs an id")
        kind = b.get("kind")
        _require(kind in ("beam", "shell", "tet10"), p, f"unknown kind {kind!r}")
        _require(float(b.get("density", 0)) > 0, p, "density must be positive")
        mat = b.get("material")
        _require(isinstance(mat, dict), p, "body needs a material mapping")
        model = mat.get("model")
        _require(model in ("svk", "mooney_rivlin"), f"{p}.material",
                 f"unknown model {model!r}")
        if model == "svk":
            has_lame = "lam" in mat and "mu" in mat
            has_yp = "young" in mat and "poisson" in mat
            _require(has_lame or has_yp, f"{p}.material",
                     "svk needs (lam, mu) or (young, poisson)")
        else:
            for k in ("mu10", "mu01", "k"):
                _require(k in mat, f"{p}.material", f"mooney_rivlin needs {k}")
        if kind == "beam":
            for k in ("length", "width", "height"):
                _require(float(b.get(k, 0)) > 0, p, f"beam needs positive {k}")
        elif kind == "shell":
            _require(len(b.get("size", [])) == 2, p, "shell needs size: [Lu, Lw]")
            _require(float(b.get("thickness", 0)) > 0, p, "shell needs positive thickness")
        else:
            _require("nodes" in b and "connectivity" in b, p,
                     "tet10 needs nodes and connectivity")
    for i, j in enumerate(data["joints"]):
        p = f"joints[{i}]"
        _require(j.get("kind") in ("spherical", "revolute", "fixed"), p,
                 f"unknown joint kind {j.get('kind')!r}")
        _check_attachment(j.get("point_a", {}), f"{p}.point_a", ids)
        _check_attachment(j.get("point_b", {}), f"{p}.point_b", ids)
        for k, ax in enumerate(j.get("axes", [])):
            for side in ("a", "b"):
                pair = ax.get(side)
                _require(isinstance(pair, list) and len(pair) == 2,
                         f"{p}.axes[{k}].{side}", "axis side must be [tail, head]")
                for att in pair:
                    _check_attachment(att, f"{p}.axes[{k}].{side}", ids)
    for i, c in enumerate(data["constraints"]):
        p = f"constraints[{i}]"
        kind = c.get("kind")
        _require(kind in ("dp1", "dp2", "dist", "cd"), p,
                 f"unknown primitive kind {kind!r}")
        pts = c.get("points", [])
        n_exp = 2 if kind in ("dist", "cd") else 4
        _require(len(pts) == n_exp, p, f"{kind} needs {n_exp} points")
        for att in pts:
            _check_attachment(att, f"{p}.points", ids)
        if kind == "dist":
            _require(float(c.get("f", 0)) > 0, p, "dist needs a positive target f")
        if kind == "cd":
            _require(c.get("axis") in ("x", "y", "z"), p, "cd axis must be x, y, or z")
    for i, c in enumerate(data["contacts"]):
        p = f"contacts[{i}]"
        ctype = c.get("type")
        _require(ctype in ("sphere_plane", "sphere_sphere"), p,
                 f"unknown contact type {ctype!r}")
        mat = c.get("material", {})
        e = float(mat.get("e", 0))
        _require(0.0 < e <= 1.0, f"{p}.material", f"restitution must be in (0, 1], got {e}")
        _require(float(mat.get("mu", 0)) >= 0, f"{p}.material",
                 "friction coefficient must be nonnegative")
        if ctype == "sphere_plane":
            _check_attachment({k: c.get(k) for k in ("body", "element", "u")}, p, ids)
            _require(float(c.get("radius", -1)) >= 0, p, "radius must be nonnegative")
            if float(c.get("radius", 0)) == 0:
                _require(float(c.get("patch_area", 0)) > 0, p,
                         "zero radius requires patch_area")
        else:
            for side in ("side_a", "side_b"):
                s = c.get(side, {})
                _check_attachment({k: s.get(k) for k in ("body", "element", "u")},
                                  f"{p}.{side}", ids)
                _require(float(s.get("radius", 0)) > 0, f"{p}.{side}",
                         "sphere radius must be positive")
    for i, pl in enumerate(data["loads"]["point"]):
        _check_attachment({k: pl.get(k) for k in ("body", "element", "u")},
                          f"loads.point[{i}]", ids)
        _require(len(pl.get("force", [])) == 3, f"loads.point[{i}]",
                 "force must be a 3-vector")
    for i, pr in enumerate(data["output"]["probes"]):
        p = f"output.probes[{i}]"
        _require("name" in pr, p, "probe needs a name")
        _check_attachment({k: pr.get(k) for k in ("body", "element", "u")}, p, ids)
    _require(int(data["steps"]) >= 1, "steps", "must run at least one step")
    return data


def load_scenario(path):
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return Scenario(validate(normalize(raw)))


def scenario_from_dict(data):
    return Scenario(validate(normalize(data)))


def serialize(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario.data, sort_keys=True)


def apply_overrides(scenario: Scenario, overrides):
    """Apply dotted-path key=value pairs (values parsed as YAML scalars)."""
    data = copy.deepcopy(scenario.data)
    for ov in overrides:
        if "=" not in ov:
            raise ScenarioError(f"override must look like key=value, got {ov!r}")
        key, _, raw_val = ov.partition("=")
        val = yaml.safe_load(raw_val)
        if isinstance(val, str):
            # YAML 1.1 reads "5e-4" as a string; prefer the numeric reading
            try:
                val = float(val)
            except ValueError:
                pass
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            if isinstance(node, list):
                node = node[int(part)]
            else:
                if part not in node:
                    raise ScenarioError(f"override path {key!r}: no field {part!r}")
                node = node[part]
        leaf = parts[-1]
        if isinstance(node, list):
            node[int(leaf)] = val
        else:
            node[leaf] = val
    return Scenario(validate(normalize(data)))


# -- construction ------------------------------------------------------------

def _build_material(spec):
    if spec["model"] == "svk":
        if "lam" in spec:
            elastic = SvkParams(float(spec["lam"]), float(spec["mu"]))
        else:
            lam, mu = lame_from_young_poisson(float(spec["young"]), float(spec["poisson"]))
            elastic = SvkParams(lam, mu)
    else:
        elastic = MooneyRivlinParams(float(spec["mu10"]), float(spec["mu01"]),
                                     float(spec["k"]))
    viscous = None
    if "viscosity" in spec:
        v = spec["viscosity"]
        viscous = KelvinVoigtParams(float(v.get("eta", 0.0)), float(v.get("lambda_v", 0.0)))
    return Material(elastic, viscous)


def _build_body(spec):
    mat = _build_material(spec["material"])
    density = float(spec["density"])
    origin = spec.get("origin", [0.0, 0.0, 0.0])
    kind = spec["kind"]
    if kind == "beam":
        return make_beam_body(
            spec["id"], mat, density, float(spec["length"]), float(spec["width"]),
            float(spec["height"]), n_elements=int(spec.get("elements", 1)),
            origin=origin, axis=spec.get("axis"),
        )
    if kind == "shell":
        n_el = spec.get("elements", [1, 1])
        return make_shell_body(
            spec["id"], mat, density, tuple(spec["size"]), float(spec["thickness"]),
            n_elements=(int(n_el[0]), int(n_el[1])), origin=origin,
        )
    return make_tet10_body(spec["id"], mat, density, spec["nodes"], spec["connectivity"])


def _attachment(system, att):
    if "world" in att:
        return cn.world_point(att["world"])
    return cn.attach(system, att["body"], int(att["element"]), att["u"])


def _ramped(vec, ramp):
    vec = np.asarray(vec, dtype=float)
    if not ramp:
        return vec

    def fn(t):
        return vec * min(t / ramp, 1.0)

    return fn


def _contact_material(mspec, geometry):
    return ContactParams(
        E_A=float(mspec["E_A"]), E_B=float(mspec["E_B"]),
        nu_A=float(mspec.get("nu_A", 0.3)), nu_B=float(mspec.get("nu_B", 0.3)),
        e=float(mspec["e"]), mu=float(mspec.get("mu", 0.0)), geometry=geometry,
    )


def build_simulation(scenario: Scenario) -> Simulation:
    data = scenario.data
    bodies = [_build_body(b) for b in data["bodies"]]
    system = System(bodies)
    q_ref = system.reference_state()

    prims = []
    for j in data["joints"]:
        P = _attachment(system, j["point_a"])
        Q = _attachment(system, j["point_b"])
        axes = None
        if j.get("axes"):
            axes = []
            for ax in j["axes"]:
                pair_a = tuple(_attachment(system, a) for a in ax["a"])
                pair_b = tuple(_attachment(system, a) for a in ax["b"])
                axes.append((pair_a, pair_b))
        prims.extend(cn.make_joint(j["kind"], P, Q, axis_pairs=axes, q_ref=q_ref))
    for c in data["constraints"]:
        pts = [_attachment(system, a) for a in c["points"]]
        f = c.get("f", 0.0)
        kind = c["kind"]
        if kind == "cd":
            prims.append(cn.cd(c["axis"], *pts, f=f))
        elif kind == "dist":
            prims.append(cn.dist(*pts, f=f))
        elif kind == "dp1":
            prims.append(cn.dp1(*pts, f=f))
        else:
            prims.append(cn.dp2(*pts, f=f))

    solver_spec = dict(data["solver"])
    config = SolverConfig(
        h=float(solver_spec["h"]), rho=float(solver_spec["rho"]),
        newton_tol=float(solver_spec["newton_tol"]),
        newton_max_iter=int(solver_spec["newton_max_iter"]),
        alm_tol=float(solver_spec["alm_tol"]),
        alm_max_iter=int(solver_spec["alm_max_iter"]),
        line_search=bool(solver_spec["line_search"]),
        h_min=float(solver_spec["h_min"]),
    )
    cset = cn.ConstraintSet(prims, system.n_dof, rho=config.rho) if prims else None

    pairs = []
    for c in data["contacts"]:
        if c["type"] == "sphere_plane":
            radius = float(c["radius"])
            if radius > 0:
                geom = SpherePlane(radius)
            else:
                geom = Patch(float(c["patch_area"]))
            params = _contact_material(c["material"], geom)
            plane = Plane(c["plane"]["point"], c["plane"]["normal"])
            pairs.append(SpherePlanePair(system, c["body"], int(c["element"]), c["u"],
                                         radius, plane, params))
        else:
            sa, sb = c["side_a"], c["side_b"]
            geom = SphereSphere(float(sa["radius"]), float(sb["radius"]))
            params = _contact_material(c["material"], geom)
            pairs.append(SphereSpherePair(
                system,
                (sa["body"], int(sa["element"]), sa["u"], float(sa["radius"])),
                (sb["body"], int(sb["element"]), sb["u"], float(sb["radius"])),
                params,
            ))

    point_loads = []
    for pl in data["loads"]["point"]:
        point_loads.append((pl["body"], int(pl["element"]), pl["u"],
                            _ramped(pl["force"], pl.get("ramp"))))
    fields = []
    for fl in data["loads"]["fields"]:
        vec = np.asarray(fl["vector"], dtype=float)
        ramp = fl.get("ramp")

        def make_field(vec=vec, ramp=ramp):
            def fn(r, t):
                s = min(t / ramp, 1.0) if ramp else 1.0
                return np.tile(s * vec, (len(r), 1))
            return fn

        fields.append(make_field())

    sim = Simulation(system, config, constraint_set=cset, contact_pairs=pairs,
                     gravity=data["gravity"], fields=fields, point_loads=point_loads)

    # per-body initial conditions
    vb = sim.v.reshape(-1, 3)
    qb = sim.q.reshape(-1, 3)
    for body, spec in zip(bodies, data["bodies"]):
        if "initial_velocity" in spec:
            v0 = np.asarray(spec["initial_velocity"], dtype=float)
            vb[body.global_position_blocks] += v0
        if "spin" in spec:
            omega = np.asarray(spec["spin"]["omega"], dtype=float)
            center = np.asarray(spec["spin"].get("center", [0.0, 0.0, 0.0]), dtype=float)
            rng = np.arange(body.block_offset, body.block_offset + body.n_blocks)
            pos = set(body.global_position_blocks.tolist())
            for blk in rng:
                if blk in pos:
                    vb[blk] += np.cross(omega, qb[blk] - center)
                else:
                    vb[blk] += np.cross(omega, qb[blk])
    return sim


# -- output writers ----------------------------------------------------------

def _fmt(x):
    return repr(float(x))


_ENERGY_COLUMNS = ["t", "kinetic", "elastic", "dissipated", "mechanical",
                   "c_norm", "newton_iters", "alm_iters", "h_used"]


class FrameWriter:
    """Energy/diagnostics CSV, probe CSV, and optional grid snapshots."""

    def __init__(self, out_dir, sim, output_cfg, snapshot_cadence=None):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.sim = sim
        self.cadence = int(output_cfg["cadence"])
        self.snapshot_cadence = (int(output_cfg["snapshot_cadence"])
                                 if snapshot_cadence is None else int(snapshot_cadence))
        self.probes = output_cfg["probes"]
        self.energy_fh = open(self.out_dir / "energy.csv", "w")
        self.energy_fh.write(",".join(_ENERGY_COLUMNS) + "\n")
        self.probe_fh = None
        if self.probes:
            cols = ["t"]
            for pr in self.probes:
                cols += [f"{pr['name']}_{ax}" for ax in "xyz"]
            self.probe_fh = open(self.out_dir / "probes.csv", "w")
            self.probe_fh.write(",".join(cols) + "\n")
        self.frame_index = 0

    def write(self, info):
        self.frame_index += 1
        if self.frame_index % self.cadence == 0:
            e = info.energy
            row = [_fmt(info.t), _fmt(e["kinetic"]), _fmt(e["elastic"]),
                   _fmt(e["dissipated"]), _fmt(e["mechanical"]), _fmt(info.c_norm),
                   str(info.newton_iters), str(info.alm_iters), _fmt(info.h_used)]
            self.energy_fh.write(",".join(row) + "\n")
            if self.probe_fh is not None:
                vals = [info.t]
                for pr in self.probes:
                    r = self.sim.system.point_position(
                        self.sim.q, pr["body"], int(pr["element"]), pr["u"])
                    vals.extend(r)
                self.probe_fh.write(",".join(_fmt(x) for x in vals) + "\n")
        if self.snapshot_cadence and self.frame_index % self.snapshot_cadence == 0:
            path = self.out_dir / f"frame_{self.frame_index:06d}.vtk"
            write_snapshot(path, self.sim.system, self.sim.q, info.t)

    def close(self):
        self.energy_fh.close()
        if self.probe_fh is not None:
            self.probe_fh.close()


_CELL_TYPES = {"line": 3, "quad": 9, "tet10": 24}


def write_snapshot(path, system, q, t):
    """Legacy-ASCII unstructured grid of current nodal positions."""
    qb = q.reshape(-1, 3)
    points = []
    cells = []
    types = []
    for body in system.bodies:
        base = len(points)
        local_to_point = {}
        for k, blk in enumerate(body.global_position_blocks):
            local_to_point[blk - body.block_offset] = base + k
            points.append(qb[blk])
        for kind, local_blocks in body.viz_cells:
            cells.append([local_to_point[lb] for lb in local_blocks])
            types.append(_CELL_TYPES[kind])
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"deformable multibody frame t={_fmt(t)}\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(points)} double\n")
        for p in points:
            fh.write(" ".join(_fmt(x) for x in p) + "\n")
        total = sum(len(c) + 1 for c in cells)
        fh.write(f"CELLS {len(cells)} {total}\n")
        for c in cells:
            fh.write(" ".join(str(x) for x in [len(c)] + c) + "\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        for ty in types:
            fh.write(f"{ty}\n")


# -- self checks and the run entry point -------------------------------------

def verify_simulation(sim, seed=0):
    """FD/invariant spot checks on the loaded scenario's elements and materials.

    Returns a list of (check name, passed, worst error).
    """
    from .materials import energy_density, stress

    rng = np.random.default_rng(seed)
    results = []
    for body in sim.system.bodies:
        worst = 0.0
        for _ in range(10):
            while True:
                F = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
                if 0.5 <= np.linalg.det(F) <= 2.0:
                    break
            P = stress(F, body.material)
            eps = 1e-6
            fd = np.zeros((3, 3))
            for i in range(3):
                for j in range(3):
                    Fp = F.copy(); Fp[i, j] += eps
                    Fm = F.copy(); Fm[i, j] -= eps
                    fd[i, j] = (energy_density(Fp, body.material)
                                - energy_density(Fm, body.material)) / (2 * eps)
            worst = max(worst, float(np.abs(P - fd).max() / max(1.0, np.abs(P).max())))
        results.append((f"stress-energy FD body={body.id}", worst < 1e-5, worst))

        el = body.elements[0]
        basis = el.basis
        # shape functions reproduce the reference geometry exactly
        err = 0.0
        Nref = basis.reference_nodal_matrix() if hasattr(basis, "reference_nodal_matrix") else None
        if Nref is not None:
            for _ in range(5):
                pt = basis.quadrature().points[rng.integers(len(basis.quadrature()))]
                # H consistency with FD of s
                H = basis.ref_gradients(pt)
                for d in range(3):
                    dp = np.array(pt, dtype=float); dp[d] += 1e-6
                    dm = np.array(pt, dtype=float); dm[d] -= 1e-6
                    fd = (basis.shape(dp) - basis.shape(dm)) / 2e-6
                    err = max(err, float(np.abs(fd - H[:, d]).max()))
        results.append((f"shape-gradient FD body={body.id}", err < 1e-4, err))
    return results


def run_scenario(scenario: Scenario, out_dir, frames=None, verify=False,
                 progress=None):
    """Execute the time loop, writing frames; returns process exit status."""
    sim = build_simulation(scenario)
    steps = int(scenario.data["steps"])
    if verify:
        checks = verify_simulation(sim)
        for name, ok, err in checks:
            line = f"[{'ok' if ok else 'FAIL'}] {name} (err {err:.3e})"
            if progress:
                progress(line)
        if not all(ok for _, ok, _ in checks):
            return 2
    snapshot_cadence = None
    if frames is not None and frames > 0:
        snapshot_cadence = max(1, math.ceil(steps / frames))
    writer = FrameWriter(out_dir, sim, scenario.data["output"],
                         snapshot_cadence=snapshot_cadence)
    try:
        for k in range(steps):
            info = sim.step()
            writer.write(info)
            if progress and (k + 1) % max(1, steps // 10) == 0:
                progress(f"step {k + 1}/{steps} t={info.t:.4f} "
                         f"|c|={info.c_norm:.2e} E={info.energy['mechanical']:.6e}")
    except SolverError as err:
        with open(Path(out_dir) / "diagnostics.txt", "w") as fh:
            fh.write(f"run failed at t={sim.t}\n{err}\n")
        writer.close()
        return 1
    writer.close()
    return 0
