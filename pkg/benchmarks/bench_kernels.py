"""Compare the compiled and pure-numpy kernel backends.

Runs the same element-kernel workload in two subprocesses, one with
TLFEM_BACKEND=numba (default) and one with TLFEM_BACKEND=numpy, and reports
wall times.  Usage: python benchmarks/bench_kernels.py [repeats]
"""

import json
import os
import subprocess
import sys

_WORKER = r"""
import json, os, sys, time
import numpy as np
import tlfem.kernels as K
from tlfem.assembly import System, make_beam_body, make_shell_body, make_single_tet10_body
from tlfem.materials import Material, SvkParams, MooneyRivlinParams, KelvinVoigtParams

repeats = int(sys.argv[1])
svk = Material(SvkParams(2.0e6, 8.0e5), KelvinVoigtParams(50.0, 20.0))
mr = Material(MooneyRivlinParams(2.0e5, 5.0e4, 1.0e6))
bodies = [
    make_beam_body("beam", svk, 1200.0, 0.5, 0.02, 0.02, n_elements=8),
    make_shell_body("shell", svk, 1100.0, (0.3, 0.3), 0.01, (4, 4), origin=(1, 0, 0)),
    make_single_tet10_body("tet", mr, 950.0, [(3,0,0),(3.1,0,0),(3,0.1,0),(3,0,0.1)]),
]
system = System(bodies)
rng = np.random.default_rng(7)
q = system.reference_state() + 1e-3 * rng.standard_normal(system.n_dof)
v = 0.1 * rng.standard_normal(system.n_dof)

# warm up (includes jit compilation when enabled)
system.internal_force(q, v)
system.tangent_matrices(q)

t0 = time.perf_counter()
for _ in range(repeats):
    system.internal_force(q, v)
t_force = (time.perf_counter() - t0) / repeats

t0 = time.perf_counter()
for _ in range(repeats):
    system.tangent_matrices(q)
t_tangent = (time.perf_counter() - t0) / repeats

print(json.dumps({"backend": K.BACKEND, "force_ms": 1e3 * t_force,
                  "tangent_ms": 1e3 * t_tangent}))
"""


def run(backend, repeats):
    env = dict(os.environ, TLFEM_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", _WORKER, str(repeats)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 50
    results = [run(b, repeats) for b in ("numpy", "numba")]
    print(f"{'backend':<8} {'force/call':>12} {'tangent/call':>14}")
    for r in results:
        print(f"{r['backend']:<8} {r['force_ms']:>10.3f}ms {r['tangent_ms']:>12.3f}ms")
    ref, jit = results
    print(f"speedup: force x{ref['force_ms'] / jit['force_ms']:.1f}, "
          f"tangent x{ref['tangent_ms'] / jit['tangent_ms']:.1f}")


if __name__ == "__main__":
    main()
