"""Total-Lagrangian finite elements for deformable multibody dynamics.

Beams and shells with slope coordinates, quadratic tetrahedra, SVK and
Mooney-Rivlin materials with optional Kelvin-Voigt viscosity, augmented
Lagrangian joints, penalty contact, and a backward-Euler velocity solver.

Set ``TLFEM_BACKEND=numpy`` to disable the compiled kernels.
"""

from .assembly import (
    Body,
    System,
    make_beam_body,
    make_shell_body,
    make_single_tet10_body,
    make_tet10_body,
)
from .errors import (
    ConstructionError,
    DomainError,
    InvertedElementError,
    ScenarioError,
    SolverError,
    StepRejected,
    TlfemError,
)
from .materials import (
    KelvinVoigtParams,
    Material,
    MooneyRivlinParams,
    SvkParams,
    lame_from_young_poisson,
)
from .solver import Simulation, SolverConfig
from .scenario import (
    Scenario,
    apply_overrides,
    build_simulation,
    load_scenario,
    run_scenario,
    scenario_from_dict,
    serialize,
)

__version__ = "0.1.0"

__all__ = [
    "Body", "System", "make_beam_body", "make_shell_body", "make_tet10_body",
    "make_single_tet10_body",
    "Material", "SvkParams", "MooneyRivlinParams", "KelvinVoigtParams",
    "lame_from_young_poisson",
    "Simulation", "SolverConfig",
    "Scenario", "load_scenario", "scenario_from_dict", "serialize",
    "apply_overrides", "build_simulation", "run_scenario",
    "TlfemError", "ConstructionError", "DomainError", "InvertedElementError",
    "ScenarioError", "SolverError", "StepRejected",
]
